//! Frame sampling policies: uniform centers, stratified random, and
//! duration-driven frame counts.

use videoprep::sampler::{
    dynamic_frame_count, stratified_timestamps, uniform_timestamps, StageConfig, StageName,
};

fn main() {
    // Uniform center-of-bin sampling: n = 1 lands on the midpoint.
    println!("uniform(10 s, 1)  = {:?}", uniform_timestamps(10.0, 1));
    println!("uniform(8 s, 4)   = {:?}", uniform_timestamps(8.0, 4));

    // Stratified sampling draws one random timestamp per equal segment,
    // deterministically under a seed.
    let ts = stratified_timestamps(50.0, 5, 99);
    println!("stratified(50 s, 5 segments, seed 99) = {ts:?}");
    assert_eq!(ts, stratified_timestamps(50.0, 5, 99));

    // Frame counts follow duration at about one frame per second, clamped
    // to each stage's range.
    let instruct = StageConfig::builtin(StageName::Instruct);
    let long_video = StageConfig::builtin(StageName::LongVideo);
    for duration in [3.0, 16.0, 40.0, 64.0, 500.0] {
        println!(
            "duration {duration:>5.0} s -> {:>3} frames (instruct), {:>3} frames (long_video)",
            dynamic_frame_count(duration, &instruct),
            dynamic_frame_count(duration, &long_video),
        );
    }
}

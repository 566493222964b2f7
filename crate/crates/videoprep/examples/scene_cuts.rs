//! Content-change cut detection and clip segmentation.

use videoprep::motion::{detect_scene_cuts, segment_clips, GrayFrame};

fn main() {
    // Twenty frames at 1 fps: a dark scene, a bright scene, a dark scene.
    let mut frames = Vec::new();
    for i in 0..20 {
        let level = if (7..14).contains(&i) { 0.9 } else { 0.1 };
        frames.push(GrayFrame::constant(32, 32, level));
    }
    let timestamps: Vec<f64> = (0..20).map(|i| i as f64).collect();

    let cuts = detect_scene_cuts(&frames, &timestamps, 0.30).unwrap();
    println!("cuts detected at {cuts:?} (midpoints of the changing pairs)");

    // Segment a 20-second video at those cuts, keeping clips of 3..=8 s;
    // long spans are split evenly, short remainders are discarded.
    let clips = segment_clips(20.0, &cuts, 3.0, 8.0);
    for clip in &clips {
        println!("clip [{:>5.2}, {:>5.2}) len {:.2} s", clip.start_s, clip.end_s, clip.len_s());
    }

    // A 130-second uncut video against a 60-second maximum needs exactly
    // ceil(130 / 60) = 3 even pieces.
    let long = segment_clips(130.0, &[], 5.0, 60.0);
    println!(
        "130 s uncut -> {} clips of {:.2} s each",
        long.len(),
        long[0].len_s()
    );
}

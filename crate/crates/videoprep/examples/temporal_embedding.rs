//! Sinusoidal temporal position embeddings over float timestamps.

use videoprep::sampler::{add_tpe, tpe, FeatureGrid, TpeParams};

fn main() {
    let params = TpeParams::with_dim(8).unwrap();

    // The embedding of t = 0 alternates sin(0), cos(0).
    println!("tpe(0)    = {:?}", tpe(0.0, &params));
    let v = tpe(1.0, &params);
    println!(
        "tpe(1)    = [{}]",
        v.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>().join(", ")
    );
    // Timestamps are real seconds, not frame indices, so spacing matters.
    println!("tpe(2.5)[0] = sin(2.5) = {:.5}", tpe(2.5, &params)[0]);

    // Adding embeddings to a feature grid shifts every spatial position of
    // frame k by tpe(t_k); subtracting them recovers the grid exactly.
    let grid = FeatureGrid::zeros(3, 2, 2, 8);
    let timestamps = [0.5, 2.0, 7.25];
    let augmented = add_tpe(&grid, &timestamps, &params).unwrap();
    for (frame, &t) in timestamps.iter().enumerate() {
        let first = augmented.get(frame, 0, 0, 0);
        println!("frame {frame} at t = {t:<4}: channel 0 holds sin(t) = {first:.5}");
    }
}

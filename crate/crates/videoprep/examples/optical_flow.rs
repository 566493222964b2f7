//! Dense flow on a synthetic translation, plus the static-scene decision.

use videoprep::motion::{
    downscale, horn_schunck, mean_flow_magnitude, static_scene_decision, GrayFrame,
};

fn wave(side: usize, shift: f64) -> GrayFrame {
    let k = 2.0 * std::f64::consts::PI / 8.0;
    GrayFrame::from_fn(side, side, |x, y| {
        0.5 + 0.25 * (k * (x as f64 - shift)).sin() + 0.25 * (k * y as f64).sin()
    })
}

fn main() {
    // A pattern translated one pixel to the right between two frames.
    let a = wave(64, 0.0);
    let b = wave(64, 1.0);
    let flow = horn_schunck(&a, &b, 1.0, 200).unwrap();
    let mean_u: f64 = flow.u.iter().sum::<f64>() / flow.u.len() as f64;
    let mean_v: f64 = flow.v.iter().sum::<f64>() / flow.v.len() as f64;
    println!("recovered translation: u = {mean_u:.3}, v = {mean_v:.3} (true motion 1.0, 0.0)");
    println!("mean magnitude: {:.3}", mean_flow_magnitude(&flow));

    // Big frames are downscaled before flow to keep the filter fast.
    let big = wave(512, 0.0);
    let small = downscale(&big, 128, 128);
    println!(
        "downscaled 512x512 -> 128x128, mean brightness {:.6} -> {:.6}",
        big.mean(),
        small.mean()
    );

    // The static-scene filter drops sequences whose mean flow magnitude
    // stays below the threshold.
    let still = vec![wave(64, 0.0); 5];
    let moving: Vec<GrayFrame> = (0..5).map(|i| wave(64, i as f64)).collect();
    for (label, frames) in [("static", still), ("moving", moving)] {
        let result = static_scene_decision(&frames, 0.05, 1.0, 100).unwrap();
        println!(
            "{label:>7}: score {:.4} vs threshold {:.2} -> {:?}",
            result.score, result.threshold_used, result.decision
        );
    }
}

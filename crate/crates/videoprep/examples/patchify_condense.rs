//! Depthwise strided condensation of the (time, height, width) token grid.

use videoprep::sampler::{patchify, uniform_kernel, FeatureGrid};

fn main() {
    // 16 frames of a 32x32 grid with 4 channels: 16384 visual tokens.
    let (n, h, w, c) = (16, 32, 32, 4);
    let grid = FeatureGrid::from_values(
        n,
        h,
        w,
        c,
        (0..n * h * w * c).map(|i| (i % 97) as f64 / 97.0).collect(),
    )
    .unwrap();
    println!("input : {n} frames x {h}x{w}, {} tokens", n * h * w);

    // A 2x2x2 mean-pooling kernel divides the token count by 8, which is
    // what lets a 16-frame input cost the same context as 2 frames did.
    let stride = (2, 2, 2);
    let condensed = patchify(&grid, stride, &uniform_kernel(c, stride)).unwrap();
    println!(
        "output: {} frames x {}x{}, {} tokens ({}x fewer)",
        condensed.n_frames,
        condensed.h,
        condensed.w,
        condensed.n_frames * condensed.h * condensed.w,
        (n * h * w) / (condensed.n_frames * condensed.h * condensed.w),
    );

    // Stride (1,1,1) with unit weights is the identity.
    let identity = patchify(&grid, (1, 1, 1), &vec![1.0; c]).unwrap();
    assert_eq!(identity, grid);
    println!("identity stride leaves the grid untouched");

    // Mean pooling preserves the global mean exactly.
    let mean_in: f64 = grid.values.iter().sum::<f64>() / grid.values.len() as f64;
    let mean_out: f64 = condensed.values.iter().sum::<f64>() / condensed.values.len() as f64;
    println!("mean preserved: {mean_in:.6} -> {mean_out:.6}");
}

//! Frame sampling, temporal position embedding, token condensation, and
//! per-stage token budgeting.
//!
//! Each training stage fixes a frame resolution, a per-frame visual token
//! count, an LLM context budget, a frame-count range, and a patchify stride.
//! A frame's embedding encodes its actual float timestamp (not its index),
//! so the model sees real temporal spacing; the patchify step condenses the
//! (time, height, width) token grid by a depthwise strided 3-D convolution
//! so larger frame counts fit the same budget.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training stage identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    ImagePt,
    VideoPt,
    Refine,
    Instruct,
    LongVideo,
}

impl StageName {
    pub const ALL: [StageName; 5] = [
        StageName::ImagePt,
        StageName::VideoPt,
        StageName::Refine,
        StageName::Instruct,
        StageName::LongVideo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StageName::ImagePt => "image_pt",
            StageName::VideoPt => "video_pt",
            StageName::Refine => "refine",
            StageName::Instruct => "instruct",
            StageName::LongVideo => "long_video",
        }
    }

    pub fn parse(name: &str) -> Result<StageName> {
        StageName::ALL
            .iter()
            .copied()
            .find(|s| s.as_str() == name)
            .ok_or_else(|| Error::Config(format!("unknown stage {name:?}")))
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One training stage's input geometry and context budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub name: StageName,
    /// Input resolution in pixels per side.
    pub resolution: u32,
    /// Visual tokens the encoder emits per frame, before condensation.
    pub vit_tokens_per_frame: u64,
    /// Maximum LLM context length for this stage.
    pub llm_budget_tokens: u64,
    pub min_frames: u64,
    pub max_frames: u64,
    /// Depthwise condensation stride over (time, height, width).
    pub patchify_stride: (u64, u64, u64),
    /// Special tokens interleaved before each frame block.
    pub separator_tokens_per_frame: u64,
}

impl StageConfig {
    /// Built-in configuration for each curriculum stage.
    pub fn builtin(name: StageName) -> StageConfig {
        match name {
            StageName::ImagePt => StageConfig {
                name,
                resolution: 224,
                vit_tokens_per_frame: 256,
                llm_budget_tokens: 512,
                min_frames: 1,
                max_frames: 1,
                patchify_stride: (1, 1, 1),
                separator_tokens_per_frame: 1,
            },
            StageName::VideoPt => StageConfig {
                name,
                resolution: 224,
                vit_tokens_per_frame: 256,
                llm_budget_tokens: 2560,
                min_frames: 8,
                max_frames: 8,
                patchify_stride: (1, 1, 1),
                separator_tokens_per_frame: 1,
            },
            StageName::Refine => StageConfig {
                name,
                resolution: 448,
                vit_tokens_per_frame: 1024,
                llm_budget_tokens: 2560,
                min_frames: 16,
                max_frames: 16,
                patchify_stride: (2, 2, 2),
                separator_tokens_per_frame: 1,
            },
            StageName::Instruct => StageConfig {
                name,
                resolution: 448,
                vit_tokens_per_frame: 1024,
                llm_budget_tokens: 10_000,
                min_frames: 16,
                max_frames: 64,
                patchify_stride: (2, 2, 2),
                separator_tokens_per_frame: 1,
            },
            StageName::LongVideo => StageConfig {
                name,
                resolution: 448,
                vit_tokens_per_frame: 1024,
                llm_budget_tokens: 22_000,
                min_frames: 16,
                max_frames: 160,
                patchify_stride: (2, 2, 2),
                separator_tokens_per_frame: 1,
            },
        }
    }

    pub fn stride_product(&self) -> u64 {
        self.patchify_stride.0 * self.patchify_stride.1 * self.patchify_stride.2
    }

    /// Visual tokens one frame contributes after condensation.
    pub fn condensed_tokens_per_frame(&self) -> u64 {
        self.vit_tokens_per_frame / self.stride_product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_frames > self.max_frames {
            return Err(Error::Config(format!(
                "stage {}: min_frames {} > max_frames {}",
                self.name, self.min_frames, self.max_frames
            )));
        }
        let prod = self.stride_product();
        if prod == 0 {
            return Err(Error::Config(format!(
                "stage {}: zero patchify stride",
                self.name
            )));
        }
        if !self.vit_tokens_per_frame.is_multiple_of(prod) {
            return Err(Error::Config(format!(
                "stage {}: {} tokens per frame not divisible by stride product {prod}",
                self.name, self.vit_tokens_per_frame
            )));
        }
        if self.llm_budget_tokens < self.condensed_tokens_per_frame() {
            return Err(Error::Config(format!(
                "stage {}: budget below one condensed frame",
                self.name
            )));
        }
        Ok(())
    }
}

/// Center-of-bin uniform sampling: `n` timestamps strictly inside
/// `(0, duration_s)`, spaced `duration_s / n` apart.
pub fn uniform_timestamps(duration_s: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1 && duration_s > 0.0);
    let step = duration_s / n as f64;
    (0..n).map(|k| (k as f64 + 0.5) * step).collect()
}

/// One uniformly random timestamp from each of `k` equal segments, sorted;
/// deterministic under `seed`.
pub fn stratified_timestamps(duration_s: f64, k: usize, seed: u64) -> Vec<f64> {
    assert!(k >= 1 && duration_s > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seg = duration_s / k as f64;
    (0..k)
        .map(|i| (i as f64 + rng.random::<f64>()) * seg)
        .collect()
}

/// Frame count for a video: about one frame per second of duration, clamped
/// to the stage's range. Monotone non-decreasing in duration.
pub fn dynamic_frame_count(duration_s: f64, cfg: &StageConfig) -> u64 {
    assert!(duration_s > 0.0);
    (duration_s.ceil() as u64).clamp(cfg.min_frames, cfg.max_frames)
}

/// Sinusoidal embedding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeParams {
    /// Embedding dimension; must be even.
    pub d: usize,
    /// Frequency base; 10000 unless configured otherwise.
    pub theta: f64,
}

impl TpeParams {
    pub fn new(d: usize, theta: f64) -> Result<Self> {
        if d == 0 || !d.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be even and positive, got {d}"
            )));
        }
        if theta <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "theta must exceed 1, got {theta}"
            )));
        }
        Ok(TpeParams { d, theta })
    }

    pub fn with_dim(d: usize) -> Result<Self> {
        TpeParams::new(d, 10_000.0)
    }
}

/// Temporal position embedding of a float timestamp.
///
/// Entry `k` is `sin(t / theta^(k/d))` for even `k` and `cos(t / theta^(k/d))`
/// for odd `k`, over the exponent sequence 0, 1, ..., d-1.
pub fn tpe(t: f64, p: &TpeParams) -> Vec<f64> {
    let d = p.d as f64;
    (0..p.d)
        .map(|k| {
            let angle = t / p.theta.powf(k as f64 / d);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// A dense (frames, height, width, channels) feature grid, frame-major then
/// row-major then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub n_frames: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub values: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(n_frames: usize, h: usize, w: usize, c: usize) -> Self {
        FeatureGrid {
            n_frames,
            h,
            w,
            c,
            values: vec![0.0; n_frames * h * w * c],
        }
    }

    pub fn from_values(
        n_frames: usize,
        h: usize,
        w: usize,
        c: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != n_frames * h * w * c {
            return Err(Error::Shape(format!(
                "expected {} values for {n_frames}x{h}x{w}x{c}, got {}",
                n_frames * h * w * c,
                values.len()
            )));
        }
        Ok(FeatureGrid {
            n_frames,
            h,
            w,
            c,
            values,
        })
    }

    #[inline]
    pub fn index(&self, f: usize, y: usize, x: usize, ch: usize) -> usize {
        ((f * self.h + y) * self.w + x) * self.c + ch
    }

    #[inline]
    pub fn get(&self, f: usize, y: usize, x: usize, ch: usize) -> f64 {
        self.values[self.index(f, y, x, ch)]
    }

    /// Writes the grid as a small binary fixture: four little-endian u64
    /// dims followed by the values as little-endian f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for dim in [self.n_frames, self.h, self.w, self.c] {
            w.write_all(&(dim as u64).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let mut buf8 = [0u8; 8];
        let mut dims = [0usize; 4];
        for dim in &mut dims {
            r.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
            *dim = u64::from_le_bytes(buf8) as usize;
        }
        let count = dims.iter().product();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
            values.push(f64::from_le_bytes(buf8));
        }
        FeatureGrid::from_values(dims[0], dims[1], dims[2], dims[3], values)
    }
}

/// Adds `tpe(timestamps[f])` to every spatial position of frame `f`.
pub fn add_tpe(grid: &FeatureGrid, timestamps: &[f64], p: &TpeParams) -> Result<FeatureGrid> {
    if p.d != grid.c {
        return Err(Error::Shape(format!(
            "embedding dimension {} does not match {} channels",
            p.d, grid.c
        )));
    }
    if timestamps.len() != grid.n_frames {
        return Err(Error::Shape(format!(
            "{} timestamps for {} frames",
            timestamps.len(),
            grid.n_frames
        )));
    }
    let mut out = grid.clone();
    for (f, &t) in timestamps.iter().enumerate() {
        let embedding = tpe(t, p);
        for y in 0..grid.h {
            for x in 0..grid.w {
                let base = grid.index(f, y, x, 0);
                for (ch, &e) in embedding.iter().enumerate() {
                    out.values[base + ch] += e;
                }
            }
        }
    }
    Ok(out)
}

/// Depthwise strided 3-D convolution with kernel size equal to stride
/// (non-overlapping windows, no padding).
///
/// `kernel_weights` holds one (t, h, w) kernel per channel, channel-major.
/// Output dims are the input dims divided by the stride; the token count
/// drops by the stride product.
pub fn patchify(
    grid: &FeatureGrid,
    stride: (usize, usize, usize),
    kernel_weights: &[f64],
) -> Result<FeatureGrid> {
    let (st, sh, sw) = stride;
    if st == 0 || sh == 0 || sw == 0 {
        return Err(Error::InvalidArgument("zero stride".into()));
    }
    if !grid.n_frames.is_multiple_of(st) || !grid.h.is_multiple_of(sh) || !grid.w.is_multiple_of(sw) {
        return Err(Error::Shape(format!(
            "grid {}x{}x{} not divisible by stride {st}x{sh}x{sw}",
            grid.n_frames, grid.h, grid.w
        )));
    }
    let window = st * sh * sw;
    if kernel_weights.len() != grid.c * window {
        return Err(Error::Shape(format!(
            "expected {} kernel weights ({} per channel), got {}",
            grid.c * window,
            window,
            kernel_weights.len()
        )));
    }
    let (of, oh, ow) = (grid.n_frames / st, grid.h / sh, grid.w / sw);
    let mut out = FeatureGrid::zeros(of, oh, ow, grid.c);
    for f in 0..of {
        for y in 0..oh {
            for x in 0..ow {
                for ch in 0..grid.c {
                    let kernel = &kernel_weights[ch * window..(ch + 1) * window];
                    let mut acc = 0.0;
                    for dt in 0..st {
                        for dy in 0..sh {
                            for dx in 0..sw {
                                let k = (dt * sh + dy) * sw + dx;
                                acc += kernel[k]
                                    * grid.get(f * st + dt, y * sh + dy, x * sw + dx, ch);
                            }
                        }
                    }
                    let idx = out.index(f, y, x, ch);
                    out.values[idx] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Identity kernel for `stride (1,1,1)`; mean-pooling kernel otherwise.
pub fn uniform_kernel(c: usize, stride: (usize, usize, usize)) -> Vec<f64> {
    let window = stride.0 * stride.1 * stride.2;
    vec![1.0 / window as f64; c * window]
}

/// Where each frame's tokens and separators land in the concatenated
/// sequence: a separator block, then the frame block, repeated per frame in
/// timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayoutDescriptor {
    pub total_len: u64,
    /// Half-open token span of each frame block.
    pub frame_spans: Vec<(u64, u64)>,
    pub separator_positions: Vec<u64>,
}

/// Computes the interleaved layout for `n_frames` frames of
/// `tokens_per_frame` tokens each with `separators_per_frame` separators
/// before every frame block.
pub fn concat_layout(
    n_frames: u64,
    tokens_per_frame: u64,
    separators_per_frame: u64,
) -> LayoutDescriptor {
    let mut frame_spans = Vec::with_capacity(n_frames as usize);
    let mut separator_positions = Vec::new();
    let mut cursor = 0u64;
    for _ in 0..n_frames {
        for _ in 0..separators_per_frame {
            separator_positions.push(cursor);
            cursor += 1;
        }
        frame_spans.push((cursor, cursor + tokens_per_frame));
        cursor += tokens_per_frame;
    }
    LayoutDescriptor {
        total_len: cursor,
        frame_spans,
        separator_positions,
    }
}

/// Argsort of timestamps: the order frame blocks must take in the sequence.
pub fn frame_order(timestamps: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..timestamps.len()).collect();
    order.sort_by(|&a, &b| timestamps[a].partial_cmp(&timestamps[b]).unwrap());
    order
}

/// Exact token accounting for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAccount {
    pub visual_tokens: u64,
    pub separator_tokens: u64,
    pub text_tokens: u64,
    pub total: u64,
}

/// Why a sample cannot fit its stage budget.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BudgetRejection {
    #[error("visual tokens alone ({visual_tokens}) exceed the {budget}-token budget")]
    VisualOverBudget { visual_tokens: u64, budget: u64 },
    #[error("total {total} tokens exceed the {budget}-token budget")]
    TotalOverBudget { total: u64, budget: u64 },
}

/// Admits a sample when its exact token total fits the stage budget.
pub fn token_budget(
    cfg: &StageConfig,
    n_frames: u64,
    text_tokens: u64,
) -> std::result::Result<TokenAccount, BudgetRejection> {
    debug_assert!(n_frames <= cfg.max_frames);
    let visual_tokens = n_frames * cfg.condensed_tokens_per_frame();
    let budget = cfg.llm_budget_tokens;
    if visual_tokens > budget {
        return Err(BudgetRejection::VisualOverBudget {
            visual_tokens,
            budget,
        });
    }
    let separator_tokens = n_frames * cfg.separator_tokens_per_frame;
    let total = visual_tokens + separator_tokens + text_tokens;
    if total > budget {
        return Err(BudgetRejection::TotalOverBudget { total, budget });
    }
    Ok(TokenAccount {
        visual_tokens,
        separator_tokens,
        text_tokens,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_stages_validate() {
        for name in StageName::ALL {
            StageConfig::builtin(name).validate().unwrap();
        }
    }

    #[test]
    fn single_uniform_timestamp_is_midpoint() {
        assert_eq!(uniform_timestamps(10.0, 1), vec![5.0]);
    }

    #[test]
    fn uniform_timestamps_center_of_bin() {
        assert_eq!(uniform_timestamps(8.0, 4), vec![1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn uniform_spacing_constant_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let duration = rng.random_range(0.5..4000.0);
            let n = rng.random_range(1..200);
            let ts = uniform_timestamps(duration, n);
            let step = duration / n as f64;
            for pair in ts.windows(2) {
                assert!((pair[1] - pair[0] - step).abs() < 1e-9);
            }
            assert!(ts[0] > 0.0 && *ts.last().unwrap() < duration);
        }
    }

    #[test]
    fn stratified_one_per_segment() {
        for seed in 0..50 {
            let ts = stratified_timestamps(50.0, 5, seed);
            assert_eq!(ts.len(), 5);
            for (i, &t) in ts.iter().enumerate() {
                let lo = 10.0 * i as f64;
                assert!(
                    (lo..lo + 10.0).contains(&t),
                    "timestamp {t} outside segment {i}"
                );
            }
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn stratified_k1_and_determinism() {
        let a = stratified_timestamps(30.0, 1, 9);
        assert_eq!(a.len(), 1);
        assert!(a[0] >= 0.0 && a[0] < 30.0);
        assert_eq!(a, stratified_timestamps(30.0, 1, 9));
        assert_eq!(
            stratified_timestamps(50.0, 5, 4),
            stratified_timestamps(50.0, 5, 4)
        );
    }

    #[test]
    fn frame_count_clamps_and_tracks_duration() {
        let instruct = StageConfig::builtin(StageName::Instruct);
        assert_eq!(dynamic_frame_count(5.0, &instruct), 16);
        assert_eq!(dynamic_frame_count(40.0, &instruct), 40);
        let long = StageConfig::builtin(StageName::LongVideo);
        assert_eq!(dynamic_frame_count(500.0, &long), 160);
    }

    #[test]
    fn frame_count_monotone_in_duration() {
        let cfg = StageConfig::builtin(StageName::Instruct);
        let mut prev = 0;
        for tenth in 1..3000 {
            let n = dynamic_frame_count(tenth as f64 / 10.0, &cfg);
            assert!(n >= prev);
            assert!((cfg.min_frames..=cfg.max_frames).contains(&n));
            prev = n;
        }
    }

    #[test]
    fn tpe_params_reject_bad_dimensions() {
        assert!(TpeParams::with_dim(0).is_err());
        assert!(TpeParams::with_dim(3).is_err());
        assert!(TpeParams::new(4, 1.0).is_err());
        assert!(TpeParams::new(4, 10_000.0).is_ok());
    }

    #[test]
    fn tpe_at_zero_alternates_zero_one() {
        let p = TpeParams::with_dim(8).unwrap();
        let v = tpe(0.0, &p);
        assert_eq!(v, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn tpe_matches_direct_evaluation() {
        let p = TpeParams::with_dim(4).unwrap();
        let v = tpe(1.0, &p);
        let expected = [
            1.0f64.sin(),
            (1.0f64 / 10.0).cos(),
            (1.0f64 / 100.0).sin(),
            (1.0f64 / 1000.0).cos(),
        ];
        for (got, want) in v.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // Rounded to 5 decimal places per the closed form.
        assert!((v[0] - 0.84147).abs() < 5e-6);
        assert!((v[1] - 0.99500).abs() < 5e-6);
        assert!((v[2] - 0.01000).abs() < 5e-6);
        assert!((v[3] - 1.00000).abs() < 5e-6);
    }

    #[test]
    fn tpe_entries_bounded_and_pure() {
        let p = TpeParams::with_dim(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t = rng.random_range(-1.0e6..1.0e6);
            let v = tpe(t, &p);
            assert_eq!(v.len(), p.d);
            assert!(v.iter().all(|e| e.abs() <= 1.0));
            assert_eq!(v, tpe(t, &p));
            assert_eq!(v[0], t.sin());
        }
    }

    #[test]
    fn add_tpe_on_zero_grid_writes_embedding_everywhere() {
        let p = TpeParams::with_dim(4).unwrap();
        let grid = FeatureGrid::zeros(2, 2, 3, 4);
        let timestamps = [0.5, 2.5];
        let out = add_tpe(&grid, &timestamps, &p).unwrap();
        for (f, &t) in timestamps.iter().enumerate() {
            let embedding = tpe(t, &p);
            for y in 0..2 {
                for x in 0..3 {
                    for (ch, &e) in embedding.iter().enumerate() {
                        assert_eq!(out.get(f, y, x, ch), e);
                    }
                }
            }
        }
    }

    #[test]
    fn add_tpe_at_zero_adds_zero_one_pattern() {
        let p = TpeParams::with_dim(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = FeatureGrid::from_values(
            1,
            2,
            2,
            2,
            (0..8).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap();
        let out = add_tpe(&grid, &[0.0], &p).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(out.get(0, y, x, 0), grid.get(0, y, x, 0));
                assert_eq!(out.get(0, y, x, 1), grid.get(0, y, x, 1) + 1.0);
            }
        }
    }

    #[test]
    fn add_tpe_difference_spatially_constant_and_invertible() {
        let p = TpeParams::with_dim(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (n, h, w) = (
                rng.random_range(1..4),
                rng.random_range(1..5),
                rng.random_range(1..5),
            );
            let grid = FeatureGrid::from_values(
                n,
                h,
                w,
                6,
                (0..n * h * w * 6).map(|_| rng.random_range(-3.0..3.0)).collect(),
            )
            .unwrap();
            let timestamps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..600.0)).collect();
            let out = add_tpe(&grid, &timestamps, &p).unwrap();
            for f in 0..n {
                let reference: Vec<f64> = (0..6)
                    .map(|ch| out.get(f, 0, 0, ch) - grid.get(f, 0, 0, ch))
                    .collect();
                for y in 0..h {
                    for x in 0..w {
                        for (ch, &expected) in reference.iter().enumerate() {
                            let diff = out.get(f, y, x, ch) - grid.get(f, y, x, ch);
                            assert!((diff - expected).abs() < 1e-12);
                        }
                    }
                }
            }
            // Subtracting the same embedding reconstructs the grid.
            let mut recovered = out.clone();
            for (f, &t) in timestamps.iter().enumerate() {
                let e = tpe(t, &p);
                for y in 0..h {
                    for x in 0..w {
                        let base = recovered.index(f, y, x, 0);
                        for (ch, &value) in e.iter().enumerate() {
                            recovered.values[base + ch] -= value;
                        }
                    }
                }
            }
            for (a, b) in recovered.values.iter().zip(grid.values.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn add_tpe_dimension_mismatch_is_an_error() {
        let p = TpeParams::with_dim(4).unwrap();
        let grid = FeatureGrid::zeros(2, 2, 2, 6);
        assert!(add_tpe(&grid, &[0.0, 1.0], &p).is_err());
        let grid = FeatureGrid::zeros(2, 2, 2, 4);
        assert!(add_tpe(&grid, &[0.0], &p).is_err());
    }

    /// Independent brute-force depthwise convolution used as the oracle.
    pub(crate) fn patchify_oracle(
        grid: &FeatureGrid,
        stride: (usize, usize, usize),
        kernel_weights: &[f64],
    ) -> FeatureGrid {
        let (st, sh, sw) = stride;
        let window = st * sh * sw;
        let (of, oh, ow) = (grid.n_frames / st, grid.h / sh, grid.w / sw);
        let mut out = FeatureGrid::zeros(of, oh, ow, grid.c);
        for ch in 0..grid.c {
            for f_in in 0..grid.n_frames {
                for y_in in 0..grid.h {
                    for x_in in 0..grid.w {
                        let (f, dt) = (f_in / st, f_in % st);
                        let (y, dy) = (y_in / sh, y_in % sh);
                        let (x, dx) = (x_in / sw, x_in % sw);
                        let k = (dt * sh + dy) * sw + dx;
                        let idx = out.index(f, y, x, ch);
                        out.values[idx] +=
                            kernel_weights[ch * window + k] * grid.get(f_in, y_in, x_in, ch);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_stride_with_unit_weight_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let grid = FeatureGrid::from_values(
            2,
            3,
            3,
            2,
            (0..36).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap();
        let out = patchify(&grid, (1, 1, 1), &[1.0, 1.0]).unwrap();
        assert_eq!(out, grid);
    }

    #[test]
    fn uniform_kernel_preserves_constant_grids() {
        let grid = FeatureGrid::from_values(4, 4, 4, 2, vec![0.75; 4 * 4 * 4 * 2]).unwrap();
        let kernel = uniform_kernel(2, (2, 2, 2));
        let out = patchify(&grid, (2, 2, 2), &kernel).unwrap();
        assert_eq!(out.n_frames, 2);
        assert_eq!(out.h, 2);
        assert_eq!(out.w, 2);
        assert!(out.values.iter().all(|&v| (v - 0.75).abs() < 1e-12));
    }

    #[test]
    fn random_grid_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let grid = FeatureGrid::from_values(
            4,
            4,
            4,
            2,
            (0..4 * 4 * 4 * 2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let kernel: Vec<f64> = (0..2 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = patchify(&grid, (2, 2, 2), &kernel).unwrap();
        let slow = patchify_oracle(&grid, (2, 2, 2), &kernel);
        for (a, b) in fast.values.iter().zip(slow.values.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_divisible_dims_error_without_padding() {
        let grid = FeatureGrid::zeros(3, 4, 4, 1);
        assert!(patchify(&grid, (2, 2, 2), &uniform_kernel(1, (2, 2, 2))).is_err());
    }

    #[test]
    fn grid_binary_fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let grid = FeatureGrid::from_values(
            2,
            3,
            4,
            5,
            (0..120).map(|_| rng.random_range(-10.0..10.0)).collect(),
        )
        .unwrap();
        grid.write_binary(&path).unwrap();
        assert_eq!(FeatureGrid::read_binary(&path).unwrap(), grid);
    }

    #[test]
    fn single_frame_layout_without_separators() {
        let layout = concat_layout(1, 4, 0);
        assert_eq!(layout.total_len, 4);
        assert_eq!(layout.frame_spans, vec![(0, 4)]);
        assert!(layout.separator_positions.is_empty());
    }

    #[test]
    fn separators_interleaved_before_each_frame() {
        let layout = concat_layout(3, 2, 1);
        assert_eq!(layout.total_len, 9);
        assert_eq!(layout.separator_positions, vec![0, 3, 6]);
        assert_eq!(layout.frame_spans, vec![(1, 3), (4, 6), (7, 9)]);
    }

    #[test]
    fn layout_length_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let n = rng.random_range(1..50);
            let t = rng.random_range(0..300);
            let s = rng.random_range(0..4);
            let layout = concat_layout(n, t, s);
            assert_eq!(layout.total_len, n * t + n * s);
            assert_eq!(layout.frame_spans.len(), n as usize);
            assert_eq!(layout.separator_positions.len(), (n * s) as usize);
        }
    }

    #[test]
    fn frame_order_sorts_any_arrival_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let mut timestamps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
            timestamps.dedup_by(|a, b| a == b);
            let order = frame_order(&timestamps);
            let sorted: Vec<f64> = order.iter().map(|&i| timestamps[i]).collect();
            assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn instruct_budget_admits_maximal_sample() {
        let cfg = StageConfig::builtin(StageName::Instruct);
        let account = token_budget(&cfg, 64, 1744).unwrap();
        assert_eq!(account.visual_tokens, 8192); // 64 * 1024 / 8
        assert_eq!(account.separator_tokens, 64);
        assert_eq!(account.total, 10_000);
        assert!(token_budget(&cfg, 64, 1745).is_err());
    }

    #[test]
    fn long_video_budget_admits_160_frames() {
        let cfg = StageConfig::builtin(StageName::LongVideo);
        let account = token_budget(&cfg, 160, 1000).unwrap();
        assert_eq!(account.visual_tokens, 20_480); // 160 * 1024 / 8
        assert!(account.total <= 22_000);
        // 22000 - 20480 - 160 separators = 1360 text tokens at most.
        assert!(token_budget(&cfg, 160, 1360).is_ok());
        assert!(token_budget(&cfg, 160, 1361).is_err());
    }

    #[test]
    fn video_pt_budget_admits_8_frames() {
        let cfg = StageConfig::builtin(StageName::VideoPt);
        let account = token_budget(&cfg, 8, 0).unwrap();
        assert_eq!(account.visual_tokens, 2048); // 8 * 256
        assert!(account.total <= 2560);
    }

    #[test]
    fn visual_overflow_names_the_term() {
        let mut cfg = StageConfig::builtin(StageName::Instruct);
        cfg.llm_budget_tokens = 4096;
        match token_budget(&cfg, 64, 0) {
            Err(BudgetRejection::VisualOverBudget { visual_tokens, .. }) => {
                assert_eq!(visual_tokens, 8192)
            }
            other => panic!("expected visual overflow, got {other:?}"),
        }
    }

    #[test]
    fn budget_totals_are_exact_integers() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let cfg = StageConfig::builtin(StageName::Instruct);
        for _ in 0..1000 {
            let n = rng.random_range(cfg.min_frames..=cfg.max_frames);
            let text = rng.random_range(0..4000);
            if let Ok(account) = token_budget(&cfg, n, text) {
                assert_eq!(
                    account.total,
                    account.visual_tokens + account.separator_tokens + account.text_tokens
                );
                assert!(account.total <= cfg.llm_budget_tokens);
            }
        }
    }
}

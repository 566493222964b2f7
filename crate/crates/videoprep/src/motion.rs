//! Dense optical flow and motion-based filtering.
//!
//! Frames enter as pre-decoded 8-bit grayscale PGM files (one directory per
//! video, filenames carrying the timestamp in milliseconds) and are
//! area-averaged down to a small working resolution before flow is computed.
//! The flow kernel is the classic iterative scheme with a smoothness weight:
//! central spatial differences, forward temporal difference, 4-neighbor
//! average, zero-flow initialization.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A grayscale frame with row-major pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape("frame dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayFrame {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        GrayFrame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel center.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayFrame {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

/// Dense per-pixel displacement between two frames, in pixels per step.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// A clip cut out of a longer video, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl ClipSpan {
    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Area-averaged downscale; preserves mean brightness.
///
/// Handles non-integer scale factors by weighting source pixels with their
/// fractional overlap of each target cell, so it is exact for block averages
/// when the dimensions divide evenly.
pub fn downscale(frame: &GrayFrame, target_w: usize, target_h: usize) -> GrayFrame {
    assert!(target_w >= 1 && target_h >= 1);
    if target_w == frame.width && target_h == frame.height {
        return frame.clone();
    }
    let wx = axis_overlaps(frame.width, target_w);
    let wy = axis_overlaps(frame.height, target_h);
    let cell_area =
        (frame.width as f64 / target_w as f64) * (frame.height as f64 / target_h as f64);
    let mut pixels = Vec::with_capacity(target_w * target_h);
    for ys in &wy {
        for xs in &wx {
            let mut acc = 0.0;
            for &(sy, fy) in ys {
                let row = sy * frame.width;
                for &(sx, fx) in xs {
                    acc += frame.pixels[row + sx] * fy * fx;
                }
            }
            pixels.push(acc / cell_area);
        }
    }
    GrayFrame {
        width: target_w,
        height: target_h,
        pixels,
    }
}

/// Per-target-index list of (source index, overlap length) along one axis.
fn axis_overlaps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = hi.min((s + 1) as f64) - lo.max(s as f64);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

#[inline]
fn clamp_idx(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Iterative dense flow between two equally sized frames.
///
/// Solves the smoothness-regularized flow equations by simultaneous
/// (Jacobi-style) updates; deterministic for fixed inputs.
pub fn horn_schunck(
    a: &GrayFrame,
    b: &GrayFrame,
    alpha: f64,
    iterations: usize,
) -> Result<FlowField> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Shape(format!(
            "flow frames differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    let (w, h) = (a.width, a.height);
    let n = w * h;

    // Gradients on the temporal mean image, temporal difference b - a.
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    let avg = |x: usize, y: usize| (a.get(x, y) + b.get(x, y)) * 0.5;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xm = clamp_idx(x as isize - 1, w);
            let xp = clamp_idx(x as isize + 1, w);
            let ym = clamp_idx(y as isize - 1, h);
            let yp = clamp_idx(y as isize + 1, h);
            ix[i] = (avg(xp, y) - avg(xm, y)) * 0.5;
            iy[i] = (avg(x, yp) - avg(x, ym)) * 0.5;
            it[i] = b.get(x, y) - a.get(x, y);
        }
    }

    let alpha2 = alpha * alpha;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ubar = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    for _ in 0..iterations {
        neighbor_average(&u, w, h, &mut ubar);
        neighbor_average(&v, w, h, &mut vbar);
        for i in 0..n {
            let t = (ix[i] * ubar[i] + iy[i] * vbar[i] + it[i])
                / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
            u[i] = ubar[i] - ix[i] * t;
            v[i] = vbar[i] - iy[i] * t;
        }
    }
    Ok(FlowField {
        width: w,
        height: h,
        u,
        v,
    })
}

/// 4-neighbor average with replicated borders.
fn neighbor_average(src: &[f64], w: usize, h: usize, dst: &mut [f64]) {
    for y in 0..h {
        let ym = clamp_idx(y as isize - 1, h);
        let yp = clamp_idx(y as isize + 1, h);
        for x in 0..w {
            let xm = clamp_idx(x as isize - 1, w);
            let xp = clamp_idx(x as isize + 1, w);
            dst[y * w + x] = 0.25
                * (src[y * w + xm] + src[y * w + xp] + src[ym * w + x] + src[yp * w + x]);
        }
    }
}

/// Mean over pixels of the flow vector magnitude.
pub fn mean_flow_magnitude(f: &FlowField) -> f64 {
    let n = f.u.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = f
        .u
        .iter()
        .zip(f.v.iter())
        .map(|(&u, &v)| (u * u + v * v).sqrt())
        .sum();
    sum / n as f64
}

/// Why a motion result should be read with care.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MotionWarning {
    /// Fewer than two frames available; the record is unfilterable and kept.
    TooFewFrames { available: usize },
}

/// Per-pair flow magnitudes and the static-scene decision.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionResult {
    pub pair_magnitudes: Vec<f64>,
    pub score: f64,
    pub decision: crate::corpus::DecisionKind,
    pub threshold_used: f64,
    pub warnings: Vec<MotionWarning>,
}

/// Classifies a video as close-to-static from flow between consecutive
/// downscaled frames; dropped when the mean magnitude falls below `threshold`
/// (strict, so threshold 0 keeps everything).
pub fn static_scene_decision(
    frames: &[GrayFrame],
    threshold: f64,
    alpha: f64,
    iterations: usize,
) -> Result<MotionResult> {
    use crate::corpus::DecisionKind;
    if frames.len() < 2 {
        return Ok(MotionResult {
            pair_magnitudes: Vec::new(),
            score: 0.0,
            decision: DecisionKind::Kept,
            threshold_used: threshold,
            warnings: vec![MotionWarning::TooFewFrames {
                available: frames.len(),
            }],
        });
    }
    let mut pair_magnitudes = Vec::with_capacity(frames.len() - 1);
    for pair in frames.windows(2) {
        let flow = horn_schunck(&pair[0], &pair[1], alpha, iterations)?;
        pair_magnitudes.push(mean_flow_magnitude(&flow));
    }
    let score = pair_magnitudes.iter().sum::<f64>() / pair_magnitudes.len() as f64;
    let decision = if score < threshold {
        DecisionKind::Dropped
    } else {
        DecisionKind::Kept
    };
    Ok(MotionResult {
        pair_magnitudes,
        score,
        decision,
        threshold_used: threshold,
        warnings: Vec::new(),
    })
}

/// Content-change cut detector: a cut lies between adjacent frames whose mean
/// absolute pixel difference exceeds `cut_threshold`; returns midpoint
/// timestamps.
pub fn detect_scene_cuts(
    frames: &[GrayFrame],
    timestamps: &[f64],
    cut_threshold: f64,
) -> Result<Vec<f64>> {
    if frames.len() != timestamps.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} timestamps",
            frames.len(),
            timestamps.len()
        )));
    }
    if timestamps.windows(2).any(|t| t[1] <= t[0]) {
        return Err(Error::InvalidArgument(
            "timestamps must be strictly increasing".into(),
        ));
    }
    let mut cuts = Vec::new();
    for i in 1..frames.len() {
        let (prev, next) = (&frames[i - 1], &frames[i]);
        if prev.width != next.width || prev.height != next.height {
            return Err(Error::Shape("frame size changes mid-video".into()));
        }
        let diff: f64 = prev
            .pixels
            .iter()
            .zip(next.pixels.iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            / prev.pixels.len() as f64;
        if diff > cut_threshold {
            cuts.push((timestamps[i - 1] + timestamps[i]) * 0.5);
        }
    }
    Ok(cuts)
}

/// Splits `[0, duration_s]` at the cut timestamps, subdivides spans longer
/// than `max_len_s` into the fewest equal pieces, and discards spans shorter
/// than `min_len_s`.
pub fn segment_clips(
    duration_s: f64,
    cuts: &[f64],
    min_len_s: f64,
    max_len_s: f64,
) -> Vec<ClipSpan> {
    debug_assert!(min_len_s < max_len_s);
    debug_assert!(cuts.windows(2).all(|c| c[0] <= c[1]));
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0.0);
    bounds.extend(cuts.iter().copied().filter(|&c| c > 0.0 && c < duration_s));
    bounds.push(duration_s);

    let mut clips = Vec::new();
    for pair in bounds.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        let len = end - start;
        if len <= 0.0 {
            continue;
        }
        let pieces = if len > max_len_s {
            (len / max_len_s).ceil() as usize
        } else {
            1
        };
        let piece_len = len / pieces as f64;
        for k in 0..pieces {
            let s = start + piece_len * k as f64;
            let e = if k + 1 == pieces {
                end
            } else {
                start + piece_len * (k + 1) as f64
            };
            if e - s >= min_len_s {
                clips.push(ClipSpan { start_s: s, end_s: e });
            }
        }
    }
    clips
}

/// Parses a binary (P5) 8-bit PGM into a `[0, 1]` frame.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let bad = |msg: &str| Error::InvalidArgument(format!("pgm: {msg}"));
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and '#' comment lines between header fields.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(bytes)? != "P5" {
        return Err(bad("not a binary P5 file"));
    }
    let width: usize = token(bytes)?.parse().map_err(|_| bad("bad width"))?;
    let height: usize = token(bytes)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: u32 = token(bytes)?.parse().map_err(|_| bad("bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval supported"));
    }
    // Exactly one whitespace byte separates the header from raster data.
    pos += 1;
    let need = width * height;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| bad("truncated raster"))?;
    let scale = 1.0 / f64::from(maxval);
    let pixels = data.iter().map(|&b| f64::from(b) * scale).collect();
    GrayFrame::new(width, height, pixels)
}

pub fn load_pgm(path: &Path) -> Result<GrayFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Writes a frame as binary P5, quantizing to 8 bits.
pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(
        frame
            .pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Frame filename for a timestamp, milliseconds zero-padded so lexicographic
/// order matches temporal order.
pub fn frame_filename(timestamp_ms: u64) -> String {
    format!("{timestamp_ms:08}.pgm")
}

/// Lists the PGM frames of one video directory as (seconds, path), sorted by
/// timestamp parsed from the filename.
pub fn list_frames(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut frames = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let ms: u64 = stem.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "frame file {} has no millisecond timestamp stem",
                path.display()
            ))
        })?;
        frames.push((ms as f64 / 1000.0, path));
    }
    frames.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(frames)
}

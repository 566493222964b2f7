//! Geometric coverage filters.
//!
//! A video is dropped when the union of detected text (or face) boxes covers
//! too large a fraction of any sampled frame. The union area is computed
//! exactly with a coordinate-compressed sweep over x slabs, so the filter is
//! deterministic and testable against a rasterization oracle.

use crate::corpus::{DecisionKind, DetectionSidecar, Rect, VideoRecord};

/// Canonical number of frames sampled for the text filter.
pub const TEXT_FILTER_FRAMES: usize = 3;
/// Canonical number of frames sampled for the face filter.
pub const FACE_FILTER_FRAMES: usize = 5;

/// Exact union area of axis-aligned rectangles, in square pixels.
///
/// Insensitive to box order and duplicates; the empty set has area 0.
pub fn union_area(boxes: &[Rect]) -> f64 {
    if boxes.is_empty() {
        return 0.0;
    }
    // Compress x coordinates into slabs, then union y intervals per slab.
    let mut xs: Vec<f64> = Vec::with_capacity(boxes.len() * 2);
    for b in boxes {
        xs.push(b.x0);
        xs.push(b.x1);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let mut total = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(boxes.len());
    for slab in xs.windows(2) {
        let (xa, xb) = (slab[0], slab[1]);
        spans.clear();
        spans.extend(
            boxes
                .iter()
                .filter(|b| b.x0 <= xa && b.x1 >= xb)
                .map(|b| (b.y0, b.y1)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut covered = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(y0, y1) in &spans[1..] {
            if y0 > hi {
                covered += hi - lo;
                lo = y0;
                hi = y1;
            } else if y1 > hi {
                hi = y1;
            }
        }
        covered += hi - lo;
        total += covered * (xb - xa);
    }
    total
}

/// Why a coverage result should be read with care.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverageWarning {
    /// No sidecar file was found; the record is unfilterable and kept.
    MissingSidecar,
    /// Sidecar frame count differs from the canonical sample count.
    FrameCountMismatch { expected: usize, actual: usize },
}

/// Per-frame coverage ratios and the video-level decision.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub per_frame_ratio: Vec<f64>,
    pub max_ratio: f64,
    pub decision: DecisionKind,
    pub threshold_used: f64,
    pub warnings: Vec<CoverageWarning>,
}

impl CoverageResult {
    fn unfilterable(threshold: f64) -> Self {
        CoverageResult {
            per_frame_ratio: Vec::new(),
            max_ratio: 0.0,
            decision: DecisionKind::Kept,
            threshold_used: threshold,
            warnings: vec![CoverageWarning::MissingSidecar],
        }
    }
}

fn coverage(
    record: &VideoRecord,
    sidecar: Option<&DetectionSidecar>,
    threshold: f64,
    canonical_frames: usize,
    select: impl Fn(&crate::corpus::SidecarFrame) -> &[Rect],
) -> CoverageResult {
    let Some(sidecar) = sidecar else {
        return CoverageResult::unfilterable(threshold);
    };
    let (w, h) = (f64::from(record.width), f64::from(record.height));
    let frame_area = w * h;
    let mut warnings = Vec::new();
    if sidecar.frames.len() != canonical_frames {
        warnings.push(CoverageWarning::FrameCountMismatch {
            expected: canonical_frames,
            actual: sidecar.frames.len(),
        });
    }
    if sidecar.frames.is_empty() {
        // Nothing to measure; treat like a missing sidecar.
        warnings.push(CoverageWarning::MissingSidecar);
        return CoverageResult {
            per_frame_ratio: Vec::new(),
            max_ratio: 0.0,
            decision: DecisionKind::Kept,
            threshold_used: threshold,
            warnings,
        };
    }
    let per_frame_ratio: Vec<f64> = sidecar
        .frames
        .iter()
        .map(|frame| {
            // Out-of-frame detector noise must not inflate the ratio.
            let clipped: Vec<Rect> = select(frame).iter().filter_map(|b| b.clip(w, h)).collect();
            union_area(&clipped) / frame_area
        })
        .collect();
    let max_ratio = per_frame_ratio.iter().cloned().fold(0.0, f64::max);
    let decision = if max_ratio > threshold {
        DecisionKind::Dropped
    } else {
        DecisionKind::Kept
    };
    CoverageResult {
        per_frame_ratio,
        max_ratio,
        decision,
        threshold_used: threshold,
        warnings,
    }
}

/// Text-coverage filter: max over sampled frames of the union area of OCR
/// boxes divided by the frame area; dropped when it exceeds `threshold`.
pub fn text_coverage(
    record: &VideoRecord,
    sidecar: Option<&DetectionSidecar>,
    threshold: f64,
) -> CoverageResult {
    coverage(record, sidecar, threshold, TEXT_FILTER_FRAMES, |f| {
        &f.text_boxes
    })
}

/// Face-coverage filter over the face boxes, canonical five frames.
pub fn face_coverage(
    record: &VideoRecord,
    sidecar: Option<&DetectionSidecar>,
    threshold: f64,
) -> CoverageResult {
    coverage(record, sidecar, threshold, FACE_FILTER_FRAMES, |f| {
        &f.face_boxes
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Caption, Language, SidecarFrame};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn union_of_nothing_is_zero() {
        assert_eq!(union_area(&[]), 0.0);
    }

    #[test]
    fn single_box() {
        assert_eq!(union_area(&[rect(0.0, 0.0, 10.0, 10.0)]), 100.0);
    }

    #[test]
    fn overlapping_pair_matches_inclusion_exclusion() {
        // 100 + 100 - 25
        let boxes = [rect(0.0, 0.0, 10.0, 10.0), rect(5.0, 5.0, 15.0, 15.0)];
        assert_eq!(union_area(&boxes), 175.0);
    }

    #[test]
    fn duplicates_and_order_do_not_matter() {
        let a = [rect(0.0, 0.0, 10.0, 10.0), rect(5.0, 5.0, 15.0, 15.0)];
        let b = [
            rect(5.0, 5.0, 15.0, 15.0),
            rect(0.0, 0.0, 10.0, 10.0),
            rect(0.0, 0.0, 10.0, 10.0),
        ];
        assert_eq!(union_area(&a), union_area(&b));
    }

    /// Brute-force rasterization oracle for integer-coordinate boxes.
    ///
    /// Marks covered unit cells with a per-case generation stamp so the grid
    /// never needs clearing between cases.
    pub(crate) struct RasterOracle {
        side: usize,
        stamp: Vec<u32>,
        generation: u32,
    }

    impl RasterOracle {
        pub(crate) fn new(side: usize) -> Self {
            RasterOracle {
                side,
                stamp: vec![0; side * side],
                generation: 0,
            }
        }

        pub(crate) fn union_area(&mut self, boxes: &[Rect]) -> f64 {
            self.generation += 1;
            let mut covered = 0u64;
            for b in boxes {
                let (x0, y0, x1, y1) = (
                    b.x0 as usize,
                    b.y0 as usize,
                    b.x1 as usize,
                    b.y1 as usize,
                );
                for y in y0..y1 {
                    let row = y * self.side;
                    for cell in &mut self.stamp[row + x0..row + x1] {
                        if *cell != self.generation {
                            *cell = self.generation;
                            covered += 1;
                        }
                    }
                }
            }
            covered as f64
        }
    }

    pub(crate) fn random_integer_boxes(rng: &mut ChaCha8Rng, side: u32) -> Vec<Rect> {
        let n = rng.random_range(0..=10);
        (0..n)
            .map(|_| {
                // Mostly small boxes with the occasional jumbo one, so the
                // oracle stays fast while big overlaps are still exercised.
                let max_extent = if rng.random_bool(0.05) { side } else { 200.min(side) };
                let w = rng.random_range(1..=max_extent);
                let h = rng.random_range(1..=max_extent);
                let x0 = rng.random_range(0..=side - w);
                let y0 = rng.random_range(0..=side - h);
                rect(
                    f64::from(x0),
                    f64::from(y0),
                    f64::from(x0 + w),
                    f64::from(y0 + h),
                )
            })
            .collect()
    }

    #[test]
    fn sweep_matches_rasterization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut oracle = RasterOracle::new(1000);
        for _ in 0..2_000 {
            let boxes = random_integer_boxes(&mut rng, 1000);
            let expected = oracle.union_area(&boxes);
            assert_eq!(union_area(&boxes), expected, "boxes: {boxes:?}");
        }
    }

    #[test]
    fn union_is_monotone_under_box_insertion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let mut boxes = random_integer_boxes(&mut rng, 1000);
            let before = union_area(&boxes);
            boxes.push(random_integer_boxes(&mut rng, 1000).pop().unwrap_or_else(
                || rect(0.0, 0.0, 1.0, 1.0),
            ));
            assert!(union_area(&boxes) >= before);
        }
    }

    #[test]
    fn union_bounded_by_sum_with_equality_iff_disjoint() {
        let disjoint = [rect(0.0, 0.0, 5.0, 5.0), rect(6.0, 6.0, 10.0, 10.0)];
        let sum: f64 = disjoint.iter().map(Rect::area).sum();
        assert_eq!(union_area(&disjoint), sum);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let boxes = random_integer_boxes(&mut rng, 1000);
            let sum: f64 = boxes.iter().map(Rect::area).sum();
            let union = union_area(&boxes);
            assert!(union <= sum + 1e-9);
            let overlapping = boxes.iter().enumerate().any(|(i, a)| {
                boxes[i + 1..]
                    .iter()
                    .any(|b| a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1)
            });
            if !overlapping {
                assert_eq!(union, sum);
            } else {
                assert!(union < sum);
            }
        }
    }

    fn record_100x100(id: &str) -> VideoRecord {
        VideoRecord {
            id: id.to_string(),
            media_path: String::new(),
            duration_s: 30.0,
            fps: 25.0,
            width: 100,
            height: 100,
            category: "test".to_string(),
            language: Language::En,
            source: "unit".to_string(),
            captions: vec![Caption::new(Language::En, "a caption.")],
            filter_status: BTreeMap::new(),
        }
    }

    fn sidecar_with_unions(id: &str, areas: &[f64]) -> DetectionSidecar {
        // One 100-px-tall box per frame whose area equals the requested union.
        DetectionSidecar {
            video_id: id.to_string(),
            frames: areas
                .iter()
                .enumerate()
                .map(|(i, &a)| SidecarFrame {
                    timestamp_s: i as f64,
                    text_boxes: if a > 0.0 {
                        vec![rect(0.0, 0.0, a / 100.0, 100.0)]
                    } else {
                        vec![]
                    },
                    face_boxes: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn text_coverage_takes_max_over_frames() {
        let rec = record_100x100("v");
        let sidecar = sidecar_with_unions("v", &[3000.0, 1000.0, 500.0]);
        let result = text_coverage(&rec, Some(&sidecar), 0.25);
        assert_eq!(result.per_frame_ratio, vec![0.3, 0.1, 0.05]);
        assert!((result.max_ratio - 0.30).abs() < 1e-12);
        assert_eq!(result.decision, DecisionKind::Dropped);
        assert!(result.warnings.is_empty());
    }

    #[test]
    fn zero_boxes_kept() {
        let rec = record_100x100("v");
        let sidecar = sidecar_with_unions("v", &[0.0, 0.0, 0.0]);
        let result = text_coverage(&rec, Some(&sidecar), 0.25);
        assert_eq!(result.max_ratio, 0.0);
        assert_eq!(result.decision, DecisionKind::Kept);
    }

    #[test]
    fn full_frame_box_dropped_for_any_threshold_below_one() {
        let rec = record_100x100("v");
        let sidecar = sidecar_with_unions("v", &[10_000.0, 0.0, 0.0]);
        let result = text_coverage(&rec, Some(&sidecar), 0.999);
        assert_eq!(result.max_ratio, 1.0);
        assert_eq!(result.decision, DecisionKind::Dropped);
    }

    #[test]
    fn missing_sidecar_is_kept_and_flagged() {
        let rec = record_100x100("v");
        let result = text_coverage(&rec, None, 0.3);
        assert_eq!(result.decision, DecisionKind::Kept);
        assert_eq!(result.warnings, vec![CoverageWarning::MissingSidecar]);
    }

    #[test]
    fn frame_count_mismatch_tolerated_but_reported() {
        let rec = record_100x100("v");
        let sidecar = sidecar_with_unions("v", &[1000.0]);
        let result = text_coverage(&rec, Some(&sidecar), 0.3);
        assert_eq!(result.decision, DecisionKind::Kept);
        assert_eq!(
            result.warnings,
            vec![CoverageWarning::FrameCountMismatch {
                expected: 3,
                actual: 1
            }]
        );
    }

    #[test]
    fn face_coverage_dropped_on_large_face() {
        let rec = record_100x100("v");
        let mut sidecar = DetectionSidecar {
            video_id: "v".to_string(),
            frames: (0..5)
                .map(|i| SidecarFrame {
                    timestamp_s: i as f64,
                    text_boxes: vec![],
                    face_boxes: vec![],
                })
                .collect(),
        };
        // One frame with a 60% face union.
        sidecar.frames[2].face_boxes = vec![rect(0.0, 0.0, 60.0, 100.0)];
        let result = face_coverage(&rec, Some(&sidecar), 0.4);
        assert!((result.max_ratio - 0.6).abs() < 1e-12);
        assert_eq!(result.decision, DecisionKind::Dropped);

        // Ratio cannot exceed 1, so threshold 1.0 always keeps.
        let result = face_coverage(&rec, Some(&sidecar), 1.0);
        assert_eq!(result.decision, DecisionKind::Kept);
    }

    #[test]
    fn no_faces_kept() {
        let rec = record_100x100("v");
        let sidecar = DetectionSidecar {
            video_id: "v".to_string(),
            frames: (0..5)
                .map(|i| SidecarFrame {
                    timestamp_s: i as f64,
                    text_boxes: vec![],
                    face_boxes: vec![],
                })
                .collect(),
        };
        let result = face_coverage(&rec, Some(&sidecar), 0.5);
        assert_eq!(result.max_ratio, 0.0);
        assert_eq!(result.decision, DecisionKind::Kept);
    }

    #[test]
    fn boxes_clipped_to_frame_before_ratio() {
        let rec = record_100x100("v");
        let sidecar = DetectionSidecar {
            video_id: "v".to_string(),
            frames: vec![SidecarFrame {
                timestamp_s: 0.0,
                // Extends far outside the 100x100 frame; only 50x100 remains.
                text_boxes: vec![rect(50.0, 0.0, 500.0, 500.0)],
                face_boxes: vec![],
            }],
        };
        let result = text_coverage(&rec, Some(&sidecar), 0.9);
        assert!((result.max_ratio - 0.5).abs() < 1e-12);
    }

    // Ratios are invariant under uniform scaling of boxes and frame.
    #[test]
    fn coverage_ratio_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let boxes = random_integer_boxes(&mut rng, 100);
            let base = union_area(&boxes) / (100.0 * 100.0);
            for scale in [2.0, 4.0, 8.0] {
                let scaled: Vec<Rect> = boxes
                    .iter()
                    .map(|b| rect(b.x0 * scale, b.y0 * scale, b.x1 * scale, b.y1 * scale))
                    .collect();
                let ratio = union_area(&scaled) / (100.0 * scale * 100.0 * scale);
                assert!((ratio - base).abs() < 1e-12);
            }
        }
    }
}

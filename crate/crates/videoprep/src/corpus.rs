//! Canonical corpus data model and manifest IO.
//!
//! A corpus manifest is a UTF-8 line-delimited JSON file, one video record per
//! line, which keeps multi-million-record corpora streamable and diffable.
//! Detector outputs (OCR text boxes, face boxes) live in per-video sidecar
//! files keyed by video id, since they are produced by external tools at
//! different times than the manifest itself.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filter names allowed as `filter_status` keys.
pub const REGISTERED_FILTERS: &[&str] = &[
    "text_coverage",
    "face_coverage",
    "static_scene",
    "scene_cut",
    "caption_redundancy",
];

/// Caption / prompt language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Language::En => write!(f, "en"),
            Language::Zh => write!(f, "zh"),
        }
    }
}

/// Whether a filter kept or dropped a record, with the filter's score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionKind {
    Kept,
    Dropped,
}

/// One `filter_status` entry: the decision a named filter made plus its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub decision: DecisionKind,
    pub score: f64,
}

impl FilterDecision {
    pub fn kept(score: f64) -> Self {
        FilterDecision {
            decision: DecisionKind::Kept,
            score,
        }
    }

    pub fn dropped(score: f64) -> Self {
        FilterDecision {
            decision: DecisionKind::Dropped,
            score,
        }
    }

    pub fn is_dropped(&self) -> bool {
        self.decision == DecisionKind::Dropped
    }
}

/// A single video-level caption.
///
/// `sentences` is derived by the captions module and is not part of the wire
/// format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub language: Language,
    pub text: String,
    #[serde(skip)]
    pub sentences: Vec<String>,
}

impl Caption {
    pub fn new(language: Language, text: impl Into<String>) -> Self {
        Caption {
            language,
            text: text.into(),
            sentences: Vec::new(),
        }
    }
}

/// One corpus entry: media metadata, category label, captions, filter status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub id: String,
    pub media_path: String,
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub category: String,
    pub language: Language,
    pub source: String,
    pub captions: Vec<Caption>,
    /// Keyed by registered filter name; ordered map so serialization is stable.
    #[serde(default)]
    pub filter_status: BTreeMap<String, FilterDecision>,
}

impl VideoRecord {
    /// Frame area in square pixels.
    pub fn frame_area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }

    pub fn set_filter(&mut self, name: &str, decision: FilterDecision) {
        self.filter_status.insert(name.to_string(), decision);
    }

    pub fn dropped_by(&self, name: &str) -> bool {
        self.filter_status
            .get(name)
            .map(FilterDecision::is_dropped)
            .unwrap_or(false)
    }
}

/// Axis-aligned pixel rectangle; zero-area boxes are rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::InvalidArgument("rect with non-finite corner".into()));
        }
        if x0 < 0.0 || y0 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rect with negative corner ({x0}, {y0})"
            )));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidArgument(format!(
                "rect ({x0}, {y0}, {x1}, {y1}) has no area"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Intersection with `[0, w] x [0, h]`; `None` when nothing remains.
    pub fn clip(&self, w: f64, h: f64) -> Option<Rect> {
        let x0 = self.x0.max(0.0);
        let y0 = self.y0.max(0.0);
        let x1 = self.x1.min(w);
        let y1 = self.y1.min(h);
        if x1 > x0 && y1 > y0 {
            Some(Rect { x0, y0, x1, y1 })
        } else {
            None
        }
    }
}

impl TryFrom<[f64; 4]> for Rect {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> [f64; 4] {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

/// Detector output for one sampled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarFrame {
    pub timestamp_s: f64,
    #[serde(default)]
    pub text_boxes: Vec<Rect>,
    #[serde(default)]
    pub face_boxes: Vec<Rect>,
}

/// Per-video OCR and face detections produced by external detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSidecar {
    pub video_id: String,
    pub frames: Vec<SidecarFrame>,
}

impl DetectionSidecar {
    /// Checks sidecar invariants against the owning record: timestamps within
    /// `[0, duration_s)` and boxes within the frame.
    pub fn check_against(&self, record: &VideoRecord) -> Vec<String> {
        let mut problems = Vec::new();
        let (w, h) = (f64::from(record.width), f64::from(record.height));
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.timestamp_s < 0.0 || frame.timestamp_s >= record.duration_s {
                problems.push(format!(
                    "frame {i}: timestamp {} outside [0, {})",
                    frame.timestamp_s, record.duration_s
                ));
            }
            for b in frame.text_boxes.iter().chain(frame.face_boxes.iter()) {
                if b.x0 < 0.0 || b.y0 < 0.0 || b.x1 > w || b.y1 > h {
                    problems.push(format!(
                        "frame {i}: box ({}, {}, {}, {}) outside {w}x{h} frame",
                        b.x0, b.y0, b.x1, b.y1
                    ));
                }
            }
        }
        problems
    }
}

/// Path of the sidecar file for `video_id` under `dir`.
pub fn sidecar_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.json"))
}

/// Loads the sidecar for `video_id`, or `None` when no file exists.
pub fn load_sidecar(dir: &Path, video_id: &str) -> Result<Option<DetectionSidecar>> {
    let path = sidecar_path(dir, video_id);
    if !path.exists() {
        return Ok(None);
    }
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let sidecar = serde_json::from_reader(BufReader::new(file))?;
    Ok(Some(sidecar))
}

pub fn write_sidecar(dir: &Path, sidecar: &DetectionSidecar) -> Result<()> {
    let path = sidecar_path(dir, &sidecar.video_id);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, sidecar)?;
    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// A malformed manifest line, kept with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Result of loading a manifest: parsed records plus any malformed lines.
#[derive(Debug, Clone, Default)]
pub struct ManifestLoad {
    pub records: Vec<VideoRecord>,
    pub line_errors: Vec<LineError>,
}

/// Reads a line-delimited manifest, preserving line order.
///
/// Malformed lines are collected into `line_errors` rather than skipped
/// silently; a duplicate record id is fatal.
pub fn load_manifest(path: &Path) -> Result<ManifestLoad> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut load = ManifestLoad::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VideoRecord>(&line) {
            Ok(record) => {
                if !seen.insert(record.id.clone()) {
                    return Err(Error::DuplicateId {
                        id: record.id,
                        line: line_no,
                    });
                }
                load.records.push(record);
            }
            Err(e) => load.line_errors.push(LineError {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(load)
}

/// Writes records as one JSON line each; a single writer owns the output file.
pub fn write_manifest(path: &Path, records: &[VideoRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Shorter than the 5-second minimum used for instruction data.
    ShortVideo { duration_s: f64 },
    NonPositiveDuration { duration_s: f64 },
    NonPositiveFps { fps: f64 },
    ZeroDimension { width: u32, height: u32 },
    EmptyCaption { index: usize },
    OverlongCaption { index: usize, len: usize, max: usize },
    UnknownFilter { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ShortVideo { duration_s } => {
                write!(f, "video shorter than 5 s ({duration_s} s)")
            }
            Violation::NonPositiveDuration { duration_s } => {
                write!(f, "duration must be positive, got {duration_s}")
            }
            Violation::NonPositiveFps { fps } => write!(f, "fps must be positive, got {fps}"),
            Violation::ZeroDimension { width, height } => {
                write!(f, "frame dimensions must be at least 1x1, got {width}x{height}")
            }
            Violation::EmptyCaption { index } => write!(f, "caption {index} is empty"),
            Violation::OverlongCaption { index, len, max } => {
                write!(f, "caption {index} has {len} chars, limit {max}")
            }
            Violation::UnknownFilter { name } => {
                write!(f, "filter_status key {name:?} is not a registered filter")
            }
        }
    }
}

/// Outcome of validating one record; validation reports, it never fails.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks record invariants and the caption-length policy.
///
/// Length is measured in characters so the limit means the same thing for
/// English and Chinese captions. The 5-second minimum is strict: exactly
/// 5.0 s is kept.
pub fn validate_record(record: &VideoRecord, max_caption_len: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    if record.duration_s <= 0.0 || !record.duration_s.is_finite() {
        report.violations.push(Violation::NonPositiveDuration {
            duration_s: record.duration_s,
        });
    } else if record.duration_s < 5.0 {
        report.violations.push(Violation::ShortVideo {
            duration_s: record.duration_s,
        });
    }
    if record.fps <= 0.0 || !record.fps.is_finite() {
        report
            .violations
            .push(Violation::NonPositiveFps { fps: record.fps });
    }
    if record.width == 0 || record.height == 0 {
        report.violations.push(Violation::ZeroDimension {
            width: record.width,
            height: record.height,
        });
    }
    for (index, caption) in record.captions.iter().enumerate() {
        let len = caption.text.chars().count();
        if len == 0 {
            report.violations.push(Violation::EmptyCaption { index });
        } else if len > max_caption_len {
            report.violations.push(Violation::OverlongCaption {
                index,
                len,
                max: max_caption_len,
            });
        }
    }
    for name in record.filter_status.keys() {
        if !REGISTERED_FILTERS.contains(&name.as_str()) {
            report
                .violations
                .push(Violation::UnknownFilter { name: name.clone() });
        }
    }
    report
}

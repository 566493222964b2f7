//! Pipeline orchestration: config parsing, stage wiring, reports.
//!
//! Stages run in curation order -- validate, coverage filters, motion
//! filter, scene cut, category balance, caption refinement, instruction
//! assembly, frame sampling, token budgeting, packing, report -- each
//! reading the previous stage's records and writing a new manifest, never
//! mutating its input. Identical config and seeds produce byte-identical
//! output manifests; timings live only in the run report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{balance_categories, dataset_report};
use crate::captions::{
    caption_to_qa, refine_captions, FilterSplit, InstructionSample, TaskType, TemplateSet,
};
use crate::corpus::{
    load_manifest, load_sidecar, validate_record, write_manifest, FilterDecision, VideoRecord,
};
use crate::coverage::{face_coverage, text_coverage, CoverageResult, CoverageWarning};
use crate::error::{Error, Result};
use crate::motion::{
    detect_scene_cuts, downscale, list_frames, load_pgm, segment_clips, static_scene_decision,
    ClipSpan, GrayFrame,
};
use crate::packer::{pack_sequences, write_plan, PackingPlan};
use crate::sampler::{
    dynamic_frame_count, token_budget, uniform_timestamps, StageConfig, StageName, TokenAccount,
};

/// Videos in the instruction stages are decoded at this rate, so sampled
/// timestamps snap onto its frame grid.
pub const INSTRUCTION_RESAMPLE_FPS: f64 = 4.0;

/// Captions at or below this many characters become short-caption samples;
/// longer ones become detailed descriptions.
pub const SHORT_CAPTION_MAX_CHARS: usize = 120;

/// Stable per-item seed derived from the base seed and string tags, so
/// parallel execution order cannot change any sampled value.
pub fn derive_seed(base: u64, tags: &[&str]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for tag in tags {
        for &b in tag.as_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
        h = h.wrapping_mul(0x0000_0100_0000_01b3) ^ 0xff;
    }
    h
}

/// Crude token count standing in for a real tokenizer: one token per
/// alphanumeric word, one per CJK character.
pub fn approx_text_tokens(text: &str) -> u64 {
    fn is_cjk(c: char) -> bool {
        matches!(u32::from(c), 0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF)
    }
    let mut tokens = 0u64;
    let mut in_word = false;
    for c in text.chars() {
        if is_cjk(c) {
            if in_word {
                tokens += 1;
                in_word = false;
            }
            tokens += 1;
        } else if c.is_alphanumeric() {
            in_word = true;
        } else if in_word {
            tokens += 1;
            in_word = false;
        }
    }
    if in_word {
        tokens += 1;
    }
    tokens
}

fn default_text_threshold() -> f64 {
    0.30
}
fn default_face_threshold() -> f64 {
    0.50
}
fn default_flow_threshold() -> f64 {
    0.05
}
fn default_flow_alpha() -> f64 {
    1.0
}
fn default_flow_iterations() -> usize {
    100
}
fn default_flow_resolution() -> usize {
    128
}
fn default_static_frames() -> usize {
    5
}
fn default_cut_threshold() -> f64 {
    0.30
}
fn default_min_clip_s() -> f64 {
    5.0
}
fn default_max_clip_s() -> f64 {
    60.0
}
fn default_max_caption_len() -> usize {
    512
}
fn default_redundancy_threshold() -> f64 {
    0.7
}
fn default_cap_fraction() -> f64 {
    0.01
}
fn default_top_k() -> usize {
    20
}

/// Flat pipeline configuration; unknown keys are rejected so threshold
/// typos fail loudly. Thresholds default to documented engineering values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Stage whose geometry and budget apply: image_pt, video_pt, refine,
    /// instruct, or long_video.
    pub stage: String,
    pub input_manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sidecar_dir: Option<PathBuf>,
    #[serde(default)]
    pub frames_dir: Option<PathBuf>,
    #[serde(default)]
    pub templates_file: Option<PathBuf>,
    #[serde(default = "default_text_threshold")]
    pub text_coverage_threshold: f64,
    #[serde(default = "default_face_threshold")]
    pub face_coverage_threshold: f64,
    #[serde(default = "default_flow_threshold")]
    pub flow_threshold: f64,
    #[serde(default = "default_flow_alpha")]
    pub flow_alpha: f64,
    #[serde(default = "default_flow_iterations")]
    pub flow_iterations: usize,
    #[serde(default = "default_flow_resolution")]
    pub flow_resolution: usize,
    #[serde(default = "default_static_frames")]
    pub static_frames: usize,
    #[serde(default = "default_cut_threshold")]
    pub cut_threshold: f64,
    #[serde(default = "default_min_clip_s")]
    pub min_clip_s: f64,
    #[serde(default = "default_max_clip_s")]
    pub max_clip_s: f64,
    #[serde(default = "default_max_caption_len")]
    pub max_caption_len: usize,
    #[serde(default = "default_redundancy_threshold")]
    pub redundancy_threshold: f64,
    #[serde(default = "default_cap_fraction")]
    pub cap_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for the per-record filter stages; 0 uses all cores.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "default_top_k")]
    pub report_top_k: usize,
    // Optional overrides of the built-in stage geometry.
    #[serde(default)]
    pub stage_resolution: Option<u32>,
    #[serde(default)]
    pub stage_vit_tokens_per_frame: Option<u64>,
    #[serde(default)]
    pub stage_llm_budget_tokens: Option<u64>,
    #[serde(default)]
    pub stage_min_frames: Option<u64>,
    #[serde(default)]
    pub stage_max_frames: Option<u64>,
    #[serde(default)]
    pub stage_patchify_stride_t: Option<u64>,
    #[serde(default)]
    pub stage_patchify_stride_h: Option<u64>,
    #[serde(default)]
    pub stage_patchify_stride_w: Option<u64>,
    #[serde(default)]
    pub stage_separator_tokens_per_frame: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let body = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: PipelineConfig =
            serde_json::from_str(&body).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.check_ranges()?;
        Ok(config)
    }

    pub fn check_ranges(&self) -> Result<()> {
        let unit = [
            ("text_coverage_threshold", self.text_coverage_threshold),
            ("face_coverage_threshold", self.face_coverage_threshold),
            ("cut_threshold", self.cut_threshold),
            ("redundancy_threshold", self.redundancy_threshold),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {value}")));
            }
        }
        if !(self.cap_fraction > 0.0 && self.cap_fraction < 1.0) {
            return Err(Error::Config(format!(
                "cap_fraction must lie in (0, 1), got {}",
                self.cap_fraction
            )));
        }
        if self.flow_threshold < 0.0 {
            return Err(Error::Config("flow_threshold must be non-negative".into()));
        }
        if self.flow_alpha <= 0.0 {
            return Err(Error::Config("flow_alpha must be positive".into()));
        }
        if self.flow_iterations == 0 {
            return Err(Error::Config("flow_iterations must be at least 1".into()));
        }
        if self.flow_resolution == 0 {
            return Err(Error::Config("flow_resolution must be at least 1".into()));
        }
        if self.static_frames < 2 {
            return Err(Error::Config("static_frames must be at least 2".into()));
        }
        if self.min_clip_s >= self.max_clip_s {
            return Err(Error::Config(format!(
                "min_clip_s {} must be below max_clip_s {}",
                self.min_clip_s, self.max_clip_s
            )));
        }
        Ok(())
    }

    /// Resolves the stage geometry: built-in values plus any overrides.
    pub fn stage_config(&self) -> Result<StageConfig> {
        let mut cfg = StageConfig::builtin(StageName::parse(&self.stage)?);
        if let Some(v) = self.stage_resolution {
            cfg.resolution = v;
        }
        if let Some(v) = self.stage_vit_tokens_per_frame {
            cfg.vit_tokens_per_frame = v;
        }
        if let Some(v) = self.stage_llm_budget_tokens {
            cfg.llm_budget_tokens = v;
        }
        if let Some(v) = self.stage_min_frames {
            cfg.min_frames = v;
        }
        if let Some(v) = self.stage_max_frames {
            cfg.max_frames = v;
        }
        if let Some(v) = self.stage_patchify_stride_t {
            cfg.patchify_stride.0 = v;
        }
        if let Some(v) = self.stage_patchify_stride_h {
            cfg.patchify_stride.1 = v;
        }
        if let Some(v) = self.stage_patchify_stride_w {
            cfg.patchify_stride.2 = v;
        }
        if let Some(v) = self.stage_separator_tokens_per_frame {
            cfg.separator_tokens_per_frame = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// What one stage did: kept + dropped always equals input.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub input: usize,
    pub kept: usize,
    pub dropped: usize,
    pub duration_ms: u128,
    pub notes: Vec<String>,
}

impl StageReport {
    fn new(stage: &str, input: usize, kept: usize, started: Instant) -> StageReport {
        StageReport {
            stage: stage.to_string(),
            input,
            kept,
            dropped: input - kept,
            duration_ms: started.elapsed().as_millis(),
            notes: Vec::new(),
        }
    }

    pub fn render_line(&self) -> String {
        format!(
            "{:<22} in {:>6}  kept {:>6}  dropped {:>6}  ({} ms)",
            self.stage, self.input, self.kept, self.dropped, self.duration_ms
        )
    }
}

/// Full pipeline outcome.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub failed_stage: Option<String>,
}

impl RunReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for stage in &self.stages {
            out.push_str(&stage.render_line());
            out.push('\n');
            for note in &stage.notes {
                out.push_str("    note: ");
                out.push_str(note);
                out.push('\n');
            }
        }
        if let Some(stage) = &self.failed_stage {
            out.push_str(&format!("FAILED at stage {stage}\n"));
        }
        out
    }
}

/// One frame-sampling plan line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FramePlanLine {
    pub video_id: String,
    pub n_frames: u64,
    pub timestamps: Vec<f64>,
}

/// One scene-cut line: detected cuts plus usable clips.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipLine {
    pub video_id: String,
    pub cuts: Vec<f64>,
    pub clips: Vec<(f64, f64)>,
}

/// One admitted sample with its exact token account.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetLine {
    pub sample_id: String,
    pub video_id: String,
    pub task_type: TaskType,
    pub n_frames: u64,
    pub visual_tokens: u64,
    pub separator_tokens: u64,
    pub text_tokens: u64,
    pub total: u64,
}

/// A configured pipeline ready to run stages.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub stage: StageConfig,
    templates: TemplateSet,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    /// Validates the config, resolves the stage geometry, and loads prompt
    /// templates. Referenced paths must exist.
    pub fn new(config: PipelineConfig) -> Result<Pipeline> {
        config.check_ranges()?;
        let stage = config.stage_config()?;
        if !config.input_manifest.exists() {
            return Err(Error::Config(format!(
                "input manifest {} does not exist",
                config.input_manifest.display()
            )));
        }
        for (name, dir) in [
            ("sidecar_dir", &config.sidecar_dir),
            ("frames_dir", &config.frames_dir),
        ] {
            if let Some(dir) = dir {
                if !dir.is_dir() {
                    return Err(Error::Config(format!(
                        "{name} {} is not a directory",
                        dir.display()
                    )));
                }
            }
        }
        let templates = match &config.templates_file {
            Some(path) => TemplateSet::load(path)?,
            None => TemplateSet::builtin(),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Pipeline {
            config,
            stage,
            templates,
            pool,
        })
    }

    /// Loads the input manifest; malformed lines become notes on the first
    /// stage rather than records silently vanishing.
    pub fn load_input(&self) -> Result<(Vec<VideoRecord>, Vec<String>)> {
        let load = load_manifest(&self.config.input_manifest)?;
        let notes = load
            .line_errors
            .iter()
            .map(|e| format!("line {}: {}", e.line, e.message))
            .collect();
        Ok((load.records, notes))
    }

    /// Drops records violating corpus invariants or the 5-second minimum.
    pub fn validate_stage(&self, records: Vec<VideoRecord>) -> (FilterSplit, StageReport) {
        let started = Instant::now();
        let input = records.len();
        let mut split = FilterSplit::default();
        let mut notes = Vec::new();
        for record in records {
            let report = validate_record(&record, self.config.max_caption_len);
            if report.is_clean() {
                split.kept.push(record);
            } else {
                for violation in &report.violations {
                    notes.push(format!("{}: {violation}", record.id));
                }
                split.dropped.push(record);
            }
        }
        let mut report = StageReport::new("validate", input, split.kept.len(), started);
        report.notes = notes;
        (split, report)
    }

    fn coverage_stage(
        &self,
        records: Vec<VideoRecord>,
        filter_name: &str,
        run: impl Fn(&VideoRecord, Option<&crate::corpus::DetectionSidecar>) -> CoverageResult
            + Sync,
    ) -> Result<(FilterSplit, StageReport)> {
        let started = Instant::now();
        let input = records.len();
        let sidecar_dir = self.config.sidecar_dir.clone();
        let results: Vec<(VideoRecord, CoverageResult)> = self.pool.install(|| {
            records
                .into_par_iter()
                .map(|record| {
                    let sidecar = match &sidecar_dir {
                        Some(dir) => load_sidecar(dir, &record.id)?,
                        None => None,
                    };
                    let result = run(&record, sidecar.as_ref());
                    Ok((record, result))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut split = FilterSplit::default();
        let mut notes = Vec::new();
        for (mut record, result) in results {
            for warning in &result.warnings {
                match warning {
                    CoverageWarning::MissingSidecar => {
                        notes.push(format!("{}: unfilterable, no sidecar", record.id))
                    }
                    CoverageWarning::FrameCountMismatch { expected, actual } => notes.push(
                        format!("{}: {actual} sidecar frames, canonical {expected}", record.id),
                    ),
                }
            }
            let decision = FilterDecision {
                decision: result.decision,
                score: result.max_ratio,
            };
            record.set_filter(filter_name, decision);
            if result.decision == crate::corpus::DecisionKind::Dropped {
                split.dropped.push(record);
            } else {
                split.kept.push(record);
            }
        }
        let mut report = StageReport::new(filter_name, input, split.kept.len(), started);
        report.notes = notes;
        Ok((split, report))
    }

    /// Text-coverage filter over OCR sidecar boxes.
    pub fn filter_text(&self, records: Vec<VideoRecord>) -> Result<(FilterSplit, StageReport)> {
        let threshold = self.config.text_coverage_threshold;
        self.coverage_stage(records, "text_coverage", move |record, sidecar| {
            text_coverage(record, sidecar, threshold)
        })
    }

    /// Face-coverage filter over detector sidecar boxes.
    pub fn filter_face(&self, records: Vec<VideoRecord>) -> Result<(FilterSplit, StageReport)> {
        let threshold = self.config.face_coverage_threshold;
        self.coverage_stage(records, "face_coverage", move |record, sidecar| {
            face_coverage(record, sidecar, threshold)
        })
    }

    fn load_record_frames(&self, record: &VideoRecord) -> Result<Option<Vec<(f64, GrayFrame)>>> {
        let Some(frames_dir) = &self.config.frames_dir else {
            return Ok(None);
        };
        let dir = frames_dir.join(&record.id);
        if !dir.is_dir() {
            return Ok(None);
        }
        let mut frames = Vec::new();
        for (timestamp, path) in list_frames(&dir)? {
            frames.push((timestamp, load_pgm(&path)?));
        }
        if frames.is_empty() {
            return Ok(None);
        }
        Ok(Some(frames))
    }

    /// Evenly spaced subset of `n` indices over `len` items.
    fn spread_indices(len: usize, n: usize) -> Vec<usize> {
        if len <= n {
            return (0..len).collect();
        }
        let mut picked: Vec<usize> = (0..n)
            .map(|i| i * (len - 1) / (n - 1).max(1))
            .collect();
        picked.dedup();
        picked
    }

    /// Static-scene filter over flow between consecutive downscaled frames.
    pub fn filter_motion(&self, records: Vec<VideoRecord>) -> Result<(FilterSplit, StageReport)> {
        let started = Instant::now();
        let input = records.len();
        let cfg = &self.config;
        let results: Vec<(VideoRecord, Option<crate::motion::MotionResult>)> =
            self.pool.install(|| {
                records
                    .into_par_iter()
                    .map(|record| {
                        let Some(frames) = self.load_record_frames(&record)? else {
                            return Ok((record, None));
                        };
                        let picked = Self::spread_indices(frames.len(), cfg.static_frames);
                        let small: Vec<GrayFrame> = picked
                            .iter()
                            .map(|&i| {
                                downscale(&frames[i].1, cfg.flow_resolution, cfg.flow_resolution)
                            })
                            .collect();
                        let result = static_scene_decision(
                            &small,
                            cfg.flow_threshold,
                            cfg.flow_alpha,
                            cfg.flow_iterations,
                        )?;
                        Ok((record, Some(result)))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
        let mut split = FilterSplit::default();
        let mut notes = Vec::new();
        for (mut record, result) in results {
            match result {
                None => {
                    notes.push(format!("{}: unfilterable, no frames", record.id));
                    record.set_filter("static_scene", FilterDecision::kept(0.0));
                    split.kept.push(record);
                }
                Some(result) => {
                    for warning in &result.warnings {
                        notes.push(format!("{}: {warning:?}", record.id));
                    }
                    record.set_filter(
                        "static_scene",
                        FilterDecision {
                            decision: result.decision,
                            score: result.score,
                        },
                    );
                    if result.decision == crate::corpus::DecisionKind::Dropped {
                        split.dropped.push(record);
                    } else {
                        split.kept.push(record);
                    }
                }
            }
        }
        let mut report = StageReport::new("static_scene", input, split.kept.len(), started);
        report.notes = notes;
        Ok((split, report))
    }

    /// Detects content cuts and segments each video into usable clips;
    /// records left with no clip at least `min_clip_s` long are dropped.
    pub fn scene_cut(
        &self,
        records: Vec<VideoRecord>,
    ) -> Result<(FilterSplit, Vec<ClipLine>, StageReport)> {
        type CutOutcome = (VideoRecord, Option<(Vec<f64>, Vec<ClipSpan>)>);
        let started = Instant::now();
        let input = records.len();
        let cfg = &self.config;
        let results: Vec<CutOutcome> =
            self.pool.install(|| {
                records
                    .into_par_iter()
                    .map(|record| {
                        let Some(frames) = self.load_record_frames(&record)? else {
                            return Ok((record, None));
                        };
                        let timestamps: Vec<f64> = frames.iter().map(|f| f.0).collect();
                        let images: Vec<GrayFrame> =
                            frames.into_iter().map(|f| f.1).collect();
                        let cuts = detect_scene_cuts(&images, &timestamps, cfg.cut_threshold)?;
                        let clips = segment_clips(
                            record.duration_s,
                            &cuts,
                            cfg.min_clip_s,
                            cfg.max_clip_s,
                        );
                        Ok((record, Some((cuts, clips))))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
        let mut split = FilterSplit::default();
        let mut lines = Vec::new();
        let mut notes = Vec::new();
        for (mut record, result) in results {
            match result {
                None => {
                    notes.push(format!("{}: unfilterable, no frames", record.id));
                    record.set_filter("scene_cut", FilterDecision::kept(0.0));
                    split.kept.push(record);
                }
                Some((cuts, clips)) => {
                    lines.push(ClipLine {
                        video_id: record.id.clone(),
                        cuts: cuts.clone(),
                        clips: clips.iter().map(|c| (c.start_s, c.end_s)).collect(),
                    });
                    let usable = clips.len() as f64;
                    if clips.is_empty() {
                        record.set_filter("scene_cut", FilterDecision::dropped(usable));
                        split.dropped.push(record);
                    } else {
                        record.set_filter("scene_cut", FilterDecision::kept(usable));
                        split.kept.push(record);
                    }
                }
            }
        }
        let mut report = StageReport::new("scene_cut", input, split.kept.len(), started);
        report.notes = notes;
        Ok((split, lines, report))
    }

    /// Category rebalancing under the configured cap.
    pub fn balance(&self, records: Vec<VideoRecord>) -> (Vec<VideoRecord>, StageReport) {
        let started = Instant::now();
        let input = records.len();
        let seed = derive_seed(self.config.seed, &["balance"]);
        let (kept, summary) = balance_categories(records, self.config.cap_fraction, seed);
        let mut report = StageReport::new("balance", input, kept.len(), started);
        for reduction in &summary.reductions {
            report.notes.push(format!(
                "{}: {} -> {}",
                reduction.category, reduction.before, reduction.after
            ));
        }
        for category in &summary.emptied {
            report.notes.push(format!("{category}: emptied by cap"));
        }
        (kept, report)
    }

    /// Caption redundancy refinement.
    pub fn refine(&self, records: Vec<VideoRecord>) -> (FilterSplit, StageReport) {
        let started = Instant::now();
        let input = records.len();
        let split = refine_captions(records, self.config.redundancy_threshold);
        let report = StageReport::new("caption_redundancy", input, split.kept.len(), started);
        (split, report)
    }

    /// Converts captions into instruction samples; records below the
    /// 5-second minimum are excluded here even when validation was skipped.
    pub fn assemble(
        &self,
        records: Vec<VideoRecord>,
    ) -> Result<(Vec<InstructionSample>, FilterSplit, StageReport)> {
        let started = Instant::now();
        let input = records.len();
        let mut samples = Vec::new();
        let mut split = FilterSplit::default();
        for record in records {
            if record.duration_s < 5.0 {
                split.dropped.push(record);
                continue;
            }
            for (index, caption) in record.captions.iter().enumerate() {
                let task_type = if caption.text.chars().count() <= SHORT_CAPTION_MAX_CHARS {
                    TaskType::ShortCaption
                } else {
                    TaskType::DetailedDescription
                };
                let seed = derive_seed(
                    self.config.seed,
                    &["assemble", &record.id, &index.to_string()],
                );
                samples.push(caption_to_qa(
                    &record.id,
                    caption,
                    task_type,
                    &self.templates,
                    seed,
                )?);
            }
            split.kept.push(record);
        }
        let mut report = StageReport::new("assemble", input, split.kept.len(), started);
        report.notes.push(format!("{} samples emitted", samples.len()));
        Ok((samples, split, report))
    }

    /// Per-record frame plans: duration-driven frame count and uniform
    /// timestamps, snapped to the decode grid for the instruction stages.
    pub fn frame_plans(&self, records: &[VideoRecord]) -> (Vec<FramePlanLine>, StageReport) {
        let started = Instant::now();
        let snap_grid = matches!(self.stage.name, StageName::Instruct | StageName::LongVideo);
        let mut lines = Vec::new();
        let mut notes = Vec::new();
        for record in records {
            let n = dynamic_frame_count(record.duration_s, &self.stage);
            let mut timestamps = uniform_timestamps(record.duration_s, n as usize);
            if snap_grid {
                let step = record.duration_s / n as f64;
                if step > 1.0 / INSTRUCTION_RESAMPLE_FPS {
                    let grid = INSTRUCTION_RESAMPLE_FPS;
                    let last_slot = ((record.duration_s * grid).ceil() - 1.0).max(0.0) / grid;
                    for t in &mut timestamps {
                        *t = ((*t * grid).round() / grid).min(last_slot);
                    }
                } else {
                    notes.push(format!(
                        "{}: spacing below decode grid, timestamps left unsnapped",
                        record.id
                    ));
                }
            }
            lines.push(FramePlanLine {
                video_id: record.id.clone(),
                n_frames: n,
                timestamps,
            });
        }
        let mut report = StageReport::new("sample_frames", records.len(), records.len(), started);
        report.notes = notes;
        (lines, report)
    }

    /// Token accounting per sample against the stage budget; rejected
    /// samples are dropped and noted.
    pub fn budget(
        &self,
        records: &[VideoRecord],
        samples: &[InstructionSample],
    ) -> (Vec<BudgetLine>, StageReport) {
        let started = Instant::now();
        let input = samples.len();
        let durations: std::collections::BTreeMap<&str, f64> = records
            .iter()
            .map(|r| (r.id.as_str(), r.duration_s))
            .collect();
        let mut lines = Vec::new();
        let mut notes = Vec::new();
        let mut per_video_index: std::collections::BTreeMap<&str, usize> =
            std::collections::BTreeMap::new();
        for sample in samples {
            let counter = per_video_index.entry(sample.video_id.as_str()).or_insert(0);
            let sample_id = format!("{}#{}", sample.video_id, counter);
            *counter += 1;
            let Some(&duration) = durations.get(sample.video_id.as_str()) else {
                notes.push(format!("{sample_id}: no record for video, rejected"));
                continue;
            };
            let n_frames = dynamic_frame_count(duration, &self.stage);
            let text_tokens =
                approx_text_tokens(&sample.prompt) + approx_text_tokens(&sample.response);
            match token_budget(&self.stage, n_frames, text_tokens) {
                Ok(TokenAccount {
                    visual_tokens,
                    separator_tokens,
                    text_tokens,
                    total,
                }) => lines.push(BudgetLine {
                    sample_id,
                    video_id: sample.video_id.clone(),
                    task_type: sample.task_type,
                    n_frames,
                    visual_tokens,
                    separator_tokens,
                    text_tokens,
                    total,
                }),
                Err(rejection) => notes.push(format!("{sample_id}: {rejection}")),
            }
        }
        let mut report = StageReport::new("budget", input, lines.len(), started);
        report.notes = notes;
        (lines, report)
    }

    /// Packs admitted samples into composite instances; optionally packs
    /// each task type separately.
    pub fn pack(
        &self,
        lines: &[BudgetLine],
        group_by_task: bool,
    ) -> Result<(PackingPlan, StageReport)> {
        let started = Instant::now();
        let budget = self.stage.llm_budget_tokens;
        let plan = if group_by_task {
            let mut merged = PackingPlan {
                composites: Vec::new(),
                budget,
            };
            for task_type in TaskType::ALL {
                let group: Vec<(String, u64)> = lines
                    .iter()
                    .filter(|l| l.task_type == task_type)
                    .map(|l| (l.sample_id.clone(), l.total))
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let part = pack_sequences(&group, budget)?;
                merged.composites.extend(part.composites);
            }
            merged
        } else {
            let input: Vec<(String, u64)> = lines
                .iter()
                .map(|l| (l.sample_id.clone(), l.total))
                .collect();
            pack_sequences(&input, budget)?
        };
        let mut report = StageReport::new("pack", lines.len(), lines.len(), started);
        report.notes.push(format!(
            "{} composites, utilization {:.4}",
            plan.composites.len(),
            crate::packer::utilization(&plan)
        ));
        Ok((plan, report))
    }

    /// Corpus statistics for the final record set.
    pub fn report(&self, records: &[VideoRecord]) -> (crate::balance::StatsReport, StageReport) {
        let started = Instant::now();
        let stats = dataset_report(records, self.config.report_top_k);
        let report = StageReport::new("report", records.len(), records.len(), started);
        (stats, report)
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// Writes through a temp file, recording the final path in `written`;
    /// on failure the partial output lands in the quarantine directory
    /// instead of a final path.
    fn guarded_write(
        &self,
        written: &mut Vec<PathBuf>,
        name: &str,
        write: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<()> {
        let final_path = self.out_path(name);
        let tmp = self.out_path(&format!("{name}.tmp"));
        match write(&tmp) {
            Ok(()) => {
                fs::rename(&tmp, &final_path).map_err(|e| Error::io(&final_path, e))?;
                written.push(final_path);
                Ok(())
            }
            Err(e) => {
                let quarantine = self.out_path("quarantine");
                if tmp.exists() && fs::create_dir_all(&quarantine).is_ok() {
                    let _ = fs::rename(&tmp, quarantine.join(name));
                }
                Err(e)
            }
        }
    }

    fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> Result<()> {
        use std::io::Write;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for line in lines {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Runs every stage in curation order, writing numbered manifests and
    /// artifacts into the output directory. Inputs are never mutated; any
    /// failure aborts with the stage name and a partial report, and the
    /// partial outputs of the failed run move into `quarantine/`.
    pub fn run(&self) -> Result<RunReport> {
        fs::create_dir_all(&self.config.output_dir)
            .map_err(|e| Error::io(&self.config.output_dir, e))?;
        let mut report = RunReport::default();
        let mut written: Vec<PathBuf> = Vec::new();
        let result = self.run_stages(&mut report, &mut written);
        if let Err(e) = &result {
            report.failed_stage = Some(match e {
                Error::Stage { stage, .. } => stage.clone(),
                _ => "setup".to_string(),
            });
            let quarantine = self.out_path("quarantine");
            if fs::create_dir_all(&quarantine).is_ok() {
                for path in &written {
                    if let Some(name) = path.file_name() {
                        let _ = fs::rename(path, quarantine.join(name));
                    }
                }
            }
        }
        let report_json = serde_json::to_string_pretty(&report)?;
        fs::write(self.out_path("run_report.json"), report_json)
            .map_err(|e| Error::io(self.out_path("run_report.json"), e))?;
        fs::write(self.out_path("run_report.txt"), report.render_text())
            .map_err(|e| Error::io(self.out_path("run_report.txt"), e))?;
        result.map(|()| report)
    }

    fn run_stages(&self, report: &mut RunReport, written: &mut Vec<PathBuf>) -> Result<()> {
        let staged = |stage: &str, e: Error| Error::Stage {
            stage: stage.to_string(),
            source: Box::new(e),
        };

        let (records, input_notes) = self.load_input().map_err(|e| staged("load", e))?;

        let (split, mut stage_report) = self.validate_stage(records);
        stage_report.notes.splice(0..0, input_notes);
        self.guarded_write(written, "01_validate.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("validate", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (split, stage_report) = self
            .filter_text(records)
            .map_err(|e| staged("filter_text", e))?;
        self.guarded_write(written, "02_filter_text.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("filter_text", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (split, stage_report) = self
            .filter_face(records)
            .map_err(|e| staged("filter_face", e))?;
        self.guarded_write(written, "03_filter_face.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("filter_face", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (split, stage_report) = self
            .filter_motion(records)
            .map_err(|e| staged("filter_motion", e))?;
        self.guarded_write(written, "04_filter_motion.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("filter_motion", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (split, clips, stage_report) =
            self.scene_cut(records).map_err(|e| staged("scene_cut", e))?;
        self.guarded_write(written, "05_scene_cut.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("scene_cut", e))?;
        self.guarded_write(written, "clips.jsonl", |p| Self::write_jsonl(p, &clips))
            .map_err(|e| staged("scene_cut", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (records, stage_report) = self.balance(records);
        self.guarded_write(written, "06_balance.jsonl", |p| write_manifest(p, &records))
            .map_err(|e| staged("balance", e))?;
        report.stages.push(stage_report);

        let (split, stage_report) = self.refine(records);
        self.guarded_write(written, "07_refine_captions.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("refine_captions", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (samples, split, stage_report) =
            self.assemble(records).map_err(|e| staged("assemble", e))?;
        self.guarded_write(written, "08_assemble.jsonl", |p| write_manifest(p, &split.kept))
            .map_err(|e| staged("assemble", e))?;
        self.guarded_write(written, "08_instruction_samples.jsonl", |p| {
            crate::captions::write_samples(p, &samples)
        })
        .map_err(|e| staged("assemble", e))?;
        report.stages.push(stage_report);
        let records = split.kept;

        let (plans, stage_report) = self.frame_plans(&records);
        self.guarded_write(written, "09_frame_plans.jsonl", |p| Self::write_jsonl(p, &plans))
            .map_err(|e| staged("sample_frames", e))?;
        report.stages.push(stage_report);

        let (budget_lines, stage_report) = self.budget(&records, &samples);
        self.guarded_write(written, "10_budgets.jsonl", |p| Self::write_jsonl(p, &budget_lines))
            .map_err(|e| staged("budget", e))?;
        report.stages.push(stage_report);

        let (plan, stage_report) = self
            .pack(&budget_lines, false)
            .map_err(|e| staged("pack", e))?;
        self.guarded_write(written, "11_plan.jsonl", |p| write_plan(p, &plan))
            .map_err(|e| staged("pack", e))?;
        report.stages.push(stage_report);

        let (stats, stage_report) = self.report(&records);
        self.guarded_write(written, "report.txt", |p| {
            fs::write(p, stats.render_text()).map_err(|e| Error::io(p, e))
        })
        .map_err(|e| staged("report", e))?;
        self.guarded_write(written, "categories.tsv", |p| {
            fs::write(p, stats.category_table()).map_err(|e| Error::io(p, e))
        })
        .map_err(|e| staged("report", e))?;
        report.stages.push(stage_report);

        Ok(())
    }
}

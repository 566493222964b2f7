//! Synthetic demo corpus with known filter outcomes.
//!
//! Twenty records exercising every stage: two too short to keep, three with
//! heavy on-screen text, two dominated by faces, two static, one chopped
//! into sub-minimum clips by scene cuts, six in an over-represented
//! category, two with redundant captions, and two clean records (one with
//! no detector sidecar, which must survive as unfilterable). Frames are
//! 128x128 grayscale PGMs; patterns are smooth sinusoids translated over
//! time, so motion and cut behavior is analytically known.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::{
    write_manifest, write_sidecar, Caption, DetectionSidecar, Language, Rect, SidecarFrame,
    VideoRecord,
};
use crate::error::{Error, Result};
use crate::motion::{frame_filename, write_pgm, GrayFrame};
use crate::pipeline::PipelineConfig;

pub const FRAME_SIDE: usize = 128;
/// Sampled frame timestamps for every demo video, in seconds.
pub const FRAME_TIMES_S: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];

/// Paths of a generated demo corpus.
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub sidecar_dir: PathBuf,
    pub frames_dir: PathBuf,
}

fn record(id: &str, category: &str, duration_s: f64, caption: &str) -> VideoRecord {
    VideoRecord {
        id: id.to_string(),
        media_path: format!("media/{id}.mp4"),
        duration_s,
        fps: 10.0,
        width: 100,
        height: 100,
        category: category.to_string(),
        language: Language::En,
        source: "synthetic".to_string(),
        captions: vec![Caption::new(Language::En, caption)],
        filter_status: Default::default(),
    }
}

/// Smooth wave pattern translated by `shift` pixels along x.
fn wave(shift: f64) -> GrayFrame {
    let k = 2.0 * PI / 8.0;
    GrayFrame::from_fn(FRAME_SIDE, FRAME_SIDE, |x, y| {
        0.5 + 0.25 * (k * (x as f64 - shift)).sin() + 0.25 * (k * y as f64).sin()
    })
}

/// Quarter-period jump pattern: alternating sine and cosine phases differ
/// by a mean absolute value of about 0.43 (a hard cut at threshold 0.30)
/// while still presenting a cleanly trackable two-pixel displacement to the
/// flow filter.
fn phase_jump(odd: bool) -> GrayFrame {
    let k = 2.0 * PI / 8.0;
    GrayFrame::from_fn(FRAME_SIDE, FRAME_SIDE, |x, _| {
        let phase = k * x as f64;
        0.5 + 0.5 * if odd { phase.cos() } else { phase.sin() }
    })
}

fn small_text_box() -> Rect {
    Rect::new(0.0, 0.0, 10.0, 10.0).unwrap()
}

fn sidecar(id: &str, text_heavy: bool, face_heavy: bool) -> DetectionSidecar {
    let frames = FRAME_TIMES_S
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut text_boxes = vec![small_text_box()];
            let mut face_boxes = Vec::new();
            if text_heavy && i == 0 {
                // 40% of the 100x100 frame.
                text_boxes.push(Rect::new(0.0, 0.0, 40.0, 100.0).unwrap());
            }
            if face_heavy && i == 0 {
                // 60% of the frame.
                face_boxes.push(Rect::new(0.0, 0.0, 60.0, 100.0).unwrap());
            }
            SidecarFrame {
                timestamp_s: t,
                text_boxes,
                face_boxes,
            }
        })
        .collect();
    DetectionSidecar {
        video_id: id.to_string(),
        frames,
    }
}

fn write_frames(dir: &Path, id: &str, frames: &[GrayFrame]) -> Result<()> {
    let video_dir = dir.join(id);
    fs::create_dir_all(&video_dir).map_err(|e| Error::io(&video_dir, e))?;
    for (frame, &t) in frames.iter().zip(FRAME_TIMES_S.iter()) {
        let ms = (t * 1000.0).round() as u64;
        write_pgm(&video_dir.join(frame_filename(ms)), frame)?;
    }
    Ok(())
}

/// Writes the 20-record demo corpus under `root`.
pub fn write_demo_corpus(root: &Path) -> Result<DemoCorpus> {
    let manifest = root.join("manifest.jsonl");
    let sidecar_dir = root.join("sidecars");
    let frames_dir = root.join("frames");
    fs::create_dir_all(&sidecar_dir).map_err(|e| Error::io(&sidecar_dir, e))?;
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    let mut records = Vec::new();

    // v00, v01: below the 5-second minimum; dropped at validation.
    for id in ["v00", "v01"] {
        records.push(record(id, "misc", 4.0, "Too short to keep."));
    }
    // v02..v04: one frame 40% covered by text; dropped by the text filter.
    for id in ["v02", "v03", "v04"] {
        records.push(record(id, "misc", 10.0, "A wall of captions fills the screen."));
    }
    // v05, v06: one frame 60% covered by a face; dropped by the face filter.
    for id in ["v05", "v06"] {
        records.push(record(id, "misc", 10.0, "A presenter talks into the camera."));
    }
    // v07, v08: constant frames; dropped by the static-scene filter.
    for id in ["v07", "v08"] {
        records.push(record(id, "misc", 10.0, "Nothing moves in this clip."));
    }
    // v09: hard content change between every sampled frame; its cuts leave
    // only 2-second clips, all below the 5-second minimum, so it drops at
    // the scene-cut stage.
    records.push(record("v09", "misc", 10.0, "Rapid slideshow of unrelated shots."));
    // v10..v15: clean moving videos in an over-represented category.
    for i in 10..16 {
        records.push(record(
            &format!("v{i}"),
            "ads",
            10.0,
            "A colorful banner sweeps across the storefront.",
        ));
    }
    // v16, v17: clean except for fully redundant captions; dropped at the
    // refinement stage.
    let mut v16 = record(
        "v16",
        "sports",
        10.0,
        "Players pass the ball across the field. Players pass the ball across the field.",
    );
    v16.captions[0].language = Language::En;
    records.push(v16);
    records.push(record(
        "v17",
        "news",
        10.0,
        "An anchor reads the evening news. An anchor reads the evening news.",
    ));
    // v18: two captions, one short and one detailed.
    let mut v18 = record("v18", "travel", 10.0, "A train crosses a mountain bridge.");
    v18.captions.push(Caption::new(
        Language::En,
        "The camera follows a narrow hiking trail through a pine forest, pausing \
         at a lookout over the valley before descending toward a quiet lakeside \
         village as the light fades.",
    ));
    records.push(v18);
    // v19: Chinese record with no detector sidecar; must be kept and
    // flagged as unfilterable by the coverage filters.
    let mut v19 = record("v19", "cooking", 10.0, "");
    v19.language = Language::Zh;
    v19.captions = vec![Caption::new(Language::Zh, "厨师在厨房里切菜做饭。")];
    records.push(v19);

    write_manifest(&manifest, &records)?;

    // Sidecars for everything except v19.
    for record in &records {
        if record.id == "v19" {
            continue;
        }
        let text_heavy = matches!(record.id.as_str(), "v02" | "v03" | "v04");
        let face_heavy = matches!(record.id.as_str(), "v05" | "v06");
        write_sidecar(&sidecar_dir, &sidecar(&record.id, text_heavy, face_heavy))?;
    }

    // Frames for the records that reach the motion stages.
    for id in ["v07", "v08"] {
        let frames = vec![GrayFrame::constant(FRAME_SIDE, FRAME_SIDE, 0.5); 5];
        write_frames(&frames_dir, id, &frames)?;
    }
    let jumpy: Vec<GrayFrame> = (0..5).map(|i| phase_jump(i % 2 == 1)).collect();
    write_frames(&frames_dir, "v09", &jumpy)?;
    for i in 10..20 {
        // One pixel per second of drift: two pixels between sampled frames,
        // well above the flow threshold, well below the cut threshold.
        let moving: Vec<GrayFrame> = FRAME_TIMES_S.iter().map(|&t| wave(t)).collect();
        write_frames(&frames_dir, &format!("v{i}"), &moving)?;
    }

    Ok(DemoCorpus {
        root: root.to_path_buf(),
        manifest,
        sidecar_dir,
        frames_dir,
    })
}

/// Pipeline configuration matched to the demo corpus margins.
pub fn demo_config(corpus: &DemoCorpus, output_dir: &Path, seed: u64) -> PipelineConfig {
    PipelineConfig {
        stage: "instruct".to_string(),
        input_manifest: corpus.manifest.clone(),
        output_dir: output_dir.to_path_buf(),
        sidecar_dir: Some(corpus.sidecar_dir.clone()),
        frames_dir: Some(corpus.frames_dir.clone()),
        templates_file: None,
        text_coverage_threshold: 0.30,
        face_coverage_threshold: 0.50,
        flow_threshold: 0.02,
        flow_alpha: 1.0,
        flow_iterations: 30,
        flow_resolution: 128,
        static_frames: 5,
        cut_threshold: 0.30,
        min_clip_s: 5.0,
        max_clip_s: 60.0,
        max_caption_len: 512,
        redundancy_threshold: 0.5,
        cap_fraction: 0.5,
        seed,
        jobs: 2,
        report_top_k: 20,
        stage_resolution: None,
        stage_vit_tokens_per_frame: None,
        stage_llm_budget_tokens: None,
        stage_min_frames: None,
        stage_max_frames: None,
        stage_patchify_stride_t: None,
        stage_patchify_stride_h: None,
        stage_patchify_stride_w: None,
        stage_separator_tokens_per_frame: None,
    }
}

//! Text- and face-coverage decisions from detector sidecars.

use videoprep::corpus::{Caption, DetectionSidecar, Language, Rect, SidecarFrame, VideoRecord};
use videoprep::coverage::{face_coverage, text_coverage};

fn main() {
    let record = VideoRecord {
        id: "demo".to_string(),
        media_path: "media/demo.mp4".to_string(),
        duration_s: 30.0,
        fps: 25.0,
        width: 1280,
        height: 720,
        category: "news".to_string(),
        language: Language::En,
        source: "example".to_string(),
        captions: vec![Caption::new(Language::En, "A news segment with a ticker.")],
        filter_status: Default::default(),
    };

    // Three sampled frames; a wide ticker on the bottom of each one and a
    // big headline overlay on the second.
    let sidecar = DetectionSidecar {
        video_id: "demo".to_string(),
        frames: (0..3)
            .map(|i| SidecarFrame {
                timestamp_s: 5.0 + 10.0 * i as f64,
                text_boxes: if i == 1 {
                    vec![
                        Rect::new(0.0, 600.0, 1280.0, 720.0).unwrap(),
                        Rect::new(100.0, 100.0, 1180.0, 400.0).unwrap(),
                    ]
                } else {
                    vec![Rect::new(0.0, 600.0, 1280.0, 720.0).unwrap()]
                },
                face_boxes: vec![Rect::new(500.0, 150.0, 780.0, 500.0).unwrap()],
            })
            .collect(),
    };

    let text = text_coverage(&record, Some(&sidecar), 0.30);
    println!("text ratios per frame: {:?}", text.per_frame_ratio);
    println!("text max ratio {:.3} -> {:?}", text.max_ratio, text.decision);

    let face = face_coverage(&record, Some(&sidecar), 0.50);
    println!("face max ratio {:.3} -> {:?}", face.max_ratio, face.decision);
    for warning in &face.warnings {
        println!("  warning: {warning:?}");
    }

    // Without a sidecar the record is unfilterable: kept and flagged.
    let missing = text_coverage(&record, None, 0.30);
    println!(
        "no sidecar -> {:?}, warnings {:?}",
        missing.decision, missing.warnings
    );
}

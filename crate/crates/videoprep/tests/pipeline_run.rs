//! End-to-end pipeline behavior on the synthetic demo corpus.

use videoprep::captions::TaskType;
use videoprep::pipeline::{BudgetLine, Pipeline};
use videoprep::synthetic::{demo_config, write_demo_corpus};

#[test]
fn demo_corpus_stage_counts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let out = dir.path().join("out");
    let pipeline = Pipeline::new(demo_config(&corpus, &out, 7)).unwrap();
    let report = pipeline.run().unwrap();

    for stage in &report.stages {
        println!("{}", stage.render_line());
        for note in &stage.notes {
            println!("    note: {note}");
        }
    }

    let counts: Vec<(&str, usize, usize)> = report
        .stages
        .iter()
        .map(|s| (s.stage.as_str(), s.input, s.kept))
        .collect();
    let expected = [
        ("validate", 20, 18),
        ("text_coverage", 18, 15),
        ("face_coverage", 15, 13),
        ("static_scene", 13, 11),
        ("scene_cut", 11, 10),
        ("balance", 10, 7),
        ("caption_redundancy", 7, 5),
        ("assemble", 5, 5),
        ("sample_frames", 5, 5),
        ("budget", 6, 6),
        ("pack", 6, 6),
        ("report", 5, 5),
    ];
    assert_eq!(counts, expected);
}

#[test]
fn input_manifest_is_never_mutated() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let before = std::fs::read(&corpus.manifest).unwrap();
    let pipeline = Pipeline::new(demo_config(&corpus, &dir.path().join("out"), 1)).unwrap();
    pipeline.run().unwrap();
    let after = std::fs::read(&corpus.manifest).unwrap();
    assert_eq!(before, after);
}

#[test]
fn empty_manifest_runs_to_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let mut config = demo_config(&corpus, &dir.path().join("out"), 1);
    config.input_manifest = empty;

    let report = Pipeline::new(config).unwrap().run().unwrap();
    assert!(report.failed_stage.is_none());
    for stage in &report.stages {
        assert_eq!(stage.input, 0, "{} saw input", stage.stage);
        assert_eq!(stage.kept, 0);
        assert_eq!(stage.dropped, 0);
    }
    let body = std::fs::read_to_string(dir.path().join("out/01_validate.jsonl")).unwrap();
    assert!(body.is_empty());
    let plan = std::fs::read_to_string(dir.path().join("out/11_plan.jsonl")).unwrap();
    assert!(plan.is_empty());
}

#[test]
fn stage_failure_quarantines_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    // A corrupt frame file makes the motion stage fail after the coverage
    // filters have already written their manifests.
    std::fs::write(corpus.frames_dir.join("v10/01000.pgm"), b"not a pgm").unwrap();

    let out = dir.path().join("out");
    let pipeline = Pipeline::new(demo_config(&corpus, &out, 1)).unwrap();
    let err = pipeline.run().unwrap_err();
    match &err {
        videoprep::Error::Stage { stage, .. } => assert_eq!(stage, "filter_motion"),
        other => panic!("expected stage error, got {other:?}"),
    }

    // Completed-stage outputs moved into quarantine, none left behind.
    assert!(out.join("quarantine/01_validate.jsonl").exists());
    assert!(out.join("quarantine/03_filter_face.jsonl").exists());
    assert!(!out.join("01_validate.jsonl").exists());
    assert!(!out.join("04_filter_motion.jsonl").exists());

    // The partial report names the failed stage and keeps earlier counts.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["failed_stage"], "filter_motion");
    assert_eq!(report["stages"].as_array().unwrap().len(), 3);
}

#[test]
fn group_by_task_never_mixes_task_types() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let pipeline = Pipeline::new(demo_config(&corpus, &dir.path().join("out"), 1)).unwrap();

    let budget_line = |id: &str, task_type: TaskType, total: u64| BudgetLine {
        sample_id: id.to_string(),
        video_id: id.to_string(),
        task_type,
        n_frames: 16,
        visual_tokens: total - 100,
        separator_tokens: 16,
        text_tokens: 84,
        total,
    };
    let lines = vec![
        budget_line("a0", TaskType::ShortCaption, 3000),
        budget_line("a1", TaskType::ShortCaption, 3000),
        budget_line("b0", TaskType::McVqa, 3000),
        budget_line("b1", TaskType::McVqa, 3000),
    ];

    // Mixed packing can share a composite; grouped packing cannot.
    let (mixed, _) = pipeline.pack(&lines, false).unwrap();
    assert_eq!(mixed.composites.len(), 2);

    let (grouped, _) = pipeline.pack(&lines, true).unwrap();
    assert_eq!(grouped.composites.len(), 2);
    for composite in &grouped.composites {
        let tasks: std::collections::BTreeSet<&str> = composite
            .entries
            .iter()
            .map(|e| {
                lines
                    .iter()
                    .find(|l| l.sample_id == e.sample_id)
                    .map(|l| l.task_type.as_str())
                    .unwrap()
            })
            .collect();
        assert_eq!(tasks.len(), 1, "composite mixes task types: {composite:?}");
    }
}

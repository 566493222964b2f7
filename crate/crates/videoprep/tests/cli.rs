//! Binary-level checks: subcommands, flag overrides, exit codes.

use std::path::Path;
use std::process::Command;

use videoprep::synthetic::{demo_config, write_demo_corpus};

fn videoprep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_videoprep"))
}

fn write_config(path: &Path, corpus: &videoprep::synthetic::DemoCorpus, out: &Path) {
    let config = demo_config(corpus, out, 3);
    std::fs::write(path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
}

#[test]
fn run_subcommand_completes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    write_config(&config_path, &corpus, &out);

    let output = videoprep()
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for file in [
        "01_validate.jsonl",
        "05_scene_cut.jsonl",
        "08_instruction_samples.jsonl",
        "11_plan.jsonl",
        "run_report.json",
        "report.txt",
        "categories.tsv",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("validate"));
    assert!(stdout.contains("pack"));
}

#[test]
fn single_stage_with_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    write_config(&config_path, &corpus, &out);

    let filtered = dir.path().join("filtered.jsonl");
    let output = videoprep()
        .args(["filter-text", "--config"])
        .arg(&config_path)
        .arg("--output")
        .arg(&filtered)
        .output()
        .unwrap();
    assert!(output.status.success());
    let body = std::fs::read_to_string(&filtered).unwrap();
    assert_eq!(body.lines().count(), 17); // 20 records minus 3 text-heavy
}

#[test]
fn missing_config_is_exit_code_1() {
    let status = videoprep()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn bad_usage_is_exit_code_1_and_help_is_0() {
    let status = videoprep().args(["no-such-command"]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = videoprep().args(["--help"]).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}

#[test]
fn missing_input_manifest_is_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    write_config(&config_path, &corpus, &out);
    std::fs::write(
        dir.path().join("broken.jsonl"),
        "{\"id\": \"dup\"}\nnot json\n",
    )
    .unwrap();

    // A manifest whose duplicate ids abort the load is a data error.
    let dup = serde_json::to_string(&videoprep::corpus::VideoRecord {
        id: "dup".to_string(),
        media_path: String::new(),
        duration_s: 10.0,
        fps: 10.0,
        width: 10,
        height: 10,
        category: "c".to_string(),
        language: videoprep::corpus::Language::En,
        source: "s".to_string(),
        captions: vec![],
        filter_status: Default::default(),
    })
    .unwrap();
    let manifest = dir.path().join("dup.jsonl");
    std::fs::write(&manifest, format!("{dup}\n{dup}\n")).unwrap();

    let output = videoprep()
        .args(["report", "--config"])
        .arg(&config_path)
        .arg("--input")
        .arg(&manifest)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("duplicate"));
}

#[test]
fn seed_override_changes_balance_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_demo_corpus(&dir.path().join("corpus")).unwrap();
    let config_path = dir.path().join("config.json");
    write_config(&config_path, &corpus, &dir.path().join("out"));

    // A manifest where one category clearly exceeds the 50% cap, so the
    // balance stage actually samples.
    let mut records = Vec::new();
    for i in 0..30 {
        let category = if i < 20 { "big" } else { "small" };
        let category = if i >= 20 {
            format!("{category}{i}")
        } else {
            category.to_string()
        };
        records.push(videoprep::corpus::VideoRecord {
            id: format!("r{i:02}"),
            media_path: String::new(),
            duration_s: 10.0,
            fps: 10.0,
            width: 100,
            height: 100,
            category,
            language: videoprep::corpus::Language::En,
            source: "test".to_string(),
            captions: vec![],
            filter_status: Default::default(),
        });
    }
    let manifest = dir.path().join("skewed.jsonl");
    videoprep::corpus::write_manifest(&manifest, &records).unwrap();

    let run = |seed: &str, out: &Path| {
        let output = videoprep()
            .args(["balance", "--config"])
            .arg(&config_path)
            .arg("--input")
            .arg(&manifest)
            .args(["--seed", seed, "--output"])
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a1 = run("5", &dir.path().join("a1.jsonl"));
    let a2 = run("5", &dir.path().join("a2.jsonl"));
    let b = run("6", &dir.path().join("b.jsonl"));
    assert_eq!(a1, a2, "same seed must be byte-identical");
    assert!(a1.lines().count() < 30, "big category must be reduced");
    assert_ne!(a1, b, "different seed should pick a different subset");
}

//! The whole curation pipeline on a generated demo corpus.
//!
//! Writes a 20-record corpus (manifest, detector sidecars, PGM frames) into
//! a temp directory, runs every stage, and prints the per-stage report.

use videoprep::pipeline::Pipeline;
use videoprep::synthetic::{demo_config, write_demo_corpus};

fn main() -> videoprep::Result<()> {
    let dir = std::env::temp_dir().join("videoprep_full_pipeline_example");
    let _ = std::fs::remove_dir_all(&dir);
    let corpus = write_demo_corpus(&dir.join("corpus"))?;
    println!("demo corpus under {}", corpus.root.display());

    let out = dir.join("out");
    let pipeline = Pipeline::new(demo_config(&corpus, &out, 7))?;
    let report = pipeline.run()?;
    print!("{}", report.render_text());

    println!("artifacts:");
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .map_err(|e| videoprep::Error::io(&out, e))?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {}", out.join(name).display());
    }
    Ok(())
}

//! Thin command-line front end over the pipeline library.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use videoprep::captions::load_samples;
use videoprep::corpus::write_manifest;
use videoprep::error::{Error, Result};
use videoprep::packer::write_plan;
use videoprep::pipeline::{BudgetLine, Pipeline, PipelineConfig, StageReport};

#[derive(Parser)]
#[command(
    name = "videoprep",
    version,
    about = "Offline video-corpus curation and training-batch preparation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration file (flat JSON object).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's input manifest.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file for single stages, output directory for run/report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the training stage (image_pt, video_pt, refine, instruct,
    /// long_video).
    #[arg(long)]
    stage: Option<String>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override worker thread count (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Drop records whose on-screen text coverage exceeds the threshold.
    FilterText(Common),
    /// Drop records whose face coverage exceeds the threshold.
    FilterFace(Common),
    /// Drop close-to-static records by mean optical-flow magnitude.
    FilterMotion(Common),
    /// Detect content cuts, segment clips, drop records with no usable clip.
    SceneCut(Common),
    /// Downsample over-represented categories below the cap fraction.
    Balance(Common),
    /// Drop records with redundant caption sentences.
    RefineCaptions(Common),
    /// Convert captions into instruction samples.
    AssembleInstructions(Common),
    /// Emit per-record frame counts and timestamps for the stage.
    SampleFrames(Common),
    /// Account tokens per sample against the stage budget.
    Budget {
        #[command(flatten)]
        common: Common,
        /// Instruction-sample manifest produced by assemble-instructions.
        #[arg(long)]
        samples: PathBuf,
    },
    /// Pack budgeted samples into composite instances.
    Pack {
        #[command(flatten)]
        common: Common,
        /// Pack each task type into its own composites.
        #[arg(long)]
        group_by_task: bool,
    },
    /// Write corpus statistics for the input manifest.
    Report(Common),
    /// Run the full curation pipeline into the output directory.
    Run(Common),
}

fn pipeline_for(common: &Common) -> Result<Pipeline> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(input) = &common.input {
        config.input_manifest = input.clone();
    }
    if let Some(stage) = &common.stage {
        config.stage = stage.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    if let Some(output) = &common.output {
        // run and report treat the output as a directory; single stages
        // write to an explicit file path instead and ignore this.
        config.output_dir = output.clone();
    }
    Pipeline::new(config)
}

fn print_report(report: &StageReport) {
    println!("{}", report.render_line());
    for note in &report.notes {
        println!("    note: {note}");
    }
}

/// Output file for a single-stage invocation.
fn stage_output(common: &Common, pipeline: &Pipeline, default_name: &str) -> Result<PathBuf> {
    match &common.output {
        Some(path) => Ok(path.clone()),
        None => {
            let dir = &pipeline.config.output_dir;
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Ok(dir.join(default_name))
        }
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, lines: &[T]) -> Result<()> {
    use std::io::Write;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn manifest_stage(
    common: &Common,
    default_name: &str,
    stage: impl FnOnce(
        &Pipeline,
        Vec<videoprep::corpus::VideoRecord>,
    ) -> Result<(Vec<videoprep::corpus::VideoRecord>, StageReport)>,
) -> Result<()> {
    let pipeline = pipeline_for(common)?;
    let (records, _) = pipeline.load_input()?;
    let (kept, report) = stage(&pipeline, records)?;
    let out = stage_output(common, &pipeline, default_name)?;
    write_manifest(&out, &kept)?;
    print_report(&report);
    println!("wrote {}", out.display());
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::FilterText(common) => manifest_stage(&common, "filter_text.jsonl", |p, r| {
            let (split, report) = p.filter_text(r)?;
            Ok((split.kept, report))
        }),
        Command::FilterFace(common) => manifest_stage(&common, "filter_face.jsonl", |p, r| {
            let (split, report) = p.filter_face(r)?;
            Ok((split.kept, report))
        }),
        Command::FilterMotion(common) => manifest_stage(&common, "filter_motion.jsonl", |p, r| {
            let (split, report) = p.filter_motion(r)?;
            Ok((split.kept, report))
        }),
        Command::SceneCut(common) => {
            let pipeline = pipeline_for(&common)?;
            let (records, _) = pipeline.load_input()?;
            let (split, clips, report) = pipeline.scene_cut(records)?;
            let out = stage_output(&common, &pipeline, "scene_cut.jsonl")?;
            write_manifest(&out, &split.kept)?;
            let clips_path = out.with_file_name("clips.jsonl");
            write_jsonl(&clips_path, &clips)?;
            print_report(&report);
            println!("wrote {} and {}", out.display(), clips_path.display());
            Ok(())
        }
        Command::Balance(common) => {
            manifest_stage(&common, "balance.jsonl", |p, r| Ok(p.balance(r)))
        }
        Command::RefineCaptions(common) => {
            manifest_stage(&common, "refine_captions.jsonl", |p, r| {
                let (split, report) = p.refine(r);
                Ok((split.kept, report))
            })
        }
        Command::AssembleInstructions(common) => {
            let pipeline = pipeline_for(&common)?;
            let (records, _) = pipeline.load_input()?;
            let (samples, split, report) = pipeline.assemble(records)?;
            let out = stage_output(&common, &pipeline, "instruction_samples.jsonl")?;
            videoprep::captions::write_samples(&out, &samples)?;
            let manifest_path = out.with_file_name("assemble.jsonl");
            write_manifest(&manifest_path, &split.kept)?;
            print_report(&report);
            println!("wrote {} and {}", out.display(), manifest_path.display());
            Ok(())
        }
        Command::SampleFrames(common) => {
            let pipeline = pipeline_for(&common)?;
            let (records, _) = pipeline.load_input()?;
            let (plans, report) = pipeline.frame_plans(&records);
            let out = stage_output(&common, &pipeline, "frame_plans.jsonl")?;
            write_jsonl(&out, &plans)?;
            print_report(&report);
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Budget { common, samples } => {
            let pipeline = pipeline_for(&common)?;
            let (records, _) = pipeline.load_input()?;
            let samples = load_samples(&samples)?;
            let (lines, report) = pipeline.budget(&records, &samples);
            let out = stage_output(&common, &pipeline, "budgets.jsonl")?;
            write_jsonl(&out, &lines)?;
            print_report(&report);
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Pack {
            common,
            group_by_task,
        } => {
            let pipeline = pipeline_for(&common)?;
            let budget_path = common
                .input
                .clone()
                .ok_or_else(|| Error::Config("pack needs --input <budgets.jsonl>".into()))?;
            let body = fs::read_to_string(&budget_path).map_err(|e| Error::io(&budget_path, e))?;
            let lines: Vec<BudgetLine> = body
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(Error::from))
                .collect::<Result<_>>()?;
            let (plan, report) = pipeline.pack(&lines, group_by_task)?;
            let out = stage_output(&common, &pipeline, "plan.jsonl")?;
            write_plan(&out, &plan)?;
            print_report(&report);
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Report(common) => {
            let pipeline = pipeline_for(&common)?;
            let (records, _) = pipeline.load_input()?;
            let (stats, report) = pipeline.report(&records);
            let dir = pipeline.config.output_dir.clone();
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            fs::write(dir.join("report.txt"), stats.render_text())
                .map_err(|e| Error::io(dir.join("report.txt"), e))?;
            fs::write(dir.join("categories.tsv"), stats.category_table())
                .map_err(|e| Error::io(dir.join("categories.tsv"), e))?;
            print_report(&report);
            print!("{}", stats.render_text());
            Ok(())
        }
        Command::Run(common) => {
            let pipeline = pipeline_for(&common)?;
            let report = pipeline.run()?;
            print!("{}", report.render_text());
            println!("outputs in {}", pipeline.config.output_dir.display());
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(e.exit_code());
    }
}

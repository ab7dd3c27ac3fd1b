use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use homolact::config::{CameraKindName, RunConfig, TauPolicy};
use homolact::dataset::{self, Dataset};
use homolact::error::{Error, Result};
use homolact::{fsutil, pipeline, seqfile};

#[derive(Parser)]
#[command(name = "homolact", version, about = "View-invariant action recognition from 2D joint tracks")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-camera dataset.
    Synth(SynthArgs),
    /// Align two sequence files and dump the path and per-triplet errors.
    Align(AlignArgs),
    /// Learn body-point weights for every action of a dataset.
    Train(TrainArgs),
    /// Classify the held-out sequences with trained and with uniform weights.
    Recognize(RecognizeArgs),
    /// Per-triplet separation statistics of the training alignments.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long, value_enum)]
    camera_kind: Option<KindArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Affine,
    Perspective,
}

#[derive(Clone, Copy, ValueEnum)]
enum TauArg {
    Fixed,
    Percentile,
}

#[derive(Args)]
struct AlignArgs {
    target: PathBuf,
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory for the weight documents.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    tau_policy: Option<TauArg>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    train_cameras: Option<usize>,
}

#[derive(Args)]
struct RecognizeArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    train_cameras: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(a) => {
            set(&mut cfg.paths.dataset, a.out);
            set(&mut cfg.synth.seed, a.seed);
            set(&mut cfg.synth.subjects, a.subjects);
            set(&mut cfg.synth.frames, a.frames);
            set(&mut cfg.synth.rig.count, a.cameras);
            set(
                &mut cfg.synth.rig.kind,
                a.camera_kind.map(|k| match k {
                    KindArg::Affine => CameraKindName::Affine,
                    KindArg::Perspective => CameraKindName::Perspective,
                }),
            );
            cfg.validate()?;
            let d = dataset::synthesize(&cfg, &cfg.paths.dataset)?;
            println!("wrote {} sequences to {}", d.rows.len(), cfg.paths.dataset.display());
        }
        Command::Align(a) => {
            set(&mut cfg.paths.output, a.out);
            set(&mut cfg.align.stride, a.stride);
            cfg.validate()?;
            let model = cfg.body_model()?;
            let t = seqfile::load_sequence(&a.target, &model)?;
            let r = seqfile::load_sequence(&a.reference, &model)?;
            let p = pipeline::align_pair(&cfg, &t, &r)?;
            pipeline::write_alignment(&p, &model, &cfg.paths.output)?;
            println!(
                "{} aligned pairs, total cost {}",
                p.alignment.len(),
                p.alignment.total_cost()
            );
        }
        Command::Train(a) => {
            set(&mut cfg.paths.dataset, a.dataset);
            set(&mut cfg.paths.weights, a.out);
            set(&mut cfg.train.alpha, a.alpha);
            set(&mut cfg.train.beta, a.beta);
            set(
                &mut cfg.train.tau.policy,
                a.tau_policy.map(|t| match t {
                    TauArg::Fixed => TauPolicy::Fixed,
                    TauArg::Percentile => TauPolicy::Percentile,
                }),
            );
            set(&mut cfg.train.tau.value, a.tau);
            set(&mut cfg.protocol.train_cameras, a.train_cameras);
            cfg.validate()?;
            let d = Dataset::load(&cfg.paths.dataset)?;
            let out = pipeline::train(&cfg, &d)?;
            pipeline::write_training(&out, &cfg.paths.weights)?;
            for doc in &out.docs {
                println!(
                    "{}: objective {} -> {} in {} iterations{}",
                    doc.action,
                    doc.objective_uniform,
                    doc.objective,
                    doc.iterations,
                    if doc.converged { "" } else { " (not converged)" }
                );
            }
            let failed = out.unconverged();
            if !failed.is_empty() {
                return Err(Error::NotConverged(failed));
            }
        }
        Command::Recognize(a) => {
            set(&mut cfg.paths.dataset, a.dataset);
            set(&mut cfg.paths.weights, a.weights);
            set(&mut cfg.paths.output, a.out);
            set(&mut cfg.protocol.train_cameras, a.train_cameras);
            cfg.validate()?;
            let d = Dataset::load(&cfg.paths.dataset)?;
            let r = pipeline::recognize(&cfg, &d, &cfg.paths.weights)?;
            pipeline::write_recognition(&r, &cfg.paths.output)?;
            print!("{}", pipeline::summary_text(&r));
        }
        Command::Report(a) => {
            set(&mut cfg.paths.dataset, a.dataset);
            set(&mut cfg.paths.output, a.out);
            cfg.validate()?;
            let model = cfg.body_model()?;
            let d = Dataset::load(&cfg.paths.dataset)?;
            let report = pipeline::significance(&cfg, &d)?;
            let path = cfg.paths.output.join("significance.csv");
            pipeline::write_significance(&report, &model, &path)?;
            fsutil::write_atomic(&cfg.paths.output.join("config.toml"), cfg.to_toml().as_bytes())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

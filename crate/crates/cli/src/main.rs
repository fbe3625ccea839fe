use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pumptrace::{Pipeline, PipelineConfig, PipelineError};
use pumptrace_core::gnn::Architecture;

#[derive(Parser)]
#[command(name = "pumptrace", version, about = "Detect crowd-pump masterminds in signal channels")]
struct Cli {
    /// JSON configuration file; defaults apply to absent fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the model and the synthetic-data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    prices: Option<PathBuf>,
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Rerun stages whose manifests are current.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Gat,
    Sage,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, price series and labels.
    Synth,
    Parse,
    Split,
    Events,
    Flag,
    Graphs,
    Featurize,
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_enum)]
        architecture: Option<Arch>,
    },
    /// Score every graph and print detected masterminds as JSON.
    Infer {
        #[arg(long)]
        threshold: Option<f64>,
    },
    Evaluate,
    /// Run every stage from parse to evaluate.
    All,
}

fn build(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.model.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(p) = &cli.out {
        cfg.out_dir = p.clone();
    }
    if let Some(p) = &cli.corpus {
        cfg.corpus = p.clone();
    }
    if let Some(p) = &cli.prices {
        cfg.prices_dir = p.clone();
    }
    if let Some(p) = &cli.labels {
        cfg.labels = p.clone();
    }
    if let Command::Train { epochs, architecture } = &cli.command {
        if let Some(e) = epochs {
            cfg.model.epochs = *e;
        }
        if let Some(a) = architecture {
            cfg.model.architecture = match a {
                Arch::Gat => Architecture::Gat,
                Arch::Sage => Architecture::GraphSage,
            };
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = build(cli)?;
    let pipeline = Pipeline::new(cfg, cli.force)?;
    let stage = match &cli.command {
        Command::Synth => "synth",
        Command::Parse => "parse",
        Command::Split => "split",
        Command::Events => "events",
        Command::Flag => "flag",
        Command::Graphs => "graphs",
        Command::Featurize => "featurize",
        Command::Train { .. } => "train",
        Command::Infer { threshold } => {
            if let Some(t) = threshold.filter(|t| !(0.0..=1.0).contains(t)) {
                return Err(PipelineError::Config(vec![format!("--threshold must lie in [0, 1], got {t}")]));
            }
            pipeline.run("infer")?;
            let mut out = pipeline.detections()?;
            if let Some(t) = threshold {
                out = pipeline.detections_at(*t)?;
            }
            let text = serde_json::to_string_pretty(&out).expect("detections serialize");
            // a closed pipe (e.g. `| head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            return Ok(());
        }
        Command::Evaluate => "evaluate",
        Command::All => "all",
    };
    if let Some(d) = pipeline.run(stage)? {
        if matches!(cli.command, Command::All) {
            log::info!("{} masterminds detected", d.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PERSEUS_LOG", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

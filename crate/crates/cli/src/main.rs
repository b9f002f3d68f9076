//! `evface`: simulate, encode, export, evaluate and inspect event-camera face data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evface::pipeline;
use evface::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "evface", version, about = "Synthetic event-camera face datasets")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Global seed; each image uses `seed ^ fnv1a64(image_id)`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Images processed concurrently (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// One TBR frame per stream.
    #[arg(long, global = true, conflicts_with = "stream")]
    single_frame: bool,
    /// One TBR frame per `n_bits` windows.
    #[arg(long, global = true)]
    stream: bool,
    /// Resample exported frames to WIDTHxHEIGHT.
    #[arg(long, global = true, value_name = "WxH", value_parser = parse_resize)]
    resize: Option<[u32; 2]>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Move each image along a random trajectory and write its events as EVS1.
    Simulate {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Output directory for `<stem>.evs` and `<stem>.evs.homographies.tsv`.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Turn EVS1 files into TBR images.
    Encode {
        #[arg(required = true)]
        events: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Stream duration in microseconds (default: homography sidecar, else last event + 1).
        #[arg(long)]
        duration_us: Option<u64>,
    },
    /// Build a labeled dataset from a directory of images and landmark files.
    Export {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score a prediction file against an exported dataset.
    Evaluate {
        predictions: PathBuf,
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::All)]
        split: Split,
        /// Where to write the metric table (default: `<predictions>.metrics.tsv`).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summarize an EVS1, label, prediction or manifest file.
    Info { file: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    All,
    Train,
    Val,
}

impl Split {
    fn manifest(self) -> &'static str {
        match self {
            Split::All => "manifest.tsv",
            Split::Train => "train.tsv",
            Split::Val => "val.tsv",
        }
    }
}

fn parse_resize(s: &str) -> std::result::Result<[u32; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let dim = |v: &str| v.trim().parse::<u32>().ok().filter(|&d| d > 0).ok_or_else(|| format!("bad dimension {v:?}"));
    Ok([dim(w)?, dim(h)?])
}

fn effective_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.single_frame {
        cfg.single_frame = true;
    }
    if g.stream {
        cfg.single_frame = false;
    }
    if g.resize.is_some() {
        cfg.resize = g.resize;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn jobs(g: &GlobalArgs) -> usize {
    g.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli.global)?;
    if cli.global.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given (try --help)");
    };
    match command {
        Command::Simulate { images, out } => {
            let mut failed = 0;
            for (path, result) in images.iter().zip(pipeline::simulate_files(&images, &out, &cfg, jobs(&cli.global))?) {
                match result {
                    Ok(s) => println!("{}\tevents: {}\tduration_us: {}", s.image_id, s.events, s.span_us),
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        failed += 1;
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} of {} images failed", images.len());
            }
        }
        Command::Encode { events, out, duration_us } => {
            for path in &events {
                let written = pipeline::encode_file(path, &out, &cfg, duration_us)
                    .with_context(|| format!("encoding {}", path.display()))?;
                println!("{}\tframes: {}", path.display(), written.len());
            }
        }
        Command::Export { corpus, out } => {
            let s = pipeline::export_corpus(&corpus, &out, &cfg, jobs(&cli.global))?;
            println!("samples: {}\ttrain: {}\tval: {}", s.manifest.len(), s.train.len(), s.val.len());
        }
        Command::Evaluate { predictions, dataset, split, report } => {
            let r = pipeline::evaluate_predictions(&predictions, &dataset, split.manifest(), &cfg)?;
            print!("{}", r.to_key_value());
            let report = report.unwrap_or_else(|| with_suffix(&predictions, ".metrics.tsv"));
            fs::write(&report, r.to_table()).with_context(|| format!("writing {}", report.display()))?;
        }
        Command::Info { file } => {
            print!("{}", pipeline::describe(&file)?);
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

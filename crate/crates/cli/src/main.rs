use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use must_core::config::RunConfig;
use must_core::pipeline;
use must_core::Error;

/// Unsupervised AER object recognition: MuST features and an STDP network.
#[derive(Debug, Parser)]
#[command(name = "must", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; unset per-stage seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for plasticity-off stages.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output location: dataset directory for `synth`, model directory for
    /// `train`, report directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Dataset directory or manifest.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic three-class dataset and its manifest.
    Synth,
    /// Report MSD segment boundaries for every recording.
    Segment,
    /// Latency-code every segment and dump the spikes.
    Encode,
    /// Train a network on the dataset and write the model.
    Train,
    /// Score a model, or run the repeated-split harness when no model is given.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Entropy, correlation, histogram and fusion exports.
    Analyze,
}

fn resolve(cli: &Cli) -> must_core::Result<RunConfig> {
    let g = &cli.global;
    let file = match &g.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut overrides = Vec::new();
    if let Some(seed) = g.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    if let Some(data) = &g.data {
        overrides.push(("paths.data".to_string(), data.display().to_string()));
    }
    if let Some(out) = &g.out {
        let (key, value) = match cli.command {
            Command::Synth => ("paths.data", out.clone()),
            Command::Train => ("paths.model", out.join("model.bin")),
            _ => ("paths.report", out.clone()),
        };
        overrides.push((key.to_string(), value.display().to_string()));
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    RunConfig::resolve(file.as_deref(), &overrides)
}

fn run(cli: Cli) -> must_core::Result<()> {
    let cfg = resolve(&cli)?;
    let workers = cli.global.workers;
    pipeline::with_workers(workers, || -> must_core::Result<()> {
        match &cli.command {
            Command::Synth => {
                let manifest = pipeline::cmd_synth(&cfg)?;
                println!("wrote {}", manifest.display());
            }
            Command::Segment => {
                let n = pipeline::cmd_segment(&cfg)?;
                println!("{n} segments -> {}", cfg.paths.report.join("segments.csv").display());
            }
            Command::Encode => {
                let n = pipeline::cmd_encode(&cfg)?;
                println!("{n} spikes -> {}", cfg.paths.report.join("spikes.csv").display());
            }
            Command::Train => {
                let model = pipeline::cmd_train(&cfg)?;
                let silent = model.silent.iter().filter(|s| **s).count();
                println!(
                    "model -> {} ({} learning neurons, {silent} silent)",
                    cfg.paths.model.display(),
                    model.labels.len()
                );
            }
            Command::Eval { model } => {
                let summary = pipeline::cmd_eval(&cfg, model.as_deref())?;
                println!("accuracy,{},{}", summary.mean(), summary.std());
            }
            Command::Analyze => {
                let a = pipeline::cmd_analyze(&cfg)?;
                for (kind, h, _) in &a.entropy {
                    println!("entropy {kind}: {h:.4} bits");
                }
                if let (Some(s), Some(o)) = (a.cc.mean_scale(), a.cc.mean_orientation()) {
                    println!("mean CC: scale {s:.4}, orientation {o:.4}");
                }
            }
        }
        Ok(())
    })?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line interface: train, evaluate, sweep, synth.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::controllers::ControllerKind;
use crate::data::{synth_series, write_csv, Segment};
use crate::error::{Error, Result};
use crate::exec;
use crate::harness::checkpoint::Checkpoint;
use crate::harness::config::ExperimentConfig;
use crate::harness::train::{evaluate_checkpoint, train, write_outputs};
use crate::models::ModelKind;

#[derive(Parser, Debug)]
#[command(
    name = "sparsecast",
    about = "Dynamic sparse training benchmark harness for time series forecasting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Train a model and write report.json, trace.jsonl, predictions.csv
    /// and checkpoint.json.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on one data segment.
    Evaluate(EvaluateArgs),
    /// Grid-sweep the pals hyperparameters lambda and gamma.
    Sweep(SweepArgs),
    /// Emit a synthetic sine+trend+noise series as CSV.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// TOML experiment config; flags below override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// dense | pals | gmp | granet | rigl
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// dlinear | mlp | mini_transformer
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    lookback: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_batches: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    zeta0: Option<f64>,
    #[arg(long)]
    delta_t: Option<u64>,
    #[arg(long)]
    s_min: Option<f64>,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    d_init: Option<f64>,
    /// Final sparsity for gmp/granet, fixed sparsity for rigl.
    #[arg(long)]
    target_sparsity: Option<f64>,
    /// Keep only the last variable of the series.
    #[arg(long)]
    univariate: bool,
    /// Use the 6:2:2 split convention.
    #[arg(long)]
    ett: bool,
    /// Output directory.
    #[arg(long, default_value = "runs/run")]
    out: PathBuf,
}

impl TrainArgs {
    fn build_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = self.controller {
            cfg.controller.kind = v;
        }
        if let Some(v) = self.model {
            cfg.model.kind = v;
        }
        if let Some(v) = self.lookback {
            cfg.model.lookback = v;
        }
        if let Some(v) = self.horizon {
            cfg.model.horizon = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.val_batches {
            cfg.val_batches = Some(v);
        }
        if let Some(v) = self.lambda {
            cfg.controller.lambda = v;
        }
        if let Some(v) = self.gamma {
            cfg.controller.gamma = v;
        }
        if let Some(v) = self.zeta0 {
            cfg.controller.zeta0 = v;
        }
        if let Some(v) = self.delta_t {
            cfg.controller.delta_t = v;
        }
        if let Some(v) = self.s_min {
            cfg.controller.s_min = v;
        }
        if let Some(v) = self.s_max {
            cfg.controller.s_max = v;
        }
        if let Some(v) = self.d_init {
            cfg.controller.d_init = v;
        }
        if let Some(v) = self.target_sparsity {
            cfg.controller.target_sparsity = v;
        }
        if self.univariate {
            cfg.univariate = true;
        }
        if self.ett {
            cfg.ett_mode = true;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluate on a different CSV than the one recorded in the checkpoint.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// train | val | test
    #[arg(long, default_value = "test")]
    segment: String,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Base TOML config (controller must be pals).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated lambda values, e.g. 1.05,1.1,1.2
    #[arg(long, default_value = "1.05,1.1,1.2")]
    lambda: String,
    /// Comma-separated gamma values.
    #[arg(long, default_value = "1.05,1.1,1.2")]
    gamma: String,
    /// Comma-separated seeds; metrics are averaged per grid cell.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "runs/sweep")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    t: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 24.0)]
    period: f64,
    #[arg(long, default_value_t = 0.0)]
    trend: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parse and run. Returns the process exit code: 0 on success, 2 on argument
/// errors, 1 on runtime failures.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own usage text; --help/--version exit cleanly
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.build_config()?;
    let outcome = train(&cfg)?;
    write_outputs(&args.out, &outcome)?;
    println!("{}", outcome.report.summary_line());
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let segment = match args.segment.to_ascii_lowercase().as_str() {
        "train" => Segment::Train,
        "val" => Segment::Val,
        "test" => Segment::Test,
        other => {
            return Err(Error::Config(format!(
                "unknown segment {other:?} (expected train|val|test)"
            )))
        }
    };
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let summary = evaluate_checkpoint(&ckpt, args.dataset.as_deref(), segment)?;
    println!(
        "segment={} windows={} mse={:.6} mae={:.6} nonzero_params={} flops={}",
        summary.segment,
        summary.windows,
        summary.mse,
        summary.mae,
        summary.nonzero_params,
        summary.flops
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = ExperimentConfig::from_file(&args.config)?;
    if base.controller.kind != ControllerKind::Pals {
        return Err(Error::Config(
            "sweep varies lambda/gamma, so the base config controller must be pals".into(),
        ));
    }
    let lambdas: Vec<f64> = parse_list(&args.lambda, "lambda")?;
    let gammas: Vec<f64> = parse_list(&args.gamma, "gamma")?;
    let seeds: Vec<u64> = match &args.seeds {
        Some(s) => parse_list(s, "seed")?,
        None => vec![base.seed],
    };
    if lambdas.is_empty() || gammas.is_empty() || seeds.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }

    let mut cells = Vec::new();
    for &lambda in &lambdas {
        for &gamma in &gammas {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.controller.lambda = lambda;
                cfg.controller.gamma = gamma;
                cfg.seed = seed;
                cfg.name = format!("lambda{lambda}-gamma{gamma}-seed{seed}");
                cells.push(cfg);
            }
        }
    }

    // runs share nothing, so they can fan out
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let results = exec::map_indexed(cells.len(), |i| train(&cells[i]));
    let mut reports = Vec::with_capacity(cells.len());
    for (cfg, result) in cells.iter().zip(results) {
        let outcome = result?;
        write_outputs(&args.out.join(&cfg.name), &outcome)?;
        reports.push(outcome.report);
    }

    println!(
        "{:>8} {:>8} {:>10} {:>10} {:>10} {:>14}",
        "lambda", "gamma", "mse", "mae", "sparsity", "nonzero_params"
    );
    let per_cell = seeds.len();
    let mut summaries = Vec::new();
    for (cell, chunk) in reports.chunks(per_cell).enumerate() {
        let lambda = lambdas[cell / gammas.len()];
        let gamma = gammas[cell % gammas.len()];
        let n = chunk.len() as f64;
        let mse = chunk.iter().map(|r| r.test_mse).sum::<f64>() / n;
        let mae = chunk.iter().map(|r| r.test_mae).sum::<f64>() / n;
        let sparsity = chunk.iter().map(|r| r.checkpoint_sparsity).sum::<f64>() / n;
        let params = chunk.iter().map(|r| r.nonzero_params).sum::<u64>() / per_cell as u64;
        println!("{lambda:>8} {gamma:>8} {mse:>10.6} {mae:>10.6} {sparsity:>10.4} {params:>14}");
        summaries.push(serde_json::json!({
            "lambda": lambda,
            "gamma": gamma,
            "seeds": seeds,
            "mean_test_mse": mse,
            "mean_test_mae": mae,
            "mean_checkpoint_sparsity": sparsity,
            "mean_nonzero_params": params,
        }));
    }
    let sweep_json = serde_json::to_string_pretty(&summaries)
        .map_err(|e| Error::Config(format!("sweep json: {e}")))?;
    let path = args.out.join("sweep.json");
    std::fs::write(&path, sweep_json).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("sweep summary written to {}", path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let series = synth_series(args.seed, args.t, args.m, args.period, args.trend, args.noise);
    write_csv(&series, &args.out)?;
    println!(
        "wrote {} rows x {} variables to {}",
        args.t,
        args.m,
        args.out.display()
    );
    Ok(())
}

//! `qent`: generate datasets, train networks, evaluate them and run the
//! nonlocality study. Every command writes into a run directory with a
//! manifest; each artifact gets a provenance sidecar.
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration, 3 data, 4 training.

mod config;
mod run_dir;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use qent_core::analysis::{default_gamma_grid, default_p_grid, nonlocality_study, EvalReport};
use qent_core::datagen::{load_dataset, save_dataset, Rank};
use qent_core::presets::{fit, generate, predict, test_set, Arch, DatasetPreset, PresetOptions, TestPreset, TestSet};
use qent_core::ErrorKind;
use qent_nnet::{load_model, save_model, History, Model, Optimizer, TrainConfig};
use thiserror::Error;

use run_dir::RunDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qent_core::Error),
    #[error(transparent)]
    Model(#[from] qent_nnet::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let kind = match self {
            CliError::Config(_) => ErrorKind::Config,
            CliError::Core(e) => e.kind(),
            CliError::Model(e) => e.kind(),
            CliError::Io(_) => ErrorKind::Io,
        };
        match kind {
            ErrorKind::Io => 1,
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Training => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "qent", version, about = "Entanglement regression from local measurement statistics")]
struct Cli {
    /// key = value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a preset training dataset.
    GenDataset(GenArgs),
    /// Train a network on a dataset file.
    Train(TrainArgs),
    /// Evaluate a model on a dataset file or a test preset.
    Evaluate(EvalArgs),
    /// Prediction error against CGLMP violation and coherent information.
    AnalyzeNonlocality(NonlocalityArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct GenArgs {
    /// qutrit-warmup, three-qubit-gme, qutrit-general, qudit-mixture,
    /// general-pure or general-mixed.
    #[arg(long)]
    preset: DatasetPreset,
    #[arg(long)]
    seed: u64,
    /// Sample-count multiplier.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Local dimension for the qudit presets.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// full, uniform or a fixed positive rank for random ρ₀.
    #[arg(long, default_value = "full")]
    rank: Rank,
    /// Attempt budget of binned parts, as a multiple of the requested count.
    #[arg(long, default_value_t = 200)]
    attempt_factor: usize,
    /// Fail instead of warning when a bin comes up short.
    #[arg(long, value_parser = clap::builder::BoolishValueParser::new(), default_value = "false", num_args = 0..=1, default_missing_value = "true")]
    strict: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    /// mlp-400-200-100-50, mlp-50-20-10-5, cnn-k2p2 or cnn-k3p3.
    #[arg(long)]
    arch: Arch,
    #[arg(long)]
    data: PathBuf,
    /// Seeds weight initialization, shuffling and the validation split.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// 0 trains on the full dataset in one batch.
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// adam or sgd.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Per-epoch learning-rate multiplier.
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f64,
    #[arg(long, default_value_t = 0.0)]
    val_frac: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    data: Option<PathBuf>,
    /// cglmp-eps-grid, gme-w-wbar or gme-ghz-w.
    #[arg(long)]
    preset: Option<TestPreset>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct NonlocalityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated mixing weights p (default 0, 0.01, …, 1).
    #[arg(long, value_delimiter = ',')]
    p_values: Option<Vec<f64>>,
    /// Comma-separated γ values (default 0.600, 0.605, …, 0.705, √2/2).
    #[arg(long, value_delimiter = ',')]
    gamma_values: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn model_at(path: &Path) -> Result<Model, CliError> {
    if !path.exists() {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("model file {} does not exist", path.display()),
        )));
    }
    Ok(load_model(path)?)
}

fn gen_dataset(a: GenArgs) -> Result<(), CliError> {
    let opts = PresetOptions {
        scale: a.scale,
        d: a.d,
        seed: a.seed,
        rank: a.rank,
        attempt_factor: a.attempt_factor,
    };
    let out = a.out_dir.unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", a.preset, a.seed)));
    let generated = generate(a.preset, &opts)?;
    let mut notes = vec![format!("samples: {}", generated.dataset.len())];
    let mut short = 0;
    for (part, r) in &generated.reports {
        for (b, missing) in r.shortfalls() {
            short += missing;
            notes.push(format!(
                "shortfall: {part} bin [{}, {}) missing {missing} of {}",
                r.edges[b],
                r.edges[b + 1],
                r.requested
            ));
        }
    }
    if short > 0 && a.strict {
        return Err(CliError::Core(qent_core::Error::Data(format!(
            "{short} samples missing from bins; raise --attempt-factor or drop --strict"
        ))));
    }
    let mut run = RunDir::create(&out)?;
    let path = run.artifact("dataset.csv");
    save_dataset(&generated.dataset, &path)?;
    let settings = [
        ("preset", a.preset.to_string()),
        ("seed", a.seed.to_string()),
        ("scale", a.scale.to_string()),
        ("d", a.d.to_string()),
        ("rank", a.rank.to_string()),
        ("attempt-factor", a.attempt_factor.to_string()),
        ("strict", a.strict.to_string()),
    ];
    run.provenance("dataset.csv", "gen-dataset", &settings, &notes)?;
    run.finish()?;
    println!("wrote {} samples to {}", generated.dataset.len(), path.display());
    if short > 0 {
        println!("{short} samples short of the requested bin counts (see provenance)");
    }
    Ok(())
}

fn history_csv(h: &History) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for e in &h.epochs {
        let val = e.val_loss.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.16e},{val}", e.epoch, e.train_loss);
    }
    s
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&a.data)?;
    let optimizer = match a.optimizer.as_str() {
        "adam" => Optimizer::adam(a.lr),
        "sgd" => Optimizer::Sgd { learning_rate: a.lr },
        other => return Err(CliError::Config(format!("optimizer must be adam or sgd, got {other:?}"))),
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: if a.batch_size == 0 { dataset.len().max(1) } else { a.batch_size },
        optimizer,
        seed: a.seed,
        validation_fraction: a.val_frac,
        lr_decay: a.lr_decay,
        ..TrainConfig::default()
    };
    info!("training {} on {} samples", a.arch, dataset.len());
    let (model, history) = fit(a.arch, &dataset, &cfg, a.seed)?;
    let out = a.out_dir.unwrap_or_else(|| PathBuf::from(format!("runs/train-{}-seed{}", a.arch, a.seed)));
    let mut run = RunDir::create(&out)?;
    let path = run.artifact("model.txt");
    save_model(&model, &path)?;
    run.write("history.csv", &history_csv(&history))?;
    let settings = [
        ("arch", a.arch.to_string()),
        ("data", a.data.display().to_string()),
        ("seed", a.seed.to_string()),
        ("epochs", a.epochs.to_string()),
        ("batch-size", a.batch_size.to_string()),
        ("optimizer", a.optimizer.clone()),
        ("lr", a.lr.to_string()),
        ("lr-decay", a.lr_decay.to_string()),
        ("val-frac", a.val_frac.to_string()),
    ];
    let notes = [
        format!("samples: {}", dataset.len()),
        format!("parameters: {}", model.param_count()),
    ];
    run.provenance("model.txt", "train", &settings, &notes)?;
    run.finish()?;
    let last = history.epochs.last();
    println!(
        "final train loss {:.6e}{}; model written to {}",
        last.map_or(f64::NAN, |e| e.train_loss),
        last.and_then(|e| e.val_loss).map(|v| format!(", val loss {v:.6e}")).unwrap_or_default(),
        path.display()
    );
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<(), CliError> {
    let model = model_at(&a.model)?;
    let (set, source): (TestSet, String) = match (&a.preset, &a.data) {
        (Some(p), _) => (test_set(*p)?, p.to_string()),
        (None, Some(d)) => (TestSet::from_dataset(&load_dataset(d)?), d.display().to_string()),
        (None, None) => return Err(CliError::Config("give --data or --preset".into())),
    };
    if set.is_empty() {
        return Err(CliError::Core(qent_core::Error::Data("empty test set".into())));
    }
    let predictions = predict(&model, &set.schema, &set.features)?;
    let report = EvalReport::new(&predictions, &set.labels)?;
    let mut table = format!("{},prediction,exact\n", set.param_name);
    for ((t, p), y) in set.params.iter().zip(&predictions).zip(&set.labels) {
        let _ = writeln!(table, "{t},{p:.16e},{y:.16e}");
    }
    let out = a.out_dir.unwrap_or_else(|| PathBuf::from("runs/evaluate"));
    let mut run = RunDir::create(&out)?;
    run.write("report.txt", &report.to_string())?;
    run.write("predictions.csv", &table)?;
    let mut settings = vec![("model", a.model.display().to_string())];
    match (&a.preset, &a.data) {
        (Some(p), _) => settings.push(("preset", p.to_string())),
        (None, Some(d)) => settings.push(("data", d.display().to_string())),
        _ => {}
    }
    run.provenance("report.txt", "evaluate", &settings, &[format!("source: {source}")])?;
    run.finish()?;
    print!("{report}");
    Ok(())
}

fn analyze(a: NonlocalityArgs) -> Result<(), CliError> {
    let model = model_at(&a.model)?;
    let ps = a.p_values.clone().unwrap_or_else(default_p_grid);
    let gs = a.gamma_values.clone().unwrap_or_else(default_gamma_grid);
    let study = nonlocality_study(&model, &ps, &gs)?;
    let mut table = String::from("p,gamma,coherent_info,violation,prediction,squared_error\n");
    for r in &study.records {
        let _ = writeln!(
            table,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.p, r.gamma, r.coherent_info, r.violation, r.prediction, r.squared_error
        );
    }
    let pcc = format!(
        "points={}\npcc_sqerr_violation={:.6}\npcc_sqerr_ci={:.6}\n",
        study.records.len(),
        study.pcc_error_violation,
        study.pcc_error_ci
    );
    let out = a.out_dir.unwrap_or_else(|| PathBuf::from("runs/nonlocality"));
    let mut run = RunDir::create(&out)?;
    run.write("records.csv", &table)?;
    run.write("pcc.txt", &pcc)?;
    let mut settings = vec![("model", a.model.display().to_string())];
    if a.p_values.is_some() {
        settings.push(("p-values", join(&ps)));
    }
    if a.gamma_values.is_some() {
        settings.push(("gamma-values", join(&gs)));
    }
    run.provenance("records.csv", "analyze-nonlocality", &settings, &[])?;
    run.finish()?;
    print!("{pcc}");
    Ok(())
}

fn run() -> Result<(), CliError> {
    let args = config::expand_args(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    match cli.command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::AnalyzeNonlocality(a) => analyze(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

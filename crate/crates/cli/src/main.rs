use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saa_core::data::MetricsRecord;
use saa_core::report::export_plots;
use saa_core::select::SelectionPolicy;
use saa_core::trainer::{
    ablate, evaluate_checkpoint, inspect_history, resume_observed, run_observed, write_ablation_csv, TrainConfig,
    MANIFEST_FILE,
};
use saa_core::SaaError;

#[derive(Parser, Debug)]
#[command(name = "saa", version, about = "Semi-supervised training with sample-adaptive augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run into <out-dir>/<name>.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Report test accuracy of a checkpoint's averaged parameters.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config describing the dataset; defaults to the manifest of the checkpoint's run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Summarize the loss history in a run's latest checkpoint.
    InspectHistory { run_dir: PathBuf },
    /// One run per selection policy with a shared seed, plus a comparison CSV.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated policies: otsu, all, none, fixed:<τ>, prop:<p>, random:<p>.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
    },
    /// Write accuracy and naive-fraction series (CSV and PNG) for a run.
    ExportPlots { run_dir: PathBuf },
}

/// Config file plus overrides. Flags take precedence over the file.
#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total epochs. Also lowers the warm-up to this value when `--warmup` is absent.
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    policy: Option<String>,
    /// Warm-up epochs before diverse views are used.
    #[arg(long)]
    warmup: Option<u64>,
    /// `synthetic`, `cifar10:<dir>` or `mnist:<dir>`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, env = "SAA_OUT_DIR", default_value = "runs")]
    out_dir: PathBuf,
    /// Augment each half separately when building diverse views.
    #[arg(long)]
    patchwise: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    name: Option<String>,
    /// Any other config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<SaaError> for Failure {
    fn from(e: SaaError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => TrainConfig::load(p).map_err(|e| match e {
            SaaError::Io { .. } => Failure::Config(e.to_string()),
            other => other.into(),
        }),
    }
}

impl RunArgs {
    fn resolve(&self) -> CliResult<TrainConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| overrides.push((k.to_string(), v));
        if let Some(v) = self.seed {
            put("seed", v.to_string());
        }
        if let Some(v) = self.epochs {
            put("epochs", v.to_string());
        }
        if let Some(v) = &self.policy {
            put("policy", v.clone());
        }
        if let Some(v) = self.warmup {
            put("warmup_epochs", v.to_string());
        }
        if let Some(v) = &self.dataset {
            put("dataset", v.clone());
        }
        if self.patchwise {
            put("patchwise", "true".into());
        }
        if let Some(v) = self.threads {
            put("threads", v.to_string());
        }
        if let Some(v) = &self.name {
            put("name", v.clone());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        for (k, v) in &overrides {
            cfg.set(k, v).map_err(|e| Failure::Config(format!("override {k}={v}: {e}")))?;
        }
        if let Some(e) = self.epochs.filter(|_| self.warmup.is_none()) {
            if cfg.warmup_epochs > e {
                cfg.warmup_epochs = e;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_epoch(r: &MetricsRecord) {
    eprintln!(
        "epoch {:>4}  iter {:>7}  acc {:.4}  sup {:.4}  unsup {:.4}  mask {:.3}  naive {:.3}  lr {:.5}",
        r.epoch, r.iteration, r.test_acc, r.sup_loss, r.unsup_loss, r.mask_rate, r.naive_fraction, r.lr
    );
}

fn train(args: &RunArgs, resume: Option<&Path>) -> CliResult {
    let cfg = args.resolve()?;
    let run_dir = args.out_dir.join(&cfg.name);
    let outcome = match resume {
        Some(ckpt) => resume_observed(&cfg, &run_dir, ckpt, &print_epoch)?,
        None => run_observed(&cfg, &run_dir, &print_epoch)?,
    };
    let last = outcome.final_record();
    println!(
        "{}: {} epochs, final accuracy {:.4}, peak {:.4}, naive fraction {:.4}",
        run_dir.display(),
        outcome.records.len(),
        last.test_acc,
        outcome.peak_accuracy(),
        last.naive_fraction
    );
    Ok(())
}

fn eval(checkpoint: &Path, config: Option<&Path>, dataset: Option<&str>) -> CliResult {
    let manifest = checkpoint.parent().and_then(Path::parent).map(|d| d.join(MANIFEST_FILE));
    let config = config.map(Path::to_path_buf).or(manifest.filter(|m| m.exists()));
    let mut cfg = load_config(config.as_deref())?;
    if let Some(d) = dataset {
        cfg.set("dataset", d)?;
    }
    let acc = evaluate_checkpoint(checkpoint, &cfg.dataset_source())?;
    println!("accuracy {acc:.6}");
    Ok(())
}

fn inspect(run_dir: &Path) -> CliResult {
    let s = inspect_history(run_dir)?;
    println!("checkpoint      {}", s.checkpoint.display());
    println!("epochs done     {}", s.epochs_done);
    println!("samples         {} ({} observed)", s.samples, s.observed);
    println!("naive           {} ({:.4})", s.naive, s.naive as f64 / s.samples.max(1) as f64);
    println!("h min/med/max   {:.6} / {:.6} / {:.6}", s.h_min, s.h_median, s.h_max);
    match s.otsu_threshold {
        Some(t) => println!("otsu threshold  {t:.6}"),
        None => println!("otsu threshold  degenerate"),
    }
    let counts: Vec<String> = s.histogram.iter().map(|c| c.to_string()).collect();
    println!("histogram       {}", counts.join(" "));
    Ok(())
}

fn run_ablation(args: &RunArgs, policies: &[String]) -> CliResult {
    let base = args.resolve()?;
    let policies = policies
        .iter()
        .map(|p| p.parse::<SelectionPolicy>())
        .collect::<Result<Vec<_>, _>>()?;
    let root = args.out_dir.join(&base.name);
    let rows = ablate(&base, &policies, &root)?;
    let csv = root.join("ablation.csv");
    write_ablation_csv(&csv, &rows)?;
    println!("{:<34} {:>9} {:>9} {:>7}", "method", "final", "peak", "naive");
    for r in &rows {
        println!("{:<34} {:>9.4} {:>9.4} {:>7.4}", r.method, r.final_acc, r.peak_acc, r.final_naive_fraction);
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn plots(run_dir: &Path) -> CliResult {
    let art = export_plots(run_dir)?;
    println!("{} points", art.points);
    for p in [&art.accuracy_csv, &art.naive_fraction_csv, &art.accuracy_png, &art.naive_fraction_png] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { run, resume } => train(run, resume.as_deref()),
        Command::Eval { checkpoint, config, dataset } => eval(checkpoint, config.as_deref(), dataset.as_deref()),
        Command::InspectHistory { run_dir } => inspect(run_dir),
        Command::Ablate { run, policies } => run_ablation(run, policies),
        Command::ExportPlots { run_dir } => plots(run_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lamc::harness::{self, CalCap, ExperimentConfig, SyntheticShape};
use lamc::RejectionScoring;

#[derive(Parser)]
#[command(name = "lamc", version, about = "Least-ambiguous multi-label classifier experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, calibrate and evaluate over several seeded runs.
    Run(Overrides),
    /// Like `run`, plus a sweep over per-label calibration caps.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated caps, e.g. `1,5,10,25,all`.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,25,all")]
        caps: Vec<CalCap>,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Comma-separated learning rates.
    #[arg(long, value_delimiter = ',')]
    lr_grid: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-label calibration cap (integer or `all`).
    #[arg(long)]
    cal_per_label: Option<CalCap>,
    /// Scoring of rejected labels in the metrics: `demote` or `zero`.
    #[arg(long)]
    rejection: Option<RejectionScoring>,
    /// Dense CSV dataset.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Synthetic data as `n,d,k,cardinality,noise`.
    #[arg(long)]
    synthetic: Option<SyntheticShape>,
    /// Output directory for the reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self) -> lamc::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr_grid {
            cfg.lr_grid = v;
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.cal_per_label {
            cfg.cal_per_label = v;
        }
        if let Some(v) = self.rejection {
            cfg.rejection = v;
        }
        if let Some(v) = self.dataset {
            cfg.dataset = Some(v);
            cfg.synthetic = None;
        }
        if let Some(v) = self.synthetic {
            cfg.synthetic = Some(v);
            cfg.dataset = None;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> lamc::Result<()> {
    let report = match cli.command {
        Command::Run(o) => harness::run_experiment(&o.resolve()?)?,
        Command::Sweep { overrides, caps } => harness::run_with_sweep(&overrides.resolve()?, &caps)?,
    };
    print!("{}", harness::format_table(&report));
    if let Some(dir) = &report.config.out {
        for path in harness::emit_report(&report, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

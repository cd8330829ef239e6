use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use lab::{run_experiment, ConfigError, ExperimentConfig, Kind, RunOptions};

/// Runs one configured experiment and writes its CSV, JSON and SVG reports.
#[derive(Debug, Parser)]
#[command(name = "lab", version)]
struct Cli {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    no_plots: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(match e {
                ConfigError::Io(_) => 1,
                ConfigError::Invalid { .. } => 2,
            });
        }
    };
    if cfg.kind != cli.kind {
        eprintln!("invalid config at `kind`: config says {}, command line says {}", cfg.kind, cli.kind);
        return ExitCode::from(2);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(budget) = cfg.mem_budget {
        if std::env::var_os("LAB_MEM_BUDGET_BYTES").is_none() {
            std::env::set_var("LAB_MEM_BUDGET_BYTES", budget.to_string());
        }
    }
    let out = cli.out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("lab-out"));
    let opts = RunOptions {
        out,
        plots: !cli.no_plots,
        threads: cli.threads,
    };
    match run_experiment(&cfg, &opts) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            if let Some(fit) = &summary.fit {
                println!("fit: p = {:.6}, C = {:.6}, rms = {:.6}", fit.p, fit.c, fit.rms);
            }
            for f in &summary.failures {
                eprintln!("{}: {}", f.label, f.error);
            }
            for u in &summary.uncertified {
                eprintln!("uncertified: {u}");
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

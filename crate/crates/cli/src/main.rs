use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use speckle_cli::{parse_config, run, write_outputs, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "speckle", version, about = "Wavebeam moments in random media")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: ExperimentKind,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to SPECKLE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut cfg: ExperimentConfig = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    cfg.experiment.kind = cli.experiment;
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    let threads = cli.threads.or_else(|| std::env::var("SPECKLE_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.path));
    let record = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match write_outputs(&record, &cfg, &out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: cannot write results: {e}");
            ExitCode::from(1)
        }
    }
}

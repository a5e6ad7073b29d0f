use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use diland_sim::config::{parse_with_overrides, preset, Overrides};
use diland_sim::run::{pool_size, run_experiment};
use diland_sim::{EXIT_CONFIG, EXIT_OK, EXIT_TRIAL_FAILED};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Fig1,
    Fig2,
}

/// Monte Carlo runner for distance-only sensor localization experiments.
#[derive(Debug, Parser)]
#[command(name = "diland-sim", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// First seed; trials use consecutive seeds from here.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials (seeds) per algorithm.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of the configured algorithm labels.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Iterations per trial.
    #[arg(long)]
    iters: Option<u64>,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };

    let doc = match (&cli.config, cli.preset) {
        (Some(path), _) => match fs::read_to_string(path) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return code(EXIT_CONFIG);
            }
        },
        (None, Some(p)) => preset(match p {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
        })
        .expect("preset exists")
        .to_string(),
        (None, None) => unreachable!("clap requires one of --config/--preset"),
    };

    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out,
        algorithms: cli.algorithms,
        iters: cli.iters,
    };
    let cfg = match parse_with_overrides(&doc, &overrides) {
        Ok(c) => c,
        Err(errs) => {
            for e in &errs.0 {
                eprintln!("config error: {e}");
            }
            return code(EXIT_CONFIG);
        }
    };
    let threads = match pool_size() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return code(EXIT_CONFIG);
        }
    };

    match run_experiment(&cfg, threads) {
        Ok(summary) => {
            for alg in &summary.algorithms {
                let last = alg.checkpoints.last().and_then(|c| c.mean_mse);
                println!(
                    "{}: {} ok, {} failed, mean MSE(T) = {}, verdict = {}",
                    alg.name,
                    alg.trials_ok,
                    alg.trials_failed,
                    last.map_or("n/a".into(), |v| format!("{v:.4e}")),
                    alg.verdict.map_or("n/a".into(), |v| format!("{v:?}").to_lowercase()),
                );
            }
            println!("wrote {}", cfg.output.dir.display());
            if summary.all_ok() {
                code(EXIT_OK)
            } else {
                for f in &summary.failed_trials {
                    eprintln!("trial failed: {} seed {}: {}", f.algorithm, f.seed, f.error);
                }
                code(EXIT_TRIAL_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(EXIT_CONFIG)
        }
    }
}

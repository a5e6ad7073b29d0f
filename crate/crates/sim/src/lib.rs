//! Experiment runner for the `diland` localization library: TOML configs and presets,
//! seeded trials on a worker pool, CSV trajectories and a JSON summary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_with_overrides, preset, ConfigErrors, ExperimentConfig, Overrides};
pub use run::{run_experiment, simulate, Outcome, RunError, Summary};

/// Process exit status: every trial finished.
pub const EXIT_OK: i32 = 0;
/// Process exit status: the configuration or the output setup is unusable.
pub const EXIT_CONFIG: i32 = 1;
/// Process exit status: at least one trial failed; see `failed_trials` in the summary.
pub const EXIT_TRIAL_FAILED: i32 = 2;

//! Batch experiments on top of `bloch-core`: TOML configs, the
//! frame → propagation → Bloch → diagnostics pipeline, CSV/JSON output and
//! γ sweeps.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod run;

pub use config::{ExperimentConfig, IcChoice, NormChoice, Route};
pub use error::{CliError, Result};
pub use output::{RunSummary, Status};
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutput};
pub use run::{execute, run_experiment, sweep, RunResult, SweepResult};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "BLOCH_OUTPUT_DIR";

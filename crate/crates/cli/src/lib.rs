//! Config-driven experiment runner: benchmark generation, method dispatch,
//! seed sweeps, result tables and the theory checks' command-line front end.

pub mod config;
pub mod error;
pub mod gen;
pub mod results;
pub mod run;
pub mod theory_cmd;

pub use config::{ExperimentConfig, Method, Preset};
pub use error::CliError;
pub use results::{ResultTable, SeedResult};
pub use run::{run_experiment, RunOptions, RunOutput};

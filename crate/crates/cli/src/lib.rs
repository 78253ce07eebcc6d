//! Configuration, orchestration and output for speckle experiments.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use output::{export_plotdata, write_outputs};
pub use run::{run, ResultRecord, Row, RunError};

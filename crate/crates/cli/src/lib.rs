//! Experiment runner: configuration, image datasets on disk, result tables
//! and the end-to-end Gaussian, pose and part-labeling experiments.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod table;

pub use config::{ExperimentConfig, Scale, Task};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, RunOutput, Summary};
pub use table::{emit_figure_data, Provenance, ResultTable};

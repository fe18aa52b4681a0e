//! Experiment layer: configs, seeded ensembles, ε sweeps, slope fits,
//! reports and the oracles behind `boa-lab oracle`.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod oracle;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
pub use report::{ScalingReport, Status};
pub use run::{exit_code, run_experiment};

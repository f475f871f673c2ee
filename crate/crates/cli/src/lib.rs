//! Experiment harness: configuration, reproducible random suites, and the
//! `sparsedom` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod instances;
pub mod suite;

pub use commands::{run, Cli, Command};
pub use config::{ExperimentConfig, GridConfig, OutputConfig, Suite};
pub use error::{CliError, Result};
pub use instances::{instance_rng, lattice_instance, MartingaleInstance};
pub use suite::{
    certify_lattice, certify_martingale, run_suite, write_report, InstanceRow, Operator, Rows, SuiteReport,
    SummaryRow, Witness,
};

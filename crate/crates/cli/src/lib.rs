//! Scenario runner behind the `mesoscope` binary.

pub mod config;
pub mod output;
pub mod scenarios;
pub mod sweep;

pub use config::{validate_config, validate_with, ConfigError, ConfigErrors, Scenario, ScenarioConfig};
pub use output::{run_to_dir, RunReport, EXIT_CONFIG, EXIT_OK, EXIT_UNTRUSTED};

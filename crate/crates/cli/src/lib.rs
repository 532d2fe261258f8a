//! Experiment runner for the `stochlie` library: the field DSL, strict
//! configuration files and the built-in acceptance experiments.

pub mod config;
pub mod dsl;
pub mod experiments;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use dsl::{parse_field_dsl, DslError, FieldDslDocument};
pub use experiments::{run_experiment, Experiment, ExperimentError, Outcome};

//! Scenario files, runs, sweeps and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{CheckKind, DataConfig, ScenarioConfig, SCHEMA};
pub use run::{run_and_write, run_scenario, write_outputs, CheckResult, MorawetzRow, ScenarioOutcome, SummaryReport};
pub use sweep::{fit_constant, sweep, ConstantFit, SweepAxis, SweepReport};

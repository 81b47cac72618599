//! JSON-configured runs: parse a [`ScenarioConfig`], dispatch to the owning
//! module, collect named checks into a [`RunReport`] and write CSV/JSON files.

mod config;
mod output;
mod presets;
mod report;
mod run;

pub use config::{
    BracketSpec, ConvergenceStudy, CrossCheckSpec, DecaySpec, EnsembleConfig, Entry, EquilibriumAnalysis,
    EvolveAnalysis, HamiltonianSpec, LarmorSweep, OutputFormat, OutputSpec, ScenarioConfig, ScenarioKind,
    StabilityGrid, StateSpec, SystemSpec, ThermoSpec,
};
pub use output::{emit_outputs, plot_csv, resolve_output_dir, trajectory_csv, Summary, SUMMARY_FILE, TRAJECTORY_FILE};
pub use presets::{preset, preset_names, PRESETS};
pub use report::{Check, Comparison, PlotData, RunReport, ScenarioRun};
pub use run::{check_config, run_scenario};

use crate::error::NvneError;

/// Process exit status for a finished or failed run.
pub fn exit_code(outcome: &Result<RunReport, NvneError>) -> i32 {
    match outcome {
        Ok(report) if report.passed => 0,
        Ok(_) => 1,
        Err(e) if e.is_numeric() => 3,
        Err(_) => 2,
    }
}

//! Experiment harness: configuration, seeded parallel runs, grid search
//! and CSV/SVG output.

mod config;
mod experiment;
mod grid;
mod output;

pub use config::{control_tolerance, EnvironmentName, ExperimentConfig, Instance, Problem, DEFAULT_GAMMA};
pub use experiment::{run_experiment, single_run, Aggregate, ExperimentOutput, RunRecord};
pub use grid::{emit_grid_csv, grid_search, GridResult, GridRow, GridSearchConfig, GridSpec};
pub use output::{
    emit_aggregate_csv, emit_csv, emit_plan_csv, emit_instances_csv, emit_svg, read_aggregate_csv, read_trace_csv, write_plan_csv, TraceRow,
};

use std::path::Path;

use crate::error::Result;

/// Writes `runs.csv`, `aggregate.csv` and, for several instances,
/// `instances.csv` into `dir`; `summary.svg` when `svg` is set.
pub fn write_experiment(out: &ExperimentOutput, dir: &Path, svg: bool) -> Result<()> {
    let multi = out.instances.len() > 1;
    emit_csv(&out.runs, &dir.join("runs.csv"), multi)?;
    emit_aggregate_csv(&out.aggregate, &dir.join("aggregate.csv"))?;
    if multi {
        emit_instances_csv(&out.instances, &dir.join("instances.csv"))?;
    }
    if svg {
        emit_svg(&[("mean error", &out.aggregate)], &dir.join("summary.svg"))?;
    }
    Ok(())
}

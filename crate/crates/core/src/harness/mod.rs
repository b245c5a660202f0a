//! Monte Carlo campaign execution, aggregation, and result emission.

mod report;
mod sweep;

pub use report::{emit_csv, emit_plot, parse_csv, PlotMetric};
pub use sweep::{
    evaluate, prepare, run_parameter_study, run_sweep, ResultRecord, StudyAxis, TrainedModels,
};

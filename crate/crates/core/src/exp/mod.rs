//! Declarative experiment layer: configs in, CSV tables and SVG figures out.
//!
//! `registry()` lists every runnable experiment; `run_experiment` executes
//! one and `emit_outputs` writes its tables. Identical configs and seeds
//! produce byte-identical CSV output up to the volatile `wall_time_ms`
//! metadata line.

pub mod config;
mod euclidean;
pub mod registry;
mod setup;
mod sphere_exp;
pub mod svg;
pub mod table;

pub use config::ExperimentConfig;
pub use registry::{
    check_config, emit_outputs, find, registry, run_experiment, ExperimentEntry,
    ExperimentOutput, NamedTable,
};
pub use svg::PlotSpec;
pub use table::{linear_fit, mean_and_se, ResultTable};

//! The experiment registry: every verifiable claim maps to exactly one
//! named, configurable, reproducible experiment.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::svg::{render_line_chart, PlotSpec};
use super::table::ResultTable;
use super::{euclidean, sphere_exp};

/// A result table plus its emission details.
#[derive(Debug, Clone)]
pub struct NamedTable {
    pub name: String,
    pub table: ResultTable,
    pub plot: Option<PlotSpec>,
    pub json_summary: Option<String>,
}

impl NamedTable {
    pub fn new(name: &str, table: ResultTable) -> Self {
        NamedTable { name: name.to_string(), table, plot: None, json_summary: None }
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    pub fn with_json_summary(mut self, json: String) -> Self {
        self.json_summary = Some(json);
        self
    }
}

/// Everything an experiment produced.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<NamedTable>,
}

impl ExperimentOutput {
    pub fn single(table: NamedTable) -> Self {
        ExperimentOutput { tables: vec![table] }
    }

    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name).map(|t| &t.table)
    }
}

type Runner = fn(&ExperimentConfig) -> Result<ExperimentOutput>;

pub struct ExperimentEntry {
    pub name: &'static str,
    pub summary: &'static str,
    runner: Runner,
}

/// The full registry. Order is the presentation order of `list`.
pub fn registry() -> &'static [ExperimentEntry] {
    &[
        ExperimentEntry {
            name: "oracle_linear_gaussian",
            summary: "Euler endpoint error vs the closed-form linear-Gaussian flow at h and h/2",
            runner: euclidean::oracle_linear_gaussian,
        },
        ExperimentEntry {
            name: "oracle_geometric",
            summary: "Euler pathwise relative error vs the closed-form geometric flow",
            runner: euclidean::oracle_geometric,
        },
        ExperimentEntry {
            name: "jacobian_decay",
            summary: "mean-square decay of the flow Jacobian under the drift-spectral condition",
            runner: euclidean::jacobian_decay,
        },
        ExperimentEntry {
            name: "pathwise_contraction",
            summary: "almost-sure gap contraction of the synchronous two-point coupling",
            runner: euclidean::pathwise_contraction,
        },
        ExperimentEntry {
            name: "w2_contraction",
            summary: "Wasserstein-2 contraction rate of the nonlinear semigroup, exact laws",
            runner: euclidean::w2_contraction,
        },
        ExperimentEntry {
            name: "eps_derivative_decay",
            summary: "almost-sure envelope of the interpolation-derivative (tangent) flow",
            runner: euclidean::eps_derivative_decay,
        },
        ExperimentEntry {
            name: "measure_sensitivity",
            summary: "flow sensitivity to the initial law: the t e^(-lambda t) hump profile",
            runner: euclidean::measure_sensitivity,
        },
        ExperimentEntry {
            name: "particle_jacobian_decay",
            summary: "spectral-norm decay of the interacting-system Jacobian",
            runner: euclidean::particle_jacobian_decay,
        },
        ExperimentEntry {
            name: "gibbs_longrun",
            summary: "long-run particle variance vs the closed-form Gibbs covariance",
            runner: euclidean::gibbs_longrun,
        },
        ExperimentEntry {
            name: "chaos_scaling",
            summary: "mean-square particle-vs-nonlinear gap across system sizes (1/N law)",
            runner: euclidean::chaos_scaling,
        },
        ExperimentEntry {
            name: "chaos_uniform_in_time",
            summary: "time-uniform saturation of the chaos gap at a fixed system size",
            runner: euclidean::chaos_uniform_in_time,
        },
        ExperimentEntry {
            name: "condition_scan",
            summary: "sampled rate estimates for the four contraction conditions",
            runner: euclidean::condition_scan,
        },
        ExperimentEntry {
            name: "sphere_brownian",
            summary: "sphere Brownian motion long-run moments vs the uniform measure",
            runner: sphere_exp::sphere_brownian,
        },
        ExperimentEntry {
            name: "sphere_contraction",
            summary: "parallel-coupled contraction on the sphere vs the sampled-rate envelope",
            runner: sphere_exp::sphere_contraction,
        },
        ExperimentEntry {
            name: "sphere_chaos",
            summary: "propagation of chaos on the sphere with the curvature-corrected envelope",
            runner: sphere_exp::sphere_chaos,
        },
        ExperimentEntry {
            name: "index_bound_table",
            summary: "closed-form index bound on a (rho, kappa) grid vs the linear bound",
            runner: euclidean::index_bound_table,
        },
    ]
}

pub fn find(name: &str) -> Result<&'static ExperimentEntry> {
    registry()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Config(format!("unknown experiment '{name}'")))
}

/// Validates a config without running it: the experiment must exist and all
/// numeric knobs must parse (positivity is re-checked by each runner on
/// launch, using the same accessors).
pub fn check_config(cfg: &ExperimentConfig) -> Result<()> {
    find(&cfg.experiment)?;
    for key in ["h", "t_end", "cap", "sigma0", "sphere_beta", "eps"] {
        let v = cfg.get_f64(key, 1.0)?;
        if !v.is_finite() {
            return Err(Error::Config(format!("key '{key}' is not finite")));
        }
    }
    for key in ["replicas", "n_particles", "m_cloud", "m_ref", "n_samples", "record_every"] {
        cfg.get_usize(key, 1)?;
    }
    cfg.get_usize_list("n_list", &[8])?;
    Ok(())
}

/// Runs the named experiment and stamps reproducibility metadata onto every
/// table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let entry = find(&cfg.experiment)?;
    let started = Instant::now();
    let mut output = (entry.runner)(cfg)?;
    let elapsed = started.elapsed().as_millis();
    for named in output.tables.iter_mut() {
        let mut stamped = Vec::new();
        stamped.push(("experiment".to_string(), entry.name.to_string()));
        stamped.push(("config".to_string(), cfg.echo()));
        stamped.push(("code_version".to_string(), env!("CARGO_PKG_VERSION").to_string()));
        stamped.push(("wall_time_ms".to_string(), elapsed.to_string()));
        stamped.extend(named.table.metadata.drain(..));
        named.table.metadata = stamped;
    }
    Ok(output)
}

/// Writes one CSV per table (plus JSON summaries and SVG plots) into
/// `out_dir`; returns the created paths.
pub fn emit_outputs(
    output: &ExperimentOutput,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    plots: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for named in &output.tables {
        let base = format!("{}_{}", cfg.experiment, named.name);
        let csv_path = out_dir.join(format!("{base}.csv"));
        std::fs::write(&csv_path, named.table.to_csv())?;
        written.push(csv_path);
        if let Some(json) = &named.json_summary {
            let json_path = out_dir.join(format!("{base}.json"));
            std::fs::write(&json_path, json)?;
            written.push(json_path);
        }
        if plots && !named.table.rows.is_empty() {
            if let Some(spec) = &named.plot {
                if let Some(svg) = render_line_chart(&named.table, spec) {
                    let svg_path = out_dir.join(format!("{base}.svg"));
                    std::fs::write(&svg_path, svg)?;
                    written.push(svg_path);
                }
            }
        }
    }
    Ok(written)
}

//! Experiments on Euclidean state spaces.
//!
//! Each runner maps one registry entry to a result table (plus optional
//! plot). Replicas fan out over the worker pool; every replica derives its
//! randomness from `(seed, replica, role)` substreams, so the tables do not
//! depend on the schedule.

use crate::conditions::{estimate_lambda, ConditionKind, SampleBox};
use crate::engine::{
    run_chaos_coupling, run_coupled_pair, run_eps_derivative, run_flow, run_flow_with_jacobian,
    run_particle_jacobian, run_particles, CoupledSources, MeasureFlowSource,
};
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::models::{make_geometric, make_linear_gaussian};
use crate::oracles::{
    geometric_exact_flow, gibbs_reference, linear_gaussian_exact_flow, linear_gaussian_law,
    w2_1d, w2_gaussian, EmpiricalMeasure, GaussianMeasure,
};
use crate::parallel;
use crate::rng::{self, NoiseStream};

use super::config::ExperimentConfig;
use super::registry::{ExperimentOutput, NamedTable};
use super::setup::{
    default_linear_gaussian_matrices, default_linear_gaussian_mu0, gaussian_cloud,
    langevin_from_config, langevin_from_config_dim,
};
use super::svg::PlotSpec;
use super::table::{linear_fit, mean_and_se, ResultTable};

/// Strong endpoint error of the Euler scheme against the closed-form
/// linear-Gaussian flow, at step `h` and `h/2`, per replica.
pub fn oracle_linear_gaussian(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (a1, a2, r) = default_linear_gaussian_matrices();
    let model = make_linear_gaussian(a1.clone(), a2.clone(), r.clone())?;
    let mu0 = default_linear_gaussian_mu0();
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 1.0)?)?;
    let replicas = cfg.get_usize("replicas", 200)?.max(1);
    let x0 = vec![1.0, 0.0];

    let rows: Vec<Result<Vec<f64>>> = parallel::map_indexed(replicas, |rep| {
        let mut errs = [0.0; 2];
        for (slot, step) in [h, h / 2.0].into_iter().enumerate() {
            let mut noise =
                NoiseStream::new(cfg.seed, rng::substream_id(rng::role::FLOW, rep as u64, slot as u64));
            let mut src = MeasureFlowSource::exact_linear_gaussian(&model, &mu0)?;
            let run = run_flow(&model, &mut src, x0.clone(), 0.0, t_end, step, &mut noise)?;
            let oracle = linear_gaussian_exact_flow(
                &a1, &a2, &r, &mu0, &x0, 0.0, t_end, step, &run.increments,
            )?;
            let sim = run.path.last().unwrap();
            errs[slot] = sim
                .iter()
                .zip(&oracle.endpoint)
                .map(|(s, e)| (s - e) * (s - e))
                .sum::<f64>()
                .sqrt();
        }
        Ok(vec![rep as f64, errs[0], errs[1]])
    });

    let mut table = ResultTable::new(&["replica", "err_h", "err_half"]);
    for row in rows {
        table.push_row(row?);
    }
    let (mean_h, _) = mean_and_se(&table.column("err_h").unwrap());
    let (mean_half, _) = mean_and_se(&table.column("err_half").unwrap());
    table.add_metadata("mean_err_h", format!("{mean_h:.16e}"));
    table.add_metadata("mean_err_half", format!("{mean_half:.16e}"));
    table.add_metadata("refinement_ratio", format!("{:.16e}", mean_h / mean_half));
    Ok(ExperimentOutput::single(NamedTable::new("errors", table)))
}

/// Pathwise relative error of the Euler scheme against the closed-form
/// geometric flow.
pub fn oracle_geometric(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let a1 = cfg.get_f64("geo_a1", -1.0)?;
    let a2 = cfg.require_positive("geo_a2", cfg.get_f64("geo_a2", 1.0)?)?;
    let sigma0 = cfg.require_positive("geo_sigma0", cfg.get_f64("geo_sigma0", 0.5)?)?;
    let model = make_geometric(a1, a2, sigma0)?;
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-4)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 1.0)?)?;
    let replicas = cfg.get_usize("replicas", 100)?.max(1);
    let x0 = cfg.require_positive("x0", cfg.get_f64("x0", 1.0)?)?;
    let mu0_mean = cfg.require_positive("mu0_mean", cfg.get_f64("mu0_mean", 1.0)?)?;

    let rows: Vec<Result<Vec<f64>>> = parallel::map_indexed(replicas, |rep| {
        let mut noise =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::FLOW, rep as u64, 0));
        let mut src = MeasureFlowSource::exact_geometric(&model, mu0_mean)?;
        let run = run_flow(&model, &mut src, vec![x0], 0.0, t_end, h, &mut noise)?;
        let total_increment: f64 = run.increments.iter().map(|dw| dw[0]).sum();
        let exact =
            geometric_exact_flow(a1, a2, sigma0, mu0_mean, x0, 0.0, t_end, total_increment)?;
        let sim = run.path.last().unwrap()[0];
        let rel = (sim - exact).abs() / exact.abs().max(1e-300);
        Ok(vec![rep as f64, sim, exact, rel, run.clamp_events as f64])
    });

    let mut table =
        ResultTable::new(&["replica", "endpoint_sim", "endpoint_exact", "rel_err", "clamp_events"]);
    for row in rows {
        table.push_row(row?);
    }
    let (mean_rel, _) = mean_and_se(&table.column("rel_err").unwrap());
    table.add_metadata("mean_rel_err", format!("{mean_rel:.16e}"));
    Ok(ExperimentOutput::single(NamedTable::new("errors", table)))
}

/// Replica mean of the squared Frobenius norm of the flow Jacobian for the
/// interacting Langevin model, against the `d e^(-2 lambda t)` envelope.
pub fn jacobian_decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _pair) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 5.0)?)?;
    let replicas = cfg.get_usize("replicas", 200)?.max(1);
    let m_cloud = cfg.get_usize("m_cloud", 32)?.max(1);
    let record_every = cfg.get_usize("record_every", 50)?.max(1);
    let lambda = cfg.require_positive("lambda_envelope", cfg.get_f64("lambda_envelope", 1.0)?)?;

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let mut init =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, rep as u64, 0));
        let cloud = gaussian_cloud(d, m_cloud, &mut init);
        let mut x0 = vec![0.0; d];
        init.fill_normal(&mut x0);
        let mut src = MeasureFlowSource::particle_cloud(cloud, cfg.seed, rep as u64)?;
        let mut noise =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::FLOW, rep as u64, 0));
        let run = run_flow_with_jacobian(
            &model, &mut src, x0, 0.0, t_end, h, &mut noise, record_every,
        )?;
        Ok((run.times, run.frobenius_sq))
    });

    let mut times: Option<Vec<f64>> = None;
    let mut acc: Vec<f64> = Vec::new();
    for r in runs {
        let (t, f) = r?;
        match &times {
            None => {
                times = Some(t);
                acc = f;
            }
            Some(_) => {
                for (a, v) in acc.iter_mut().zip(&f) {
                    *a += v;
                }
            }
        }
    }
    for a in acc.iter_mut() {
        *a /= replicas as f64;
    }
    let times = times.unwrap();

    let mut table = ResultTable::new(&["t", "mean_frob_sq", "envelope"]);
    for (t, f) in times.iter().zip(&acc) {
        table.push_row(vec![*t, *f, d as f64 * (-2.0 * lambda * t).exp()]);
    }
    table.add_metadata("lambda_envelope", lambda);
    let plot = PlotSpec::line("Jacobian mean-square decay", "t", &["mean_frob_sq", "envelope"])
        .semilog_y();
    Ok(ExperimentOutput::single(NamedTable::new("decay", table).with_plot(plot)))
}

/// Pathwise contraction of the synchronous two-point coupling: the worst
/// gap ratio against `e^(-lambda t)` over replicas, per grid time.
pub fn pathwise_contraction(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _pair) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 5.0)?)?;
    let replicas = cfg.get_usize("replicas", 200)?.max(1);
    let m_cloud = cfg.get_usize("m_cloud", 32)?.max(1);
    let record_every = cfg.get_usize("record_every", 50)?.max(1);
    let lambda = cfg.require_positive("lambda_envelope", cfg.get_f64("lambda_envelope", 1.0)?)?;

    // Unit initial separation along the first coordinate.
    let mut x0 = vec![0.0; d];
    let mut y0 = vec![0.0; d];
    x0[0] = 0.5;
    y0[0] = -0.5;

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let mut init =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, rep as u64, 0));
        let cloud = gaussian_cloud(d, m_cloud, &mut init);
        let mut src = MeasureFlowSource::particle_cloud(cloud, cfg.seed, rep as u64)?;
        let mut noise =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::FLOW, rep as u64, 0));
        let run = run_coupled_pair(
            &model,
            CoupledSources::Shared(&mut src),
            x0.clone(),
            y0.clone(),
            0.0,
            t_end,
            h,
            &mut noise,
        )?;
        let gaps = run.gaps();
        // Subsample onto the recording grid.
        let mut times = Vec::new();
        let mut ratios = Vec::new();
        for (idx, (t, g)) in run.times.iter().zip(&gaps).enumerate() {
            if idx % record_every == 0 || idx + 1 == run.times.len() {
                times.push(*t);
                ratios.push(g / (-lambda * t).exp());
            }
        }
        Ok((times, ratios))
    });

    let mut times: Option<Vec<f64>> = None;
    let mut worst: Vec<f64> = Vec::new();
    for r in runs {
        let (t, ratios) = r?;
        match &times {
            None => {
                times = Some(t);
                worst = ratios;
            }
            Some(_) => {
                for (w, v) in worst.iter_mut().zip(&ratios) {
                    *w = w.max(*v);
                }
            }
        }
    }
    let times = times.unwrap();
    let mut table = ResultTable::new(&["t", "max_gap_ratio"]);
    for (t, w) in times.iter().zip(&worst) {
        table.push_row(vec![*t, *w]);
    }
    let sup = worst.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    table.add_metadata("sup_ratio", format!("{sup:.16e}"));
    table.add_metadata("lambda_envelope", lambda);
    let plot = PlotSpec::line("Pathwise contraction ratio", "t", &["max_gap_ratio"]);
    Ok(ExperimentOutput::single(NamedTable::new("ratios", table).with_plot(plot)))
}

/// Wasserstein contraction of the nonlinear semigroup for the
/// linear-Gaussian model, with exact law propagation (no Monte Carlo).
pub fn w2_contraction(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let d = 2;
    let a1 = SquareMatrix::zeros(d);
    let a2 = SquareMatrix::identity(d).scale(-1.0);
    let r = SquareMatrix::identity(d);
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 3.0)?)?;
    let h = cfg.require_positive("h", cfg.get_f64("h", 0.05)?)?;
    let mu0 = GaussianMeasure::new(vec![0.0, 0.0], SquareMatrix::identity(d))?;
    let mu1 = GaussianMeasure::new(vec![3.0, 0.0], SquareMatrix::diagonal(&[2.0, 0.5]))?;

    let steps = crate::engine::step_count(0.0, t_end, h)?;
    let mut table = ResultTable::new(&["t", "w2"]);
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for k in 0..=steps {
        let t = k as f64 * h;
        let law0 = linear_gaussian_law(&a1, &a2, &r, &mu0, t)?;
        let law1 = linear_gaussian_law(&a1, &a2, &r, &mu1, t)?;
        let w2 = w2_gaussian(&law0, &law1)?;
        table.push_row(vec![t, w2]);
        if w2 > 0.0 {
            ts.push(t);
            logs.push(w2.ln());
        }
    }
    let (slope, intercept) = linear_fit(&ts, &logs);
    table.add_metadata("fitted_rate", format!("{:.16e}", -slope));
    let w2_0 = table.rows[0][1];
    let envelope: Vec<(f64, f64)> =
        table.rows.iter().map(|row| (row[0], w2_0 * (-row[0]).exp())).collect();
    let _ = intercept;
    let plot = PlotSpec::line("Wasserstein-2 contraction", "t", &["w2"])
        .semilog_y()
        .with_envelope("exp(-t) reference", envelope);
    Ok(ExperimentOutput::single(NamedTable::new("w2", table).with_plot(plot)))
}

/// Almost-sure envelope for the interpolation-derivative flow with a
/// bounded-Hessian interaction.
pub fn eps_derivative_decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, pair) = langevin_from_config(cfg, "quadratic(1.0)", "cosine_well(0.25)")?;
    let d = model.dim();
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 3.0)?)?;
    let m_cloud = cfg.get_usize("m_cloud", 256)?.max(2);
    let eps = cfg.get_f64("eps", 0.5)?;
    let record_every = cfg.get_usize("record_every", 25)?.max(1);
    let shift = 1.0; // |Z1 - Z0| per path, comonotone

    let grad_bound = pair.interaction.hessian_sup.ok_or_else(|| {
        Error::invalid("the envelope needs an interaction with a bounded Hessian")
    })?;

    // Sampled condition rates on a box wide enough to contain the Hessian
    // minimizers of the cosine interaction.
    let domain = SampleBox::cube(d, -4.0, 4.0);
    let n_samples = cfg.get_usize("n_samples", 4000)?.max(1);
    let lambda_a =
        estimate_lambda(&model, ConditionKind::FlowA, &domain, n_samples, cfg.seed)?.lambda_estimate;
    let lambda_c =
        estimate_lambda(&model, ConditionKind::PairC, &domain, n_samples, cfg.seed)?.lambda_estimate;
    let lambda = lambda_a.min(lambda_c);

    let mut init = NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, 0, 0));
    let make_pairs = |stream: &mut NoiseStream| -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..m_cloud)
            .map(|_| {
                let mut z0 = vec![0.0; d];
                stream.fill_normal(&mut z0);
                let z1: Vec<f64> = z0.iter().map(|v| v + shift).collect();
                (z0, z1)
            })
            .collect()
    };
    let x_pairs = make_pairs(&mut init);
    let y_pairs = make_pairs(&mut init);

    let run = run_eps_derivative(
        &model, &x_pairs, &y_pairs, eps, 0.0, t_end, h, cfg.seed, 0, record_every,
    )?;

    let mut table = ResultTable::new(&["t", "sup_tangent", "envelope", "ratio", "y_mean_sq"]);
    let mut sup_ratio = f64::NEG_INFINITY;
    for ((t, norms), y_ms) in run.times.iter().zip(&run.x_tangent_norms).zip(&run.y_mean_sq) {
        let sup = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let envelope =
            (-lambda_a * t).exp() * shift + t * (-lambda * t).exp() * grad_bound * shift;
        let ratio = sup / envelope;
        sup_ratio = sup_ratio.max(ratio);
        table.push_row(vec![*t, sup, envelope, ratio, *y_ms]);
    }
    table.add_metadata("lambda_a", format!("{lambda_a:.16e}"));
    table.add_metadata("lambda_c", format!("{lambda_c:.16e}"));
    table.add_metadata("grad_bound", format!("{grad_bound:.16e}"));
    table.add_metadata("sup_ratio", format!("{sup_ratio:.16e}"));
    let plot = PlotSpec::line(
        "Interpolation-derivative envelope",
        "t",
        &["sup_tangent", "envelope"],
    )
    .semilog_y();
    Ok(ExperimentOutput::single(NamedTable::new("envelope", table).with_plot(plot)))
}

/// Two-initial-measures sensitivity: gap between flows driven by different
/// initial laws from the same starting point, normalized by the initial
/// Wasserstein distance; the profile follows the `t e^(-lambda t)` hump.
pub fn measure_sensitivity(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    if d != 1 {
        return Err(Error::Config("measure_sensitivity runs in dimension 1".into()));
    }
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 4.0)?)?;
    let replicas = cfg.get_usize("replicas", 100)?.max(1);
    let m_cloud = cfg.get_usize("m_cloud", 128)?.max(1);
    let record_every = cfg.get_usize("record_every", 50)?.max(1);
    let lambda = cfg.require_positive("lambda_envelope", cfg.get_f64("lambda_envelope", 1.0)?)?;
    let point_mass_at = 1.5;
    let x0 = vec![0.5];

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let mut init =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, rep as u64, 0));
        let cloud_mu = gaussian_cloud(d, m_cloud, &mut init);
        let cloud_eta: Vec<Vec<f64>> = vec![vec![point_mass_at]; m_cloud];
        let w2_initial = w2_1d(
            &EmpiricalMeasure::new(cloud_eta.clone())?,
            &EmpiricalMeasure::new(cloud_mu.clone())?,
        )?;
        let mut src_eta = MeasureFlowSource::particle_cloud(cloud_eta, cfg.seed ^ 0xe7a, rep as u64)?;
        let mut src_mu = MeasureFlowSource::particle_cloud(cloud_mu, cfg.seed ^ 0x30, rep as u64)?;
        let mut noise =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::FLOW, rep as u64, 0));
        let run = run_coupled_pair(
            &model,
            CoupledSources::Distinct(&mut src_eta, &mut src_mu),
            x0.clone(),
            x0.clone(),
            0.0,
            t_end,
            h,
            &mut noise,
        )?;
        let gaps = run.gaps();
        let mut times = Vec::new();
        let mut normalized = Vec::new();
        for (idx, (t, g)) in run.times.iter().zip(&gaps).enumerate() {
            if idx % record_every == 0 || idx + 1 == run.times.len() {
                times.push(*t);
                normalized.push(g / w2_initial);
            }
        }
        Ok((times, normalized))
    });

    let mut times: Option<Vec<f64>> = None;
    let mut acc: Vec<f64> = Vec::new();
    for r in runs {
        let (t, g) = r?;
        match &times {
            None => {
                times = Some(t);
                acc = g;
            }
            Some(_) => {
                for (a, v) in acc.iter_mut().zip(&g) {
                    *a += v;
                }
            }
        }
    }
    for a in acc.iter_mut() {
        *a /= replicas as f64;
    }
    let times = times.unwrap();

    // Fit the hump constant: c = max over positive times of
    // gap / (t e^(-lambda t)).
    let mut fitted_c = 0.0_f64;
    for (t, g) in times.iter().zip(&acc) {
        if *t > 0.0 {
            fitted_c = fitted_c.max(g / (t * (-lambda * t).exp()));
        }
    }
    let mut table = ResultTable::new(&["t", "mean_normalized_gap", "hump_envelope"]);
    for (t, g) in times.iter().zip(&acc) {
        table.push_row(vec![*t, *g, fitted_c * t * (-lambda * t).exp()]);
    }
    table.add_metadata("fitted_c", format!("{fitted_c:.16e}"));
    table.add_metadata("lambda", lambda);
    let plot = PlotSpec::line(
        "Initial-measure sensitivity",
        "t",
        &["mean_normalized_gap", "hump_envelope"],
    );
    Ok(ExperimentOutput::single(NamedTable::new("hump", table).with_plot(plot)))
}

/// Spectral-norm decay of the particle-system Jacobian.
pub fn particle_jacobian_decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _) = langevin_from_config_dim(
        cfg,
        "quartic_plus_quadratic(0.1,1.0)",
        "quadratic_interaction(0.5)",
        2,
    )?;
    let d = model.dim();
    let n = cfg.get_usize("n_particles", 16)?.max(1);
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 3.0)?)?;
    let replicas = cfg.get_usize("replicas", 50)?.max(1);
    let record_every = cfg.get_usize("record_every", 20)?.max(1);
    let lambda = cfg.require_positive("lambda_envelope", cfg.get_f64("lambda_envelope", 1.0)?)?;

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let mut init =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, rep as u64, 0));
        let z0: Vec<Vec<f64>> = gaussian_cloud(d, n, &mut init)
            .into_iter()
            .map(|x| x.iter().map(|v| 0.5 * v).collect())
            .collect();
        let run =
            run_particle_jacobian(&model, z0, 0.0, t_end, h, cfg.seed, rep as u64, record_every)?;
        Ok((run.times, run.spectral))
    });

    let mut times: Option<Vec<f64>> = None;
    let mut worst: Vec<f64> = Vec::new();
    for r in runs {
        let (t, s) = r?;
        match &times {
            None => {
                times = Some(t);
                worst = s;
            }
            Some(_) => {
                for (w, v) in worst.iter_mut().zip(&s) {
                    *w = w.max(*v);
                }
            }
        }
    }
    let times = times.unwrap();
    let mut table = ResultTable::new(&["t", "max_spectral", "envelope", "ratio"]);
    let mut sup_ratio = f64::NEG_INFINITY;
    for (t, w) in times.iter().zip(&worst) {
        let envelope = (-lambda * t).exp();
        let ratio = w / envelope;
        sup_ratio = sup_ratio.max(ratio);
        table.push_row(vec![*t, *w, envelope, ratio]);
    }
    table.add_metadata("sup_ratio", format!("{sup_ratio:.16e}"));
    table.add_metadata("n_particles", n);
    let plot = PlotSpec::line("Particle Jacobian decay", "t", &["max_spectral", "envelope"])
        .semilog_y();
    Ok(ExperimentOutput::single(NamedTable::new("decay", table).with_plot(plot)))
}

/// Long-run per-coordinate variance of the interacting Langevin system
/// against the closed-form Gibbs covariance.
pub fn gibbs_longrun(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, pair) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let n = cfg.get_usize("n_particles", 16)?.max(1);
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 20.0)?)?;
    let burn_in = cfg.get_f64("burn_in", 10.0)?;
    let replicas = cfg.get_usize("replicas", 16)?.max(2);
    let record_every = cfg.get_usize("record_every", 10)?.max(1);

    let reference = gibbs_reference(&pair, n)?;
    let ref_var = reference.per_coordinate_variance().ok_or_else(|| {
        Error::invalid("gibbs_longrun needs quadratic potentials for the closed-form variance")
    })?;

    let estimates: Vec<Result<f64>> = parallel::map_indexed(replicas, |rep| {
        let z0 = vec![vec![0.0; d]; n];
        let run = run_particles(&model, z0, 0.0, t_end, h, cfg.seed, rep as u64, record_every)?;
        let mut acc = 0.0;
        let mut count = 0usize;
        for (t, snap) in run.times.iter().zip(&run.snapshots) {
            if *t < burn_in {
                continue;
            }
            for p in snap {
                for v in p {
                    acc += v * v;
                    count += 1;
                }
            }
        }
        Ok(acc / count as f64)
    });

    let mut table = ResultTable::new(&["replica", "variance_estimate"]);
    let mut values = Vec::new();
    for (rep, est) in estimates.into_iter().enumerate() {
        let v = est?;
        values.push(v);
        table.push_row(vec![rep as f64, v]);
    }
    let (mean, se) = mean_and_se(&values);
    table.add_metadata("reference_variance", format!("{ref_var:.16e}"));
    table.add_metadata("mean_variance", format!("{mean:.16e}"));
    table.add_metadata("standard_error", format!("{se:.16e}"));
    Ok(ExperimentOutput::single(NamedTable::new("variance", table)))
}

/// Mean-square gap between one interacting particle and its independent
/// nonlinear copy, across a sweep of system sizes.
pub fn chaos_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let h = cfg.require_positive("h", cfg.get_f64("h", 2e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 5.0)?)?;
    let t_early = 2.0_f64.min(t_end);
    let replicas = cfg.get_usize("replicas", 200)?.max(2);
    let n_list = cfg.get_usize_list("n_list", &[8, 16, 32, 64])?;
    let record_every = cfg.get_usize("record_every", 50)?.max(1);

    let mut table = ResultTable::new(&["n", "gap_early", "gap_early_se", "gap_late", "gap_late_se"]);
    let mut log_n = Vec::new();
    let mut log_gap = Vec::new();
    for &n in &n_list {
        let gaps: Vec<Result<(f64, f64)>> = parallel::map_indexed(replicas, |rep| {
            let tag = (n as u64) << 32 | rep as u64;
            let mut init = NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, tag, 0));
            let z0 = gaussian_cloud(d, n, &mut init);
            let mut src = MeasureFlowSource::exact_mean_linear(&model, vec![0.0; d])?;
            let run = run_chaos_coupling(
                &model, &mut src, z0, 0.0, t_end, h, cfg.seed, tag, record_every,
            )?;
            let early = value_at(&run.times, &run.mean_sq_gap, t_early)?;
            let late = value_at(&run.times, &run.mean_sq_gap, t_end)?;
            Ok((early, late))
        });
        let mut earlies = Vec::new();
        let mut lates = Vec::new();
        for g in gaps {
            let (e, l) = g?;
            earlies.push(e);
            lates.push(l);
        }
        let (me, se_e) = mean_and_se(&earlies);
        let (ml, se_l) = mean_and_se(&lates);
        table.push_row(vec![n as f64, me, se_e, ml, se_l]);
        log_n.push((n as f64).ln());
        log_gap.push(me.ln());
    }
    let (slope, _) = linear_fit(&log_n, &log_gap);
    table.add_metadata("slope", format!("{slope:.16e}"));
    table.add_metadata("t_early", t_early);
    table.add_metadata("t_late", t_end);
    let plot = PlotSpec::line("Propagation-of-chaos scaling", "n", &["gap_early"]).log_log();
    Ok(ExperimentOutput::single(NamedTable::new("scaling", table).with_plot(plot)))
}

/// Time trajectory of the chaos gap for one system size; with a positive
/// chaos rate the curve saturates instead of growing.
pub fn chaos_uniform_in_time(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let h = cfg.require_positive("h", cfg.get_f64("h", 2e-3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 10.0)?)?;
    let replicas = cfg.get_usize("replicas", 100)?.max(1);
    let n = cfg.get_usize("n_particles", 16)?.max(1);
    let record_every = cfg.get_usize("record_every", 50)?.max(1);

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let mut init =
            NoiseStream::new(cfg.seed, rng::substream_id(rng::role::INIT, rep as u64, 0));
        let z0 = gaussian_cloud(d, n, &mut init);
        let mut src = MeasureFlowSource::exact_mean_linear(&model, vec![0.0; d])?;
        let run = run_chaos_coupling(
            &model, &mut src, z0, 0.0, t_end, h, cfg.seed, rep as u64, record_every,
        )?;
        Ok((run.times, run.mean_sq_gap))
    });

    let mut times: Option<Vec<f64>> = None;
    let mut acc: Vec<f64> = Vec::new();
    for r in runs {
        let (t, g) = r?;
        match &times {
            None => {
                times = Some(t);
                acc = g;
            }
            Some(_) => {
                for (a, v) in acc.iter_mut().zip(&g) {
                    *a += v;
                }
            }
        }
    }
    for a in acc.iter_mut() {
        *a /= replicas as f64;
    }
    let times = times.unwrap();
    let mut table = ResultTable::new(&["t", "mean_gap"]);
    for (t, g) in times.iter().zip(&acc) {
        table.push_row(vec![*t, *g]);
    }
    table.add_metadata("n_particles", n);
    let plot = PlotSpec::line("Chaos gap over time", "t", &["mean_gap"]);
    Ok(ExperimentOutput::single(NamedTable::new("curve", table).with_plot(plot)))
}

/// Sampled rate estimates for one or all of the four contraction conditions.
pub fn condition_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (model, _) = langevin_from_config(cfg, "quadratic(1.0)", "quadratic_interaction(0.5)")?;
    let d = model.dim();
    let which = cfg.get_str("condition", "all");
    let lo = cfg.get_f64("box_lo", -2.0)?;
    let hi = cfg.get_f64("box_hi", 2.0)?;
    if lo >= hi {
        return Err(Error::Config("box_lo must be below box_hi".into()));
    }
    let domain = SampleBox::cube(d, lo, hi);
    let n_samples = cfg.get_usize("n_samples", 1000)?.max(1);
    let n_particles = cfg.get_usize("n_particles", 8)?.max(1);

    let kinds: Vec<ConditionKind> = match which.as_str() {
        "H_A" => vec![ConditionKind::FlowA],
        "H_C" => vec![ConditionKind::PairC],
        "H_cal_A" => vec![ConditionKind::ParticleA { n_particles }],
        "H_cal_C" => vec![ConditionKind::ChaosC { n_particles }],
        "all" => vec![
            ConditionKind::FlowA,
            ConditionKind::PairC,
            ConditionKind::ParticleA { n_particles },
            ConditionKind::ChaosC { n_particles },
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown condition '{other}' (expected H_A, H_C, H_cal_A, H_cal_C or all)"
            )))
        }
    };

    let mut output = ExperimentOutput::default();
    let mut summary = ResultTable::new(&["condition_index", "lambda_estimate", "max_eig_sup"]);
    for (idx, kind) in kinds.iter().enumerate() {
        let report = estimate_lambda(&model, *kind, &domain, n_samples, cfg.seed)?;
        let (cols, rows) = report.csv_rows();
        let mut t = ResultTable::new(&cols.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        for row in rows {
            t.push_row(row);
        }
        t.add_metadata("condition_name", &report.condition_name);
        t.add_metadata("lambda_estimate", format!("{:.16e}", report.lambda_estimate));
        t.add_metadata("sample_domain", &report.sample_domain);
        let name = format!("samples_{}", report.condition_name);
        output
            .tables
            .push(NamedTable::new(&name, t).with_json_summary(report.json_summary()));
        let sup = report
            .max_eig_samples
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        summary.push_row(vec![idx as f64, report.lambda_estimate, sup]);
    }
    summary.add_metadata("condition_order", "0=H_A, 1=H_C, 2=H_cal_A, 3=H_cal_C (as requested)");
    summary.add_metadata("condition_request", which);
    output.tables.push(NamedTable::new("summary", summary));
    Ok(output)
}

/// Closed-form index bound on a `(rho, kappa)` grid, next to the linear
/// comparison `-kappa rho`.
pub fn index_bound_table(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dim = cfg.get_usize("dim", 2)?.max(2);
    let mut table = ResultTable::new(&["rho", "kappa", "bound", "linear_bound"]);
    for &kappa in &[-2.0, -1.0, 0.0, 0.5] {
        for k in 1..=30 {
            let rho = k as f64 * 0.1;
            let bound = crate::sphere::index_bound(rho, kappa, dim)?;
            table.push_row(vec![rho, kappa, bound, -kappa * rho]);
        }
    }
    table.add_metadata("dim", dim);
    Ok(ExperimentOutput::single(NamedTable::new("grid", table)))
}

/// Linear interpolation guard: picks the recorded value at `t` (the grid is
/// required to contain it).
fn value_at(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    times
        .iter()
        .position(|&u| (u - t).abs() < 1e-9)
        .map(|idx| values[idx])
        .ok_or_else(|| Error::GridMismatch(format!("time {t} not on the recording grid")))
}

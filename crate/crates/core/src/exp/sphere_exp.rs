//! Experiments on the unit sphere.

use crate::error::{Error, Result};
use crate::parallel;
use crate::sphere::{
    estimate_sphere_chaos_rate, estimate_sphere_rate_a, run_sphere_chaos_sweep,
    run_sphere_coupled_pair, run_sphere_ensemble, SphereInteraction, SpherePoint,
    SpherePotential, SphereStepMode, SPHERE_RICCI_LOWER_BOUND,
};

use super::config::ExperimentConfig;
use super::registry::{ExperimentOutput, NamedTable};
use super::svg::PlotSpec;
use super::table::{linear_fit, ResultTable};

fn sphere_potential_from_config(cfg: &ExperimentConfig, default: &str) -> Result<SpherePotential> {
    let spec = cfg.get_str("sphere_potential", default);
    let spec = spec.trim();
    if spec == "zero" {
        return Ok(SpherePotential::Zero);
    }
    let parse_arg = |inner: &str| -> Result<f64> {
        inner
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad sphere potential argument '{inner}'")))
    };
    if let Some(rest) = spec.strip_prefix("cosine_well(").and_then(|s| s.strip_suffix(')')) {
        return Ok(SpherePotential::CosineWell { alpha: parse_arg(rest)? });
    }
    if let Some(rest) = spec.strip_prefix("height_squared(").and_then(|s| s.strip_suffix(')')) {
        return Ok(SpherePotential::HeightSquared { alpha: parse_arg(rest)? });
    }
    Err(Error::Config(format!(
        "unknown sphere potential '{spec}' (expected zero, cosine_well(a) or height_squared(a))"
    )))
}

/// Long-run moments of Brownian motion on the sphere against the uniform
/// measure (mean zero, second moment `I/3`).
pub fn sphere_brownian(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let potential = sphere_potential_from_config(cfg, "zero")?;
    let n_paths = cfg.get_usize("replicas", 4000)?.max(1);
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 20.0)?)?;
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let run = run_sphere_ensemble(&potential, n_paths, t_end, h, cfg.seed, SphereStepMode::Geodesic)?;

    let mean_norm = (run.mean.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut frob_dev = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
            frob_dev += (run.second_moment[i][j] - expect).powi(2);
        }
    }
    let frob_dev = frob_dev.sqrt();

    let mut table = ResultTable::new(&[
        "mean_0", "mean_1", "mean_2", "mean_norm", "sm_00", "sm_01", "sm_02", "sm_11", "sm_12",
        "sm_22", "frob_dev", "max_renorm",
    ]);
    table.push_row(vec![
        run.mean[0],
        run.mean[1],
        run.mean[2],
        mean_norm,
        run.second_moment[0][0],
        run.second_moment[0][1],
        run.second_moment[0][2],
        run.second_moment[1][1],
        run.second_moment[1][2],
        run.second_moment[2][2],
        frob_dev,
        run.max_renormalization,
    ]);
    table.add_metadata("n_paths", n_paths);
    Ok(ExperimentOutput::single(NamedTable::new("moments", table)))
}

/// Mean coupled distance under the parallel-transport coupling against the
/// sampled-rate envelope.
pub fn sphere_contraction(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let potential = sphere_potential_from_config(cfg, "height_squared(8.0)")?;
    let cap = cfg.require_positive("cap", cfg.get_f64("cap", 0.45)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 1.0)?)?;
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let replicas = cfg.get_usize("replicas", 50)?.max(1);
    let record_every = cfg.get_usize("record_every", 20)?.max(1);
    let n_samples = cfg.get_usize("n_samples", 2000)?.max(1);

    let lambda = estimate_sphere_rate_a(&potential, cap, n_samples, cfg.seed);
    let theta_a = 0.30_f64;
    let theta_b = 0.25_f64;
    let x0 = SpherePoint::new([theta_a.sin(), 0.0, theta_a.cos()]).unwrap();
    let y0 = SpherePoint::new([-theta_b.sin(), 0.0, theta_b.cos()]).unwrap();
    let d0 = crate::sphere::distance(&x0, &y0);

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::map_indexed(replicas, |rep| {
        let run = run_sphere_coupled_pair(
            &potential, x0, y0, t_end, h, cfg.seed, rep as u64, record_every,
        )?;
        Ok((run.times, run.distances))
    });
    let mut times: Option<Vec<f64>> = None;
    let mut acc: Vec<f64> = Vec::new();
    for r in runs {
        let (t, dists) = r?;
        match &times {
            None => {
                times = Some(t);
                acc = dists;
            }
            Some(_) => {
                for (a, v) in acc.iter_mut().zip(&dists) {
                    *a += v;
                }
            }
        }
    }
    for a in acc.iter_mut() {
        *a /= replicas as f64;
    }
    let times = times.unwrap();

    let mut table = ResultTable::new(&["t", "mean_distance", "envelope", "ratio"]);
    let mut sup_ratio = f64::NEG_INFINITY;
    for (t, m) in times.iter().zip(&acc) {
        let envelope = d0 * (-lambda * t).exp();
        let ratio = m / envelope;
        sup_ratio = sup_ratio.max(ratio);
        table.push_row(vec![*t, *m, envelope, ratio]);
    }
    table.add_metadata("lambda_sampled", format!("{lambda:.16e}"));
    table.add_metadata("cap", cap);
    table.add_metadata("sup_ratio", format!("{sup_ratio:.16e}"));
    let plot = PlotSpec::line("Sphere coupled contraction", "t", &["mean_distance", "envelope"])
        .semilog_y();
    Ok(ExperimentOutput::single(NamedTable::new("decay", table).with_plot(plot)))
}

/// Propagation of chaos on the sphere: coupled gap curves for a sweep of
/// system sizes against the curvature-corrected envelope, plus the size
/// scaling at the final time.
pub fn sphere_chaos(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let potential = sphere_potential_from_config(cfg, "height_squared(30.0)")?;
    let beta = cfg.require_positive("sphere_beta", cfg.get_f64("sphere_beta", 0.5)?)?;
    let interaction = SphereInteraction::new(beta);
    let cap = cfg.require_positive("cap", cfg.get_f64("cap", 0.3)?)?;
    let t_end = cfg.require_positive("t_end", cfg.get_f64("t_end", 1.5)?)?;
    let h = cfg.require_positive("h", cfg.get_f64("h", 1e-3)?)?;
    let replicas = cfg.get_usize("replicas", 24)?.max(1);
    let m_ref = cfg.get_usize("m_ref", 192)?.max(8);
    let n_list = cfg.get_usize_list("n_list", &[8, 16, 32, 64])?;
    let record_every = cfg.get_usize("record_every", 50)?.max(1);
    let n_samples = cfg.get_usize("n_samples", 400)?.max(1);
    let kappa = SPHERE_RICCI_LOWER_BOUND;

    let n_max = n_list.iter().copied().max().unwrap_or(8);
    let lambda_c =
        estimate_sphere_chaos_rate(&potential, &interaction, n_max, cap, n_samples, cfg.seed)?;
    let rate = 2.0 * lambda_c + kappa;

    // One sweep per replica: a shared reference cloud drives every system
    // size, so the dominant O(m_ref^2) cost is paid once.
    let runs: Vec<Result<(Vec<f64>, Vec<Vec<f64>>, Vec<(f64, f64)>, u64)>> =
        parallel::map_indexed(replicas, |rep| {
            let run = run_sphere_chaos_sweep(
                &potential,
                &interaction,
                &n_list,
                m_ref,
                cap,
                t_end,
                h,
                cfg.seed,
                rep as u64,
                record_every,
            )?;
            Ok((run.times, run.mean_sq_rho, run.beta_parts, run.cut_locus_events))
        });

    let mut times: Option<Vec<f64>> = None;
    let mut acc: Vec<Vec<f64>> = Vec::new();
    let mut own_acc: Vec<f64> = Vec::new();
    let mut cross_acc: Vec<f64> = Vec::new();
    let mut total_cut_locus = 0u64;
    for r in runs {
        let (t, msr, betas, cuts) = r?;
        total_cut_locus += cuts;
        match &times {
            None => {
                times = Some(t);
                acc = msr;
                own_acc = betas.iter().map(|b| b.0).collect();
                cross_acc = betas.iter().map(|b| b.1).collect();
            }
            Some(_) => {
                for (slot, curve) in acc.iter_mut().enumerate() {
                    for (a, v) in curve.iter_mut().zip(&msr[slot]) {
                        *a += v;
                    }
                }
                for ((o, c), b) in own_acc.iter_mut().zip(cross_acc.iter_mut()).zip(&betas) {
                    *o += b.0;
                    *c += b.1;
                }
            }
        }
    }
    for curve in acc.iter_mut() {
        for a in curve.iter_mut() {
            *a /= replicas as f64;
        }
    }
    for v in own_acc.iter_mut() {
        *v /= replicas as f64;
    }
    for v in cross_acc.iter_mut() {
        *v /= replicas as f64;
    }
    let times = times.unwrap();
    let own_hat = own_acc.iter().cloned().fold(0.0_f64, f64::max);
    let cross_hat = cross_acc.iter().cloned().fold(0.0_f64, f64::max);

    let mut curves = ResultTable::new(&["n", "t", "mean_sq_rho", "envelope_rms"]);
    let mut scaling = ResultTable::new(&["n", "tail_gap", "beta_hat"]);
    let mut log_n = Vec::new();
    let mut log_gap = Vec::new();
    for (slot, &n) in n_list.iter().enumerate() {
        let beta_hat = own_hat / n as f64 + (1.0 - 1.0 / n as f64) * cross_hat;
        for (t, msr) in times.iter().zip(&acc[slot]) {
            let envelope =
                2.0 / rate * (1.0 - (-rate * t / 2.0).exp()) * (beta_hat / n as f64).sqrt();
            curves.push_row(vec![n as f64, *t, *msr, envelope]);
        }
        // The curve is stationary over the tail half of the horizon;
        // averaging it there beats the single-snapshot estimate.
        let tail: Vec<f64> = times
            .iter()
            .zip(&acc[slot])
            .filter(|(t, _)| **t >= 0.5 * t_end)
            .map(|(_, v)| *v)
            .collect();
        let tail_gap = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        scaling.push_row(vec![n as f64, tail_gap, beta_hat]);
        log_n.push((n as f64).ln());
        log_gap.push(tail_gap.ln());
    }
    let (slope, _) = linear_fit(&log_n, &log_gap);
    for t in [&mut curves, &mut scaling] {
        t.add_metadata("lambda_c_sampled", format!("{lambda_c:.16e}"));
        t.add_metadata("ricci_lower_bound", kappa);
        t.add_metadata("cut_locus_events", total_cut_locus);
    }
    scaling.add_metadata("slope", format!("{slope:.16e}"));
    let plot = PlotSpec::line("Sphere chaos scaling", "n", &["final_gap"]).log_log();
    let mut output = ExperimentOutput::default();
    output.tables.push(NamedTable::new("curves", curves));
    output.tables.push(NamedTable::new("scaling", scaling).with_plot(plot));
    Ok(output)
}

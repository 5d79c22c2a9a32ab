//! Measure flows that feed the nonlinear drift and diffusion averages.
//!
//! A McKean-Vlasov step needs the current law of the flow in the interaction
//! slot. Four providers cover the lab's needs: two closed-form laws (legal
//! only for their matching models), a mean-field particle cloud advanced
//! alongside the main flow, and a frozen empirical measure.

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::models::{McKeanVlasovModel, ModelKind};
use crate::oracles::{geometric_mean_map, GaussianMeasure};
use crate::rng::{self, NoiseStream};

use super::particles::{mean_field_drifts, sorted_order};

/// View of the current measure handed to the averaging helpers.
///
/// `Mean` is only sound for models whose interaction dependence is affine
/// (both closed-form families are); `check_compatible` enforces the pairing.
pub enum MeasureView<'a> {
    Points(&'a [Vec<f64>]),
    Mean(&'a [f64]),
}

/// Source of the measure argument `phi_{s,t}(mu)` for the nonlinear flow.
pub enum MeasureFlowSource {
    ExactLinearGaussian {
        a1: SquareMatrix,
        a2: SquareMatrix,
        noise_cov: SquareMatrix,
        mean: Vec<f64>,
        cov: SquareMatrix,
        cache: Option<PropagatorCache>,
    },
    ExactGeometric {
        a1: f64,
        a2: f64,
        mean: Vec<f64>,
    },
    /// Exact mean flow for pair drifts with constant Jacobians (quadratic
    /// potentials): the drift is affine in the interaction slot, so the law
    /// enters only through its mean, and the mean obeys
    /// `dm/dt = (J_x b + J_y b) m`.
    ExactMeanLinear {
        generator: SquareMatrix,
        mean: Vec<f64>,
        cache: Option<(f64, SquareMatrix)>,
    },
    ParticleCloud {
        states: Vec<Vec<f64>>,
        streams: Vec<NoiseStream>,
        scratch: Vec<Vec<f64>>,
        drifts: Vec<Vec<f64>>,
        clamp_events: u64,
    },
    Frozen {
        states: Vec<Vec<f64>>,
    },
}

/// Matrix exponentials reused across equal-length steps.
pub struct PropagatorCache {
    h: f64,
    /// `exp((A1 + A2) h)` driving the mean.
    prop_mean: SquareMatrix,
    /// `exp(A2 h)` driving the centered state.
    prop_state: SquareMatrix,
    /// `int_0^h exp(A2 u) R exp(A2 u)' du`.
    step_noise: SquareMatrix,
}

impl MeasureFlowSource {
    /// Closed-form Gaussian law flow. Only legal for the linear-Gaussian
    /// model it was built from.
    pub fn exact_linear_gaussian(model: &McKeanVlasovModel, mu0: &GaussianMeasure) -> Result<Self> {
        match model.kind() {
            ModelKind::LinearGaussian { a1, a2, noise_cov } => {
                if mu0.dim() != model.dim() {
                    return Err(Error::invalid("initial law dimension mismatch"));
                }
                Ok(MeasureFlowSource::ExactLinearGaussian {
                    a1: a1.clone(),
                    a2: a2.clone(),
                    noise_cov: noise_cov.clone(),
                    mean: mu0.mean.clone(),
                    cov: mu0.cov.clone(),
                    cache: None,
                })
            }
            _ => Err(Error::invalid(
                "exact linear-Gaussian source requires a linear-Gaussian model",
            )),
        }
    }

    /// Closed-form mean flow of the geometric model.
    pub fn exact_geometric(model: &McKeanVlasovModel, mean0: f64) -> Result<Self> {
        match model.kind() {
            ModelKind::Geometric { a1, a2, .. } => {
                if mean0 < 0.0 {
                    return Err(Error::invalid("geometric mean must be nonnegative"));
                }
                Ok(MeasureFlowSource::ExactGeometric { a1: *a1, a2: *a2, mean: vec![mean0] })
            }
            _ => Err(Error::invalid("exact geometric source requires the geometric model")),
        }
    }

    /// Exact mean flow for a model whose pair-drift Jacobians are constant
    /// (verified by probing); legal for constant-diffusion models only.
    pub fn exact_mean_linear(model: &McKeanVlasovModel, mean0: Vec<f64>) -> Result<Self> {
        let d = model.dim();
        if mean0.len() != d {
            return Err(Error::invalid("initial mean dimension mismatch"));
        }
        if !model.constant_diffusion() {
            return Err(Error::invalid(
                "exact mean source requires a constant-diffusion model",
            ));
        }
        // Probe Jacobian constancy at two well-separated points.
        let mut jx = SquareMatrix::zeros(d);
        let mut jy = SquareMatrix::zeros(d);
        let p1 = vec![0.37; d];
        let p2 = vec![-1.21; d];
        model.jac_drift_x(0.0, &p1, &p2, &mut jx);
        model.jac_drift_y(0.0, &p1, &p2, &mut jy);
        let mut probe = SquareMatrix::zeros(d);
        model.jac_drift_x(0.5, &p2, &p1, &mut probe);
        if probe.sub(&jx).max_abs() > 1e-10 {
            return Err(Error::invalid(
                "exact mean source requires a constant interaction Jacobian",
            ));
        }
        model.jac_drift_y(0.5, &p2, &p1, &mut probe);
        if probe.sub(&jy).max_abs() > 1e-10 {
            return Err(Error::invalid("exact mean source requires a constant state Jacobian"));
        }
        // Affinity check: b(x, y) - b(0, y) must be linear in x.
        let b = |x: &[f64], y: &[f64]| model.drift_vec(0.0, x, y);
        let y0 = vec![0.11; d];
        let lhs = b(&p1, &y0);
        let base = b(&vec![0.0; d], &y0);
        let lin = jx.matvec(&p1);
        for i in 0..d {
            if (lhs[i] - base[i] - lin[i]).abs() > 1e-9 * (1.0 + lhs[i].abs()) {
                return Err(Error::invalid(
                    "exact mean source requires a drift affine in the interaction slot",
                ));
            }
        }
        Ok(MeasureFlowSource::ExactMeanLinear {
            generator: jx.add(&jy),
            mean: mean0,
            cache: None,
        })
    }

    /// Mean-field cloud of `M` states advanced by the particle system, with
    /// per-particle substreams derived from `(seed, replica, particle)`.
    pub fn particle_cloud(states: Vec<Vec<f64>>, seed: u64, replica: u64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("particle cloud needs at least one state"));
        }
        let streams = (0..states.len())
            .map(|j| NoiseStream::new(seed, rng::substream_id(rng::role::CLOUD, replica, j as u64)))
            .collect();
        let scratch = states.clone();
        let drifts = vec![vec![0.0; states[0].len()]; states.len()];
        Ok(MeasureFlowSource::ParticleCloud { states, streams, scratch, drifts, clamp_events: 0 })
    }

    /// Fixed empirical measure; the flow sees a time-frozen law.
    pub fn frozen(states: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("frozen source needs at least one state"));
        }
        Ok(MeasureFlowSource::Frozen { states })
    }

    pub fn check_compatible(&self, model: &McKeanVlasovModel) -> Result<()> {
        match (self, model.kind()) {
            (MeasureFlowSource::ExactLinearGaussian { .. }, ModelKind::LinearGaussian { .. }) => {
                Ok(())
            }
            (MeasureFlowSource::ExactGeometric { .. }, ModelKind::Geometric { .. }) => Ok(()),
            (MeasureFlowSource::ExactLinearGaussian { .. }, _)
            | (MeasureFlowSource::ExactGeometric { .. }, _) => Err(Error::invalid(
                "exact measure source paired with a non-matching model",
            )),
            _ => Ok(()),
        }
    }

    pub fn view(&self) -> MeasureView<'_> {
        match self {
            MeasureFlowSource::ExactLinearGaussian { mean, .. } => MeasureView::Mean(mean),
            MeasureFlowSource::ExactGeometric { mean, .. } => MeasureView::Mean(mean),
            MeasureFlowSource::ExactMeanLinear { mean, .. } => MeasureView::Mean(mean),
            MeasureFlowSource::ParticleCloud { states, .. } => MeasureView::Points(states),
            MeasureFlowSource::Frozen { states } => MeasureView::Points(states),
        }
    }

    pub fn cloud_size(&self) -> Option<usize> {
        match self {
            MeasureFlowSource::ParticleCloud { states, .. } => Some(states.len()),
            MeasureFlowSource::Frozen { states } => Some(states.len()),
            _ => None,
        }
    }

    pub fn clamp_events(&self) -> u64 {
        match self {
            MeasureFlowSource::ParticleCloud { clamp_events, .. } => *clamp_events,
            _ => 0,
        }
    }

    /// Exact Gaussian law, when this source carries one.
    pub fn law(&self) -> Option<GaussianMeasure> {
        match self {
            MeasureFlowSource::ExactLinearGaussian { mean, cov, .. } => {
                GaussianMeasure::new(mean.clone(), cov.clone()).ok()
            }
            _ => None,
        }
    }

    /// Advances the measure from `t` to `t + h`.
    pub fn advance(&mut self, model: &McKeanVlasovModel, t: f64, h: f64) -> Result<()> {
        match self {
            MeasureFlowSource::ExactLinearGaussian { a1, a2, noise_cov, mean, cov, cache } => {
                let needs_rebuild = match cache {
                    Some(c) => (c.h - h).abs() > 1e-15,
                    None => true,
                };
                if needs_rebuild {
                    *cache = Some(PropagatorCache {
                        h,
                        prop_mean: linalg::matrix_exp(&a1.add(a2), h)?,
                        prop_state: linalg::matrix_exp(a2, h)?,
                        step_noise: step_noise_integral(a2, noise_cov, h)?,
                    });
                }
                let c = cache.as_ref().unwrap();
                *mean = c.prop_mean.matvec(mean);
                *cov = c
                    .prop_state
                    .matmul(cov)
                    .matmul(&c.prop_state.transpose())
                    .add(&c.step_noise)
                    .symmetric_part();
                Ok(())
            }
            MeasureFlowSource::ExactGeometric { a1, a2, mean } => {
                mean[0] = geometric_mean_map(*a1, *a2, mean[0], h);
                Ok(())
            }
            MeasureFlowSource::ExactMeanLinear { generator, mean, cache } => {
                let needs_rebuild = match cache {
                    Some((hc, _)) => (*hc - h).abs() > 1e-15,
                    None => true,
                };
                if needs_rebuild {
                    *cache = Some((h, linalg::matrix_exp(generator, h)?));
                }
                let (_, prop) = cache.as_ref().unwrap();
                *mean = prop.matvec(mean);
                Ok(())
            }
            MeasureFlowSource::ParticleCloud { states, streams, scratch, drifts, clamp_events } => {
                let order = sorted_order(states);
                mean_field_drifts(model, t, states, &order, drifts);
                let d = model.dim();
                let r = model.noise_dim();
                let mut col = vec![0.0; d];
                for i in 0..states.len() {
                    let dw = streams[i].brownian_increments(r, h);
                    let out = &mut scratch[i];
                    out.copy_from_slice(&states[i]);
                    for a in 0..d {
                        out[a] += h * drifts[i][a];
                    }
                    for (k, dwk) in dw.iter().enumerate() {
                        super::flows::mean_diffusion_col(
                            model,
                            &MeasureView::Points(states),
                            t,
                            &states[i],
                            k,
                            &mut col,
                        );
                        for a in 0..d {
                            out[a] += col[a] * dwk;
                        }
                    }
                    if super::flows::apply_floor(model, out) {
                        *clamp_events += 1;
                    }
                    super::flows::check_divergence(out, t + h, &format!("cloud particle {i}"))?;
                }
                std::mem::swap(states, scratch);
                Ok(())
            }
            MeasureFlowSource::Frozen { .. } => Ok(()),
        }
    }
}

/// `int_0^h exp(A2 u) R exp(A2 u)' du` by Gauss-Legendre; for the step sizes
/// used here a single panel of the order-16 rule is far below 1e-12.
fn step_noise_integral(a2: &SquareMatrix, r: &SquareMatrix, h: f64) -> Result<SquareMatrix> {
    let mut acc = SquareMatrix::zeros(a2.dim());
    for &(node, weight) in linalg::gauss_legendre_unit() {
        let eu = linalg::matrix_exp(a2, node * h)?;
        acc = acc.add(&eu.matmul(r).matmul(&eu.transpose()).scale(weight * h));
    }
    Ok(acc.symmetric_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_geometric, make_linear_gaussian};
    use crate::oracles::linear_gaussian_law;
    use approx::assert_relative_eq;

    #[test]
    fn exact_sources_reject_foreign_models() {
        let geo = make_geometric(-1.0, 1.0, 0.5).unwrap();
        let lg = make_linear_gaussian(
            SquareMatrix::zeros(1),
            SquareMatrix::diagonal(&[-1.0]),
            SquareMatrix::identity(1),
        )
        .unwrap();
        assert!(MeasureFlowSource::exact_geometric(&lg, 1.0).is_err());
        let mu0 = GaussianMeasure::isotropic(1, 0.0, 1.0).unwrap();
        assert!(MeasureFlowSource::exact_linear_gaussian(&geo, &mu0).is_err());
    }

    #[test]
    fn stepwise_law_matches_whole_interval_law() {
        let a1 = SquareMatrix::from_rows(&[&[0.0, 0.1], &[-0.1, 0.0]]).unwrap();
        let a2 = SquareMatrix::from_rows(&[&[-1.0, 0.3], &[-0.3, -1.0]]).unwrap();
        let r = SquareMatrix::from_rows(&[&[0.5, 0.1], &[0.1, 0.4]]).unwrap();
        let model = make_linear_gaussian(a1.clone(), a2.clone(), r.clone()).unwrap();
        let mu0 = GaussianMeasure::new(
            vec![0.5, -0.2],
            SquareMatrix::identity(2).scale(0.3),
        )
        .unwrap();
        let mut src = MeasureFlowSource::exact_linear_gaussian(&model, &mu0).unwrap();
        let h = 0.01;
        let steps = 150;
        for k in 0..steps {
            src.advance(&model, k as f64 * h, h).unwrap();
        }
        let law = src.law().unwrap();
        let oracle = linear_gaussian_law(&a1, &a2, &r, &mu0, steps as f64 * h).unwrap();
        for i in 0..2 {
            assert_relative_eq!(law.mean[i], oracle.mean[i], epsilon = 1e-9);
            for j in 0..2 {
                assert_relative_eq!(law.cov.get(i, j), oracle.cov.get(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn exact_mean_linear_matches_confinement_rate() {
        use crate::models::{make_langevin, Potential, PotentialPair};
        // Quadratic Langevin: the mean relaxes at exactly the confinement
        // curvature, untouched by the interaction strength.
        let pair = PotentialPair::new(
            Potential::quadratic(1, 0.8),
            Potential::quadratic_interaction(1, 0.5),
            1.0,
        )
        .unwrap();
        let model = make_langevin(pair).unwrap();
        let mut src = MeasureFlowSource::exact_mean_linear(&model, vec![2.0]).unwrap();
        for k in 0..100 {
            src.advance(&model, 0.01 * k as f64, 0.01).unwrap();
        }
        match &src {
            MeasureFlowSource::ExactMeanLinear { mean, .. } => {
                assert_relative_eq!(mean[0], 2.0 * (-0.8f64).exp(), epsilon = 1e-10);
            }
            _ => unreachable!(),
        }
        // Non-quadratic confinement has state-dependent Jacobians.
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(1, 0.3, 1.0),
            Potential::zero(1),
            1.0,
        )
        .unwrap();
        let quartic = make_langevin(pair).unwrap();
        assert!(MeasureFlowSource::exact_mean_linear(&quartic, vec![0.0]).is_err());
    }

    #[test]
    fn geometric_mean_flow_steps_compose() {
        let model = make_geometric(-1.0, 1.0, 0.5).unwrap();
        let mut src = MeasureFlowSource::exact_geometric(&model, 1.3).unwrap();
        for k in 0..10 {
            src.advance(&model, 0.1 * k as f64, 0.1).unwrap();
        }
        let stepped = match &src {
            MeasureFlowSource::ExactGeometric { mean, .. } => mean[0],
            _ => unreachable!(),
        };
        let direct = geometric_mean_map(-1.0, 1.0, 1.3, 1.0);
        assert_relative_eq!(stepped, direct, epsilon = 1e-12);
    }
}

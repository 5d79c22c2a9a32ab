//! Euler-Maruyama stepping for the nonlinear flow and its Jacobian flow,
//! plus synchronous couplings of two flows on a shared Brownian path.

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::models::McKeanVlasovModel;
use crate::rng::NoiseStream;
use crate::tolerances;

use super::source::{MeasureFlowSource, MeasureView};

/// State of one flow: time, position, and optionally the Jacobian with
/// respect to the starting point (initialized to the identity at `s`).
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub jac: Option<SquareMatrix>,
}

impl FlowState {
    pub fn new(s: f64, x: Vec<f64>) -> Self {
        FlowState { t: s, x, jac: None }
    }

    pub fn with_jacobian(s: f64, x: Vec<f64>) -> Self {
        let d = x.len();
        FlowState { t: s, x, jac: Some(SquareMatrix::identity(d)) }
    }
}

/// Reusable buffers for the stepping kernels.
pub struct FlowScratch {
    drift: Vec<f64>,
    col: Vec<f64>,
    tmp: Vec<f64>,
    jac: SquareMatrix,
    jac_avg: SquareMatrix,
    update: SquareMatrix,
}

impl FlowScratch {
    pub fn new(model: &McKeanVlasovModel) -> Self {
        let d = model.dim();
        FlowScratch {
            drift: vec![0.0; d],
            col: vec![0.0; d],
            tmp: vec![0.0; d],
            jac: SquareMatrix::zeros(d),
            jac_avg: SquareMatrix::zeros(d),
            update: SquareMatrix::zeros(d),
        }
    }
}

// Per-thread accumulation buffer for the point-cloud averages below.
thread_local! {
    static AVG_SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Measure-averaged drift `b(view, y)`.
pub fn mean_drift(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    t: f64,
    y: &[f64],
    out: &mut [f64],
) {
    match view {
        MeasureView::Mean(m) => model.drift(t, m, y, out),
        MeasureView::Points(points) => AVG_SCRATCH.with(|cell| {
            let tmp = &mut *cell.borrow_mut();
            tmp.resize(out.len(), 0.0);
            out.fill(0.0);
            for p in points.iter() {
                model.drift(t, p, y, tmp);
                for (o, v) in out.iter_mut().zip(tmp.iter()) {
                    *o += v;
                }
            }
            let scale = 1.0 / points.len() as f64;
            for o in out.iter_mut() {
                *o *= scale;
            }
        }),
    }
}

/// Measure-averaged diffusion column `s_k(view, y)`. Constant-diffusion
/// models short-circuit the average.
pub fn mean_diffusion_col(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    t: f64,
    y: &[f64],
    k: usize,
    out: &mut [f64],
) {
    if model.constant_diffusion() {
        model.diffusion_col(t, y, y, k, out);
        return;
    }
    match view {
        MeasureView::Mean(m) => model.diffusion_col(t, m, y, k, out),
        MeasureView::Points(points) => AVG_SCRATCH.with(|cell| {
            let tmp = &mut *cell.borrow_mut();
            tmp.resize(out.len(), 0.0);
            out.fill(0.0);
            for p in points.iter() {
                model.diffusion_col(t, p, y, k, tmp);
                for (o, v) in out.iter_mut().zip(tmp.iter()) {
                    *o += v;
                }
            }
            let scale = 1.0 / points.len() as f64;
            for o in out.iter_mut() {
                *o *= scale;
            }
        }),
    }
}

/// Measure-averaged state Jacobian of the drift.
pub fn mean_jac_drift_y(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    t: f64,
    y: &[f64],
    out: &mut SquareMatrix,
    tmp: &mut SquareMatrix,
) {
    match view {
        MeasureView::Mean(m) => model.jac_drift_y(t, m, y, out),
        MeasureView::Points(points) => {
            let d = out.dim();
            for i in 0..d {
                for j in 0..d {
                    out.set(i, j, 0.0);
                }
            }
            for p in points.iter() {
                model.jac_drift_y(t, p, y, tmp);
                for i in 0..d {
                    for j in 0..d {
                        out.add_to(i, j, tmp.get(i, j));
                    }
                }
            }
            let scale = 1.0 / points.len() as f64;
            for i in 0..d {
                for j in 0..d {
                    out.set(i, j, out.get(i, j) * scale);
                }
            }
        }
    }
}

/// Measure-averaged state Jacobian of diffusion column `k`.
pub fn mean_jac_diffusion_y(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    t: f64,
    y: &[f64],
    k: usize,
    out: &mut SquareMatrix,
    tmp: &mut SquareMatrix,
) {
    match view {
        MeasureView::Mean(m) => model.jac_diffusion_y(t, m, y, k, out),
        MeasureView::Points(points) => {
            let d = out.dim();
            for i in 0..d {
                for j in 0..d {
                    out.set(i, j, 0.0);
                }
            }
            for p in points.iter() {
                model.jac_diffusion_y(t, p, y, k, tmp);
                for i in 0..d {
                    for j in 0..d {
                        out.add_to(i, j, tmp.get(i, j));
                    }
                }
            }
            let scale = 1.0 / points.len() as f64;
            for i in 0..d {
                for j in 0..d {
                    out.set(i, j, out.get(i, j) * scale);
                }
            }
        }
    }
}

/// Clamps the state at the model's floor; returns whether a clamp fired.
pub fn apply_floor(model: &McKeanVlasovModel, x: &mut [f64]) -> bool {
    if let Some(floor) = model.state_floor() {
        let mut clamped = false;
        for v in x.iter_mut() {
            if *v < floor {
                *v = floor;
                clamped = true;
            }
        }
        clamped
    } else {
        false
    }
}

pub fn check_divergence(x: &[f64], t: f64, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > tolerances::DIVERGENCE_LIMIT) {
        return Err(Error::Divergence { time: t, message: format!("{what} left the stable range") });
    }
    Ok(())
}

/// One Euler-Maruyama step `x' = x + b h + sum_k s_k dW^k` with
/// measure-averaged coefficients; `dw` carries the increments (variance `h`
/// per component). Returns whether the state-floor clamp fired.
pub fn step_flow(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    state: &mut FlowState,
    h: f64,
    dw: &[f64],
    scratch: &mut FlowScratch,
) -> Result<bool> {
    debug_assert!(h > 0.0);
    let t = state.t;
    mean_drift(model, view, t, &state.x, &mut scratch.drift);
    scratch.tmp.copy_from_slice(&state.x);
    for (v, b) in scratch.tmp.iter_mut().zip(&scratch.drift) {
        *v += h * b;
    }
    for (k, dwk) in dw.iter().enumerate() {
        mean_diffusion_col(model, view, t, &state.x, k, &mut scratch.col);
        for (v, s) in scratch.tmp.iter_mut().zip(&scratch.col) {
            *v += s * dwk;
        }
    }
    state.x.copy_from_slice(&scratch.tmp);
    let clamped = apply_floor(model, &mut state.x);
    check_divergence(&state.x, t + h, "flow state")?;
    state.t = t + h;
    Ok(clamped)
}

/// Joint Euler step of the flow and its Jacobian:
/// `J' = (I + h Jbar_b + sum_k dW^k Jbar_{s_k}) J` with the same increments
/// driving the state, so finite differences of coupled flows and the
/// variational flow agree path by path.
pub fn step_jacobian(
    model: &McKeanVlasovModel,
    view: &MeasureView,
    state: &mut FlowState,
    h: f64,
    dw: &[f64],
    scratch: &mut FlowScratch,
) -> Result<bool> {
    let d = model.dim();
    let t = state.t;
    {
        let jac = state
            .jac
            .as_ref()
            .ok_or_else(|| Error::invalid("step_jacobian needs a state with a Jacobian"))?;

        // update = I + h * mean Jac_y b + sum_k dW^k * mean Jac_y s_k
        mean_jac_drift_y(model, view, t, &state.x, &mut scratch.jac_avg, &mut scratch.jac);
        for i in 0..d {
            for j in 0..d {
                let v = if i == j { 1.0 } else { 0.0 } + h * scratch.jac_avg.get(i, j);
                scratch.update.set(i, j, v);
            }
        }
        if !model.zero_diffusion_jacobian() {
            for (k, dwk) in dw.iter().enumerate() {
                mean_jac_diffusion_y(
                    model,
                    view,
                    t,
                    &state.x,
                    k,
                    &mut scratch.jac_avg,
                    &mut scratch.jac,
                );
                for i in 0..d {
                    for j in 0..d {
                        scratch.update.add_to(i, j, dwk * scratch.jac_avg.get(i, j));
                    }
                }
            }
        }
        let next = scratch.update.matmul(jac);
        state.jac = Some(next);
    }
    step_flow(model, view, state, h, dw, scratch)
}

/// Recorded norms of a simulated Jacobian flow.
#[derive(Debug, Clone)]
pub struct FlowJacobianRun {
    pub times: Vec<f64>,
    pub frobenius_sq: Vec<f64>,
    pub spectral: Vec<f64>,
    pub clamp_events: u64,
}

/// Advances the flow together with its Jacobian, recording norms every
/// `record_every` steps (and at the endpoint).
pub fn run_flow_with_jacobian(
    model: &McKeanVlasovModel,
    src: &mut MeasureFlowSource,
    x0: Vec<f64>,
    s: f64,
    t_end: f64,
    h: f64,
    noise: &mut NoiseStream,
    record_every: usize,
) -> Result<FlowJacobianRun> {
    src.check_compatible(model)?;
    let steps = step_count(s, t_end, h)?;
    let r = model.noise_dim();
    let mut state = FlowState::with_jacobian(s, x0);
    let mut scratch = FlowScratch::new(model);
    let mut out = FlowJacobianRun {
        times: Vec::new(),
        frobenius_sq: Vec::new(),
        spectral: Vec::new(),
        clamp_events: 0,
    };
    record_jac(&state, &mut out)?;
    for step in 0..steps {
        let dw = noise.brownian_increments(r, h);
        let t = state.t;
        if step_jacobian(model, &src.view(), &mut state, h, &dw, &mut scratch)? {
            out.clamp_events += 1;
        }
        src.advance(model, t, h)?;
        if (step + 1) % record_every.max(1) == 0 || step + 1 == steps {
            record_jac(&state, &mut out)?;
        }
    }
    Ok(out)
}

fn record_jac(state: &FlowState, out: &mut FlowJacobianRun) -> Result<()> {
    let jac = state.jac.as_ref().expect("jacobian tracked");
    out.times.push(state.t);
    out.frobenius_sq.push(linalg::frobenius_norm(jac).powi(2));
    out.spectral.push(linalg::spectral_norm(jac)?);
    Ok(())
}

/// A plain flow run; optionally records the path and always records the
/// increments so closed-form oracles can replay the same Brownian path.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub times: Vec<f64>,
    pub path: Vec<Vec<f64>>,
    pub increments: Vec<Vec<f64>>,
    pub clamp_events: u64,
}

pub fn run_flow(
    model: &McKeanVlasovModel,
    src: &mut MeasureFlowSource,
    x0: Vec<f64>,
    s: f64,
    t_end: f64,
    h: f64,
    noise: &mut NoiseStream,
) -> Result<FlowRun> {
    src.check_compatible(model)?;
    let steps = step_count(s, t_end, h)?;
    let r = model.noise_dim();
    let mut state = FlowState::new(s, x0);
    let mut scratch = FlowScratch::new(model);
    let mut run = FlowRun {
        times: vec![state.t],
        path: vec![state.x.clone()],
        increments: Vec::with_capacity(steps),
        clamp_events: 0,
    };
    for _ in 0..steps {
        let dw = noise.brownian_increments(r, h);
        let t = state.t;
        if step_flow(model, &src.view(), &mut state, h, &dw, &mut scratch)? {
            run.clamp_events += 1;
        }
        src.advance(model, t, h)?;
        run.increments.push(dw);
        run.times.push(state.t);
        run.path.push(state.x.clone());
    }
    Ok(run)
}

/// Two flows advanced on one Brownian path.
#[derive(Debug, Clone)]
pub struct CoupledPaths {
    pub times: Vec<f64>,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub clamp_events: u64,
}

impl CoupledPaths {
    /// Euclidean gap `|X_t - Y_t|` at every recorded time.
    pub fn gaps(&self) -> Vec<f64> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(x, y)| {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .collect()
    }
}

/// Sources for a coupled pair: one shared measure (two-initial-points
/// coupling) or two distinct measure flows (two-initial-measures coupling).
pub enum CoupledSources<'a> {
    Shared(&'a mut MeasureFlowSource),
    Distinct(&'a mut MeasureFlowSource, &'a mut MeasureFlowSource),
}

/// Runs the synchronous coupling: both flows consume the identical increment
/// sequence from `noise`.
pub fn run_coupled_pair(
    model: &McKeanVlasovModel,
    sources: CoupledSources,
    x0: Vec<f64>,
    y0: Vec<f64>,
    s: f64,
    t_end: f64,
    h: f64,
    noise: &mut NoiseStream,
) -> Result<CoupledPaths> {
    let steps = step_count(s, t_end, h)?;
    let r = model.noise_dim();
    let mut first = FlowState::new(s, x0);
    let mut second = FlowState::new(s, y0);
    let mut scratch = FlowScratch::new(model);
    let mut out = CoupledPaths {
        times: vec![s],
        first: vec![first.x.clone()],
        second: vec![second.x.clone()],
        clamp_events: 0,
    };
    match sources {
        CoupledSources::Shared(src) => {
            src.check_compatible(model)?;
            for _ in 0..steps {
                let dw = noise.brownian_increments(r, h);
                let t = first.t;
                let mut clamped = step_flow(model, &src.view(), &mut first, h, &dw, &mut scratch)?;
                clamped |= step_flow(model, &src.view(), &mut second, h, &dw, &mut scratch)?;
                if clamped {
                    out.clamp_events += 1;
                }
                src.advance(model, t, h)?;
                push_pair(&mut out, &first, &second);
            }
        }
        CoupledSources::Distinct(src_a, src_b) => {
            src_a.check_compatible(model)?;
            src_b.check_compatible(model)?;
            for _ in 0..steps {
                let dw = noise.brownian_increments(r, h);
                let t = first.t;
                let mut clamped =
                    step_flow(model, &src_a.view(), &mut first, h, &dw, &mut scratch)?;
                clamped |= step_flow(model, &src_b.view(), &mut second, h, &dw, &mut scratch)?;
                if clamped {
                    out.clamp_events += 1;
                }
                src_a.advance(model, t, h)?;
                src_b.advance(model, t, h)?;
                push_pair(&mut out, &first, &second);
            }
        }
    }
    Ok(out)
}

fn push_pair(out: &mut CoupledPaths, first: &FlowState, second: &FlowState) {
    out.times.push(first.t);
    out.first.push(first.x.clone());
    out.second.push(second.x.clone());
}

/// Number of steps covering `[s, t_end]` with step `h`; the horizon must sit
/// on the grid.
pub fn step_count(s: f64, t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    let span = t_end - s;
    if span < 0.0 {
        return Err(Error::invalid("t_end must not precede s"));
    }
    let steps = (span / h).round();
    if (steps * h - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "horizon {span} is not an integer multiple of h = {h}"
        )));
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_langevin, make_linear_gaussian, Potential, PotentialPair};
    use crate::rng::NoiseStream;
    use approx::assert_relative_eq;

    fn ou_model(dim: usize) -> crate::models::McKeanVlasovModel {
        make_linear_gaussian(
            SquareMatrix::zeros(dim),
            SquareMatrix::identity(dim).scale(-1.0),
            SquareMatrix::zeros(dim),
        )
        .unwrap()
    }

    #[test]
    fn zero_model_keeps_state() {
        let model = make_linear_gaussian(
            SquareMatrix::zeros(2),
            SquareMatrix::zeros(2),
            SquareMatrix::zeros(2),
        )
        .unwrap();
        let mu0 = crate::oracles::GaussianMeasure::isotropic(2, 0.0, 1.0).unwrap();
        let mut src = MeasureFlowSource::exact_linear_gaussian(&model, &mu0).unwrap();
        let mut noise = NoiseStream::new(1, 1);
        let run = run_flow(&model, &mut src, vec![0.3, -0.4], 0.0, 1.0, 0.1, &mut noise).unwrap();
        assert_eq!(run.path.last().unwrap(), &vec![0.3, -0.4]);
    }

    #[test]
    fn deterministic_ou_converges_to_exponential() {
        let model = ou_model(1);
        let mu0 = crate::oracles::GaussianMeasure::isotropic(1, 0.0, 0.0).unwrap();
        let mut err_prev = f64::INFINITY;
        for &h in &[0.01, 0.005, 0.0025] {
            let mut src = MeasureFlowSource::exact_linear_gaussian(&model, &mu0).unwrap();
            let mut noise = NoiseStream::new(1, 1);
            let run = run_flow(&model, &mut src, vec![1.0], 0.0, 1.0, h, &mut noise).unwrap();
            let err = (run.path.last().unwrap()[0] - (-1.0f64).exp()).abs();
            assert!(err < err_prev);
            err_prev = err;
        }
        assert!(err_prev < 1e-3);
    }

    #[test]
    fn constant_coefficients_keep_jacobian_identity() {
        // Drift constant in the state and constant diffusion: J stays I.
        let pair =
            PotentialPair::new(Potential::zero(2), Potential::zero(2), 1.0).unwrap();
        let model = make_langevin(pair).unwrap();
        let mut src = MeasureFlowSource::frozen(vec![vec![0.0, 0.0]]).unwrap();
        let mut noise = NoiseStream::new(3, 3);
        let run = run_flow_with_jacobian(
            &model,
            &mut src,
            vec![0.5, 0.5],
            0.0,
            1.0,
            0.01,
            &mut noise,
            10,
        )
        .unwrap();
        for f in &run.frobenius_sq {
            assert_relative_eq!(*f, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_jacobian_decays_exponentially() {
        let model = ou_model(2);
        let mu0 = crate::oracles::GaussianMeasure::isotropic(2, 0.0, 1.0).unwrap();
        let mut src = MeasureFlowSource::exact_linear_gaussian(&model, &mu0).unwrap();
        let mut noise = NoiseStream::new(5, 0);
        let run = run_flow_with_jacobian(
            &model,
            &mut src,
            vec![1.0, 0.0],
            0.0,
            2.0,
            0.001,
            &mut noise,
            200,
        )
        .unwrap();
        for (t, s) in run.times.iter().zip(&run.spectral) {
            let expect = (-t).exp();
            assert_relative_eq!(*s, expect, max_relative = 5e-3);
        }
    }

    #[test]
    fn coupled_pair_same_start_is_bitwise_identical() {
        let pair = PotentialPair::new(
            Potential::quadratic(2, 1.0),
            Potential::quadratic_interaction(2, 0.5),
            1.0,
        )
        .unwrap();
        let model = make_langevin(pair).unwrap();
        let mut src = MeasureFlowSource::frozen(vec![vec![0.2, -0.1], vec![0.4, 0.3]]).unwrap();
        let mut noise = NoiseStream::new(9, 2);
        let run = run_coupled_pair(
            &model,
            CoupledSources::Shared(&mut src),
            vec![0.7, 0.7],
            vec![0.7, 0.7],
            0.0,
            1.0,
            0.01,
            &mut noise,
        )
        .unwrap();
        for (x, y) in run.first.iter().zip(&run.second) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn coupled_contraction_beats_envelope_with_slack() {
        // Quadratic confinement of curvature 1 + quadratic interaction: the
        // gap contracts at least at rate 1, with discrete slack 1 + c h t.
        let pair = PotentialPair::new(
            Potential::quadratic(1, 1.0),
            Potential::quadratic_interaction(1, 0.5),
            1.0,
        )
        .unwrap();
        let model = make_langevin(pair).unwrap();
        let mut src = MeasureFlowSource::frozen(vec![vec![0.0]]).unwrap();
        let mut noise = NoiseStream::new(11, 4);
        let h = 1e-3;
        let run = run_coupled_pair(
            &model,
            CoupledSources::Shared(&mut src),
            vec![0.5],
            vec![-0.5],
            0.0,
            3.0,
            h,
            &mut noise,
        )
        .unwrap();
        let gaps = run.gaps();
        for (t, g) in run.times.iter().zip(&gaps).skip(1) {
            let bound = (-t).exp() * (1.0 + tolerances::DISCRETE_SLACK_RATE * h * t);
            assert!(*g <= bound, "gap {g} above envelope {bound} at t={t}");
        }
    }

    #[test]
    fn horizon_off_grid_is_rejected() {
        assert!(matches!(step_count(0.0, 1.05, 0.1), Err(Error::GridMismatch(_))));
        assert!(step_count(0.0, 1.0, 0.1).is_ok());
    }
}

//! Stochastic successive convex approximation over the RIS phase angles.
//!
//! The average-rate objective is smoothed through a recursive gradient
//! estimate: each incoming channel realization contributes one sample
//! gradient, the estimate is mixed with weight `i^-beta`, a quadratic
//! surrogate around the current iterate is minimized in closed form, and the
//! iterate moves with the diminishing weight `i^-alpha`. Working on the
//! unconstrained angles keeps the unit-modulus constraint implicit.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chanmodel::ChannelRealization;
use crate::sysmodel::{LinkBudget, PhaseVector};
use crate::{Error, Result};

/// Hyperparameters of the rate optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SscaParams {
    /// Surrogate curvature; also the inverse step scale.
    pub tau: f64,
    /// Iterate-smoothing exponent: step weight `i^-alpha`.
    pub alpha: f64,
    /// Gradient-averaging exponent: mixing weight `i^-beta`.
    pub beta: f64,
    /// Stop once the surrogate gap between consecutive iterates drops below this.
    pub epsilon: f64,
    /// Hard iteration cap.
    pub max_iters: usize,
}

impl Default for SscaParams {
    fn default() -> Self {
        Self {
            tau: 0.05,
            alpha: 0.9,
            beta: 0.6,
            epsilon: 1e-4,
            max_iters: 5000,
        }
    }
}

impl SscaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.5 && self.beta <= 1.0) {
            return Err(Error::InvalidConfig("beta must lie in [0.5, 1]".into()));
        }
        if !(self.alpha > self.beta && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (beta, 1]".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be > 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer iterate: current angles, smoothed gradient estimate, counters.
#[derive(Debug, Clone)]
pub struct SscaState {
    pub phi: DVector<f64>,
    pub grad_est: DVector<f64>,
    pub iter: usize,
    pub last_surrogate_gap: f64,
}

impl SscaState {
    /// Fresh state at `phi` with a zero gradient estimate.
    pub fn new(phi: DVector<f64>) -> Self {
        let grad_est = DVector::zeros(phi.len());
        Self {
            phi,
            grad_est,
            iter: 0,
            last_surrogate_gap: f64::INFINITY,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The stopping statistic dropped below epsilon.
    Converged,
    /// The iteration cap fired first.
    MaxIters,
    /// The realization stream ran dry before either rule fired.
    StreamExhausted,
}

/// One diagnostics row per iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SscaTraceRow {
    pub iteration: usize,
    pub surrogate_gap: f64,
    /// Running average of the per-sample rate (bits/s/Hz) at the pre-update iterate.
    pub rate_estimate: f64,
}

/// Outcome of [`run_ssca`].
#[derive(Debug, Clone)]
pub struct SscaRun {
    pub theta: PhaseVector,
    pub trace: Vec<SscaTraceRow>,
    pub termination: Termination,
    pub iterations: usize,
}

/// Rate gradient with respect to the complex reflection vector:
/// `2 A theta / (1 + theta^H A theta)` with `A = (P_T/sigma^2) H H^H`
/// (natural-log convention).
pub fn grad_rate_theta(
    theta: &PhaseVector,
    chan: &ChannelRealization,
    budget: &LinkBudget,
) -> DVector<Complex64> {
    let c = budget.snr_scale();
    let v = chan.h_stack.adjoint() * theta.theta(); // H^H theta, length M
    let q = c * v.norm_squared();
    (&chan.h_stack * v) * Complex64::from(2.0 * c / (1.0 + q))
}

/// Chain-rule rate gradient with respect to the phase angles:
/// `Re{ -j theta^* o grad_theta }` evaluated at `theta = e^{j phi}`.
pub fn grad_rate_phi(
    phi: &DVector<f64>,
    chan: &ChannelRealization,
    budget: &LinkBudget,
) -> DVector<f64> {
    let theta = PhaseVector::from_phases(phi.as_slice());
    let g = grad_rate_theta(&theta, chan, budget);
    DVector::from_fn(phi.len(), |n, _| (theta.theta()[n].conj() * g[n]).im)
}

/// Gradient-estimate recursion for iteration `state.iter + 1`:
/// `f <- (1 - rho) f - rho * sample_grad` with `rho = i^-beta`.
pub fn update_gradient_estimate(
    state: &SscaState,
    sample_grad: &DVector<f64>,
    params: &SscaParams,
) -> DVector<f64> {
    let i = (state.iter + 1) as f64;
    let rho = i.powf(-params.beta);
    &state.grad_est * (1.0 - rho) - sample_grad * rho
}

/// Closed-form minimizer of the quadratic surrogate:
/// `phi_hat = phi_prev - grad_est / tau`.
pub fn surrogate_minimizer(
    phi_prev: &DVector<f64>,
    grad_est: &DVector<f64>,
    tau: f64,
) -> DVector<f64> {
    assert!(tau > 0.0, "surrogate curvature must be positive");
    phi_prev - grad_est / tau
}

fn surrogate_value(phi: &DVector<f64>, phi_prev: &DVector<f64>, grad_est: &DVector<f64>, tau: f64) -> f64 {
    let delta = phi - phi_prev;
    delta.dot(grad_est) + 0.5 * tau * delta.norm_squared()
}

/// One optimizer iteration: sample gradient, estimate update, surrogate
/// minimization, and smoothing. Records the surrogate gap used by the
/// stopping rule.
pub fn ssca_step(
    state: &SscaState,
    chan: &ChannelRealization,
    params: &SscaParams,
    budget: &LinkBudget,
) -> SscaState {
    let i = state.iter + 1;
    let sample_grad = grad_rate_phi(&state.phi, chan, budget);
    let grad_est = update_gradient_estimate(state, &sample_grad, params);
    let phi_hat = surrogate_minimizer(&state.phi, &grad_est, params.tau);
    let gamma = (i as f64).powf(-params.alpha);
    let phi = &state.phi * (1.0 - gamma) + phi_hat * gamma;
    // Gap between the surrogate at the new and old iterate; the surrogate
    // vanishes at the expansion point, so this is just its value at phi.
    let gap = surrogate_value(&phi, &state.phi, &grad_est, params.tau).abs();
    SscaState {
        phi,
        grad_est,
        iter: i,
        last_surrogate_gap: gap,
    }
}

/// Runs the optimizer until the surrogate-gap rule fires, the iteration cap
/// is hit, or the stream dries up.
pub fn run_ssca<I>(
    stream: I,
    params: &SscaParams,
    budget: &LinkBudget,
    init_phi: DVector<f64>,
) -> Result<SscaRun>
where
    I: IntoIterator<Item = ChannelRealization>,
{
    params.validate()?;
    let mut state = SscaState::new(init_phi);
    let mut trace = Vec::new();
    let mut rate_sum = 0.0;
    let mut termination = Termination::MaxIters;
    let mut stream = stream.into_iter();

    while state.iter < params.max_iters {
        let Some(chan) = stream.next() else {
            termination = Termination::StreamExhausted;
            break;
        };
        let pre_theta = PhaseVector::from_phases(state.phi.as_slice());
        rate_sum += crate::sysmodel::instantaneous_rate(&pre_theta, &chan, budget);
        state = ssca_step(&state, &chan, params, budget);
        trace.push(SscaTraceRow {
            iteration: state.iter,
            surrogate_gap: state.last_surrogate_gap,
            rate_estimate: rate_sum / state.iter as f64,
        });
        if state.last_surrogate_gap < params.epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(SscaRun {
        theta: PhaseVector::from_phases(state.phi.as_slice()),
        iterations: state.iter,
        trace,
        termination,
    })
}

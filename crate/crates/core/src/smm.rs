//! Stochastic majorization-minimization for average-SNR maximization.
//!
//! The average rate is approximated by the average received SNR, which turns
//! the objective into the expectation of the quadratic form `theta^H B_i
//! theta` with `B_i = -H_i H_i^H`. Because every `B_i` is negative
//! semidefinite the unit-modulus constraint can be relaxed to the unit disc
//! without changing the optimum, and each incoming realization updates three
//! running sample averages from which a per-element closed-form phase update
//! follows. No hyperparameter tuning is needed, so the loop can run online.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chanmodel::ChannelRealization;
use crate::sysmodel::{LinkBudget, PhaseVector};
use crate::{Error, Result};

/// Hyperparameters of the SNR optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmmParams {
    /// Strong-convexity pad on the surrogate; any small positive value works.
    pub tau: f64,
    /// Stop once the sample-average objective moves less than this per step.
    pub epsilon: f64,
    /// Hard iteration cap.
    pub max_iters: usize,
}

impl Default for SmmParams {
    fn default() -> Self {
        Self {
            tau: 1e-6,
            epsilon: 0.01,
            max_iters: 2000,
        }
    }
}

impl SmmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be > 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer iterate plus the three running sample averages.
#[derive(Debug, Clone)]
pub struct SmmState {
    /// Current reflection vector.
    pub theta: PhaseVector,
    /// Sample average of the quadratic-form matrices `B_i`.
    pub b_tilde: DMatrix<Complex64>,
    /// Sample average of `B_i theta^{(i-1)}`.
    pub d: DVector<Complex64>,
    /// Sample average of the past iterates.
    pub theta_ddot: DVector<Complex64>,
    /// Completed iterations.
    pub t: usize,
    /// Sample-average objective at the current iterate.
    pub last_objective: f64,
    /// Stopping statistic of the last step.
    pub last_gap: f64,
    /// Surrogate increase of the last step (0 when descent held, as it must).
    pub last_descent_violation: f64,
}

impl SmmState {
    pub fn new(init_theta: PhaseVector) -> Self {
        let nk = init_theta.len();
        Self {
            theta: init_theta,
            b_tilde: DMatrix::zeros(nk, nk),
            d: DVector::zeros(nk),
            theta_ddot: DVector::zeros(nk),
            t: 0,
            last_objective: 0.0,
            last_gap: f64::INFINITY,
            last_descent_violation: 0.0,
        }
    }
}

/// One diagnostics row per slot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmmTraceRow {
    pub t: usize,
    /// Sample-average quadratic form at the current iterate (non-positive).
    pub g_tilde: f64,
    /// `-g_tilde`, the running SNR estimate.
    pub snr_estimate: f64,
}

/// Outcome of [`run_smm`].
#[derive(Debug, Clone)]
pub struct SmmRun {
    pub theta: PhaseVector,
    pub trace: Vec<SmmTraceRow>,
    pub termination: crate::ssca::Termination,
    pub iterations: usize,
    /// Largest per-step surrogate increase observed (should be ~0).
    pub max_descent_violation: f64,
    /// Largest unit-modulus deviation of any emitted iterate.
    pub max_unit_modulus_err: f64,
}

/// Quadratic-form matrix of one realization: `-H H^H`, Hermitian NSD.
pub fn negative_gram(chan: &ChannelRealization) -> DMatrix<Complex64> {
    -(&chan.h_stack * chan.h_stack.adjoint())
}

/// The per-sample objective `Re(theta^H B theta)`.
pub fn quadratic_objective(theta: &PhaseVector, b: &DMatrix<Complex64>) -> f64 {
    (theta.theta().adjoint() * b * theta.theta())[0].re
}

/// Majorizing surrogate of the quadratic objective around `anchor`:
/// touches at the anchor and upper-bounds elsewhere since `B` is NSD.
pub fn mm_surrogate(
    theta: &PhaseVector,
    anchor: &PhaseVector,
    b: &DMatrix<Complex64>,
    tau: f64,
) -> f64 {
    let lin = (anchor.theta().adjoint() * b * theta.theta())[0].re;
    let base = (anchor.theta().adjoint() * b * anchor.theta())[0].re;
    let dist = (theta.theta() - anchor.theta()).norm_squared();
    2.0 * lin - base + tau * dist
}

/// Advances the three sample averages with the `1/t` recursions, using the
/// pre-update iterate, and increments the slot counter. The reflection
/// vector itself is untouched.
pub fn update_saa(state: &SmmState, b_t: &DMatrix<Complex64>) -> SmmState {
    let t = state.t + 1;
    let w = 1.0 / t as f64;
    let keep = Complex64::from(1.0 - w);
    let fresh = Complex64::from(w);
    SmmState {
        b_tilde: b_t * fresh + &state.b_tilde * keep,
        d: (b_t * state.theta.theta()) * fresh + &state.d * keep,
        theta_ddot: state.theta.theta() * fresh + &state.theta_ddot * keep,
        t,
        ..state.clone()
    }
}

/// Per-element closed-form minimizer of the averaged surrogate over the unit
/// disc. The minimizer sits on the boundary, phase-aligned with
/// `tau * theta_ddot_n - d_n`; a vanishing alignment target keeps the
/// previous coefficient.
pub fn phase_update(
    d: &DVector<Complex64>,
    theta_ddot: &DVector<Complex64>,
    prev_theta: &PhaseVector,
    tau: f64,
) -> PhaseVector {
    assert!(tau > 0.0, "tau must be positive");
    let theta = DVector::from_fn(d.len(), |n, _| {
        let z = Complex64::from(tau) * theta_ddot[n] - d[n];
        let r = z.norm();
        if r == 0.0 {
            prev_theta.theta()[n]
        } else {
            z / r
        }
    });
    PhaseVector::from_theta(theta).expect("unit modulus by construction")
}

/// Averaged-surrogate value (constants dropped) that [`phase_update`]
/// minimizes over the unit-modulus set.
pub fn averaged_surrogate(state: &SmmState, theta: &PhaseVector, tau: f64) -> f64 {
    let tv = theta.theta();
    2.0 * state.d.dotc(tv).re - 2.0 * tau * state.theta_ddot.dotc(tv).re
        + tau * tv.norm_squared()
}

/// Sample-average objective `Re(theta^H B_tilde theta)`.
pub fn g_tilde(state: &SmmState, theta: &PhaseVector) -> f64 {
    quadratic_objective(theta, &state.b_tilde)
}

/// One slot of the optimizer: fresh quadratic form, sample-average updates,
/// per-element phase update, stopping statistic. The quadratic form is kept
/// in linear-SNR units so `tau` and `epsilon` stay dimensionless knobs
/// regardless of the link's path loss.
pub fn smm_step(
    state: &SmmState,
    chan: &ChannelRealization,
    params: &SmmParams,
    budget: &LinkBudget,
) -> SmmState {
    let b_t = negative_gram(chan) * Complex64::from(budget.snr_scale());
    let prev_theta = state.theta.clone();
    let mut next = update_saa(state, &b_t);
    let theta = phase_update(&next.d, &next.theta_ddot, &prev_theta, params.tau);

    next.last_descent_violation = (averaged_surrogate(&next, &theta, params.tau)
        - averaged_surrogate(&next, &prev_theta, params.tau))
    .max(0.0);
    // Stopping statistic: both iterates scored against the current average.
    let obj_new = g_tilde(&next, &theta);
    let obj_prev = g_tilde(&next, &prev_theta);
    next.last_gap = (obj_new - obj_prev).abs();
    next.last_objective = obj_new;
    next.theta = theta;
    next
}

/// Runs the optimizer until the objective-gap rule fires, the iteration cap
/// is hit, or the stream dries up.
pub fn run_smm<I>(
    stream: I,
    params: &SmmParams,
    budget: &LinkBudget,
    init_theta: PhaseVector,
) -> Result<SmmRun>
where
    I: IntoIterator<Item = ChannelRealization>,
{
    params.validate()?;
    let mut state = SmmState::new(init_theta);
    let mut trace = Vec::new();
    let mut termination = crate::ssca::Termination::MaxIters;
    let mut max_violation = 0.0f64;
    let mut max_unit_err = state.theta.unit_modulus_error();
    let mut stream = stream.into_iter();

    while state.t < params.max_iters {
        let Some(chan) = stream.next() else {
            termination = crate::ssca::Termination::StreamExhausted;
            break;
        };
        state = smm_step(&state, &chan, params, budget);
        max_violation = max_violation.max(state.last_descent_violation);
        max_unit_err = max_unit_err.max(state.theta.unit_modulus_error());
        trace.push(SmmTraceRow {
            t: state.t,
            g_tilde: state.last_objective,
            snr_estimate: -state.last_objective,
        });
        if state.last_gap < params.epsilon {
            termination = crate::ssca::Termination::Converged;
            break;
        }
    }

    Ok(SmmRun {
        theta: state.theta,
        iterations: state.t,
        trace,
        termination,
        max_descent_violation: max_violation,
        max_unit_modulus_err: max_unit_err,
    })
}

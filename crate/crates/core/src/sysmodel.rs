//! Signal model: effective-channel algebra, matched-filter beamforming,
//! instantaneous rate/SNR, and Monte-Carlo averaging.
//!
//! The user's receive signal collapses to `theta^H H_i w_i s_i + u_i`, where
//! `theta` stacks all RIS reflection coefficients and `H_i` is the stacked
//! effective channel. With maximum ratio transmission at the AP the rate is a
//! function of `||theta^H H_i||^2` alone, which is what everything here
//! computes.

use nalgebra::{DVector, RowDVector};
use num_complex::Complex64;

use crate::chanmodel::ChannelRealization;
use crate::{Error, Result};

/// Unit-modulus RIS reflection vector of length `N*K`.
///
/// Stored as the complex coefficients `theta_n = e^{j phi_n}`; the angle view
/// is recovered on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: DVector<Complex64>,
}

impl PhaseVector {
    /// Builds from phase angles; coefficients are exactly unit-modulus.
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            theta: DVector::from_iterator(
                phases.len(),
                phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
            ),
        }
    }

    /// Wraps existing coefficients, rejecting any entry off the unit circle
    /// by more than 1e-12.
    pub fn from_theta(theta: DVector<Complex64>) -> Result<Self> {
        for (n, e) in theta.iter().enumerate() {
            if (e.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "reflection coefficient {n} has modulus {}, expected 1",
                    e.norm()
                )));
            }
        }
        Ok(Self { theta })
    }

    /// All-ones vector (`phi = 0`), the deterministic default initializer.
    pub fn ones(len: usize) -> Self {
        Self {
            theta: DVector::from_element(len, Complex64::ONE),
        }
    }

    pub fn theta(&self) -> &DVector<Complex64> {
        &self.theta
    }

    /// Phase angles `phi_n = arg(theta_n)` in `(-pi, pi]`.
    pub fn phases(&self) -> Vec<f64> {
        self.theta.iter().map(|e| e.arg()).collect()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.len() == 0
    }

    /// Worst-case deviation of any coefficient from the unit circle.
    pub fn unit_modulus_error(&self) -> f64 {
        self.theta
            .iter()
            .map(|e| (e.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Transmit power over noise power as a single linear scale `P_T / sigma_0^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    snr_scale: f64,
}

impl LinkBudget {
    pub fn new(snr_scale: f64) -> Self {
        assert!(snr_scale > 0.0, "snr_scale must be positive");
        Self { snr_scale }
    }

    /// Folds dBm transmit power and dBm noise power into the linear scale.
    pub fn from_dbm(tx_power_dbm: f64, noise_power_dbm: f64) -> Self {
        Self::new(10f64.powf((tx_power_dbm - noise_power_dbm) / 10.0))
    }

    pub fn snr_scale(&self) -> f64 {
        self.snr_scale
    }
}

/// Which per-realization metric to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rate,
    Snr,
}

/// The effective MISO channel seen by the user: the row `theta^H H`.
pub fn effective_channel(theta: &PhaseVector, chan: &ChannelRealization) -> RowDVector<Complex64> {
    theta.theta().adjoint() * &chan.h_stack
}

/// Maximum ratio transmission beamformer `w = sqrt(P) (theta^H H)^H / ||theta^H H||`.
pub fn mrt_beamformer(
    theta: &PhaseVector,
    chan: &ChannelRealization,
    tx_power_linear: f64,
) -> Result<DVector<Complex64>> {
    let row = effective_channel(theta, chan);
    let norm = row.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    Ok(row.adjoint() * Complex64::from(tx_power_linear.sqrt() / norm))
}

/// Instantaneous received SNR before the power/noise scale: `||theta^H H||^2`.
pub fn instantaneous_snr(theta: &PhaseVector, chan: &ChannelRealization) -> f64 {
    effective_channel(theta, chan).norm_squared()
}

/// Instantaneous achievable rate in bits/s/Hz:
/// `log2(1 + (P_T/sigma_0^2) ||theta^H H||^2)`.
pub fn instantaneous_rate(
    theta: &PhaseVector,
    chan: &ChannelRealization,
    budget: &LinkBudget,
) -> f64 {
    (1.0 + budget.snr_scale() * instantaneous_snr(theta, chan)).log2()
}

/// Arithmetic mean of the chosen metric over a realization stream.
pub fn average_metric<'a, I>(
    theta: &PhaseVector,
    realizations: I,
    metric: Metric,
    budget: &LinkBudget,
) -> Result<f64>
where
    I: IntoIterator<Item = &'a ChannelRealization>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for chan in realizations {
        sum += match metric {
            Metric::Rate => instantaneous_rate(theta, chan, budget),
            Metric::Snr => instantaneous_snr(theta, chan),
        };
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyStream);
    }
    Ok(sum / count as f64)
}

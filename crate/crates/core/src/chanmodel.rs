//! Channel model: long-term snapshots and per-slot realizations.
//!
//! The access-point-to-RIS links are Rician with ULA line-of-sight responses;
//! the RIS-to-user links are sums of `L` random paths with an exponential
//! power profile. A [`Snapshot`] freezes the long-term geometry (angles, path
//! variances, LoS components); [`sample_realization`] then draws i.i.d.
//! small-scale fading conditioned on that snapshot. Optimizers only ever see
//! the resulting [`ChannelRealization`]s, keeping them model-free.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Static system parameters shared by the channel model and the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of AP antennas (`M`).
    pub num_ap_antennas: usize,
    /// Number of RISs (`K`).
    pub num_ris: usize,
    /// Reflecting elements per RIS (`N`).
    pub elements_per_ris: usize,
    /// Rician factor of the AP-RIS links (linear LoS/NLoS power ratio).
    pub rician_factor: f64,
    /// Number of propagation paths between each RIS and the user (`L`).
    pub num_paths: usize,
    /// AP-RIS and RIS-user distance in meters (assumed equal).
    pub distance_m: f64,
    /// Transmission bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Transmit power at the AP in dBm.
    pub tx_power_dbm: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_ap_antennas: 4,
            num_ris: 2,
            elements_per_ris: 20,
            rician_factor: 10.0,
            num_paths: 5,
            distance_m: 10.0,
            bandwidth_hz: 2.0e5,
            noise_psd_dbm_hz: -170.0,
            tx_power_dbm: 10.0,
        }
    }
}

impl SystemConfig {
    /// Total number of reflecting elements `N * K`.
    pub fn total_elements(&self) -> usize {
        self.num_ris * self.elements_per_ris
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ap_antennas == 0 || self.num_ris == 0 || self.elements_per_ris == 0 {
            return Err(Error::InvalidConfig(
                "antenna, RIS and element counts must all be >= 1".into(),
            ));
        }
        if self.num_paths == 0 {
            return Err(Error::InvalidConfig("num_paths must be >= 1".into()));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::InvalidConfig("rician_factor must be >= 0".into()));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::InvalidConfig("distance_m must be > 0".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("bandwidth_hz must be > 0".into()));
        }
        Ok(())
    }
}

/// One draw of the long-term channel geometry.
///
/// Small-scale realizations are sampled conditionally on a snapshot; the
/// snapshot itself is redrawn only when the surrounding geometry changes.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Angle of arrival at each RIS, radians in `(0, 2*pi]`.
    pub aoa_ris: Vec<f64>,
    /// Angle of departure at the AP toward each RIS, radians in `(0, 2*pi]`.
    pub aod_ap: Vec<f64>,
    /// Per-RIS, per-path angles of the RIS-user links (`K x L`).
    pub user_path_angles: Vec<Vec<f64>>,
    /// Per-RIS, per-path gain variances, normalized to sum to 1 per RIS.
    pub path_gain_vars: Vec<Vec<f64>>,
    /// LoS component of each AP-RIS link: rank-1 steering outer product (`N x M`).
    pub los_components: Vec<DMatrix<Complex64>>,
}

/// One small-scale fading draw: the stacked effective channel plus the
/// per-RIS links it was assembled from.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Stacked effective channel, `(N*K) x M`; row-block `k` is
    /// `diag(h_k^H) G_k`.
    pub h_stack: DMatrix<Complex64>,
    /// AP-RIS channels `G_k`, each `N x M` (path loss applied).
    pub per_ris_g: Vec<DMatrix<Complex64>>,
    /// RIS-user channels `h_k`, each length `N` (path loss applied).
    pub per_ris_h: Vec<DVector<Complex64>>,
}

/// ULA steering vector: entry `m` is `e^{j*pi*m*sin(angle)}`.
pub fn ula_steering(n_elems: usize, angle: f64) -> DVector<Complex64> {
    assert!(n_elems >= 1, "steering vector needs at least one element");
    let step = std::f64::consts::PI * angle.sin();
    DVector::from_fn(n_elems, |m, _| Complex64::from_polar(1.0, step * m as f64))
}

/// Free-space path loss in dB: `38.46 + 20 log10(d)`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    assert!(distance_m > 0.0, "distance must be positive");
    38.46 + 20.0 * distance_m.log10()
}

/// Total noise power over the configured bandwidth, in dBm.
pub fn noise_power_dbm(config: &SystemConfig) -> f64 {
    config.noise_psd_dbm_hz + 10.0 * config.bandwidth_hz.log10()
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 2*pi]: map [0, 1) through 1 - u.
    (1.0 - rng.random::<f64>()) * std::f64::consts::TAU
}

/// Draws the long-term geometry: all angles uniform on `(0, 2*pi]`, path-gain
/// variances exponential then normalized per RIS, LoS components from the ULA
/// responses.
pub fn sample_snapshot<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Snapshot {
    let k = config.num_ris;
    let l = config.num_paths;
    let aoa_ris: Vec<f64> = (0..k).map(|_| uniform_angle(rng)).collect();
    let aod_ap: Vec<f64> = (0..k).map(|_| uniform_angle(rng)).collect();
    let user_path_angles: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..l).map(|_| uniform_angle(rng)).collect())
        .collect();
    let path_gain_vars: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let los_components: Vec<DMatrix<Complex64>> = (0..k)
        .map(|ki| {
            let a_n = ula_steering(config.elements_per_ris, aoa_ris[ki]);
            let a_m = ula_steering(config.num_ap_antennas, aod_ap[ki]);
            &a_n * a_m.adjoint()
        })
        .collect();
    Snapshot {
        aoa_ris,
        aod_ap,
        user_path_angles,
        path_gain_vars,
        los_components,
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    // CN(0, v): real and imaginary parts each N(0, v/2).
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws one small-scale realization conditioned on `snapshot`.
///
/// AP-RIS links are Rician mixes of the snapshot LoS component and an i.i.d.
/// CN(0,1) scatter matrix; RIS-user links sum `L` steered paths with CN(0,
/// sigma^2) gains. The amplitude path loss `10^(-PL/20)` is applied to each
/// hop separately, so the cascade carries both losses.
pub fn sample_realization<R: Rng + ?Sized>(
    snapshot: &Snapshot,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let (m, k, n, l) = (
        config.num_ap_antennas,
        config.num_ris,
        config.elements_per_ris,
        config.num_paths,
    );
    if snapshot.aoa_ris.len() != k
        || snapshot.los_components.len() != k
        || snapshot.los_components.iter().any(|g| g.shape() != (n, m))
        || snapshot.path_gain_vars.iter().any(|v| v.len() != l)
    {
        return Err(Error::DimensionMismatch(format!(
            "snapshot does not match config (K={k}, N={n}, M={m}, L={l})"
        )));
    }

    let link_amp = 10f64.powf(-path_loss_db(config.distance_m) / 20.0);
    let rho = config.rician_factor;
    let w_los = (rho / (rho + 1.0)).sqrt();
    let w_nlos = (1.0 / (rho + 1.0)).sqrt();

    let mut per_ris_g = Vec::with_capacity(k);
    let mut per_ris_h = Vec::with_capacity(k);
    let mut h_stack = DMatrix::zeros(n * k, m);

    for ki in 0..k {
        let scatter = DMatrix::from_fn(n, m, |_, _| complex_gaussian(rng, 1.0));
        let g = (&snapshot.los_components[ki] * Complex64::from(w_los)
            + scatter * Complex64::from(w_nlos))
            * Complex64::from(link_amp);

        let mut h = DVector::<Complex64>::zeros(n);
        for li in 0..l {
            let gain = complex_gaussian(rng, snapshot.path_gain_vars[ki][li]);
            h += ula_steering(n, snapshot.user_path_angles[ki][li]) * gain;
        }
        h *= Complex64::from(link_amp);

        for row in 0..n {
            let hc = h[row].conj();
            for col in 0..m {
                h_stack[(ki * n + row, col)] = hc * g[(row, col)];
            }
        }
        per_ris_g.push(g);
        per_ris_h.push(h);
    }

    Ok(ChannelRealization {
        h_stack,
        per_ris_g,
        per_ris_h,
    })
}

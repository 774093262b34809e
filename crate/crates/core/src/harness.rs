//! Experiment orchestration: snapshots x realizations protocol, scheme
//! comparison, CSV/JSON emission.
//!
//! For every sweep point and snapshot the harness draws the long-term
//! geometry once, trains each scheme on its own realization stream, and
//! scores all schemes on one shared held-out evaluation set so per-snapshot
//! differences are noise-paired. Snapshots are independent work units and run
//! in parallel; every random draw comes from a named sub-stream of the master
//! seed, so results are byte-reproducible regardless of thread scheduling.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanmodel::{
    noise_power_dbm, sample_realization, sample_snapshot, ChannelRealization, SystemConfig,
};
use crate::rng::substream;
use crate::smm::{run_smm, SmmParams};
use crate::ssca::{run_ssca, SscaParams, Termination};
use crate::sysmodel::{instantaneous_rate, LinkBudget, PhaseVector};
use crate::{Error, Result};

/// What the experiment sweeps over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Transmit-power sweep in dBm, geometry fixed.
    TxPowerDbm(Vec<f64>),
    /// RIS-count sweep at a fixed total element budget: each point uses
    /// `counts[i]` surfaces of `total_elements / counts[i]` elements.
    RisCount {
        counts: Vec<usize>,
        total_elements: usize,
    },
}

/// Phase-selection schemes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ssca,
    Smm,
    Random,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Ssca => "ssca",
            Scheme::Smm => "smm",
            Scheme::Random => "random",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ssca" => Ok(Scheme::Ssca),
            "smm" => Ok(Scheme::Smm),
            "random" => Ok(Scheme::Random),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Complete description of one experiment; serializable so a run can be
/// reproduced from its JSON sidecar alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub num_snapshots: usize,
    pub num_eval_realizations: usize,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub ssca: SscaParams,
    pub smm: SmmParams,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            num_snapshots: 100,
            num_eval_realizations: 100,
            sweep: Sweep::TxPowerDbm(vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]),
            schemes: vec![Scheme::Ssca, Scheme::Smm, Scheme::Random],
            seed: 1,
            ssca: SscaParams::default(),
            smm: SmmParams::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.ssca.validate()?;
        self.smm.validate()?;
        if self.num_snapshots == 0 || self.num_eval_realizations == 0 {
            return Err(Error::InvalidConfig(
                "snapshot and evaluation counts must be >= 1".into(),
            ));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        match &self.sweep {
            Sweep::TxPowerDbm(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidConfig("empty power sweep".into()));
                }
            }
            Sweep::RisCount {
                counts,
                total_elements,
            } => {
                if counts.is_empty() {
                    return Err(Error::InvalidConfig("empty RIS-count sweep".into()));
                }
                for &k in counts {
                    if k == 0 || total_elements % k != 0 {
                        return Err(Error::InvalidConfig(format!(
                            "total_elements {total_elements} is not divisible by K={k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolved system configuration at one sweep point.
    fn config_at(&self, idx: usize) -> SystemConfig {
        let mut cfg = self.system.clone();
        match &self.sweep {
            Sweep::TxPowerDbm(points) => cfg.tx_power_dbm = points[idx],
            Sweep::RisCount {
                counts,
                total_elements,
            } => {
                cfg.num_ris = counts[idx];
                cfg.elements_per_ris = total_elements / counts[idx];
            }
        }
        cfg
    }

    fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            Sweep::TxPowerDbm(points) => points.clone(),
            Sweep::RisCount { counts, .. } => counts.iter().map(|&k| k as f64).collect(),
        }
    }

    /// Sub-stream index path for one (sweep point, snapshot) cell. Power
    /// sweeps reuse the same geometry across points; count sweeps cannot.
    fn stream_path(&self, sweep_idx: usize, snap_idx: usize) -> Vec<u64> {
        match &self.sweep {
            Sweep::TxPowerDbm(_) => vec![snap_idx as u64],
            Sweep::RisCount { .. } => vec![sweep_idx as u64, snap_idx as u64],
        }
    }
}

/// Aggregated outcome for one (scheme, sweep point) pair.
#[derive(Debug, Clone, Serialize)]
pub struct SchemePoint {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub mean_rate_bps_hz: f64,
    pub stderr: f64,
    pub per_snapshot_rates: Vec<f64>,
    pub iteration_counts: Vec<usize>,
    pub wall_clock_s: f64,
    /// Worst SMM surrogate increase over all runs at this point (0 otherwise).
    pub max_descent_violation: f64,
    /// Worst unit-modulus deviation of any emitted phase vector.
    pub max_unit_modulus_err: f64,
}

/// All points of one experiment, in (sweep, scheme) order.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub points: Vec<SchemePoint>,
}

impl ExperimentResult {
    pub fn point(&self, scheme: Scheme, sweep_value: f64) -> Option<&SchemePoint> {
        self.points
            .iter()
            .find(|p| p.scheme == scheme && p.sweep_value == sweep_value)
    }
}

/// Uniform random phases on `(0, 2*pi]`, the no-CSI baseline.
pub fn random_phase_baseline<R: Rng + ?Sized>(nk: usize, rng: &mut R) -> PhaseVector {
    assert!(nk >= 1);
    let phases: Vec<f64> = (0..nk)
        .map(|_| (1.0 - rng.random::<f64>()) * std::f64::consts::TAU)
        .collect();
    PhaseVector::from_phases(&phases)
}

struct SnapshotOutcome {
    rates: Vec<f64>,      // one per scheme, spec order
    iterations: Vec<usize>,
    descent_violation: f64,
    unit_modulus_err: f64,
}

fn train_and_score(
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    budget: &LinkBudget,
    sweep_idx: usize,
    snap_idx: usize,
) -> Result<SnapshotOutcome> {
    let path = spec.stream_path(sweep_idx, snap_idx);
    let snapshot = sample_snapshot(cfg, &mut substream(spec.seed, "snapshot", &path));

    let eval_set: Vec<ChannelRealization> = {
        let mut rng = substream(spec.seed, "eval", &path);
        (0..spec.num_eval_realizations)
            .map(|_| sample_realization(&snapshot, cfg, &mut rng))
            .collect::<Result<_>>()?
    };
    let score = |theta: &PhaseVector| -> f64 {
        eval_set
            .iter()
            .map(|r| instantaneous_rate(theta, r, budget))
            .sum::<f64>()
            / eval_set.len() as f64
    };

    let nk = cfg.total_elements();
    let mut rates = Vec::with_capacity(spec.schemes.len());
    let mut iterations = Vec::with_capacity(spec.schemes.len());
    let mut descent_violation = 0.0f64;
    let mut unit_modulus_err = 0.0f64;

    for scheme in &spec.schemes {
        match scheme {
            Scheme::Ssca => {
                let mut rng = substream(spec.seed, "train-ssca", &path);
                let snap = &snapshot;
                let stream = (0..spec.ssca.max_iters)
                    .map(move |_| sample_realization(snap, cfg, &mut rng).expect("dims fixed"));
                let run = run_ssca(stream, &spec.ssca, budget, DVector::zeros(nk))?;
                unit_modulus_err = unit_modulus_err.max(run.theta.unit_modulus_error());
                rates.push(score(&run.theta));
                iterations.push(run.iterations);
            }
            Scheme::Smm => {
                let mut rng = substream(spec.seed, "train-smm", &path);
                let snap = &snapshot;
                let stream = (0..spec.smm.max_iters)
                    .map(move |_| sample_realization(snap, cfg, &mut rng).expect("dims fixed"));
                let run = run_smm(stream, &spec.smm, budget, PhaseVector::ones(nk))?;
                descent_violation = descent_violation.max(run.max_descent_violation);
                unit_modulus_err = unit_modulus_err.max(run.max_unit_modulus_err);
                rates.push(score(&run.theta));
                iterations.push(run.iterations);
            }
            Scheme::Random => {
                // One fresh draw per evaluation realization: a scheme with no
                // channel memory at all.
                let mut rng = substream(spec.seed, "baseline-phase", &path);
                let mut sum = 0.0;
                for r in &eval_set {
                    let theta = random_phase_baseline(nk, &mut rng);
                    unit_modulus_err = unit_modulus_err.max(theta.unit_modulus_error());
                    sum += instantaneous_rate(&theta, r, budget);
                }
                rates.push(sum / eval_set.len() as f64);
                iterations.push(0);
            }
        }
    }

    Ok(SnapshotOutcome {
        rates,
        iterations,
        descent_violation,
        unit_modulus_err,
    })
}

/// Runs the full protocol: per sweep point and snapshot, train every scheme
/// and score it on the shared evaluation set; aggregate across snapshots.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let sweep_values = spec.sweep_values();
    let mut points = Vec::new();

    for (sweep_idx, &sweep_value) in sweep_values.iter().enumerate() {
        let cfg = spec.config_at(sweep_idx);
        let budget = LinkBudget::from_dbm(cfg.tx_power_dbm, noise_power_dbm(&cfg));
        let started = Instant::now();

        let outcomes: Vec<SnapshotOutcome> = (0..spec.num_snapshots)
            .into_par_iter()
            .map(|snap_idx| train_and_score(spec, &cfg, &budget, sweep_idx, snap_idx))
            .collect::<Result<_>>()?;
        let elapsed = started.elapsed().as_secs_f64();

        for (si, scheme) in spec.schemes.iter().enumerate() {
            let per_snapshot_rates: Vec<f64> = outcomes.iter().map(|o| o.rates[si]).collect();
            let n = per_snapshot_rates.len() as f64;
            let mean = per_snapshot_rates.iter().sum::<f64>() / n;
            let var = per_snapshot_rates
                .iter()
                .map(|r| (r - mean).powi(2))
                .sum::<f64>()
                / n;
            let stderr = (var / n).sqrt();
            points.push(SchemePoint {
                scheme: *scheme,
                sweep_value,
                mean_rate_bps_hz: mean,
                stderr,
                per_snapshot_rates,
                iteration_counts: outcomes.iter().map(|o| o.iterations[si]).collect(),
                wall_clock_s: elapsed,
                max_descent_violation: outcomes
                    .iter()
                    .map(|o| o.descent_violation)
                    .fold(0.0, f64::max),
                max_unit_modulus_err: outcomes
                    .iter()
                    .map(|o| o.unit_modulus_err)
                    .fold(0.0, f64::max),
            });
        }
    }

    Ok(ExperimentResult { points })
}

/// Writes the summary CSV and the reproducibility JSON sidecar; returns both
/// paths. Timing fields are deliberately excluded so identical seeds produce
/// identical bytes.
pub fn emit_results(
    result: &ExperimentResult,
    spec: &ExperimentSpec,
    out_dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&csv_path, io),
        other => Error::InvalidConfig(format!("csv error: {other:?}")),
    })?;
    writer
        .write_record(["scheme", "sweep_value", "mean_rate_bps_hz", "stderr", "n_snapshots"])
        .and_then(|_| {
            for p in &result.points {
                writer.write_record([
                    p.scheme.label().to_string(),
                    format!("{}", p.sweep_value),
                    format!("{:.12e}", p.mean_rate_bps_hz),
                    format!("{:.12e}", p.stderr),
                    format!("{}", p.per_snapshot_rates.len()),
                ])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;

    let json_path = out_dir.join(format!("{stem}.json"));
    let sidecar = serde_json::json!({
        "spec": spec,
        "seed": spec.seed,
        "version": concat!("risopt-v", env!("CARGO_PKG_VERSION")),
    });
    let payload = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| Error::InvalidConfig(format!("json encode failed: {e}")))?;
    std::fs::write(&json_path, payload).map_err(|e| Error::io(&json_path, e))?;

    Ok((csv_path, json_path))
}

/// Writes the per-iteration traces of both optimizers for one snapshot.
pub fn emit_traces(
    ssca_trace: &[crate::ssca::SscaTraceRow],
    smm_trace: &[crate::smm::SmmTraceRow],
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let ssca_path = out_dir.join("ssca_trace.csv");
    let mut w = csv::Writer::from_path(&ssca_path)
        .map_err(|e| Error::InvalidConfig(format!("csv open failed: {e}")))?;
    w.write_record(["iteration", "surrogate_gap", "rate_estimate"])
        .and_then(|_| {
            for row in ssca_trace {
                w.write_record([
                    row.iteration.to_string(),
                    format!("{:.12e}", row.surrogate_gap),
                    format!("{:.12e}", row.rate_estimate),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;

    let smm_path = out_dir.join("smm_trace.csv");
    let mut w = csv::Writer::from_path(&smm_path)
        .map_err(|e| Error::InvalidConfig(format!("csv open failed: {e}")))?;
    w.write_record(["t", "g_tilde", "snr_estimate"])
        .and_then(|_| {
            for row in smm_trace {
                w.write_record([
                    row.t.to_string(),
                    format!("{:.12e}", row.g_tilde),
                    format!("{:.12e}", row.snr_estimate),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;

    Ok((ssca_path, smm_path))
}

/// Runs both optimizers on one snapshot and returns their traces; used by the
/// trace-emitting CLI subcommand.
pub fn converge_traces(
    spec: &ExperimentSpec,
) -> Result<(Vec<crate::ssca::SscaTraceRow>, Vec<crate::smm::SmmTraceRow>, Termination, Termination)> {
    spec.validate()?;
    let cfg = spec.config_at(0);
    let budget = LinkBudget::from_dbm(cfg.tx_power_dbm, noise_power_dbm(&cfg));
    let path = spec.stream_path(0, 0);
    let snapshot = sample_snapshot(&cfg, &mut substream(spec.seed, "snapshot", &path));
    let nk = cfg.total_elements();

    let mut rng = substream(spec.seed, "train-ssca", &path);
    let snap = &snapshot;
    let cfg_ref = &cfg;
    let stream = (0..spec.ssca.max_iters)
        .map(move |_| sample_realization(snap, cfg_ref, &mut rng).expect("dims fixed"));
    let ssca_run = run_ssca(stream, &spec.ssca, &budget, DVector::zeros(nk))?;

    let mut rng = substream(spec.seed, "train-smm", &path);
    let stream = (0..spec.smm.max_iters)
        .map(move |_| sample_realization(snap, cfg_ref, &mut rng).expect("dims fixed"));
    let smm_run = run_smm(stream, &spec.smm, &budget, PhaseVector::ones(nk))?;

    Ok((
        ssca_run.trace,
        smm_run.trace,
        ssca_run.termination,
        smm_run.termination,
    ))
}

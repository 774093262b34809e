//! End-to-end acceptance checks: experiment-level reproduction targets plus
//! numerical oracles for the two optimizers. Each check prints a single
//! PASS/FAIL line; the experiment runs are shared between checks.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use risopt::chanmodel::ChannelRealization;
use risopt::harness::{run_experiment, ExperimentResult, ExperimentSpec, Scheme, Sweep};
use risopt::rng::substream;
use risopt::smm::{mm_surrogate, negative_gram, quadratic_objective, run_smm, SmmParams};
use risopt::ssca::{grad_rate_phi, run_ssca, SscaParams};
use risopt::sysmodel::{instantaneous_snr, LinkBudget, PhaseVector};
use rand::Rng;

fn report(criterion: usize, label: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion} ({label}): {} [{detail}]",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({label}) failed: {detail}");
}

/// Power sweep, 50 snapshots x 100 evaluation realizations per point.
fn power_sweep() -> &'static (ExperimentSpec, ExperimentResult) {
    static CELL: OnceLock<(ExperimentSpec, ExperimentResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = ExperimentSpec {
            num_snapshots: 50,
            num_eval_realizations: 100,
            seed: 7,
            ..ExperimentSpec::default()
        };
        let result = run_experiment(&spec).expect("power sweep run");
        (spec, result)
    })
}

/// RIS-count sweep at a fixed 64-element budget, -5 dBm.
fn count_sweep() -> &'static (ExperimentSpec, ExperimentResult) {
    static CELL: OnceLock<(ExperimentSpec, ExperimentResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut spec = ExperimentSpec {
            num_snapshots: 50,
            num_eval_realizations: 100,
            seed: 7,
            sweep: Sweep::RisCount {
                counts: vec![1, 2, 4, 8],
                total_elements: 64,
            },
            ..ExperimentSpec::default()
        };
        spec.system.tx_power_dbm = -5.0;
        let result = run_experiment(&spec).expect("count sweep run");
        (spec, result)
    })
}

/// Power (dBm) at which `curve` reaches `target` rate, by linear
/// interpolation between bracketing sweep points.
fn power_to_reach(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    if curve[0].1 >= target {
        return Some(curve[0].0);
    }
    for w in curve.windows(2) {
        let ((p0, r0), (p1, r1)) = (w[0], w[1]);
        if r0 < target && r1 >= target {
            return Some(p0 + (p1 - p0) * (target - r0) / (r1 - r0));
        }
    }
    None
}

#[test]
fn power_gain_over_random_phase() {
    let (spec, result) = power_sweep();
    let Sweep::TxPowerDbm(powers) = &spec.sweep else {
        unreachable!()
    };
    let target = result
        .point(Scheme::Random, 10.0)
        .expect("random point")
        .mean_rate_bps_hz;

    let mut detail = String::new();
    let mut ok = true;
    for scheme in [Scheme::Ssca, Scheme::Smm] {
        let curve: Vec<(f64, f64)> = powers
            .iter()
            .map(|&p| (p, result.point(scheme, p).expect("point").mean_rate_bps_hz))
            .collect();
        let saving = power_to_reach(&curve, target).map(|p| 10.0 - p);
        match saving {
            Some(s) => {
                detail.push_str(&format!("{}: {:.2} dB saved; ", scheme.label(), s));
                ok &= s >= 7.0;
            }
            None => {
                detail.push_str(&format!("{}: target rate never reached; ", scheme.label()));
                ok = false;
            }
        }
    }
    report(1, "power gain over random phase", ok, detail.trim_end());
}

#[test]
fn scheme_parity_per_snapshot() {
    let (spec, result) = power_sweep();
    let Sweep::TxPowerDbm(powers) = &spec.sweep else {
        unreachable!()
    };
    let mut close = 0usize;
    let mut total = 0usize;
    for &p in powers {
        let a = &result.point(Scheme::Ssca, p).expect("ssca").per_snapshot_rates;
        let b = &result.point(Scheme::Smm, p).expect("smm").per_snapshot_rates;
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(b) {
            let rel = (ra - rb).abs() / (0.5 * (ra + rb));
            total += 1;
            if rel <= 0.05 {
                close += 1;
            }
        }
    }
    let frac = close as f64 / total as f64;
    report(
        2,
        "per-snapshot scheme parity",
        frac >= 0.90,
        &format!("{close}/{total} snapshots within 5% ({:.1}%)", 100.0 * frac),
    );
}

#[test]
fn centralization_beats_distribution() {
    let (_, result) = count_sweep();
    let counts = [1.0, 2.0, 4.0, 8.0];
    let mut ok = true;
    let mut detail = String::new();
    for scheme in [Scheme::Ssca, Scheme::Smm] {
        let pts: Vec<(f64, f64)> = counts
            .iter()
            .map(|&k| {
                let pt = result.point(scheme, k).expect("point");
                (pt.mean_rate_bps_hz, pt.stderr)
            })
            .collect();
        let mut inversions = 0;
        for w in pts.windows(2) {
            let ((m0, s0), (m1, s1)) = (w[0], w[1]);
            if m1 > m0 {
                inversions += 1;
                if m1 - m0 > (s0 * s0 + s1 * s1).sqrt() {
                    ok = false;
                }
            }
        }
        ok &= inversions <= 1;
        let margin = (pts[0].0 - pts[3].0)
            / (pts[0].1 * pts[0].1 + pts[3].1 * pts[3].1).sqrt();
        ok &= margin >= 3.0;
        detail.push_str(&format!(
            "{}: {} inversions, K=1 over K=8 by {:.1} stderr; ",
            scheme.label(),
            inversions,
            margin
        ));
    }
    report(3, "rate decreases as surfaces split", ok, detail.trim_end());
}

fn random_realization(nk: usize, m: usize, rng: &mut impl Rng) -> ChannelRealization {
    ChannelRealization {
        h_stack: DMatrix::from_fn(nk, m, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }),
        per_ris_g: vec![],
        per_ris_h: vec![],
    }
}

#[test]
fn phase_gradient_matches_finite_differences() {
    let mut rng = substream(2024, "fd-oracle", &[]);
    let mut worst = 0.0f64;
    for _ in 0..120 {
        // A single-element vector has a phase-invariant rate (zero gradient
        // on both sides), so start at two elements.
        let nk = rng.random_range(2..=8);
        let m = rng.random_range(1..=4);
        let chan = random_realization(nk, m, &mut rng);
        let budget = LinkBudget::new(rng.random_range(0.5..5.0));
        let phi = DVector::from_fn(nk, |_, _| rng.random_range(-3.0..3.0));

        let analytic = grad_rate_phi(&phi, &chan, &budget);
        let rate = |p: &DVector<f64>| {
            let theta = PhaseVector::from_phases(p.as_slice());
            (1.0 + budget.snr_scale() * (theta.theta().adjoint() * &chan.h_stack).norm_squared())
                .ln()
        };
        let fd = DVector::from_fn(nk, |i, _| {
            let mut pp = phi.clone();
            let mut pm = phi.clone();
            pp[i] += 1e-6;
            pm[i] -= 1e-6;
            (rate(&pp) - rate(&pm)) / 2e-6
        });
        let rel = (&analytic - &fd).norm() / fd.norm();
        worst = worst.max(rel);
    }
    report(
        4,
        "phase gradient vs central differences",
        worst < 1e-5,
        &format!("worst relative error {worst:.2e} over 120 instances"),
    );
}

#[test]
fn surrogate_touches_and_majorizes() {
    let mut rng = substream(2025, "mm-oracle", &[]);
    let tau = 1e-6;
    let mut worst_touch = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    for _ in 0..1200 {
        let nk = rng.random_range(1..=8);
        let m = rng.random_range(1..=4);
        let b = negative_gram(&random_realization(nk, m, &mut rng));
        let theta = PhaseVector::from_phases(
            &(0..nk).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect::<Vec<_>>(),
        );
        let anchor = PhaseVector::from_phases(
            &(0..nk).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect::<Vec<_>>(),
        );
        let g = quadratic_objective(&theta, &b);
        worst_touch = worst_touch.max((mm_surrogate(&theta, &theta, &b, tau) - g).abs());
        worst_gap = worst_gap.min(mm_surrogate(&theta, &anchor, &b, tau) - g);
    }
    report(
        5,
        "surrogate touches and majorizes",
        worst_touch <= 1e-9 && worst_gap >= -1e-9,
        &format!("touch error {worst_touch:.2e}, smallest majorization gap {worst_gap:.2e}"),
    );
}

#[test]
fn per_step_descent_and_unit_modulus() {
    let (spec, result) = power_sweep();
    let Sweep::TxPowerDbm(powers) = &spec.sweep else {
        unreachable!()
    };
    let mut worst_violation = 0.0f64;
    let mut worst_unit = 0.0f64;
    for &p in powers {
        for scheme in [Scheme::Ssca, Scheme::Smm] {
            let pt = result.point(scheme, p).expect("point");
            worst_violation = worst_violation.max(pt.max_descent_violation);
            worst_unit = worst_unit.max(pt.max_unit_modulus_err);
        }
    }
    report(
        6,
        "per-step surrogate descent and unit modulus",
        worst_violation <= 1e-9 && worst_unit <= 1e-12,
        &format!("worst surrogate increase {worst_violation:.2e}, worst |theta|-1 {worst_unit:.2e}"),
    );
}

#[test]
fn small_problem_matches_exhaustive_grid() {
    // Deterministic K=1, N=3, M=2 channel: the same realization every slot,
    // so both optimizers face a plain (non-stochastic) problem that a
    // 64-points-per-element grid can certify.
    let mut rng = substream(99, "grid-oracle", &[]);
    let chan = random_realization(3, 2, &mut rng);
    let budget = LinkBudget::new(1.0);

    let mut grid_best = 0.0f64;
    let step = std::f64::consts::TAU / 64.0;
    for i in 0..64 {
        for j in 0..64 {
            for k in 0..64 {
                let theta =
                    PhaseVector::from_phases(&[i as f64 * step, j as f64 * step, k as f64 * step]);
                grid_best = grid_best.max(instantaneous_snr(&theta, &chan));
            }
        }
    }

    let stream = |n: usize| (0..n).map(|_| chan.clone());
    let ssca_params = SscaParams {
        epsilon: 1e-8,
        max_iters: 20_000,
        ..SscaParams::default()
    };
    let ssca = run_ssca(stream(20_000), &ssca_params, &budget, DVector::zeros(3))
        .expect("ssca run");
    let smm = run_smm(
        stream(2000),
        &SmmParams::default(),
        &budget,
        PhaseVector::ones(3),
    )
    .expect("smm run");

    let ssca_snr = instantaneous_snr(&ssca.theta, &chan);
    let smm_snr = instantaneous_snr(&smm.theta, &chan);
    let ok = ssca_snr >= 0.99 * grid_best && smm_snr >= 0.99 * grid_best;
    report(
        7,
        "optimizers reach the exhaustive-grid optimum",
        ok,
        &format!(
            "grid {grid_best:.6}, ssca {:.4}% of it, smm {:.4}%",
            100.0 * ssca_snr / grid_best,
            100.0 * smm_snr / grid_best
        ),
    );
}

#[test]
fn cli_runs_are_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "num_snapshots": 3,
            "num_eval_realizations": 5,
            "seed": 11,
            "sweep": {"tx_power_dbm": [0.0, 10.0]},
            "ssca": {"max_iters": 200},
            "smm": {"max_iters": 200}
        }"#,
    )
    .expect("write config");

    let run = |sub: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_risopt"))
            .args([
                sub,
                "--config",
                config.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .stderr(std::process::Stdio::null())
            .status()
            .expect("spawn binary");
        assert!(status.success(), "{sub} run failed");
        out_dir
    };

    let mut ok = true;
    let mut detail = String::new();
    for (sub, files) in [
        ("fig2", &["fig2.csv", "fig2.json"][..]),
        ("converge", &["ssca_trace.csv", "smm_trace.csv"][..]),
    ] {
        let a = run(sub, &format!("{sub}-a"));
        let b = run(sub, &format!("{sub}-b"));
        for f in files {
            let ba = std::fs::read(a.join(f)).expect("read first output");
            let bb = std::fs::read(b.join(f)).expect("read second output");
            let same = ba == bb;
            ok &= same;
            detail.push_str(&format!("{f}: {}; ", if same { "identical" } else { "DIFFERS" }));
        }
    }
    report(8, "repeated runs are byte-identical", ok, detail.trim_end());
}

//! Command-line front end for the RIS phase-shift experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risopt::harness::{
    converge_traces, emit_results, emit_traces, run_experiment, ExperimentSpec, Scheme, Sweep,
};
use risopt::Error;

#[derive(Parser)]
#[command(name = "risopt", version, about = "Statistical-CSI RIS phase-shift experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average rate versus transmit power (dBm sweep).
    Fig2(RunArgs),
    /// Average rate versus RIS count at a fixed total element budget.
    Fig3(RunArgs),
    /// Emit per-iteration optimizer traces for one snapshot.
    Converge(RunArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment spec; CLI flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for all random sub-streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of long-term geometry snapshots.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Held-out realizations per snapshot used for scoring.
    #[arg(long)]
    eval_realizations: Option<usize>,
    /// Comma-separated subset of {ssca, smm, random}.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Iteration cap applied to both optimizers.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Surrogate curvature of the rate optimizer.
    #[arg(long)]
    tau_ssca: Option<f64>,
    /// Strong-convexity pad of the SNR optimizer.
    #[arg(long)]
    tau_smm: Option<f64>,
    /// Transmit powers in dBm (fig2) or the fixed power (fig3/converge).
    #[arg(long, value_delimiter = ',')]
    powers_dbm: Option<Vec<f64>>,
    /// RIS counts for the fig3 sweep.
    #[arg(long, value_delimiter = ',')]
    ris_counts: Option<Vec<usize>>,
    /// Total element budget N*K for the fig3 sweep.
    #[arg(long)]
    total_elements: Option<usize>,
}

impl RunArgs {
    fn build_spec(&self, mode: &str) -> Result<ExperimentSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("bad config {}: {e}", path.display())))?
            }
            None => ExperimentSpec::default(),
        };

        match mode {
            "fig2" => {
                if let Some(p) = &self.powers_dbm {
                    spec.sweep = Sweep::TxPowerDbm(p.clone());
                } else if !matches!(spec.sweep, Sweep::TxPowerDbm(_)) {
                    spec.sweep = ExperimentSpec::default().sweep;
                }
            }
            "fig3" => {
                let counts = self.ris_counts.clone().unwrap_or_else(|| {
                    if let Sweep::RisCount { counts, .. } = &spec.sweep {
                        counts.clone()
                    } else {
                        vec![1, 2, 4, 8]
                    }
                });
                let total = self.total_elements.unwrap_or({
                    if let Sweep::RisCount { total_elements, .. } = &spec.sweep {
                        *total_elements
                    } else {
                        64
                    }
                });
                spec.sweep = Sweep::RisCount {
                    counts,
                    total_elements: total,
                };
                if let Some(p) = &self.powers_dbm {
                    if p.len() != 1 {
                        return Err(Error::InvalidConfig(
                            "fig3 takes a single fixed power".into(),
                        ));
                    }
                    spec.system.tx_power_dbm = p[0];
                } else if self.config.is_none() {
                    spec.system.tx_power_dbm = -5.0;
                }
            }
            "converge" => {
                if let Some(p) = &self.powers_dbm {
                    spec.sweep = Sweep::TxPowerDbm(vec![p[0]]);
                } else {
                    spec.sweep = Sweep::TxPowerDbm(vec![spec.system.tx_power_dbm]);
                }
            }
            _ => unreachable!(),
        }

        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(n) = self.snapshots {
            spec.num_snapshots = n;
        }
        if let Some(n) = self.eval_realizations {
            spec.num_eval_realizations = n;
        }
        if let Some(schemes) = &self.schemes {
            spec.schemes = schemes
                .iter()
                .map(|s| s.parse::<Scheme>())
                .collect::<Result<_, _>>()?;
        }
        if let Some(cap) = self.max_iters {
            spec.ssca.max_iters = cap;
            spec.smm.max_iters = cap;
        }
        if let Some(tau) = self.tau_ssca {
            spec.ssca.tau = tau;
        }
        if let Some(tau) = self.tau_smm {
            spec.smm.tau = tau;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Fig2(args) | Command::Fig3(args) => {
            let stem = if matches!(command, Command::Fig2(_)) {
                "fig2"
            } else {
                "fig3"
            };
            let spec = args.build_spec(stem)?;
            let result = run_experiment(&spec)?;
            let (csv_path, json_path) = emit_results(&result, &spec, &args.out, stem)?;
            for p in &result.points {
                eprintln!(
                    "{:>6}  sweep={:>6}  rate={:8.4} bits/s/Hz (+-{:.4})  [{:.1}s]",
                    p.scheme.label(),
                    p.sweep_value,
                    p.mean_rate_bps_hz,
                    p.stderr,
                    p.wall_clock_s
                );
            }
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
        Command::Converge(args) => {
            let spec = args.build_spec("converge")?;
            let (ssca_trace, smm_trace, ssca_term, smm_term) = converge_traces(&spec)?;
            let (a, b) = emit_traces(&ssca_trace, &smm_trace, &args.out)?;
            eprintln!(
                "ssca: {} iterations ({ssca_term:?}); smm: {} iterations ({smm_term:?})",
                ssca_trace.len(),
                smm_trace.len()
            );
            eprintln!("wrote {} and {}", a.display(), b.display());
            Ok(())
        }
        Command::Selftest => selftest(),
    }
}

/// Quick invariant sweep over the main subsystems; prints one line each.
fn selftest() -> Result<(), Error> {
    use nalgebra::DVector;
    use risopt::chanmodel::{
        noise_power_dbm, path_loss_db, sample_realization, sample_snapshot, ula_steering,
        SystemConfig,
    };
    use risopt::rng::substream;
    use risopt::smm::{mm_surrogate, negative_gram, quadratic_objective};
    use risopt::ssca::grad_rate_phi;
    use risopt::sysmodel::{LinkBudget, PhaseVector};

    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let steer = ula_steering(16, 0.7);
    check(
        "steering unit modulus",
        steer.iter().all(|e| (e.norm() - 1.0).abs() < 1e-12),
    );
    check(
        "path loss reference",
        (path_loss_db(10.0) - 58.46).abs() < 1e-12,
    );
    let cfg = SystemConfig::default();
    check(
        "noise budget",
        (noise_power_dbm(&cfg) + 116.9897).abs() < 1e-3,
    );

    let mut rng = substream(0, "selftest", &[]);
    let snap = sample_snapshot(&cfg, &mut rng);
    let chan = sample_realization(&snap, &cfg, &mut rng).unwrap();
    let n = cfg.elements_per_ris;
    let stacking_ok = (0..cfg.num_ris).all(|k| {
        let diag = nalgebra::DMatrix::from_diagonal(&chan.per_ris_h[k].map(|x| x.conj()));
        let block = &diag * &chan.per_ris_g[k];
        (&block - chan.h_stack.rows(k * n, n)).norm() <= 1e-12 * block.norm()
    });
    check("stacking identity", stacking_ok);

    let budget = LinkBudget::from_dbm(cfg.tx_power_dbm, noise_power_dbm(&cfg));
    let nk = cfg.total_elements();
    let phi = DVector::from_fn(nk, |i, _| (i as f64 * 0.37).sin());
    let analytic = grad_rate_phi(&phi, &chan, &budget);
    let fd = DVector::from_fn(nk, |i, _| {
        let rate = |p: &DVector<f64>| {
            let theta = PhaseVector::from_phases(p.as_slice());
            (1.0 + budget.snr_scale() * (theta.theta().adjoint() * &chan.h_stack).norm_squared())
                .ln()
        };
        let mut pp = phi.clone();
        let mut pm = phi.clone();
        pp[i] += 1e-6;
        pm[i] -= 1e-6;
        (rate(&pp) - rate(&pm)) / 2e-6
    });
    check(
        "gradient vs finite differences",
        (&analytic - &fd).norm() / fd.norm() < 1e-5,
    );

    let b = negative_gram(&chan);
    let theta = PhaseVector::from_phases(phi.as_slice());
    let anchor = PhaseVector::ones(nk);
    let touch = (mm_surrogate(&theta, &theta, &b, 1e-6) - quadratic_objective(&theta, &b)).abs();
    let above = mm_surrogate(&theta, &anchor, &b, 1e-6) - quadratic_objective(&theta, &b);
    check(
        "surrogate touches and majorizes",
        touch < 1e-9 * b.norm().max(1.0) && above >= -1e-9,
    );

    if failures == 0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{failures} selftest failures")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

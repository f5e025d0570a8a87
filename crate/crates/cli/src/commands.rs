use log::{info, warn};
use serde::Serialize;

use saturate_core::coupled::{
    coupled_bp_threshold, coupled_limit_observed, hessian_bound, min_coupling_width, CoupledOptions,
    CouplingSpec, HessianBound,
};
use saturate_core::fixed_points::FixedPointSolver;
use saturate_core::inequalities::{battery_parameters, run_battery, BatterySettings, CHAIN_SLACK, DESCENT_SLACK, SHIFT_SLACK};
use saturate_core::system::ZERO_TOL;
use saturate_core::thresholds::{energy_gap, threshold_report, ThresholdReport, ThresholdTolerances};
use saturate_core::verify::{
    corrupt_variable_potential, verify_admissible, VerificationReport, GRADIENT_RTOL, ORDER_SLACK,
};
use saturate_core::{Error, Exec};

use crate::config::{LoadedConfig, SystemConfig};
use crate::failure::Failure;
use crate::output::{fmt_f64, tag, Envelope, Sink, TOOL, VERSION};

fn envelope<'a, T: Serialize, Tol: Serialize>(
    command: &'a str,
    cfg: &'a LoadedConfig,
    tolerances: Tol,
    result: T,
) -> Envelope<'a, T, Tol> {
    Envelope {
        tool: TOOL,
        version: VERSION,
        command,
        config_sha256: &cfg.hash,
        tolerances,
        result,
    }
}

#[derive(Serialize)]
struct ThresholdOutcome {
    theta: Option<f64>,
    consistent: bool,
    report: ThresholdReport,
}

pub fn threshold(cfg: &LoadedConfig, sink: &Sink, exec: Exec) -> Result<(), Failure> {
    let t = cfg
        .config
        .analysis
        .threshold
        .as_ref()
        .ok_or_else(|| Failure::Config("missing analysis.threshold".into()))?;
    t.validate()?;
    let mut tolerances = ThresholdTolerances::default();
    if let Some(b) = t.bisection_tol {
        tolerances.bisection = b;
    }
    let cells: Vec<(Option<f64>, SystemConfig)> = match &t.theta_sweep {
        Some(thetas) => thetas
            .iter()
            .map(|&th| Ok((Some(th), cfg.config.system.with_theta(th)?)))
            .collect::<Result<_, Failure>>()?,
        None => vec![(None, cfg.config.system.clone())],
    };
    let mut inconsistent = Vec::new();
    for (theta, system) in cells {
        let sys = system.build()?;
        let report = threshold_report(&sys, &t.grid, tolerances, exec)?;
        let suffix = theta.map(|th| format!("_theta_{}", tag(th))).unwrap_or_default();
        let consistent = report.consistent();
        if !consistent {
            inconsistent.push(theta.map_or("base path".to_string(), |th| format!("theta {th}")));
        }
        let rows = report.energy_gap_curve.iter().map(|p| {
            vec![
                fmt_f64(p.epsilon),
                fmt_f64(p.gap.unwrap_or(f64::INFINITY)),
                p.fixed_points.to_string(),
            ]
        });
        sink.csv(&format!("energy_gap{suffix}.csv"), &["epsilon", "gap", "fixed_points"], rows)?;
        println!(
            "{}{}: bp {:.6}, potential {:.6}, maxwell {:.6}",
            report.system,
            theta.map(|th| format!(" theta {th}")).unwrap_or_default(),
            report.bp_threshold.value,
            report.potential_threshold.value,
            report.maxwell_threshold.value
        );
        let out = ThresholdOutcome {
            theta,
            consistent,
            report,
        };
        let path = sink.json(&format!("threshold{suffix}.json"), &envelope("threshold", cfg, tolerances, out))?;
        info!("wrote {}", path.display());
    }
    if inconsistent.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "threshold ordering does not hold for {}",
            inconsistent.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct CoupledTolerances {
    run: CoupledOptions,
    zero: f64,
    hessian_points: usize,
    thresholds: ThresholdTolerances,
}

#[derive(Serialize)]
struct CoupledCell {
    half_length: usize,
    window: usize,
    one_sided: bool,
    epsilon: f64,
    iterations: usize,
    converged: bool,
    decoded: bool,
    max_entry: f64,
    iterations_recorded: usize,
    profile: String,
}

#[derive(Serialize)]
struct CoupledThreshold {
    half_length: usize,
    window: usize,
    value: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct WidthBound {
    epsilon: f64,
    gap: Option<f64>,
    /// Smallest window covered by the sufficient condition, when it applies.
    min_window: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct CoupledSummary {
    system: String,
    bp_threshold: f64,
    potential_threshold: f64,
    hessian: HessianBound,
    width_bounds: Vec<WidthBound>,
    runs: Vec<CoupledCell>,
    coupled_thresholds: Vec<CoupledThreshold>,
}

type Profile = Vec<(usize, Vec<f64>)>;

pub fn coupled(cfg: &LoadedConfig, sink: &Sink, exec: Exec) -> Result<(), Failure> {
    let c = cfg
        .config
        .analysis
        .coupled
        .as_ref()
        .ok_or_else(|| Failure::Config("missing analysis.coupled".into()))?;
    c.validate()?;
    let sys = cfg.config.system.build()?;
    let opts = c.options();
    let mut specs = Vec::new();
    for &l in &c.half_length {
        for &w in &c.window {
            specs.push(CouplingSpec::new(l, w)?.with_one_sided(c.one_sided));
        }
    }
    let cells: Vec<(CouplingSpec, f64)> = specs
        .iter()
        .flat_map(|s| c.epsilon.iter().map(move |&e| (*s, e)))
        .collect();

    let every = c.record_every;
    let runs = exec.map(&cells, |&(spec, eps)| {
        let mut profile: Profile = Vec::new();
        let run = coupled_limit_observed(&sys, spec, eps, opts, |i, x| {
            if i % every == 0 {
                profile.push((i, x.as_slice().to_vec()));
            }
        })?;
        if profile.last().map(|p| p.0) != Some(run.iterations) {
            profile.push((run.iterations, run.state.as_slice().to_vec()));
        }
        Ok::<_, Error>((run, profile))
    });

    let d = sys.dim();
    let mut summaries = Vec::new();
    let mut stalled = Vec::new();
    for ((spec, eps), res) in cells.iter().zip(runs) {
        let (run, profile) = res?;
        let name = format!(
            "profile_L{}_w{}_eps_{}{}.csv",
            spec.half_length,
            spec.window,
            tag(*eps),
            if spec.one_sided { "_one_sided" } else { "" }
        );
        let rows = profile.iter().flat_map(|(it, data)| {
            data.chunks_exact(d).enumerate().flat_map(move |(r, row)| {
                row.iter().enumerate().map(move |(k, v)| {
                    vec![
                        it.to_string(),
                        spec.position(r).to_string(),
                        k.to_string(),
                        fmt_f64(*v),
                    ]
                })
            })
        });
        sink.csv(&name, &["iteration", "position", "component", "value"], rows)?;
        if !run.converged {
            stalled.push(format!("L {} w {} eps {eps}", spec.half_length, spec.window));
        }
        println!(
            "L {} w {} eps {eps}: {} after {} iterations (max entry {:.3e})",
            spec.half_length,
            spec.window,
            if run.decoded() { "decoded" } else { "stuck" },
            run.iterations,
            run.state.max_entry()
        );
        summaries.push(CoupledCell {
            half_length: spec.half_length,
            window: spec.window,
            one_sided: spec.one_sided,
            epsilon: *eps,
            iterations: run.iterations,
            converged: run.converged,
            decoded: run.decoded(),
            max_entry: run.state.max_entry(),
            iterations_recorded: profile.len(),
            profile: name,
        });
    }

    let coupled_thresholds = if c.bp_threshold {
        let found = exec.map(&specs, |spec| {
            coupled_bp_threshold(&sys, spec.with_one_sided(false), ThresholdTolerances::default().bisection, opts)
        });
        specs
            .iter()
            .zip(found)
            .map(|(spec, t)| {
                let t = t?;
                Ok(CoupledThreshold {
                    half_length: spec.half_length,
                    window: spec.window,
                    value: t.value,
                    lower: t.lower,
                    upper: t.upper,
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?
    } else {
        Vec::new()
    };

    let tolerances = ThresholdTolerances::default();
    let thresholds = threshold_report(&sys, &[], tolerances, exec)?;
    let solver = FixedPointSolver::new(sys.clone(), tolerances.enumeration, exec);
    let hessian = hessian_bound(&sys, c.hessian_points, exec)?;
    let mut width_bounds = Vec::new();
    for &eps in &c.epsilon {
        let gap = energy_gap(&solver, eps)?;
        let bound = match min_coupling_width(d, hessian.k, gap, eps) {
            Ok(w) => WidthBound {
                epsilon: eps,
                gap: gap.is_finite().then_some(gap),
                min_window: Some(w),
                note: (!gap.is_finite()).then(|| "no nontrivial fixed point".to_string()),
            },
            Err(Error::NoPositiveGap { .. }) => WidthBound {
                epsilon: eps,
                gap: Some(gap),
                min_window: None,
                note: Some("energy gap is not positive".into()),
            },
            Err(e) => return Err(e.into()),
        };
        width_bounds.push(bound);
    }

    let summary = CoupledSummary {
        system: sys.name().to_string(),
        bp_threshold: thresholds.bp_threshold.value,
        potential_threshold: thresholds.potential_threshold.value,
        hessian,
        width_bounds,
        runs: summaries,
        coupled_thresholds,
    };
    let tol = CoupledTolerances {
        run: opts,
        zero: ZERO_TOL,
        hessian_points: c.hessian_points,
        thresholds: tolerances,
    };
    let path = sink.json("coupled.json", &envelope("coupled", cfg, tol, summary))?;
    info!("wrote {}", path.display());
    if stalled.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "no convergence within {} iterations for {}",
            opts.max_iter,
            stalled.join("; ")
        )))
    }
}

#[derive(Serialize)]
struct VerifyTolerances {
    order_slack: f64,
    gradient_rtol: f64,
    descent_slack: f64,
    shift_slack: f64,
    chain_slack: f64,
    samples: usize,
    seed: u64,
}

#[derive(Serialize)]
struct VerifyOutcome {
    passed: bool,
    corrupted: bool,
    epsilon: Vec<f64>,
    admissibility: VerificationReport,
    battery: Option<VerificationReport>,
    battery_error: Option<String>,
}

pub fn verify(cfg: &LoadedConfig, sink: &Sink, exec: Exec) -> Result<(), Failure> {
    let v = cfg
        .config
        .analysis
        .verify
        .as_ref()
        .ok_or_else(|| Failure::Config("missing analysis.verify".into()))?;
    v.validate()?;
    let mut sys = cfg.config.system.build()?;
    if v.corrupt_variable_potential {
        sys = corrupt_variable_potential(&sys)?;
    }
    let admissibility = verify_admissible(&sys, v.samples, v.seed, exec)?;

    let settings = BatterySettings {
        samples: v.samples,
        seed: v.seed,
        half_length: v.half_length,
        windows: v.windows.clone(),
        compare_grid: v.compare_grid,
        coupled: CoupledOptions::default(),
    };
    let mut epsilon = v.epsilon.clone().unwrap_or_default();
    let battery = (|| -> Result<VerificationReport, Error> {
        let tolerances = ThresholdTolerances::default();
        let thresholds = threshold_report(&sys, &[], tolerances, exec)?;
        if epsilon.is_empty() {
            epsilon = battery_parameters(&thresholds).to_vec();
        }
        let solver = FixedPointSolver::new(sys.clone(), tolerances.enumeration, exec);
        let k = hessian_bound(&sys, 9, exec)?.k;
        run_battery(&sys, &solver, &thresholds, k, &epsilon, &settings, exec)
    })();
    let (battery, battery_error) = match battery {
        Ok(b) => (Some(b), None),
        Err(e) if !admissibility.passed() => {
            warn!("battery not run: {e}");
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };

    let mut failed: Vec<String> = admissibility.failures().map(|c| c.name.clone()).collect();
    if let Some(b) = &battery {
        failed.extend(b.failures().map(|c| c.name.clone()));
    }
    let all_checks = admissibility
        .checks
        .iter()
        .chain(battery.iter().flat_map(|b| b.checks.iter()));
    let rows = all_checks.map(|c| {
        vec![
            c.name.clone(),
            c.passed.to_string(),
            c.samples.to_string(),
            c.failures.to_string(),
            fmt_f64(c.worst),
            fmt_f64(c.tolerance),
            c.waived.clone().unwrap_or_default(),
        ]
    });
    sink.csv(
        "checks.csv",
        &["check", "passed", "samples", "failures", "worst", "tolerance", "waived"],
        rows,
    )?;
    let outcome = VerifyOutcome {
        passed: failed.is_empty(),
        corrupted: v.corrupt_variable_potential,
        epsilon,
        admissibility,
        battery,
        battery_error,
    };
    let tol = VerifyTolerances {
        order_slack: ORDER_SLACK,
        gradient_rtol: GRADIENT_RTOL,
        descent_slack: DESCENT_SLACK,
        shift_slack: SHIFT_SLACK,
        chain_slack: CHAIN_SLACK,
        samples: v.samples,
        seed: v.seed,
    };
    sink.json("verify.json", &envelope("verify", cfg, tol, outcome))?;
    if failed.is_empty() {
        println!("{}: all checks passed", sys.name());
        Ok(())
    } else {
        Err(Failure::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}

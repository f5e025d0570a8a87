//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use saturate_core::coupled::{
    coupled_bp_threshold, coupled_limit, hessian_bound, min_coupling_width, CoupledOptions,
    CouplingSpec,
};
use saturate_core::fixed_points::{EnumerationOptions, FixedPointSolver};
use saturate_core::inequalities::{battery_parameters, run_battery, BatterySettings};
use saturate_core::potential::{potential, potential_gradient};
use saturate_core::systems::{
    make_emac, make_protograph, make_slepian_wolf, ChannelPath, ProtographSpec, SlepianWolfParams,
};
use saturate_core::thresholds::{threshold_report, ThresholdTolerances, BISECTION_TOL};
use saturate_core::verify::verify_admissible;
use saturate_core::{Ensemble, Exec, SystemDefinition, VectorState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THRESHOLD_TOL: f64 = 1e-3;
const GRADIENT_RTOL: f64 = 1e-5;
const GRADIENT_POINTS: usize = 200;
const ZERO_TOL: f64 = 1e-8;
const SATURATION_MARGIN: f64 = 0.04;
const SATURATION_GAP: f64 = 5e-3;
const POSITION_CAP: usize = 10_000;
const TRAJECTORY_TOL: f64 = 1e-12;
const TRAJECTORY_STEPS: usize = 1000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn protograph36() -> SystemDefinition {
    make_protograph(&ProtographSpec::new(vec![vec![3, 3]])).unwrap()
}

fn regular36() -> Ensemble {
    Ensemble::regular(3, 6).unwrap()
}

fn slepian_wolf(gamma: f64) -> SystemDefinition {
    make_slepian_wolf(SlepianWolfParams {
        user1: regular36(),
        user2: regular36(),
        gamma,
        p: 0.5,
        path: ChannelPath::Diagonal,
    })
    .unwrap()
}

fn example_systems() -> Vec<SystemDefinition> {
    vec![
        protograph36(),
        slepian_wolf(0.5),
        make_emac(regular36(), regular36()).unwrap(),
    ]
}

fn scalar_oracle() -> Outcome {
    let bp_ref = common::bp_threshold();
    let pot_ref = common::potential_threshold();
    let r = threshold_report(&protograph36(), &[], ThresholdTolerances::default(), Exec::default())
        .unwrap();
    let bp = r.bp_threshold.value;
    let pot = r.potential_threshold.value;
    Outcome {
        passed: (bp - bp_ref).abs() <= THRESHOLD_TOL && (pot - pot_ref).abs() <= THRESHOLD_TOL,
        detail: format!("bp {bp:.6} vs oracle {bp_ref:.6}, potential {pot:.6} vs oracle {pot_ref:.6}"),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn gradient_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failing = Vec::new();
    for sys in example_systems() {
        let report = verify_admissible(&sys, GRADIENT_POINTS, 7, Exec::default()).unwrap();
        for name in ["variable-potential-gradient", "check-potential-gradient"] {
            let c = report.check(name).unwrap();
            if !c.passed {
                failing.push(format!("{} {name}", sys.name()));
            }
        }
        let d = sys.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..GRADIENT_POINTS {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let eps: f64 = rng.random();
            let analytic = potential_gradient(&sys, &x, eps);
            for k in 0..d {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (potential(&sys, &xp, eps) - potential(&sys, &xm, eps)) / (2.0 * h);
                let e = rel_err(fd, analytic[k]);
                worst = worst.max(e);
                if e > GRADIENT_RTOL {
                    failing.push(format!("{} potential gradient at {x:?}", sys.name()));
                }
            }
        }
    }
    Outcome {
        passed: failing.is_empty(),
        detail: format!(
            "worst potential-gradient relative error {worst:.2e}; failures: {}",
            if failing.is_empty() { "none".to_string() } else { failing.join(", ") }
        ),
    }
}

fn saturation_demo() -> Outcome {
    let sys = protograph36();
    let opts = CoupledOptions::default();
    let spec = CouplingSpec::new(16, 3).unwrap();
    let low = coupled_limit(&sys, spec, 0.47, opts).unwrap();
    let high = coupled_limit(&sys, spec, 0.50, opts).unwrap();
    let r = threshold_report(&sys, &[], ThresholdTolerances::default(), Exec::default()).unwrap();
    let coupled = coupled_bp_threshold(&sys, CouplingSpec::new(32, 3).unwrap(), BISECTION_TOL, opts)
        .unwrap()
        .value;
    let bp = r.bp_threshold.value;
    let pot = r.potential_threshold.value;
    let passed = low.state.max_entry() < ZERO_TOL
        && high.state.max_entry() >= ZERO_TOL
        && coupled - bp > SATURATION_MARGIN
        && coupled <= pot
        && pot - coupled <= SATURATION_GAP;
    Outcome {
        passed,
        detail: format!(
            "max entry {:.2e} at 0.47, {:.3} at 0.50; coupled threshold {coupled:.6}, uncoupled {bp:.6}, potential {pot:.6}",
            low.state.max_entry(),
            high.state.max_entry()
        ),
    }
}

fn width_bound() -> Outcome {
    let eps = 0.45;
    let sys = protograph36();
    let exec = Exec::default();
    let solver = FixedPointSolver::new(sys.clone(), EnumerationOptions::default(), exec);
    let gap = saturate_core::thresholds::energy_gap(&solver, eps).unwrap();
    let k = hessian_bound(&sys, 9, exec).unwrap().k;
    let w0 = min_coupling_width(sys.dim(), k, gap, eps).unwrap();
    if !w0.is_finite() {
        return Outcome {
            passed: false,
            detail: format!("width bound {w0} is not finite"),
        };
    }
    let w = w0.ceil() as usize + 1;
    let spec = CouplingSpec::new(4 * w, w).unwrap();
    let positions = spec.positions();
    let run = coupled_limit(&sys, spec, eps, CoupledOptions::default()).unwrap();
    let cap = if positions > POSITION_CAP {
        format!("; {positions} positions exceeds the cap of {POSITION_CAP}, run anyway")
    } else {
        String::new()
    };
    Outcome {
        passed: run.decoded(),
        detail: format!(
            "gap {gap:.6}, K {k:.1}, w0 {w0:.1}, w {w}, L {}, {} iterations, max entry {:.2e}{cap}",
            4 * w,
            run.iterations,
            run.state.max_entry()
        ),
    }
}

fn inequality_battery() -> Outcome {
    let exec = Exec::default();
    let mut failing = Vec::new();
    let mut total = 0;
    for sys in example_systems() {
        let r = threshold_report(&sys, &[], ThresholdTolerances::default(), exec).unwrap();
        let solver = FixedPointSolver::new(sys.clone(), EnumerationOptions::default(), exec);
        let k = hessian_bound(&sys, 9, exec).unwrap().k;
        let eps = battery_parameters(&r);
        let report = run_battery(&sys, &solver, &r, k, &eps, &BatterySettings::default(), exec).unwrap();
        total += report.checks.len();
        failing.extend(report.failures().map(|c| format!("{}: {}", sys.name(), c.name)));
    }
    Outcome {
        passed: failing.is_empty(),
        detail: format!(
            "{total} checks; failures: {}",
            if failing.is_empty() { "none".to_string() } else { failing.join(", ") }
        ),
    }
}

fn threshold_equality() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for sys in [make_emac(regular36(), regular36()).unwrap(), slepian_wolf(0.5)] {
        let r = threshold_report(&sys, &[], ThresholdTolerances::default(), Exec::default()).unwrap();
        let diff = (r.potential_threshold.value - r.maxwell_threshold.value).abs();
        passed &= diff <= 2.0 * BISECTION_TOL;
        parts.push(format!(
            "{}: potential {:.6}, maxwell {:.6}",
            sys.name(),
            r.potential_threshold.value,
            r.maxwell_threshold.value
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn decoupling() -> Outcome {
    let sys = slepian_wolf(0.0);
    let mut worst: f64 = 0.0;
    for eps in [0.3, 0.4294, 0.45, 0.6] {
        let reference = common::trajectory(eps, TRAJECTORY_STEPS);
        let mut x = VectorState::new(vec![1.0, 1.0]).unwrap();
        for r in &reference[1..] {
            x = sys.step(&x, eps).unwrap();
            for v in x.as_slice() {
                worst = worst.max((v - r).abs());
            }
        }
    }
    Outcome {
        passed: worst <= TRAJECTORY_TOL,
        detail: format!("worst deviation {worst:.2e} over {TRAJECTORY_STEPS} iterations"),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("scalar oracle equivalence", Duration::from_secs(10), scalar_oracle),
        ("gradient consistency", Duration::from_secs(30), gradient_consistency),
        ("threshold saturation demo", Duration::from_secs(120), saturation_demo),
        ("coupling width bound", Duration::from_secs(300), width_bound),
        ("inequality battery", Duration::from_secs(120), inequality_battery),
        ("threshold equality", Duration::from_secs(120), threshold_equality),
        ("decoupling consistency", Duration::from_secs(60), decoupling),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let passed = out.passed && elapsed <= *budget;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2} s, budget {} s): {}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Numerical checks of the inequalities behind threshold saturation, run on
//! a concrete system at concrete parameters.

use serde::{Deserialize, Serialize};

use crate::coupled::{
    averaged_check, coupled_gradient, coupled_limit, coupled_potential, CoupledOptions,
    CoupledRun, CouplingSpec,
};
use crate::error::{Error, Result};
use crate::exec::{cell_rng, Exec};
use crate::fixed_points::FixedPointSolver;
use crate::potential::potential;
use crate::state::{sup_norm, VectorState};
use crate::system::{IterationOptions, MonotoneDirection, SystemDefinition, MONOTONE_SLACK};
use crate::thresholds::ThresholdReport;
use crate::verify::{Check, VerificationReport, Witness, ORDER_SLACK};
use rand::Rng;

/// Slack for potential descent along single-system trajectories.
pub const DESCENT_SLACK: f64 = 1e-10;
/// Slack for the shift-energy and anchor-limit inequalities.
pub const SHIFT_SLACK: f64 = 1e-8;
/// Slack for the second-order chain at one-sided fixed points.
pub const CHAIN_SLACK: f64 = 1e-6;
/// Sup norm of the potential gradient at a fixed point.
pub const STATIONARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySettings {
    /// Random points per single-system check.
    pub samples: usize,
    pub seed: u64,
    /// Half-length `L` of the coupled chains.
    pub half_length: usize,
    /// Windows `w` at which the coupled checks run.
    pub windows: Vec<usize>,
    /// Size of the grid for comparing minimum fixed-point potentials.
    pub compare_grid: usize,
    pub coupled: CoupledOptions,
}

impl Default for BatterySettings {
    fn default() -> Self {
        Self {
            samples: 200,
            seed: 1,
            half_length: 16,
            windows: vec![1, 3],
            compare_grid: 20,
            coupled: CoupledOptions::default(),
        }
    }
}

fn witness(x: &[f64], eps: f64, note: impl Into<String>) -> Witness {
    Witness {
        x: x.to_vec(),
        epsilon: Some(eps),
        note: note.into(),
    }
}

fn precedes(a: &[f64], b: &[f64], slack: f64) -> bool {
    a.iter().zip(b).all(|(u, v)| *u <= v + slack)
}

/// Trajectories from the lattice corners and from random points, split by the
/// direction of their first step.
fn monotone_trajectories(
    sys: &SystemDefinition,
    eps: f64,
    settings: &BatterySettings,
) -> Result<Vec<(MonotoneDirection, Vec<Vec<f64>>)>> {
    let d = sys.dim();
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; d], vec![0.5; d]];
    let mut rng = cell_rng(settings.seed, 1 << 32);
    for _ in 0..settings.samples {
        starts.push((0..d).map(|_| rng.random::<f64>()).collect());
    }
    let opts = IterationOptions {
        tol: 1e-12,
        max_iter: 20_000,
    };
    let mut out = Vec::new();
    for x0 in starts {
        let mut path = Vec::new();
        let res = sys.iterate_observed(&VectorState::new(x0)?, eps, opts, |i, x| {
            if i < 200 {
                path.push(x.to_vec());
            }
        })?;
        path.push(res.limit.into_vec());
        out.push((res.direction, path));
    }
    Ok(out)
}

/// Checks on the single system at one parameter.
pub fn single_system_checks(
    sys: &SystemDefinition,
    solver: &FixedPointSolver,
    eps: f64,
    settings: &BatterySettings,
) -> Result<Vec<Check>> {
    let d = sys.dim();
    let trajectories = monotone_trajectories(sys, eps, settings)?;

    let mut segment = Check::new("line-segment", ORDER_SLACK);
    let mut descent = Check::new("iteration-descent", DESCENT_SLACK);
    let mut limit = Check::new("limit-descent", DESCENT_SLACK);
    for (dir, path) in &trajectories {
        let sign = match dir {
            MonotoneDirection::Up => 1.0,
            MonotoneDirection::Down => -1.0,
            MonotoneDirection::None => continue,
        };
        for x in path.iter().take(20) {
            let y = sys.variable_map(&sys.check_map(x), eps);
            for t in 0..10 {
                let t = t as f64 / 9.0;
                let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + t * (b - a)).collect();
                let fz = sys.variable_map(&sys.check_map(&z), eps);
                let excess = z
                    .iter()
                    .zip(&fz)
                    .map(|(zk, fk)| sign * (zk - fk) - ORDER_SLACK)
                    .fold(f64::NEG_INFINITY, f64::max);
                segment.record(excess, || witness(&z, eps, format!("t = {t}")));
            }
        }
        for w in path.windows(2) {
            let excess = potential(sys, &w[1], eps) - potential(sys, &w[0], eps) - DESCENT_SLACK;
            descent.record(excess, || witness(&w[0], eps, "potential rises over one step"));
        }
        let (first, last) = (&path[0], &path[path.len() - 1]);
        let excess = potential(sys, last, eps) - potential(sys, first, eps) - DESCENT_SLACK;
        limit.record(excess, || witness(first, eps, "limit has larger potential"));
    }

    let mut strict = Check::new("potential-decreasing-in-parameter", 0.0);
    let mut rng = cell_rng(settings.seed, 2 << 32);
    for _ in 0..settings.samples {
        let x: Vec<f64> = (0..d).map(|_| 0.05 + 0.95 * rng.random::<f64>()).collect();
        let e1 = rng.random::<f64>();
        let e2 = e1 + (1.0 - e1) * (0.01 + 0.99 * rng.random::<f64>());
        let gap = potential(sys, &x, e1) - potential(sys, &x, e2);
        strict.record(if gap > 0.0 { 0.0 } else { -gap + f64::MIN_POSITIVE }, || {
            witness(&x, e1, format!("U does not drop at epsilon {e2}"))
        });
    }

    let mut stationary = Check::new("fixed-points-stationary", STATIONARY_TOL);
    for fp in solver.fixed_points(eps)? {
        let grad = crate::potential::potential_gradient(sys, fp.x.as_slice(), fp.epsilon);
        let excess = sup_norm(&grad) - STATIONARY_TOL;
        stationary.record(excess, || witness(fp.x.as_slice(), fp.epsilon, "gradient does not vanish"));
    }

    let mut exists = Check::new("limit-from-ones-exists", 0.0);
    let res = sys.limit_from_ones(eps, IterationOptions::default())?;
    exists.record_bool(res.converged, || witness(&vec![1.0; d], eps, "no convergence"));

    Ok(vec![segment, strict, stationary, descent, limit, exists])
}

/// `min Q` over `F(ε)` must strictly decrease along a grid of `ε` wherever
/// the fixed-point sets are nonempty.
pub fn compare_minimum_potentials(solver: &FixedPointSolver, grid_points: usize, exec: Exec) -> Result<Check> {
    let grid: Vec<f64> = (1..=grid_points)
        .map(|i| i as f64 / grid_points as f64)
        .collect();
    let mins = exec.map(&grid, |&eps| -> Result<Option<f64>> {
        Ok(solver
            .fixed_points(eps)?
            .iter()
            .map(|r| r.fixed_point_potential)
            .reduce(f64::min))
    });
    let mins: Vec<(f64, f64)> = grid
        .iter()
        .zip(mins)
        .filter_map(|(e, m)| m.transpose().map(|m| m.map(|m| (*e, m))))
        .collect::<Result<_>>()?;
    let mut check = Check::new("compare-minimum-potentials", 0.0);
    for w in mins.windows(2) {
        let ((e1, q1), (e2, q2)) = (w[0], w[1]);
        let excess = if q1 > q2 { 0.0 } else { q2 - q1 + f64::MIN_POSITIVE };
        check.record(excess, || Witness {
            x: vec![q1, q2],
            epsilon: Some(e1),
            note: format!("min Q at {e1} is not above min Q at {e2}"),
        });
    }
    Ok(check)
}

/// What the coupled checks know about the single system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapContext {
    /// `ΔE(ε)`, or `None` if `ε` is outside `(ε_s*, ε*)`.
    pub gap: Option<f64>,
    /// Hessian bound `K`.
    pub k: f64,
}

fn run_checked(name: &str, run: Result<CoupledRun>, eps: f64) -> Result<std::result::Result<CoupledRun, Check>> {
    match run {
        Ok(r) => Ok(Ok(r)),
        Err(Error::NonMonotone { iteration, component, excess }) => {
            let mut c = Check::new(name, MONOTONE_SLACK);
            c.record(excess, || Witness {
                x: vec![],
                epsilon: Some(eps),
                note: format!("entry {component} rose at iteration {iteration}"),
            });
            Ok(Err(c))
        }
        Err(e) => Err(e),
    }
}

/// Checks on the basic and one-sided chains at one parameter and window.
pub fn coupled_checks(
    sys: &SystemDefinition,
    spec: CouplingSpec,
    eps: f64,
    context: GapContext,
    opts: CoupledOptions,
) -> Result<Vec<Check>> {
    let d = sys.dim();
    let w = spec.window as f64;
    let basic_spec = spec.with_one_sided(false);
    let one_spec = spec.with_one_sided(true);
    let tag = |name: &str| format!("{name} (w = {})", spec.window);

    let mut out = Vec::new();
    let basic = run_checked(&tag("coupled-monotone"), coupled_limit(sys, basic_spec, eps, opts), eps)?;
    let one = run_checked(&tag("one-sided-monotone"), coupled_limit(sys, one_spec, eps, opts), eps)?;
    let (basic, one) = match (basic, one) {
        (Ok(b), Ok(o)) => (b, o),
        (b, o) => {
            out.extend(b.err());
            out.extend(o.err());
            return Ok(out);
        }
    };
    let mut mono = Check::new(tag("coupled-monotone"), MONOTONE_SLACK);
    mono.record_bool(basic.converged && one.converged, || Witness {
        x: vec![],
        epsilon: Some(eps),
        note: "a coupled run did not converge".into(),
    });
    out.push(mono);

    let x = &one.state;
    let mut dominance = Check::new(tag("one-sided-dominance"), MONOTONE_SLACK);
    dominance.record_bool(basic.state.precedes(x, MONOTONE_SLACK), || Witness {
        x: vec![],
        epsilon: Some(eps),
        note: "basic fixed point exceeds the one-sided one".into(),
    });
    out.push(dominance);

    let mut profile = Check::new(tag("one-sided-profile"), MONOTONE_SLACK);
    profile.record_bool(x.is_nondecreasing(MONOTONE_SLACK), || Witness {
        x: vec![],
        epsilon: Some(eps),
        note: "one-sided fixed point decreases somewhere".into(),
    });
    out.push(profile);

    // window-averaged rows change by at most 1/w between neighbours
    let avg = averaged_check(sys, x)?;
    let mut shift_norm = Check::new(tag("shift-norm"), 1e-12);
    let worst = avg
        .windows(2)
        .flat_map(|r| r[0].iter().zip(&r[1]).map(|(a, b)| (b - a).abs()))
        .fold(0.0, f64::max);
    shift_norm.record(worst - 1.0 / w - 1e-12, || Witness {
        x: vec![worst],
        epsilon: Some(eps),
        note: format!("neighbouring averaged rows differ by more than 1/{w}"),
    });
    out.push(shift_norm);

    let sx = x.shift();
    let diff: Vec<f64> = sx.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
    let mut telescoping = Check::new(tag("shift-telescoping"), 1e-9);
    let last = x.row(x.rows() - 1);
    let one_norm: f64 = diff.iter().map(|v| v.abs()).sum();
    let last_norm: f64 = last.iter().sum();
    telescoping.record((one_norm - last_norm).abs() - 1e-9, || Witness {
        x: vec![one_norm, last_norm],
        epsilon: Some(eps),
        note: "1-norm of SX - X differs from the last row".into(),
    });
    out.push(telescoping);

    let a = spec.anchor_row();
    let anchor = x.row(a).to_vec();
    let u_x = coupled_potential(sys, x, eps)?;
    let u_sx = coupled_potential(sys, &sx, eps)?;
    let u_anchor = potential(sys, &anchor, eps);
    let mut energy = Check::new(tag("shift-energy"), SHIFT_SLACK);
    energy.record(u_sx - u_x + u_anchor - SHIFT_SLACK, || {
        witness(&anchor, eps, format!("U(SX) - U(X) = {}", u_sx - u_x))
    });
    out.push(energy);

    let grad = coupled_gradient(sys, x, eps)?;
    let inner: f64 = grad
        .iter()
        .flatten()
        .zip(&diff)
        .map(|(g, s)| g * s)
        .sum();
    let mut orth = Check::new(tag("gradient-orthogonality"), SHIFT_SLACK);
    orth.record(inner.abs() - SHIFT_SLACK, || {
        witness(&anchor, eps, format!("inner product {inner:e}"))
    });
    out.push(orth);

    let mut anchor_check = Check::new(tag("anchor-limit"), SHIFT_SLACK);
    let stepped = sys.variable_map(&sys.check_map(&anchor), eps);
    anchor_check.record_bool(precedes(&anchor, &stepped, ORDER_SLACK), || {
        witness(&anchor, eps, "anchor row is not below its image")
    });
    let lim = sys.iterate_limit(&VectorState::new(anchor.clone())?, eps, IterationOptions::default())?;
    let u_lim = potential(sys, lim.limit.as_slice(), eps);
    anchor_check.record(u_lim - u_anchor - SHIFT_SLACK, || {
        witness(&anchor, eps, format!("U(anchor) = {u_anchor}, U(limit) = {u_lim}"))
    });
    out.push(anchor_check);

    let change = u_sx - u_x;
    match context.gap {
        Some(gap) if !x.is_zero() => {
            let mut chain = Check::new(tag("taylor-chain"), CHAIN_SLACK);
            chain.record(change + gap - CHAIN_SLACK, || {
                witness(&anchor, eps, format!("U(SX) - U(X) = {change}, gap {gap}"))
            });
            out.push(chain);
            let bound = d as f64 * context.k / (2.0 * w);
            let mut taylor = Check::new(tag("taylor-bound"), CHAIN_SLACK);
            taylor.record(change.abs() - bound - CHAIN_SLACK, || {
                witness(&anchor, eps, format!("|U(SX) - U(X)| = {}, bound {bound}", change.abs()))
            });
            out.push(taylor);
        }
        Some(_) => out.push(Check::waived(
            tag("taylor-chain"),
            "one-sided fixed point is zero",
        )),
        None => out.push(Check::waived(
            tag("taylor-chain"),
            "parameter outside the interval between the BP and potential thresholds",
        )),
    }
    Ok(out)
}

/// Three parameters: below `ε_s*`, halfway to `ε*`, and halfway from `ε*` to 1.
pub fn battery_parameters(report: &ThresholdReport) -> [f64; 3] {
    let bp = report.bp_threshold.value;
    let pot = report.potential_threshold.value;
    [0.8 * bp, 0.5 * (bp + pot), 0.5 * (pot + 1.0)]
}

/// The whole battery at the given parameters.
pub fn run_battery(
    sys: &SystemDefinition,
    solver: &FixedPointSolver,
    thresholds: &ThresholdReport,
    k: f64,
    eps_values: &[f64],
    settings: &BatterySettings,
    exec: Exec,
) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let bp = thresholds.bp_threshold.value;
    let pot = thresholds.potential_threshold.value;
    let per_eps = exec.map(eps_values, |&eps| -> Result<Vec<Check>> {
        let mut local = single_system_checks(sys, solver, eps, settings)?;
        let gap = if eps > bp && eps < pot {
            let g = crate::thresholds::energy_gap(solver, eps)?;
            g.is_finite().then_some(g)
        } else {
            None
        };
        for &w in &settings.windows {
            let spec = CouplingSpec::new(settings.half_length, w)?;
            local.extend(coupled_checks(sys, spec, eps, GapContext { gap, k }, settings.coupled)?);
        }
        for c in &mut local {
            c.name = format!("{} @ eps = {eps}", c.name);
        }
        Ok(local)
    });
    for (eps, res) in eps_values.iter().zip(per_eps) {
        checks.extend(res?);
        notes.push(format!("parameter {eps}"));
    }
    checks.push(compare_minimum_potentials(solver, settings.compare_grid, exec)?);
    Ok(VerificationReport {
        subject: sys.name().to_string(),
        checks,
        notes,
    })
}

//! BP, potential and Maxwell thresholds, and the energy gap.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Exec;
use crate::fixed_points::{EnumerationOptions, FixedPointSolver};
use crate::potential::FIXED_POINT_TOL;
use crate::system::{IterationOptions, SystemDefinition, ZERO_TOL};

pub const BISECTION_TOL: f64 = 1e-6;
pub const MAX_HALVINGS: usize = 60;

/// Where a bisection ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// The predicate changes inside `(0, 1)`.
    Interior,
    /// The predicate holds on all of `(0, 1]`.
    AtOne,
    /// The predicate already fails just above `0`.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// Largest probed `ε` where the predicate held.
    pub lower: f64,
    /// Smallest probed `ε` where it failed.
    pub upper: f64,
    pub kind: ThresholdKind,
}

/// Supremum of the set where `holds` is true, for a predicate that is true
/// below some point of `[0, 1]` and false above it.
pub fn bisect_threshold(
    tol: f64,
    mut holds: impl FnMut(f64) -> Result<bool>,
) -> Result<Threshold> {
    if holds(1.0)? {
        return Ok(Threshold {
            value: 1.0,
            lower: 1.0,
            upper: 1.0,
            kind: ThresholdKind::AtOne,
        });
    }
    let (mut lo, mut hi) = (tol.min(0.5), 1.0);
    if !holds(lo)? {
        return Ok(Threshold {
            value: 0.0,
            lower: 0.0,
            upper: lo,
            kind: ThresholdKind::Degenerate,
        });
    }
    for _ in 0..MAX_HALVINGS {
        if hi - lo < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold {
        value: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        kind: ThresholdKind::Interior,
    })
}

/// Whether `x^∞(1; ε)` is numerically zero.
pub fn decodes(sys: &SystemDefinition, eps: f64, opts: IterationOptions) -> Result<bool> {
    let res = sys.limit_from_ones(eps, opts)?;
    let zero = res.limit.max_entry() < ZERO_TOL;
    if !res.converged && !zero {
        debug!("{}: no convergence at eps = {eps} after {} steps", sys.name(), res.iterations);
    }
    Ok(zero)
}

/// `ε_s*`: the largest `ε` for which iteration from all-ones reaches zero.
pub fn bp_threshold(sys: &SystemDefinition, tol: f64, opts: IterationOptions) -> Result<Threshold> {
    bisect_threshold(tol, |eps| decodes(sys, eps, opts))
}

/// `ΔE(ε) = min U(x; ε)` over the nontrivial fixed points, or `+∞` when there
/// are none.
pub fn energy_gap(solver: &FixedPointSolver, eps: f64) -> Result<f64> {
    Ok(solver
        .fixed_points(eps)?
        .iter()
        .map(|r| r.potential)
        .fold(f64::INFINITY, f64::min))
}

/// `min Q(x)` over the nontrivial fixed points at `eps`, `+∞` if there are none.
pub fn min_fixed_point_potential(solver: &FixedPointSolver, eps: f64) -> Result<f64> {
    Ok(solver
        .fixed_points(eps)?
        .iter()
        .map(|r| r.fixed_point_potential)
        .fold(f64::INFINITY, f64::min))
}

/// `ε*`: the largest `ε` with a nonnegative energy gap.
pub fn potential_threshold(solver: &FixedPointSolver, tol: f64) -> Result<Threshold> {
    bisect_threshold(tol, |eps| Ok(energy_gap(solver, eps)? >= 0.0))
}

/// `ε^Max`: the smallest `ε` at which some fixed point has `Q < 0`.
///
/// Uses each point's own parameter root rather than the requested `ε`, so it
/// is an independent check on [`potential_threshold`].
pub fn maxwell_threshold(solver: &FixedPointSolver, tol: f64) -> Result<Threshold> {
    bisect_threshold(tol, |eps| Ok(min_fixed_point_potential(solver, eps)? >= 0.0))
}

/// One point of the energy-gap curve. `gap` is `None` when no nontrivial
/// fixed point was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub epsilon: f64,
    pub gap: Option<f64>,
    pub fixed_points: usize,
}

/// `ΔE` on a grid of `ε`, evaluated in parallel across grid points.
pub fn energy_gap_curve(solver: &FixedPointSolver, grid: &[f64], exec: Exec) -> Result<Vec<GapPoint>> {
    exec.map(grid, |&eps| {
        let pts = solver.fixed_points(eps)?;
        let gap = pts.iter().map(|r| r.potential).reduce(f64::min);
        Ok(GapPoint {
            epsilon: eps,
            gap,
            fixed_points: pts.len(),
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTolerances {
    pub bisection: f64,
    pub zero: f64,
    pub fixed_point: f64,
    pub iteration: IterationOptions,
    pub enumeration: EnumerationOptions,
}

impl Default for ThresholdTolerances {
    fn default() -> Self {
        Self {
            bisection: BISECTION_TOL,
            zero: ZERO_TOL,
            fixed_point: FIXED_POINT_TOL,
            iteration: IterationOptions::default(),
            enumeration: EnumerationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub system: String,
    pub path: String,
    pub dim: usize,
    pub bp_threshold: Threshold,
    pub potential_threshold: Threshold,
    pub maxwell_threshold: Threshold,
    pub energy_gap_curve: Vec<GapPoint>,
    pub tolerances: ThresholdTolerances,
}

impl ThresholdReport {
    /// `ε_s* ≤ ε*` and `ε* = ε^Max`, each within the bisection tolerance.
    pub fn consistent(&self) -> bool {
        let tol = self.tolerances.bisection;
        self.bp_threshold.value <= self.potential_threshold.value + tol
            && (self.potential_threshold.value - self.maxwell_threshold.value).abs() <= 2.0 * tol
    }
}

/// All three thresholds plus the gap curve on `grid`.
pub fn threshold_report(
    sys: &SystemDefinition,
    grid: &[f64],
    tolerances: ThresholdTolerances,
    exec: Exec,
) -> Result<ThresholdReport> {
    let solver = FixedPointSolver::new(sys.clone(), tolerances.enumeration, exec);
    let bp = bp_threshold(sys, tolerances.bisection, tolerances.iteration)?;
    let pot = potential_threshold(&solver, tolerances.bisection)?;
    let max = maxwell_threshold(&solver, tolerances.bisection)?;
    let curve = energy_gap_curve(&solver, grid, exec)?;
    Ok(ThresholdReport {
        system: sys.name().to_string(),
        path: sys.path_description().to_string(),
        dim: sys.dim(),
        bp_threshold: bp,
        potential_threshold: pot,
        maxwell_threshold: max,
        energy_gap_curve: curve,
        tolerances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::test_support::scalar_bec;
    use crate::systems::{make_protograph, ProtographSpec};

    #[test]
    fn bisection_brackets_a_step() {
        let t = bisect_threshold(1e-9, |e| Ok(e <= 0.3)).unwrap();
        assert_eq!(t.kind, ThresholdKind::Interior);
        assert!((t.value - 0.3).abs() < 1e-9);
        assert!(t.lower <= 0.3 && t.upper > 0.3);
        assert_eq!(bisect_threshold(1e-6, |_| Ok(true)).unwrap().kind, ThresholdKind::AtOne);
        let d = bisect_threshold(1e-6, |_| Ok(false)).unwrap();
        assert_eq!((d.kind, d.value), (ThresholdKind::Degenerate, 0.0));
    }

    #[test]
    fn scalar_bp_threshold() {
        let t = bp_threshold(&scalar_bec(), 1e-6, IterationOptions::default()).unwrap();
        assert!((t.value - 0.4294398).abs() < 2e-6, "{t:?}");
    }

    #[test]
    fn gap_is_infinite_without_fixed_points() {
        let sys = make_protograph(&ProtographSpec::new(vec![vec![3, 3]])).unwrap();
        let solver = FixedPointSolver::new(sys, EnumerationOptions::default(), Exec::Sequential);
        assert_eq!(energy_gap(&solver, 0.3).unwrap(), f64::INFINITY);
        assert!(energy_gap(&solver, 0.44).unwrap() > 0.0);
        assert!(energy_gap(&solver, 1.0).unwrap() < 0.0);
        let curve = energy_gap_curve(&solver, &[0.3, 0.44], Exec::Sequential).unwrap();
        assert_eq!(curve[0].gap, None);
        assert_eq!(curve[0].fixed_points, 0);
        assert!(curve[1].gap.unwrap() > 0.0);
    }
}

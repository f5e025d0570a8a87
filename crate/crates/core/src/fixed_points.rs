//! Numerical enumeration of the nontrivial fixed points of a system.
//!
//! Two strategies are combined. For two-dimensional systems the fixed-point
//! curve is traced from `x_* = x^∞(1; 1)` by continuation in `x₁`, solving
//! for `(x₂, ε)` with damped Newton; the fixed points at a given `ε` are then
//! the crossings of that curve. For every dimension, a lattice of starting
//! points is iterated to convergence and the distinct limits are kept. Neither
//! strategy is exhaustive, so the result is a heuristic enumeration.

use std::sync::OnceLock;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Exec;
use crate::potential::{epsilon_of_x, fixed_point_residual, potential, FIXED_POINT_TOL};
use crate::state::{sup_distance, VectorState};
use crate::system::{IterationOptions, SystemDefinition, ZERO_TOL};

/// A nontrivial fixed point together with its parameter and potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRecord {
    pub x: VectorState,
    /// The unique `ε` with `x = f(g(x); ε)`.
    pub epsilon: f64,
    /// `U(x; ε)` at the parameter the point was requested for.
    pub potential: f64,
    /// `Q(x) = U(x; epsilon)`.
    pub fixed_point_potential: f64,
    /// `sup |x - f(g(x); epsilon)|`.
    pub residual: f64,
}

impl FixedPointRecord {
    fn new(sys: &SystemDefinition, x: Vec<f64>, root: f64, requested: f64) -> Self {
        let residual = fixed_point_residual(sys, &x, root);
        let q = potential(sys, &x, root);
        let u = if requested == root {
            q
        } else {
            potential(sys, &x, requested)
        };
        Self {
            x: VectorState::from_vec_unchecked(x),
            epsilon: root,
            potential: u,
            fixed_point_potential: q,
            residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    /// Lattice points per axis for seeding.
    pub lattice_points: usize,
    /// Upper bound on the number of lattice seeds.
    pub max_seeds: usize,
    /// Limits closer than this (sup norm) are merged.
    pub cluster_radius: f64,
    /// Grid size in `x₁` for curve tracing.
    pub curve_points: usize,
    pub iteration: IterationOptions,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            lattice_points: 5,
            max_seeds: 10_000,
            cluster_radius: 1e-6,
            curve_points: 400,
            iteration: IterationOptions::default(),
        }
    }
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_DAMPING: f64 = 0.5;
const NEWTON_MAX_DAMPINGS: usize = 40;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_STEP: f64 = 1e-7;
const CONTINUATION_HALVINGS: usize = 12;

/// Caches the traced curve so that repeated queries at different `ε`, as in a
/// threshold bisection, pay for it once.
#[derive(Debug)]
pub struct FixedPointSolver {
    sys: SystemDefinition,
    opts: EnumerationOptions,
    exec: Exec,
    curve: OnceLock<Vec<CurvePoint>>,
}

/// A solved point of the two-dimensional fixed-point curve.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CurvePoint {
    x1: f64,
    x2: f64,
    eps: f64,
}

impl FixedPointSolver {
    pub fn new(sys: SystemDefinition, opts: EnumerationOptions, exec: Exec) -> Self {
        Self {
            sys,
            opts,
            exec,
            curve: OnceLock::new(),
        }
    }

    pub fn system(&self) -> &SystemDefinition {
        &self.sys
    }

    pub fn options(&self) -> &EnumerationOptions {
        &self.opts
    }

    /// Points on the fixed-point curve with `ε ∈ (0, 1]`.
    ///
    /// For `d = 2` this is the traced curve. For other dimensions the lattice
    /// enumeration is run on `n_points` evenly spaced values of `ε`.
    pub fn trace(&self, n_points: usize) -> Result<Vec<FixedPointRecord>> {
        let n_points = n_points.max(2);
        if self.sys.dim() == 2 {
            let curve = if n_points == self.opts.curve_points {
                self.curve()?.to_vec()
            } else {
                self.trace_curve(n_points)?
            };
            let records: Vec<_> = curve
                .iter()
                .filter(|p| p.eps > 0.0 && p.eps <= 1.0)
                .map(|p| FixedPointRecord::new(&self.sys, vec![p.x1, p.x2], p.eps, p.eps))
                .filter(|r| r.residual <= FIXED_POINT_TOL)
                .collect();
            if records.is_empty() {
                debug!("{}: traced fixed-point curve is empty", self.sys.name());
            }
            return Ok(records);
        }
        let grid: Vec<f64> = (1..=n_points).map(|i| i as f64 / n_points as f64).collect();
        let per_eps = Exec::Sequential.map(&grid, |&eps| self.lattice_fixed_points(eps));
        let mut out = Vec::new();
        for found in per_eps {
            out.extend(found?);
        }
        Ok(out)
    }

    /// Nontrivial fixed points at `eps`, clustered and sorted.
    pub fn fixed_points(&self, eps: f64) -> Result<Vec<FixedPointRecord>> {
        crate::system::check_parameter(eps)?;
        if eps == 0.0 {
            return Ok(Vec::new());
        }
        let mut found = self.lattice_fixed_points(eps)?;
        if self.sys.dim() == 2 {
            found.extend(self.curve_slice(eps)?);
        }
        Ok(cluster(found, self.opts.cluster_radius))
    }

    fn curve(&self) -> Result<&[CurvePoint]> {
        if let Some(c) = self.curve.get() {
            return Ok(c);
        }
        let traced = self.trace_curve(self.opts.curve_points)?;
        Ok(self.curve.get_or_init(|| traced))
    }

    fn residual(&self, x1: f64, x2: f64, eps: f64) -> [f64; 2] {
        let x = [x1, x2];
        let mut scratch = [0.0; 2];
        let mut out = [0.0; 2];
        self.sys.raw_step(&x, eps, &mut scratch, &mut out);
        [out[0] - x1, out[1] - x2]
    }

    /// Damped Newton for `(x₂, ε)` with `x₁` held fixed.
    fn newton(&self, x1: f64, guess: (f64, f64)) -> Option<CurvePoint> {
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let (mut x2, mut eps) = (guess.0.clamp(0.0, 1.0), guess.1.max(0.0));
        let mut r = self.residual(x1, x2, eps);
        for _ in 0..NEWTON_MAX_ITER {
            if norm(r) <= NEWTON_TOL {
                break;
            }
            let h = NEWTON_STEP;
            let rp = self.residual(x1, x2 + h, eps);
            let rm = self.residual(x1, x2 - h, eps);
            let ep = self.residual(x1, x2, eps + h);
            let em = self.residual(x1, x2, eps - h);
            let j = [
                [(rp[0] - rm[0]) / (2.0 * h), (ep[0] - em[0]) / (2.0 * h)],
                [(rp[1] - rm[1]) / (2.0 * h), (ep[1] - em[1]) / (2.0 * h)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let dx2 = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let deps = -(j[0][0] * r[1] - j[1][0] * r[0]) / det;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..NEWTON_MAX_DAMPINGS {
                let cand = ((x2 + t * dx2).clamp(0.0, 1.0), (eps + t * deps).max(0.0));
                let rc = self.residual(x1, cand.0, cand.1);
                if norm(rc) < norm(r) {
                    (x2, eps, r) = (cand.0, cand.1, rc);
                    accepted = true;
                    break;
                }
                t *= NEWTON_DAMPING;
            }
            if !accepted {
                break;
            }
        }
        (norm(r) <= 1e-12).then_some(CurvePoint { x1, x2, eps })
    }

    /// Continuation from `prev` to `x1`, halving the step whenever Newton fails.
    fn continue_to(
        &self,
        prev: CurvePoint,
        slope: Option<(f64, f64)>,
        x1: f64,
    ) -> Option<CurvePoint> {
        let mut from = prev;
        let mut step = x1 - prev.x1;
        let mut halvings = 0;
        loop {
            let target = if (x1 - from.x1).abs() <= step.abs() {
                x1
            } else {
                from.x1 + step
            };
            let dx = target - from.x1;
            let guess = match slope {
                Some((s2, se)) => (from.x2 + s2 * dx, from.eps + se * dx),
                None => (from.x2, from.eps),
            };
            match self.newton(target, guess) {
                Some(p) => {
                    if target == x1 {
                        return Some(p);
                    }
                    from = p;
                }
                None => {
                    halvings += 1;
                    if halvings > CONTINUATION_HALVINGS {
                        return None;
                    }
                    step *= 0.5;
                }
            }
        }
    }

    fn trace_curve(&self, n_points: usize) -> Result<Vec<CurvePoint>> {
        let start = self.sys.limit_from_ones(1.0, self.opts.iteration)?.limit;
        let (a, b) = (start[0], start[1]);
        if a <= ZERO_TOL {
            return Ok(Vec::new());
        }
        let Some(first) = self.newton(a, (b, 1.0)) else {
            debug!("{}: no curve through x_* = ({a}, {b})", self.sys.name());
            return Ok(Vec::new());
        };
        let mut curve = vec![first];
        for j in 1..n_points {
            let x1 = a * (1.0 - j as f64 / n_points as f64);
            let prev = *curve.last().expect("curve starts non-empty");
            let slope = curve.len().checked_sub(2).map(|i| {
                let q = curve[i];
                let dx = prev.x1 - q.x1;
                ((prev.x2 - q.x2) / dx, (prev.eps - q.eps) / dx)
            });
            match self.continue_to(prev, slope, x1) {
                Some(p) => curve.push(p),
                None => debug!("{}: continuation failed at x1 = {x1}", self.sys.name()),
            }
        }
        Ok(curve)
    }

    /// Crossings of the traced curve with the level `eps`, located by
    /// bisection in `x₁`.
    fn curve_slice(&self, eps: f64) -> Result<Vec<FixedPointRecord>> {
        let curve = self.curve()?;
        let mut out = Vec::new();
        for w in curve.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (a.eps - eps, b.eps - eps);
            if fa * fb > 0.0 {
                continue;
            }
            let point = if fa == 0.0 {
                Some(a)
            } else if fb == 0.0 {
                Some(b)
            } else {
                self.bisect_curve(a, b, eps)
            };
            let Some(p) = point else { continue };
            let x = vec![p.x1, p.x2];
            if fixed_point_residual(&self.sys, &x, eps) > FIXED_POINT_TOL {
                debug!("{}: curve crossing at x = {x:?} rejected by residual", self.sys.name());
                continue;
            }
            let root = epsilon_of_x(&self.sys, &x, FIXED_POINT_TOL).unwrap_or(eps);
            out.push(FixedPointRecord::new(&self.sys, x, root, eps));
        }
        Ok(out)
    }

    fn bisect_curve(&self, a: CurvePoint, b: CurvePoint, eps: f64) -> Option<CurvePoint> {
        let (mut lo, mut hi) = (a, b);
        let side = (lo.eps - eps).signum();
        for _ in 0..60 {
            let x1 = 0.5 * (lo.x1 + hi.x1);
            if x1 == lo.x1 || x1 == hi.x1 {
                break;
            }
            let t = (x1 - lo.x1) / (hi.x1 - lo.x1);
            let guess = (lo.x2 + t * (hi.x2 - lo.x2), lo.eps + t * (hi.eps - lo.eps));
            let mid = self.newton(x1, guess)?;
            if mid.eps == eps {
                return Some(mid);
            }
            if (mid.eps - eps).signum() == side {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(if (lo.eps - eps).abs() <= (hi.eps - eps).abs() {
            lo
        } else {
            hi
        })
    }

    fn lattice_fixed_points(&self, eps: f64) -> Result<Vec<FixedPointRecord>> {
        let d = self.sys.dim();
        let seeds = lattice(d, self.opts.lattice_points, self.opts.max_seeds);
        let limits = self.exec.map(&seeds, |seed| {
            self.sys
                .iterate_limit(&VectorState::from_vec_unchecked(seed.clone()), eps, self.opts.iteration)
        });
        let ones = self.sys.limit_from_ones(eps, self.opts.iteration)?;
        let mut out = Vec::new();
        for res in limits.into_iter().chain(std::iter::once(Ok(ones))) {
            let res = res?;
            if !res.converged || res.limit.max_entry() < ZERO_TOL {
                continue;
            }
            let x = res.limit.into_vec();
            if fixed_point_residual(&self.sys, &x, eps) > FIXED_POINT_TOL {
                continue;
            }
            match epsilon_of_x(&self.sys, &x, FIXED_POINT_TOL) {
                Some(root) => out.push(FixedPointRecord::new(&self.sys, x, root, eps)),
                None => debug!("{}: limit {x:?} has no parameter root", self.sys.name()),
            }
        }
        Ok(out)
    }
}

/// `points_per_axis^d` lattice points on `[0, 1]^d`, with the density
/// reduced until the count fits under `cap`.
fn lattice(d: usize, points_per_axis: usize, cap: usize) -> Vec<Vec<f64>> {
    let mut n = points_per_axis.max(2);
    while n > 2 && (n as f64).powi(d as i32) > cap as f64 {
        n -= 1;
    }
    let total = n.checked_pow(d as u32).unwrap_or(usize::MAX).min(cap.max(1));
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let v = (idx % n) as f64 / (n - 1) as f64;
                    idx /= n;
                    v
                })
                .collect()
        })
        .collect()
}

/// Greedy clustering in a fixed order; within a cluster the record with the
/// smallest residual wins.
fn cluster(mut records: Vec<FixedPointRecord>, radius: f64) -> Vec<FixedPointRecord> {
    records.sort_by(|a, b| {
        a.x.as_slice()
            .partial_cmp(b.x.as_slice())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<FixedPointRecord> = Vec::new();
    for r in records {
        match out
            .iter_mut()
            .find(|o| sup_distance(o.x.as_slice(), r.x.as_slice()) <= radius)
        {
            Some(o) if r.residual < o.residual => *o = r,
            Some(_) => {}
            None => out.push(r),
        }
    }
    out
}

/// One-shot convenience over [`FixedPointSolver::fixed_points`].
pub fn fixed_points(sys: &SystemDefinition, eps: f64) -> Result<Vec<FixedPointRecord>> {
    FixedPointSolver::new(sys.clone(), EnumerationOptions::default(), Exec::default())
        .fixed_points(eps)
}

/// One-shot convenience over [`FixedPointSolver::trace`].
pub fn trace_fixed_point_curve(
    sys: &SystemDefinition,
    n_points: usize,
) -> Result<Vec<FixedPointRecord>> {
    FixedPointSolver::new(sys.clone(), EnumerationOptions::default(), Exec::default())
        .trace(n_points)
}

//! The spatially-coupled recursion `X ← Aᵀ f(A g(X); ε)` and its one-sided
//! variant, the coupled potential, and the Hessian bound behind the
//! minimal coupling width.
//!
//! Positions `-L..=L+w-1` are stored as rows `0..2L+w`. The `2L+1` bit-node
//! systems sit at positions `-L..=L`; systems outside that range are absent,
//! so rows at the edges receive fewer than `w` contributions.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numdiff::{self, inf_norm, SECOND_DERIVATIVE_STEP};
use crate::state::sup_distance;
use crate::system::{check_parameter, project_to_cube, SystemDefinition, MONOTONE_SLACK, ZERO_TOL};
use crate::thresholds::{bisect_threshold, Threshold};

/// Geometry of the coupled chain: half-length `L`, window `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub half_length: usize,
    pub window: usize,
    #[serde(default)]
    pub one_sided: bool,
}

impl CouplingSpec {
    pub fn new(half_length: usize, window: usize) -> Result<Self> {
        let spec = Self {
            half_length,
            window,
            one_sided: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_one_sided(mut self, one_sided: bool) -> Self {
        self.one_sided = one_sided;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Coupling("window must be at least 1".into()));
        }
        Ok(())
    }

    /// `2L + w` stored rows.
    pub fn positions(&self) -> usize {
        2 * self.half_length + self.window
    }

    /// `2L + 1` bit-node systems.
    pub fn systems(&self) -> usize {
        2 * self.half_length + 1
    }

    /// Row of position `i0 = floor((w - 1)/2)`.
    pub fn anchor_row(&self) -> usize {
        self.half_length + (self.window - 1) / 2
    }

    /// Position index `i` of stored row `row`.
    pub fn position(&self, row: usize) -> i64 {
        row as i64 - self.half_length as i64
    }
}

/// A `(2L + w) × d` state, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    spec: CouplingSpec,
    dim: usize,
    data: Vec<f64>,
}

impl CoupledState {
    pub fn zeros(spec: CouplingSpec, dim: usize) -> Self {
        Self {
            spec,
            dim,
            data: vec![0.0; spec.positions() * dim],
        }
    }

    pub fn ones(spec: CouplingSpec, dim: usize) -> Self {
        Self {
            spec,
            dim,
            data: vec![1.0; spec.positions() * dim],
        }
    }

    pub fn from_rows(spec: CouplingSpec, rows: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if rows.len() != spec.positions() {
            return Err(Error::Dimension {
                expected: spec.positions(),
                got: rows.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            if let Some(&value) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain { value });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { spec, dim, data })
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.spec.positions()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.max_entry() < ZERO_TOL
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        sup_distance(&self.data, &other.data)
    }

    /// Componentwise `self ⪯ other + slack`.
    pub fn precedes(&self, other: &Self, slack: f64) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| *a <= b + slack)
    }

    /// Every column is non-decreasing in the position index.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        (1..self.rows()).all(|r| {
            self.row(r - 1)
                .iter()
                .zip(self.row(r))
                .all(|(a, b)| *a <= b + slack)
        })
    }

    /// The down shift `S`: row 0 becomes zero, row `r` takes row `r - 1`.
    pub fn shift(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        data[self.dim..].copy_from_slice(&self.data[..self.data.len() - self.dim]);
        Self {
            spec: self.spec,
            dim: self.dim,
            data,
        }
    }

    /// Copies the anchor row `i0` into every row above it.
    fn pin_above_anchor(&mut self) {
        let d = self.dim;
        let a = self.spec.anchor_row();
        let (head, tail) = self.data.split_at_mut((a + 1) * d);
        let anchor = &head[a * d..];
        for row in tail.chunks_exact_mut(d) {
            row.copy_from_slice(anchor);
        }
    }
}

/// Sums of `w` consecutive rows of a row-major `rows × d` array, for every
/// starting row. Block prefix and suffix sums make this `O(rows·d)` while every
/// output is still a sum of nonnegative terms drawn from its own window.
fn window_sums(src: &[f64], d: usize, w: usize, prefix: &mut Vec<f64>, suffix: &mut Vec<f64>, out: &mut [f64]) {
    let rows = src.len() / d;
    let count = rows + 1 - w;
    debug_assert_eq!(out.len(), count * d);
    prefix.clear();
    prefix.extend_from_slice(src);
    suffix.clear();
    suffix.extend_from_slice(src);
    for r in 1..rows {
        if r % w != 0 {
            for c in 0..d {
                prefix[r * d + c] += prefix[(r - 1) * d + c];
            }
        }
    }
    for r in (0..rows.saturating_sub(1)).rev() {
        if (r + 1) % w != 0 {
            for c in 0..d {
                suffix[r * d + c] += suffix[(r + 1) * d + c];
            }
        }
    }
    for i in 0..count {
        let o = &mut out[i * d..(i + 1) * d];
        if i % w == 0 {
            o.copy_from_slice(&suffix[i * d..(i + 1) * d]);
        } else {
            let end = i + w - 1;
            for c in 0..d {
                o[c] = suffix[i * d + c] + prefix[end * d + c];
            }
        }
    }
}

/// Scratch buffers for one coupled chain.
struct Workspace {
    g: Vec<f64>,
    averaged: Vec<f64>,
    padded: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl Workspace {
    fn new(spec: &CouplingSpec, d: usize) -> Self {
        let w = spec.window;
        Self {
            g: vec![0.0; spec.positions() * d],
            averaged: vec![0.0; spec.systems() * d],
            padded: vec![0.0; (spec.positions() + w - 1) * d],
            prefix: Vec::new(),
            suffix: Vec::new(),
        }
    }

    /// `A g(X)`, left in `self.averaged`.
    fn average_check(&mut self, sys: &SystemDefinition, x: &CoupledState) {
        let d = x.dim;
        let maps = sys.maps();
        for (src, dst) in x.data.chunks_exact(d).zip(self.g.chunks_exact_mut(d)) {
            maps.check_map(src, dst);
        }
        let w = x.spec.window;
        window_sums(&self.g, d, w, &mut self.prefix, &mut self.suffix, &mut self.averaged);
        let scale = 1.0 / w as f64;
        self.averaged.iter_mut().for_each(|v| *v *= scale);
    }

    /// `Aᵀ f(A g(X); ε)` into `out`, without projection.
    fn step(&mut self, sys: &SystemDefinition, x: &CoupledState, eps: f64, out: &mut [f64]) {
        let d = x.dim;
        let w = x.spec.window;
        self.average_check(sys, x);
        let maps = sys.maps();
        let body = &mut self.padded[(w - 1) * d..(w - 1 + x.spec.systems()) * d];
        for (src, dst) in self.averaged.chunks_exact(d).zip(body.chunks_exact_mut(d)) {
            maps.variable_map(src, eps, dst);
        }
        window_sums(&self.padded, d, w, &mut self.prefix, &mut self.suffix, out);
        let scale = 1.0 / w as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

fn check_state(sys: &SystemDefinition, x: &CoupledState) -> Result<()> {
    x.spec.validate()?;
    sys.check_dim(x.dim)
}

/// One step of the basic coupled recursion.
pub fn coupled_step(sys: &SystemDefinition, x: &CoupledState, eps: f64) -> Result<CoupledState> {
    check_state(sys, x)?;
    check_parameter(eps)?;
    let mut ws = Workspace::new(&x.spec, x.dim);
    let mut out = CoupledState::zeros(x.spec, x.dim);
    ws.step(sys, x, eps, &mut out.data);
    project_to_cube(&mut out.data)?;
    Ok(out)
}

/// One step of the one-sided recursion: a basic step followed by pinning
/// every row above `i0` to row `i0`.
pub fn one_sided_step(sys: &SystemDefinition, x: &CoupledState, eps: f64) -> Result<CoupledState> {
    if !x.spec.one_sided {
        return Err(Error::Coupling("state is not one-sided".into()));
    }
    let mut out = coupled_step(sys, x, eps)?;
    out.pin_above_anchor();
    Ok(out)
}

/// The basic step written as the double sum over window offsets. Quadratic in
/// `w`; used to cross-check [`coupled_step`].
pub fn coupled_step_direct(sys: &SystemDefinition, x: &CoupledState, eps: f64) -> Result<CoupledState> {
    check_state(sys, x)?;
    check_parameter(eps)?;
    let d = x.dim;
    let w = x.spec.window;
    let systems = x.spec.systems() as i64;
    let inv = 1.0 / w as f64;
    let mut out = CoupledState::zeros(x.spec, d);
    let mut avg = vec![0.0; d];
    let mut gi = vec![0.0; d];
    let mut fi = vec![0.0; d];
    for r in 0..x.rows() {
        let acc = &mut out.data[r * d..(r + 1) * d];
        for k in 0..w {
            let p = r as i64 - k as i64;
            if p < 0 || p >= systems {
                continue;
            }
            avg.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..w {
                sys.maps().check_map(x.row(p as usize + j), &mut gi);
                avg.iter_mut().zip(&gi).for_each(|(a, g)| *a += g * inv);
            }
            sys.maps().variable_map(&avg, eps, &mut fi);
            acc.iter_mut().zip(&fi).for_each(|(a, f)| *a += f * inv);
        }
    }
    project_to_cube(&mut out.data)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub state: CoupledState,
    pub iterations: usize,
    pub converged: bool,
}

impl CoupledRun {
    /// The chain decoded: every entry is below the zero tolerance.
    pub fn decoded(&self) -> bool {
        self.state.is_zero()
    }
}

/// Iterates from all-ones until the sup-norm change is at most `opts.tol`,
/// checking that every iterate is componentwise no larger than the last.
pub fn coupled_limit(
    sys: &SystemDefinition,
    spec: CouplingSpec,
    eps: f64,
    opts: CoupledOptions,
) -> Result<CoupledRun> {
    coupled_limit_observed(sys, spec, eps, opts, |_, _| {})
}

/// As [`coupled_limit`], handing every iterate (from iteration 0) to `observe`.
pub fn coupled_limit_observed(
    sys: &SystemDefinition,
    spec: CouplingSpec,
    eps: f64,
    opts: CoupledOptions,
    mut observe: impl FnMut(usize, &CoupledState),
) -> Result<CoupledRun> {
    spec.validate()?;
    check_parameter(eps)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let d = sys.dim();
    let mut ws = Workspace::new(&spec, d);
    let mut cur = CoupledState::ones(spec, d);
    let mut next = CoupledState::zeros(spec, d);
    observe(0, &cur);
    let mut iterations = 0;
    loop {
        ws.step(sys, &cur, eps, &mut next.data);
        project_to_cube(&mut next.data)?;
        if spec.one_sided {
            next.pin_above_anchor();
        }
        iterations += 1;
        let mut change: f64 = 0.0;
        for (idx, (c, n)) in cur.data.iter().zip(&next.data).enumerate() {
            if n - c > MONOTONE_SLACK {
                return Err(Error::NonMonotone {
                    iteration: iterations,
                    component: idx,
                    excess: n - c,
                });
            }
            change = change.max((n - c).abs());
        }
        std::mem::swap(&mut cur, &mut next);
        observe(iterations, &cur);
        if change <= opts.tol || iterations >= opts.max_iter {
            if change > opts.tol {
                debug!(
                    "{}: coupled run at eps = {eps} stopped after {iterations} steps, change {change:e}",
                    sys.name()
                );
            }
            return Ok(CoupledRun {
                state: cur,
                iterations,
                converged: change <= opts.tol,
            });
        }
    }
}

/// `Tr(g(X) D Xᵀ) - G(X) - F(A g(X); ε)`.
pub fn coupled_potential(sys: &SystemDefinition, x: &CoupledState, eps: f64) -> Result<f64> {
    check_state(sys, x)?;
    let d = x.dim;
    let mut ws = Workspace::new(&x.spec, d);
    ws.average_check(sys, x);
    let mut total = 0.0;
    for r in 0..x.rows() {
        let row = x.row(r);
        let g = &ws.g[r * d..(r + 1) * d];
        total += g
            .iter()
            .zip(sys.scaling())
            .zip(row)
            .map(|((gk, dk), xk)| gk * dk * xk)
            .sum::<f64>();
        total -= sys.check_potential(row);
    }
    for y in ws.averaged.chunks_exact(d) {
        total -= sys.variable_potential(y, eps);
    }
    Ok(total)
}

/// Row `i` of the gradient: `(x_i - [Aᵀ f(A g(X); ε)]_i) D g'(x_i)`.
pub fn coupled_gradient(sys: &SystemDefinition, x: &CoupledState, eps: f64) -> Result<Vec<Vec<f64>>> {
    check_state(sys, x)?;
    let d = x.dim;
    let mut ws = Workspace::new(&x.spec, d);
    let mut stepped = vec![0.0; x.data.len()];
    ws.step(sys, x, eps, &mut stepped);
    Ok((0..x.rows())
        .map(|r| {
            let row = x.row(r);
            let jac = sys.check_jacobian(row);
            let weights: Vec<f64> = (0..d)
                .map(|k| (row[k] - stepped[r * d + k]) * sys.scaling()[k])
                .collect();
            (0..d)
                .map(|j| weights.iter().zip(&jac).map(|(w, jr)| w * jr[j]).sum())
                .collect()
        })
        .collect())
}

/// `A g(X)` as `2L + 1` rows.
pub fn averaged_check(sys: &SystemDefinition, x: &CoupledState) -> Result<Vec<Vec<f64>>> {
    check_state(sys, x)?;
    let mut ws = Workspace::new(&x.spec, x.dim);
    ws.average_check(sys, x);
    Ok(ws.averaged.chunks_exact(x.dim).map(<[f64]>::to_vec).collect())
}

/// Sampled estimate of `K = ‖D‖∞ (g'_m + g''_m + 2 (g'_m)² f'_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianBound {
    pub k: f64,
    pub scaling_norm: f64,
    /// `sup ‖g'(x)‖∞`
    pub check_jacobian: f64,
    /// `sup ‖g''(x)‖∞`, with the second derivatives laid out as a `d² × d`
    /// matrix.
    pub check_hessian: f64,
    /// `sup ‖∂f/∂x (x; 1)‖∞`
    pub variable_jacobian: f64,
    pub points_per_axis: usize,
    pub samples: usize,
}

const MAX_HESSIAN_SAMPLES: usize = 10_000;

/// Suprema over a lattice with `points_per_axis` points per axis (reduced to
/// keep at most 10⁴ points) together with all corners of the cube.
/// `f'` is taken at `ε = 1`, where it is largest.
pub fn hessian_bound(sys: &SystemDefinition, points_per_axis: usize, exec: Exec) -> Result<HessianBound> {
    if points_per_axis < 2 {
        return Err(Error::Parameter("need at least two lattice points per axis".into()));
    }
    let d = sys.dim();
    let mut n = points_per_axis;
    while n > 2 && (n as f64).powi(d as i32) > MAX_HESSIAN_SAMPLES as f64 {
        n -= 1;
    }
    let lattice_count = n.checked_pow(d as u32).unwrap_or(usize::MAX).min(MAX_HESSIAN_SAMPLES);
    let mut points: Vec<Vec<f64>> = (0..lattice_count)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let v = (idx % n) as f64 / (n - 1) as f64;
                    idx /= n;
                    v
                })
                .collect()
        })
        .collect();
    if d < 14 {
        for mask in 0..(1usize << d) {
            points.push((0..d).map(|k| ((mask >> k) & 1) as f64).collect());
        }
    }
    let h = SECOND_DERIVATIVE_STEP;
    let maps = sys.maps();
    let sups = exec.map(&points, |x| {
        let check = |p: &[f64], out: &mut [f64]| maps.check_map(p, out);
        let gj = inf_norm(&numdiff::jacobian(check, x, d, h));
        let gh = inf_norm(&numdiff::second_derivatives(check, x, d, h));
        let fj = inf_norm(&numdiff::jacobian(|p, out| maps.variable_map(p, 1.0, out), x, d, h));
        (gj, gh, fj)
    });
    let (gj, gh, fj) = sups
        .into_iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)));
    let dn = sys.scaling().iter().copied().fold(0.0, f64::max);
    Ok(HessianBound {
        k: dn * (gj + gh + 2.0 * gj * gj * fj),
        scaling_norm: dn,
        check_jacobian: gj,
        check_hessian: gh,
        variable_jacobian: fj,
        points_per_axis: n,
        samples: points.len(),
    })
}

/// The sufficient width `d K / (2 ΔE)`. A gap of `+∞` (no nontrivial fixed
/// points) gives `0`.
pub fn min_coupling_width(dim: usize, k: f64, gap: f64, eps: f64) -> Result<f64> {
    if gap == f64::INFINITY {
        return Ok(0.0);
    }
    if !(gap > 0.0) {
        return Err(Error::NoPositiveGap { epsilon: eps, gap });
    }
    Ok(dim as f64 * k / (2.0 * gap))
}

/// Largest `ε` for which the coupled chain decodes from all-ones.
pub fn coupled_bp_threshold(
    sys: &SystemDefinition,
    spec: CouplingSpec,
    tol: f64,
    opts: CoupledOptions,
) -> Result<Threshold> {
    bisect_threshold(tol, |eps| Ok(coupled_limit(sys, spec, eps, opts)?.decoded()))
}

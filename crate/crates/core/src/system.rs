//! Vector admissible systems and the single-system recursion
//! `x ← f(g(x); ε)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numdiff::{self, DERIVATIVE_STEP};
use crate::state::{sup_distance, VectorState};

/// Floating-point overshoot outside the unit cube that `step` silently absorbs.
pub const CUBE_SLACK: f64 = 1e-14;
/// Slack when checking that an iterate sequence is componentwise monotone.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Entries below this count as zero when deciding convergence to `0`.
pub const ZERO_TOL: f64 = 1e-8;

/// The four closed-form evaluators of a system.
///
/// `variable_map` is the bit-node update `f(x; ε)`, `check_map` the
/// check-node update `g(x)`, and the two potentials are their integrals:
/// `∇F(x; ε) = f(x; ε)·D` and `∇G(x) = g(x)·D`. Implementations are only
/// evaluated on the unit cube, with `ε` allowed slightly past 1 while Newton
/// iterations search for a fixed point's parameter.
pub trait SystemMaps: Send + Sync {
    fn dim(&self) -> usize;
    fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]);
    fn check_map(&self, x: &[f64], out: &mut [f64]);
    fn variable_potential(&self, x: &[f64], eps: f64) -> f64;
    fn check_potential(&self, x: &[f64]) -> f64;
}

/// How a system behaves at `ε = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroParameter {
    /// `f(x; 0) = 0` and `F(x; 0) = 0` for every `x`.
    Vanishes,
    /// The model keeps some erasures at `ε = 0`; the reason is carried into
    /// verification reports.
    Exempt(String),
}

/// An immutable vector admissible system with its parameter path baked in.
#[derive(Clone)]
pub struct SystemDefinition {
    name: String,
    scaling: Vec<f64>,
    maps: Arc<dyn SystemMaps>,
    path: String,
    zero_parameter: ZeroParameter,
    trial_entropy_scale: Option<f64>,
}

impl fmt::Debug for SystemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDefinition")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("scaling", &self.scaling)
            .field("path", &self.path)
            .finish()
    }
}

impl SystemDefinition {
    /// Wraps evaluators with the diagonal scaling `D`. Every entry of `D`
    /// must be strictly positive.
    pub fn new(
        name: impl Into<String>,
        maps: Arc<dyn SystemMaps>,
        scaling: Vec<f64>,
        path: impl Into<String>,
    ) -> Result<Self> {
        let dim = maps.dim();
        if dim == 0 {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        if scaling.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: scaling.len(),
            });
        }
        if let Some(s) = scaling.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidSystem(format!(
                "scaling entry {s} is not strictly positive"
            )));
        }
        Ok(Self {
            name: name.into(),
            scaling,
            maps,
            path: path.into(),
            zero_parameter: ZeroParameter::Vanishes,
            trial_entropy_scale: None,
        })
    }

    pub fn with_zero_parameter(mut self, zero_parameter: ZeroParameter) -> Self {
        self.zero_parameter = zero_parameter;
        self
    }

    /// Factor `c` with trial entropy `P(x) = -c·Q(x)`, for systems where that
    /// relation is known.
    pub fn with_trial_entropy_scale(mut self, scale: f64) -> Self {
        self.trial_entropy_scale = Some(scale);
        self
    }

    /// Same evaluators with another scaling matrix.
    pub fn with_scaling(&self, scaling: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.name.clone(), self.maps.clone(), scaling, self.path.clone())?;
        out.zero_parameter = self.zero_parameter.clone();
        out.trial_entropy_scale = self.trial_entropy_scale;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.maps.dim()
    }

    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    pub fn path_description(&self) -> &str {
        &self.path
    }

    pub fn zero_parameter(&self) -> &ZeroParameter {
        &self.zero_parameter
    }

    pub fn trial_entropy_scale(&self) -> Option<f64> {
        self.trial_entropy_scale
    }

    pub fn maps(&self) -> &Arc<dyn SystemMaps> {
        &self.maps
    }

    pub fn variable_map(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.maps.variable_map(x, eps, &mut out);
        out
    }

    pub fn check_map(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.maps.check_map(x, &mut out);
        out
    }

    pub fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
        self.maps.variable_potential(x, eps)
    }

    pub fn check_potential(&self, x: &[f64]) -> f64 {
        self.maps.check_potential(x)
    }

    /// `f(g(x); ε)` without any checks, for solvers that need it off the cube.
    pub(crate) fn raw_step(&self, x: &[f64], eps: f64, scratch: &mut [f64], out: &mut [f64]) {
        self.maps.check_map(x, scratch);
        self.maps.variable_map(scratch, eps, out);
    }

    /// Jacobian `g'(x)` by finite differences.
    pub fn check_jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        numdiff::jacobian(
            |p, out| self.maps.check_map(p, out),
            x,
            self.dim(),
            DERIVATIVE_STEP,
        )
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim(),
                got,
            })
        }
    }

    pub(crate) fn step_into(
        &self,
        x: &[f64],
        eps: f64,
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.raw_step(x, eps, scratch, out);
        project_to_cube(out)
    }

    /// One application of the recursion, `f(g(x); ε)`.
    pub fn step(&self, x: &VectorState, eps: f64) -> Result<VectorState> {
        self.check_dim(x.dim())?;
        check_parameter(eps)?;
        let mut scratch = vec![0.0; self.dim()];
        let mut out = vec![0.0; self.dim()];
        self.step_into(x.as_slice(), eps, &mut scratch, &mut out)?;
        Ok(VectorState::from_vec_unchecked(out))
    }

    /// Iterates from `x0` until the sup-norm change drops to `opts.tol`.
    pub fn iterate_limit(
        &self,
        x0: &VectorState,
        eps: f64,
        opts: IterationOptions,
    ) -> Result<IterationResult> {
        self.iterate_observed(x0, eps, opts, |_, _| {})
    }

    /// As [`iterate_limit`](Self::iterate_limit), calling `observe` with
    /// every iterate (starting with `x0` at iteration 0).
    pub fn iterate_observed(
        &self,
        x0: &VectorState,
        eps: f64,
        opts: IterationOptions,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<IterationResult> {
        self.check_dim(x0.dim())?;
        check_parameter(eps)?;
        if !(opts.tol > 0.0) {
            return Err(Error::Parameter(format!("tolerance {} must be positive", opts.tol)));
        }
        let d = self.dim();
        let mut scratch = vec![0.0; d];
        let mut cur = x0.as_slice().to_vec();
        let mut next = vec![0.0; d];
        observe(0, &cur);
        self.step_into(&cur, eps, &mut scratch, &mut next)?;
        let first = VectorState::from_vec_unchecked(next.clone());
        let direction = if first.precedes(x0, 0.0) {
            MonotoneDirection::Down
        } else if x0.precedes(&first, 0.0) {
            MonotoneDirection::Up
        } else {
            MonotoneDirection::None
        };
        let mut iterations = 1;
        loop {
            let change = sup_distance(&cur, &next);
            direction.check(iterations, &cur, &next)?;
            std::mem::swap(&mut cur, &mut next);
            observe(iterations, &cur);
            if change <= opts.tol || iterations >= opts.max_iter {
                let converged = change <= opts.tol;
                return Ok(IterationResult {
                    limit: VectorState::from_vec_unchecked(cur),
                    iterations,
                    converged,
                    direction,
                });
            }
            self.step_into(&cur, eps, &mut scratch, &mut next)?;
            iterations += 1;
        }
    }

    /// `x^∞(1; ε)`, the limit from the all-ones state.
    pub fn limit_from_ones(&self, eps: f64, opts: IterationOptions) -> Result<IterationResult> {
        self.iterate_limit(&VectorState::ones(self.dim()), eps, opts)
    }
}

pub(crate) fn check_parameter(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("epsilon {eps} outside [0, 1]")))
    }
}

/// Clamps overshoot up to [`CUBE_SLACK`]; anything larger is an error.
pub(crate) fn project_to_cube(v: &mut [f64]) -> Result<()> {
    for (component, value) in v.iter_mut().enumerate() {
        if !(*value >= -CUBE_SLACK && *value <= 1.0 + CUBE_SLACK) {
            return Err(Error::LeftUnitCube {
                component,
                value: *value,
            });
        }
        *value = value.clamp(0.0, 1.0);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Direction of the first step, which fixes the direction of the whole run
/// for monotone maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneDirection {
    Up,
    Down,
    None,
}

impl MonotoneDirection {
    fn check(self, iteration: usize, prev: &[f64], next: &[f64]) -> Result<()> {
        let sign = match self {
            MonotoneDirection::Up => -1.0,
            MonotoneDirection::Down => 1.0,
            MonotoneDirection::None => return Ok(()),
        };
        for (component, (p, n)) in prev.iter().zip(next).enumerate() {
            let excess = sign * (n - p);
            if excess > MONOTONE_SLACK {
                return Err(Error::NonMonotone {
                    iteration,
                    component,
                    excess,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub limit: VectorState,
    pub iterations: usize,
    pub converged: bool,
    pub direction: MonotoneDirection,
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Scalar `(3,6)` BEC recursion written as a 1-d admissible system.
    pub struct ScalarBec36;

    impl SystemMaps for ScalarBec36 {
        fn dim(&self) -> usize {
            1
        }
        fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]) {
            out[0] = eps * x[0] * x[0];
        }
        fn check_map(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 1.0 - (1.0 - x[0]).powi(5);
        }
        fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
            eps * x[0].powi(3) / 3.0
        }
        fn check_potential(&self, x: &[f64]) -> f64 {
            x[0] - (1.0 - (1.0 - x[0]).powi(6)) / 6.0
        }
    }

    pub fn scalar_bec() -> SystemDefinition {
        SystemDefinition::new("scalar-bec-3-6", Arc::new(ScalarBec36), vec![1.0], "identity")
            .unwrap()
    }
}

//! Randomized checks that a [`SystemDefinition`] behaves like an admissible
//! system, and the report type shared with the inequality battery.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{cell_rng, Exec};
use crate::numdiff::{close_rel, gradient, DERIVATIVE_STEP};
use crate::system::{SystemDefinition, SystemMaps, ZeroParameter};

/// A point at which a check failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub epsilon: Option<f64>,
    pub note: String,
}

/// Outcome of one named condition over all of its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub failures: usize,
    /// Largest violation seen (0 when every sample passed).
    pub worst: f64,
    pub tolerance: f64,
    /// Set when the condition does not apply to this system.
    pub waived: Option<String>,
    pub witness: Option<Witness>,
}

impl Check {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            samples: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
            waived: None,
            witness: None,
        }
    }

    pub fn waived(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            waived: Some(reason.into()),
            ..Self::new(name, 0.0)
        }
    }

    /// Records one sample whose violation is `excess` (positive means the
    /// condition is broken by that much beyond the tolerance).
    pub fn record(&mut self, excess: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        if excess > 0.0 || excess.is_nan() {
            self.failures += 1;
            self.passed = false;
            if excess.is_nan() || excess > self.worst {
                self.worst = excess;
            }
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    /// Records a sample that passes or fails outright.
    pub fn record_bool(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.record(if ok { 0.0 } else { 1.0 }, witness);
    }

    fn merge(&mut self, other: Check) {
        self.samples += other.samples;
        self.failures += other.failures;
        self.passed &= other.passed;
        if other.worst > self.worst || other.worst.is_nan() {
            self.worst = other.worst;
        }
        if self.witness.is_none() {
            self.witness = other.witness;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub subject: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Slack for the monotonicity checks.
pub const ORDER_SLACK: f64 = 1e-12;
/// `f(x; ε₂) - f(x; ε₁)` must exceed this in some component.
pub const STRICTNESS_MARGIN: f64 = 1e-12;
/// Relative tolerance of the gradient-consistency checks.
pub const GRADIENT_RTOL: f64 = 1e-5;

fn uniform(rng: &mut impl Rng, d: usize, lo: f64) -> Vec<f64> {
    (0..d).map(|_| lo + (1.0 - lo) * rng.random::<f64>()).collect()
}

fn witness(x: &[f64], eps: Option<f64>, note: String) -> Witness {
    Witness {
        x: x.to_vec(),
        epsilon: eps,
        note,
    }
}

/// Per-sample slice of the admissibility checks; merged in sample order.
fn admissibility_sample(sys: &SystemDefinition, seed: u64, i: usize) -> [Check; 6] {
    let d = sys.dim();
    let dv = sys.scaling();
    let mut rng = cell_rng(seed, i as u64);
    let mut order = Check::new("monotone-in-state", ORDER_SLACK);
    let mut strict = Check::new("increasing-in-parameter", STRICTNESS_MARGIN);
    let mut boundary = Check::new("boundary-values", 1e-15);
    let mut zero_param = Check::new("zero-parameter", 1e-15);
    let mut fgrad = Check::new("variable-potential-gradient", GRADIENT_RTOL);
    let mut ggrad = Check::new("check-potential-gradient", GRADIENT_RTOL);

    let x = uniform(&mut rng, d, 0.0);
    let y: Vec<f64> = x
        .iter()
        .map(|v| v + (1.0 - v) * rng.random::<f64>())
        .collect();
    let eps: f64 = rng.random();
    let fx = sys.variable_map(&x, eps);
    let fy = sys.variable_map(&y, eps);
    let gx = sys.check_map(&x);
    let gy = sys.check_map(&y);
    let excess = fx
        .iter()
        .zip(&fy)
        .chain(gx.iter().zip(&gy))
        .map(|(a, b)| a - b - ORDER_SLACK)
        .fold(f64::NEG_INFINITY, f64::max);
    order.record(excess, || {
        witness(&x, Some(eps), format!("f or g decreases towards {y:?}"))
    });

    let xs = uniform(&mut rng, d, 0.1);
    let e1 = 0.99 * rng.random::<f64>();
    let e2 = e1 + 0.01 + (0.99 - e1) * rng.random::<f64>();
    let f1 = sys.variable_map(&xs, e1);
    let f2 = sys.variable_map(&xs, e2);
    let drop = f1.iter().zip(&f2).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let rise = f1.iter().zip(&f2).map(|(a, b)| b - a).fold(f64::NEG_INFINITY, f64::max);
    let excess = drop.max(STRICTNESS_MARGIN - rise);
    strict.record(excess, || {
        witness(&xs, Some(e1), format!("f not strictly larger at epsilon {e2}"))
    });

    let zero = vec![0.0; d];
    let mut bvals: Vec<f64> = sys.variable_map(&zero, eps);
    bvals.extend(sys.check_map(&zero));
    bvals.push(sys.variable_potential(&zero, eps));
    bvals.push(sys.check_potential(&zero));
    let excess = bvals.iter().map(|v| v.abs()).fold(0.0, f64::max) - 1e-15;
    boundary.record(excess, || {
        witness(&zero, Some(eps), "f(0), g(0), F(0) or G(0) nonzero".into())
    });

    let mut zvals = sys.variable_map(&x, 0.0);
    zvals.push(sys.variable_potential(&x, 0.0));
    let excess = zvals.iter().map(|v| v.abs()).fold(0.0, f64::max) - 1e-15;
    zero_param.record(excess, || witness(&x, Some(0.0), "f(x; 0) or F(x; 0) nonzero".into()));

    let xi = uniform(&mut rng, d, 0.0);
    let fd = gradient(|p| sys.variable_potential(p, eps), &xi, DERIVATIVE_STEP);
    let fa = sys.variable_map(&xi, eps);
    let gd = gradient(|p| sys.check_potential(p), &xi, DERIVATIVE_STEP);
    let ga = sys.check_map(&xi);
    let rel = |num: f64, ana: f64| (num - ana).abs() / num.abs().max(ana.abs()).max(1e-3);
    let fexcess = (0..d)
        .map(|k| rel(fd[k], fa[k] * dv[k]))
        .fold(0.0, f64::max);
    let f_ok = (0..d).all(|k| close_rel(fd[k], fa[k] * dv[k], GRADIENT_RTOL));
    fgrad.record(if f_ok { 0.0 } else { fexcess }, || {
        witness(&xi, Some(eps), format!("finite difference {fd:?}, f·D {:?}", scaled(&fa, dv)))
    });
    let gexcess = (0..d)
        .map(|k| rel(gd[k], ga[k] * dv[k]))
        .fold(0.0, f64::max);
    let g_ok = (0..d).all(|k| close_rel(gd[k], ga[k] * dv[k], GRADIENT_RTOL));
    ggrad.record(if g_ok { 0.0 } else { gexcess }, || {
        witness(&xi, None, format!("finite difference {gd:?}, g·D {:?}", scaled(&ga, dv)))
    });

    [order, strict, boundary, zero_param, fgrad, ggrad]
}

fn scaled(v: &[f64], d: &[f64]) -> Vec<f64> {
    v.iter().zip(d).map(|(a, b)| a * b).collect()
}

/// Samples `n_samples` random points and checks monotonicity in `x`, strict
/// increase in `ε`, the boundary values and `F' = f·D`, `G' = g·D`.
/// Smoothness is only attested by the finite differences behaving, not proven.
pub fn verify_admissible(
    sys: &SystemDefinition,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<VerificationReport> {
    if n_samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let per_sample = exec.map_range(n_samples, |i| admissibility_sample(sys, seed, i));
    let mut checks: Vec<Check> = admissibility_sample(sys, seed, 0)
        .into_iter()
        .map(|c| Check::new(c.name, c.tolerance))
        .collect();
    for sample in per_sample {
        for (acc, c) in checks.iter_mut().zip(sample) {
            acc.merge(c);
        }
    }
    if let ZeroParameter::Exempt(reason) = sys.zero_parameter() {
        let slot = checks
            .iter_mut()
            .find(|c| c.name == "zero-parameter")
            .expect("zero-parameter check present");
        *slot = Check::waived("zero-parameter", reason.clone());
    }
    Ok(VerificationReport {
        subject: sys.name().to_string(),
        checks,
        notes: vec!["twice continuous differentiability is attested by finite differences, not proven".into()],
    })
}

struct ShiftedVariablePotential(Arc<dyn SystemMaps>);

impl SystemMaps for ShiftedVariablePotential {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        self.0.variable_map(x, eps, out)
    }
    fn check_map(&self, x: &[f64], out: &mut [f64]) {
        self.0.check_map(x, out)
    }
    fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
        self.0.variable_potential(x, eps) + x[0] * x[0]
    }
    fn check_potential(&self, x: &[f64]) -> f64 {
        self.0.check_potential(x)
    }
}

/// A copy of `sys` whose `F` is off by `x₁²`, for exercising the
/// gradient-consistency check.
pub fn corrupt_variable_potential(sys: &SystemDefinition) -> Result<SystemDefinition> {
    let maps = Arc::new(ShiftedVariablePotential(sys.maps().clone()));
    Ok(SystemDefinition::new(
        format!("{} (corrupted F)", sys.name()),
        maps,
        sys.scaling().to_vec(),
        sys.path_description(),
    )?
    .with_zero_parameter(sys.zero_parameter().clone()))
}

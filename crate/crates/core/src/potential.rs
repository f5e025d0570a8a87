//! The single-system potential `U(x; ε)` and quantities derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numdiff::gauss_legendre;
use crate::state::sup_distance;
use crate::system::SystemDefinition;

/// Residual below which a point counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// `U(x; ε) = g(x)·D·xᵀ - G(x) - F(g(x); ε)` from the closed forms.
pub fn potential(sys: &SystemDefinition, x: &[f64], eps: f64) -> f64 {
    let g = sys.check_map(x);
    let quadratic: f64 = g
        .iter()
        .zip(sys.scaling())
        .zip(x)
        .map(|((gk, dk), xk)| gk * dk * xk)
        .sum();
    quadratic - sys.check_potential(x) - sys.variable_potential(&g, eps)
}

/// `∇U(x; ε) = (x - f(g(x); ε))·D·g'(x)`, with `g'` by finite differences.
pub fn potential_gradient(sys: &SystemDefinition, x: &[f64], eps: f64) -> Vec<f64> {
    let jac = sys.check_jacobian(x);
    let weights = residual_weights(sys, x, eps);
    (0..x.len())
        .map(|j| weights.iter().zip(&jac).map(|(w, row)| w * row[j]).sum())
        .collect()
}

/// `(x - f(g(x); ε))·D` as a row vector.
fn residual_weights(sys: &SystemDefinition, x: &[f64], eps: f64) -> Vec<f64> {
    let f = sys.variable_map(&sys.check_map(x), eps);
    x.iter()
        .zip(&f)
        .zip(sys.scaling())
        .map(|((xk, fk), dk)| (xk - fk) * dk)
        .collect()
}

/// Integration path from `0` to `x` for the line-integral definition of `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationPath {
    /// `z(t) = t·x`
    Straight,
    /// Raise one coordinate at a time, in index order.
    Staircase,
}

/// `U(x; ε)` as the line integral of its gradient along `path`, with a
/// Gauss-Legendre rule on each segment. Used to cross-check the closed forms.
pub fn potential_by_quadrature(
    sys: &SystemDefinition,
    x: &[f64],
    eps: f64,
    path: IntegrationPath,
) -> f64 {
    let rule = gauss_legendre();
    match path {
        IntegrationPath::Straight => rule.integrate(0.0, 1.0, |t| {
            let z: Vec<f64> = x.iter().map(|v| t * v).collect();
            dot(&potential_gradient(sys, &z, eps), x)
        }),
        IntegrationPath::Staircase => {
            let mut corner = vec![0.0; x.len()];
            let mut total = 0.0;
            for k in 0..x.len() {
                if x[k] != 0.0 {
                    total += rule.integrate(0.0, x[k], |t| {
                        let mut z = corner.clone();
                        z[k] = t;
                        potential_gradient(sys, &z, eps)[k]
                    });
                }
                corner[k] = x[k];
            }
            total
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `sup |f(g(x); ε) - x|`.
pub fn fixed_point_residual(sys: &SystemDefinition, x: &[f64], eps: f64) -> f64 {
    sup_distance(&sys.variable_map(&sys.check_map(x), eps), x)
}

/// The unique `ε ∈ [0, 1]` with `x = f(g(x); ε)`, if there is one.
///
/// Bisects `s(ε) = Σ_k (f_k(g(x); ε) - x_k)`, which increases strictly in
/// `ε` for `x ≠ 0`, then accepts the root only if the full residual there is
/// below `tol`.
pub fn epsilon_of_x(sys: &SystemDefinition, x: &[f64], tol: f64) -> Option<f64> {
    if x.iter().all(|v| *v == 0.0) {
        return None;
    }
    let g = sys.check_map(x);
    let s = |eps: f64| -> f64 {
        sys.variable_map(&g, eps)
            .iter()
            .zip(x)
            .map(|(f, v)| f - v)
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if s(lo) > 0.0 || s(hi) < 0.0 {
        return None;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = if s(hi).abs() < s(lo).abs() { hi } else { lo };
    (fixed_point_residual(sys, x, eps) < tol).then_some(eps)
}

/// `Q(x) = U(x; ε(x))`, the potential of a fixed point at its own parameter.
pub fn fixed_point_potential(sys: &SystemDefinition, x: &[f64]) -> Result<f64> {
    let eps = epsilon_of_x(sys, x, FIXED_POINT_TOL).ok_or(Error::NotAFixedPoint)?;
    Ok(potential(sys, x, eps))
}

/// Trial entropy `P(x) = -c·Q(x)` for systems that declare the factor `c`.
pub fn trial_entropy(sys: &SystemDefinition, x: &[f64]) -> Option<Result<f64>> {
    let scale = sys.trial_entropy_scale()?;
    Some(fixed_point_potential(sys, x).map(|q| -scale * q))
}

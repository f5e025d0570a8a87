//! Finite differences and quadrature on the unit cube.
//!
//! Stencils never leave `[0, 1]^d`: central differences are used in the
//! interior and second-order one-sided formulas within `h` of a face.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Step for first derivatives of the system maps.
pub const DERIVATIVE_STEP: f64 = 1e-6;
/// Step for the nested differences behind second derivatives.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-5;
/// Gauss-Legendre nodes used for line integrals of the potential.
pub const QUADRATURE_NODES: usize = 64;

#[derive(Clone, Copy)]
enum Stencil {
    Central,
    Forward,
    Backward,
}

fn stencil(v: f64, h: f64) -> Stencil {
    if v - h >= 0.0 && v + h <= 1.0 {
        Stencil::Central
    } else if v + 2.0 * h <= 1.0 {
        Stencil::Forward
    } else {
        Stencil::Backward
    }
}

/// Derivative of a scalar function of one variable living on `[0, 1]`.
pub fn derivative_1d(mut f: impl FnMut(f64) -> f64, v: f64, h: f64) -> f64 {
    match stencil(v, h) {
        Stencil::Central => (f(v + h) - f(v - h)) / (2.0 * h),
        Stencil::Forward => (-3.0 * f(v) + 4.0 * f(v + h) - f(v + 2.0 * h)) / (2.0 * h),
        Stencil::Backward => (3.0 * f(v) - 4.0 * f(v - h) + f(v - 2.0 * h)) / (2.0 * h),
    }
}

/// Gradient of a scalar function on the cube.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let d = derivative_1d(
                |v| {
                    probe[j] = v;
                    f(&probe)
                },
                x[j],
                h,
            );
            probe[j] = x[j];
            d
        })
        .collect()
}

/// Jacobian `J[i][j] = ∂m_i/∂x_j` of a map written into an output buffer.
pub fn jacobian(
    map: impl Fn(&[f64], &mut [f64]),
    x: &[f64],
    out_dim: usize,
    h: f64,
) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut jac = vec![vec![0.0; d]; out_dim];
    let at = |j: usize, t: f64| {
        let mut probe = x.to_vec();
        probe[j] = t;
        let mut buf = vec![0.0; out_dim];
        map(&probe, &mut buf);
        buf
    };
    for j in 0..d {
        let v = x[j];
        let col: Vec<f64> = match stencil(v, h) {
            Stencil::Central => {
                let (p, m) = (at(j, v + h), at(j, v - h));
                p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            }
            Stencil::Forward => {
                let (a, b, c) = (at(j, v), at(j, v + h), at(j, v + 2.0 * h));
                (0..out_dim)
                    .map(|i| (-3.0 * a[i] + 4.0 * b[i] - c[i]) / (2.0 * h))
                    .collect()
            }
            Stencil::Backward => {
                let (a, b, c) = (at(j, v), at(j, v - h), at(j, v - 2.0 * h));
                (0..out_dim)
                    .map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * h))
                    .collect()
            }
        };
        for (i, c) in col.into_iter().enumerate() {
            jac[i][j] = c;
        }
    }
    jac
}

/// Second derivatives `H[i*d + j][k] = ∂²m_i/∂x_j∂x_k` by nested differences.
pub fn second_derivatives(
    map: impl Fn(&[f64], &mut [f64]) + Copy,
    x: &[f64],
    out_dim: usize,
    h: f64,
) -> Vec<Vec<f64>> {
    let d = x.len();
    let flat_jacobian = |p: &[f64], out: &mut [f64]| {
        let jac = jacobian(map, p, out_dim, h);
        for (i, row) in jac.iter().enumerate() {
            out[i * d..(i + 1) * d].copy_from_slice(row);
        }
    };
    jacobian(flat_jacobian, x, out_dim * d, h)
}

/// Max absolute row sum.
pub fn inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `|a - b| ≤ rtol · max(|a|, |b|, 1e-3)`; the floor keeps comparisons of
/// near-zero derivatives meaningful.
pub fn close_rel(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-3)
}

/// Shared 64-node Gauss-Legendre rule.
pub fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero node count"))
    })
}

//! Scalar (3,6) erasure-channel oracles written directly from the recursion
//! `x ← ε λ(1 − ρ(1 − x))` with `λ(x) = x²`, `ρ(x) = x⁵`.

#![allow(dead_code)]

pub fn check(x: f64) -> f64 {
    1.0 - (1.0 - x).powi(5)
}

pub fn step(x: f64, eps: f64) -> f64 {
    eps * check(x).powi(2)
}

/// `x g(x) − ∫₀ˣ g − ε g(x)³/3`
pub fn potential(x: f64, eps: f64) -> f64 {
    let g = check(x);
    let int_g = x - (1.0 - (1.0 - x).powi(6)) / 6.0;
    x * g - int_g - eps * g.powi(3) / 3.0
}

fn bisect(mut holds: impl FnMut(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Iterate from one and see whether the erasure probability dies out.
pub fn bp_threshold() -> f64 {
    bisect(|eps| {
        let mut x = 1.0;
        for _ in 0..100_000 {
            x = step(x, eps);
            if x < 1e-10 {
                return true;
            }
        }
        false
    })
}

/// Largest `ε` with `min U(x; ε) ≥ 0` over a fine grid of `x ∈ (0, 1]`.
pub fn potential_threshold() -> f64 {
    bisect(|eps| (1..=20_000).all(|i| potential(i as f64 / 20_000.0, eps) >= 0.0))
}

pub fn trajectory(eps: f64, n: usize) -> Vec<f64> {
    let mut x = 1.0;
    let mut out = vec![x];
    for _ in 0..n {
        x = step(x, eps);
        out.push(x);
    }
    out
}

//! Constructors for the three density-evolution systems: a two-user
//! Slepian-Wolf problem with erasures, the two-user erasure MAC, and
//! protograph ensembles on the BEC.

mod emac;
mod path;
mod protograph;
mod slepian_wolf;

pub use emac::make_emac;
pub use path::ChannelPath;
pub use protograph::{make_protograph, NodeChannel, ProtographSpec};
pub use slepian_wolf::{make_slepian_wolf, SlepianWolfParams};

use crate::poly::{Ensemble, Polynomial};

/// `1 - ρ(1 - x)`.
fn check_update(ens: &Ensemble, x: f64) -> f64 {
    1.0 - ens.rho.value(1.0 - x)
}

/// `L'(1)·(x + (R(1 - x) - 1)/R'(1))`, the integral of `L'(1)·(1 - ρ(1 - x))`.
fn check_integral(ens: &Ensemble, x: f64) -> f64 {
    let l1 = ens.bit_nodes.slope_at_one();
    let r1 = ens.check_nodes.slope_at_one();
    l1 * (x + (ens.check_nodes.value(1.0 - x) - 1.0) / r1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Ensemble;

    #[test]
    fn check_integral_vanishes_at_zero() {
        let ens = Ensemble::regular(3, 6).unwrap();
        assert!(check_integral(&ens, 0.0).abs() < 1e-15);
        assert_eq!(check_update(&ens, 1.0), 1.0);
    }
}

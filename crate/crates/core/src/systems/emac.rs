use std::sync::Arc;

use super::{check_integral, check_update};
use crate::error::Result;
use crate::poly::{Ensemble, Polynomial};
use crate::system::{SystemDefinition, SystemMaps, ZeroParameter};

struct EmacMaps {
    user1: Ensemble,
    user2: Ensemble,
}

/// A bit is lost if the channel erases the sum, or if it is received but the
/// other user's bit is unknown and the two inputs cancel (probability 1/2).
fn erasure(l: f64, eps: f64) -> f64 {
    eps + (1.0 - eps) * l / 2.0
}

impl SystemMaps for EmacMaps {
    fn dim(&self) -> usize {
        2
    }

    fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        out[0] = erasure(self.user2.bit_nodes.value(x[1]), eps) * self.user1.lambda.value(x[0]);
        out[1] = erasure(self.user1.bit_nodes.value(x[0]), eps) * self.user2.lambda.value(x[1]);
    }

    fn check_map(&self, x: &[f64], out: &mut [f64]) {
        out[0] = check_update(&self.user1, x[0]);
        out[1] = check_update(&self.user2, x[1]);
    }

    fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
        let l1 = self.user1.bit_nodes.value(x[0]);
        let l2 = self.user2.bit_nodes.value(x[1]);
        eps * (l1 + l2) + (1.0 - eps) * l1 * l2 / 2.0
    }

    fn check_potential(&self, x: &[f64]) -> f64 {
        check_integral(&self.user1, x[0]) + check_integral(&self.user2, x[1])
    }
}

/// Joint decoding of two LDPC codes on the two-user erasure MAC,
/// `D = diag(L₁'(1), L₂'(1))`.
pub fn make_emac(user1: Ensemble, user2: Ensemble) -> Result<SystemDefinition> {
    let scaling = vec![user1.bit_nodes.slope_at_one(), user2.bit_nodes.slope_at_one()];
    Ok(SystemDefinition::new(
        "emac",
        Arc::new(EmacMaps { user1, user2 }),
        scaling,
        "eps -> eps",
    )?
    .with_trial_entropy_scale(1.0)
    .with_zero_parameter(ZeroParameter::Exempt(
        "the noiseless adder output leaves a bit unresolved with probability L(x)/2".into(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym() -> SystemDefinition {
        make_emac(Ensemble::regular(3, 6).unwrap(), Ensemble::regular(3, 6).unwrap()).unwrap()
    }

    #[test]
    fn full_erasure_decouples_users() {
        let sys = sym();
        let f = sys.variable_map(&[0.4, 0.7], 1.0);
        assert_abs_diff_eq!(f[0], 0.16, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 0.49, epsilon = 1e-15);
    }

    #[test]
    fn silent_user_stays_silent() {
        let sys = sym();
        let f = sys.variable_map(&[0.0, 0.8], 0.6);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn identical_users_commute_with_swap() {
        let sys = sym();
        for &(a, b, eps) in &[(0.1, 0.9, 0.3), (0.55, 0.2, 0.9), (1.0, 0.0, 0.5)] {
            let fwd = sys.step(&crate::VectorState::new(vec![a, b]).unwrap(), eps).unwrap();
            let rev = sys.step(&crate::VectorState::new(vec![b, a]).unwrap(), eps).unwrap();
            assert!((fwd[0] - rev[1]).abs() <= 1e-14);
            assert!((fwd[1] - rev[0]).abs() <= 1e-14);
        }
    }
}

use std::sync::Arc;

use super::{check_integral, check_update, ChannelPath};
use crate::error::{Error, Result};
use crate::poly::{Ensemble, Polynomial};
use crate::system::{SystemDefinition, SystemMaps, ZeroParameter};

/// Two LDPC-coded correlated sources sent over independent erasure channels.
///
/// Each source uses a punctured systematic encoder; a fraction `gamma` of the
/// code bits (the systematic part) is never transmitted and can only be
/// recovered from the other source, which is identical with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlepianWolfParams {
    pub user1: Ensemble,
    pub user2: Ensemble,
    pub gamma: f64,
    pub p: f64,
    pub path: ChannelPath,
}

impl SlepianWolfParams {
    /// Checks the parameters. `gamma` must be zero (no puncturing) or the
    /// design rate shared by both ensembles.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidSystem(format!(
                "puncturing fraction {} outside [0, 1)",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidSystem(format!(
                "correlation {} outside [0, 1]",
                self.p
            )));
        }
        self.path.validate()?;
        if self.gamma != 0.0 {
            for (user, ens) in [(1, &self.user1), (2, &self.user2)] {
                let rate = ens.design_rate()?;
                if (rate - self.gamma).abs() > 1e-12 {
                    return Err(Error::InvalidSystem(format!(
                        "user {user} has design rate {rate}, puncturing fraction is {}",
                        self.gamma
                    )));
                }
            }
        }
        Ok(())
    }
}

struct SlepianWolfMaps {
    params: SlepianWolfParams,
}

impl SlepianWolfMaps {
    /// Erasure probability of a code bit given the other source's node erasure `l`.
    fn erasure(&self, l: f64, channel: f64) -> f64 {
        let SlepianWolfParams { gamma, p, .. } = self.params;
        (1.0 - gamma) * channel + gamma * (1.0 - p + p * l)
    }
}

impl SystemMaps for SlepianWolfMaps {
    fn dim(&self) -> usize {
        2
    }

    fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        let (e1, e2) = self.params.path.eval(eps);
        let (u1, u2) = (&self.params.user1, &self.params.user2);
        out[0] = self.erasure(u2.bit_nodes.value(x[1]), e1) * u1.lambda.value(x[0]);
        out[1] = self.erasure(u1.bit_nodes.value(x[0]), e2) * u2.lambda.value(x[1]);
    }

    fn check_map(&self, x: &[f64], out: &mut [f64]) {
        out[0] = check_update(&self.params.user1, x[0]);
        out[1] = check_update(&self.params.user2, x[1]);
    }

    fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
        let (e1, e2) = self.params.path.eval(eps);
        let l1 = self.params.user1.bit_nodes.value(x[0]);
        let l2 = self.params.user2.bit_nodes.value(x[1]);
        self.erasure(l1, e2) * l2 + self.erasure(l2, e1) * l1
            - self.params.gamma * self.params.p * l1 * l2
    }

    fn check_potential(&self, x: &[f64]) -> f64 {
        check_integral(&self.params.user1, x[0]) + check_integral(&self.params.user2, x[1])
    }
}

/// Builds the two-dimensional Slepian-Wolf recursion with
/// `D = diag(L₁'(1), L₂'(1))`.
pub fn make_slepian_wolf(params: SlepianWolfParams) -> Result<SystemDefinition> {
    params.validate()?;
    let scaling = vec![
        params.user1.bit_nodes.slope_at_one(),
        params.user2.bit_nodes.slope_at_one(),
    ];
    let path = params.path.describe();
    let gamma = params.gamma;
    let sys = SystemDefinition::new(
        "slepian-wolf",
        Arc::new(SlepianWolfMaps { params }),
        scaling,
        path,
    )?
    .with_trial_entropy_scale(1.0 / (1.0 - gamma));
    Ok(if gamma == 0.0 {
        sys
    } else {
        sys.with_zero_parameter(ZeroParameter::Exempt(format!(
            "punctured systematic bits stay erased at epsilon = 0 with probability {gamma}(1 - p + p L(x))"
        )))
    })
}

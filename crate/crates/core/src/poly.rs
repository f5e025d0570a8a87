//! Degree-distribution polynomials for irregular LDPC ensembles.
//!
//! Coefficients are stored densely with `coeffs[i]` multiplying `x^i`. An
//! edge-perspective polynomial `λ(x) = Σ λ_i x^(i-1)` therefore keeps the
//! fraction of edges attached to degree-`i` nodes at index `i - 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the stored polynomial degree.
pub const DEFAULT_MAX_DEGREE: usize = 64;

const NORMALIZATION_TOL: f64 = 1e-12;

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
}

fn horner_second_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(2)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * x + (i * (i - 1)) as f64 * c)
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { value: x })
    }
}

/// Common evaluation surface of edge and node polynomials.
pub trait Polynomial {
    fn coeffs(&self) -> &[f64];

    /// Evaluates the polynomial on `[0, 1]`.
    fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value(x))
    }

    /// Evaluates the first derivative on `[0, 1]`.
    fn eval_derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.derivative(x))
    }

    /// Unchecked evaluation. The polynomial extends smoothly past the unit
    /// interval, which finite-difference stencils at the boundary rely on.
    fn value(&self, x: f64) -> f64 {
        horner(self.coeffs(), x)
    }

    fn derivative(&self, x: f64) -> f64 {
        horner_derivative(self.coeffs(), x)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        horner_second_derivative(self.coeffs(), x)
    }

    fn degree(&self) -> usize {
        self.coeffs().len().saturating_sub(1)
    }
}

/// Edge-perspective degree distribution (`λ` or `ρ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePolynomial {
    coeffs: Vec<f64>,
}

impl EdgePolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_max_degree(coeffs, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(mut coeffs: Vec<f64>, max_degree: usize) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::DegreeDistribution("no coefficients".into()));
        }
        if coeffs.len() - 1 > max_degree {
            return Err(Error::DegreeDistribution(format!(
                "degree {} exceeds the limit {max_degree}",
                coeffs.len() - 1
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::DegreeDistribution(format!(
                "coefficient {c} is negative or not finite"
            )));
        }
        if coeffs[0] != 0.0 {
            return Err(Error::DegreeDistribution(
                "constant term must be zero".into(),
            ));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::DegreeDistribution(format!(
                "coefficients sum to {sum}, expected 1"
            )));
        }
        Ok(Self { coeffs })
    }

    /// Builds `λ(x) = Σ c_d x^(d-1)` from a `{node degree: edge fraction}` map.
    pub fn from_degree_map(map: &BTreeMap<usize, f64>) -> Result<Self> {
        let max = map.keys().copied().max().unwrap_or(0);
        if max == 0 || map.contains_key(&0) {
            return Err(Error::DegreeDistribution(
                "node degrees must be at least 1".into(),
            ));
        }
        let mut coeffs = vec![0.0; max];
        for (&degree, &c) in map {
            coeffs[degree - 1] = c;
        }
        // degree-1 nodes land in the constant slot
        if coeffs[0] != 0.0 {
            return Err(Error::DegreeDistribution(
                "degree-1 nodes are not supported".into(),
            ));
        }
        Self::new(coeffs)
    }

    /// Regular distribution `x^(degree-1)`.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::from_degree_map(&BTreeMap::from([(degree, 1.0)]))
    }

    /// `∫₀¹ λ(x) dx`.
    pub fn integral(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / (i + 1) as f64)
            .sum()
    }
}

impl Polynomial for EdgePolynomial {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Node-perspective distribution `L(x) = ∫₀ˣ λ / ∫₀¹ λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePolynomial {
    coeffs: Vec<f64>,
    slope_at_one: f64,
}

impl NodePolynomial {
    /// `L'(1)`, the average node degree.
    pub fn slope_at_one(&self) -> f64 {
        self.slope_at_one
    }
}

impl Polynomial for NodePolynomial {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Integrates and normalizes an edge distribution into its node form.
pub fn node_from_edge(edge: &EdgePolynomial) -> NodePolynomial {
    let area = edge.integral();
    let mut coeffs = vec![0.0; edge.coeffs.len() + 1];
    for (i, c) in edge.coeffs.iter().enumerate() {
        coeffs[i + 1] = c / ((i + 1) as f64 * area);
    }
    NodePolynomial {
        coeffs,
        slope_at_one: 1.0 / area,
    }
}

/// `1 - L'(1)/R'(1)`; rejects ensembles with rate outside `(0, 1)`.
pub fn design_rate(lambda: &EdgePolynomial, rho: &EdgePolynomial) -> Result<f64> {
    let l = node_from_edge(lambda).slope_at_one();
    let r = node_from_edge(rho).slope_at_one();
    let rate = 1.0 - l / r;
    if rate <= 0.0 || rate >= 1.0 {
        return Err(Error::DegenerateRate(rate));
    }
    Ok(rate)
}

/// Variable/check pair of edge distributions together with their node forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub lambda: EdgePolynomial,
    pub rho: EdgePolynomial,
    pub bit_nodes: NodePolynomial,
    pub check_nodes: NodePolynomial,
}

impl Ensemble {
    pub fn new(lambda: EdgePolynomial, rho: EdgePolynomial) -> Self {
        let bit_nodes = node_from_edge(&lambda);
        let check_nodes = node_from_edge(&rho);
        Self {
            lambda,
            rho,
            bit_nodes,
            check_nodes,
        }
    }

    /// `(dv, dc)`-regular ensemble.
    pub fn regular(variable_degree: usize, check_degree: usize) -> Result<Self> {
        Ok(Self::new(
            EdgePolynomial::regular(variable_degree)?,
            EdgePolynomial::regular(check_degree)?,
        ))
    }

    pub fn design_rate(&self) -> Result<f64> {
        design_rate(&self.lambda, &self.rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn poly(c: &[f64]) -> EdgePolynomial {
        EdgePolynomial::new(c.to_vec()).unwrap()
    }

    #[test]
    fn evaluates_simple_polynomials() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        assert_eq!(sq.eval(0.0).unwrap(), 0.0);
        assert_eq!(sq.eval(1.0).unwrap(), 1.0);
        let mixed = poly(&[0.0, 0.5, 0.5]);
        assert_abs_diff_eq!(mixed.eval(0.5).unwrap(), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.eval_derivative(0.5).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_out_of_domain_arguments() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        assert_eq!(sq.eval(1.5), Err(Error::Domain { value: 1.5 }));
        assert!(sq.eval(-1e-3).is_err());
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(EdgePolynomial::new(vec![0.0, 0.5, 0.4]).is_err());
        assert!(EdgePolynomial::new(vec![0.0, -0.5, 1.5]).is_err());
        assert!(EdgePolynomial::new(vec![0.5, 0.5]).is_err());
        assert!(EdgePolynomial::new(vec![]).is_err());
        let mut long = vec![0.0; 70];
        long[69] = 1.0;
        assert!(EdgePolynomial::new(long.clone()).is_err());
        assert!(EdgePolynomial::with_max_degree(long, 80).is_ok());
    }

    #[test]
    fn node_form_of_regular_distributions() {
        let l = node_from_edge(&poly(&[0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(l.slope_at_one(), 3.0, epsilon = 1e-14);
        assert_eq!(l.coeffs(), &[0.0, 0.0, 0.0, 1.0]);
        let r = node_from_edge(&EdgePolynomial::regular(6).unwrap());
        assert_abs_diff_eq!(r.slope_at_one(), 6.0, epsilon = 1e-14);
    }

    #[test]
    fn node_form_of_mixed_distribution() {
        // ∫₀¹ (x + x²)/2 = 1/4 + 1/6 = 5/12
        let l = node_from_edge(&poly(&[0.0, 0.5, 0.5]));
        assert_abs_diff_eq!(l.slope_at_one(), 12.0 / 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l.value(0.0), 0.0);
        assert_abs_diff_eq!(l.value(1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn design_rates() {
        let lam = EdgePolynomial::regular(3).unwrap();
        assert_abs_diff_eq!(
            design_rate(&lam, &EdgePolynomial::regular(6).unwrap()).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            design_rate(&lam, &EdgePolynomial::regular(9).unwrap()).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
        let x = EdgePolynomial::regular(2).unwrap();
        assert!(matches!(design_rate(&x, &x), Err(Error::DegenerateRate(_))));
    }

    #[test]
    fn degree_map_uses_node_degrees() {
        let map = BTreeMap::from([(2, 0.3), (3, 0.7)]);
        let lam = EdgePolynomial::from_degree_map(&map).unwrap();
        assert_eq!(lam.coeffs(), &[0.0, 0.3, 0.7]);
        assert!(EdgePolynomial::from_degree_map(&BTreeMap::from([(1, 1.0)])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn edge_strategy() -> impl Strategy<Value = EdgePolynomial> {
            prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("all zero", |raw| {
                let sum: f64 = raw.iter().sum();
                if sum < 1e-3 {
                    return None;
                }
                let mut coeffs = vec![0.0];
                coeffs.extend(raw.iter().map(|c| c / sum));
                // re-normalize exactly so the 1e-12 check is not at the mercy of rounding
                let s: f64 = coeffs.iter().sum();
                let last = coeffs.len() - 1;
                coeffs[last] += 1.0 - s;
                EdgePolynomial::new(coeffs).ok()
            })
        }

        proptest! {
            #[test]
            fn node_derivative_reproduces_edge(lam in edge_strategy()) {
                let node = node_from_edge(&lam);
                prop_assert!((node.value(1.0) - 1.0).abs() <= 1e-12);
                prop_assert_eq!(node.value(0.0), 0.0);
                for k in 0..100 {
                    let x = k as f64 / 99.0;
                    let lhs = node.derivative(x) / node.slope_at_one();
                    prop_assert!((lhs - lam.value(x)).abs() <= 1e-10);
                }
            }

            #[test]
            fn normalized_polynomials_hit_one(lam in edge_strategy()) {
                prop_assert!((lam.eval(1.0).unwrap() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

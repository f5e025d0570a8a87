use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{SystemDefinition, SystemMaps, ZeroParameter};

/// Channel seen by one protograph bit node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeChannel {
    /// `ε_j(ε) = ε`
    #[default]
    Channel,
    /// `ε_j(ε) = θε`, `θ ∈ (0, 1]`
    Scaled(f64),
    /// Never transmitted: `ε_j(ε) = 1`. Such a node keeps erasures at
    /// `ε = 0`, so the system is outside the strict admissible setting.
    Punctured,
}

impl NodeChannel {
    fn erasure(self, eps: f64) -> f64 {
        match self {
            NodeChannel::Channel => eps,
            NodeChannel::Scaled(theta) => theta * eps,
            NodeChannel::Punctured => 1.0,
        }
    }
}

/// Protograph base matrix and per-bit-node channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtographSpec {
    pub base: Vec<Vec<u32>>,
    #[serde(default)]
    pub nodes: Vec<NodeChannel>,
}

impl ProtographSpec {
    pub fn new(base: Vec<Vec<u32>>) -> Self {
        Self {
            base,
            nodes: Vec::new(),
        }
    }
}

/// One nonzero entry of the base matrix: its row, column and multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    row: usize,
    col: usize,
    mult: i32,
}

struct ProtographMaps {
    edges: Vec<Edge>,
    /// edge indices grouped by column
    columns: Vec<Vec<usize>>,
    /// edge indices grouped by row
    rows: Vec<Vec<usize>>,
    nodes: Vec<NodeChannel>,
}

impl SystemMaps for ProtographMaps {
    fn dim(&self) -> usize {
        self.edges.len()
    }

    fn variable_map(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        for (k, edge) in self.edges.iter().enumerate() {
            let prod: f64 = self.columns[edge.col]
                .iter()
                .map(|&i| x[i].powi(self.edges[i].mult - i32::from(i == k)))
                .product();
            out[k] = self.nodes[edge.col].erasure(eps) * prod;
        }
    }

    fn check_map(&self, x: &[f64], out: &mut [f64]) {
        for (k, edge) in self.edges.iter().enumerate() {
            let prod: f64 = self.rows[edge.row]
                .iter()
                .map(|&j| (1.0 - x[j]).powi(self.edges[j].mult - i32::from(j == k)))
                .product();
            out[k] = 1.0 - prod;
        }
    }

    fn variable_potential(&self, x: &[f64], eps: f64) -> f64 {
        self.columns
            .iter()
            .zip(&self.nodes)
            .map(|(col, node)| {
                node.erasure(eps)
                    * col
                        .iter()
                        .map(|&i| x[i].powi(self.edges[i].mult))
                        .product::<f64>()
            })
            .sum()
    }

    fn check_potential(&self, x: &[f64]) -> f64 {
        let linear: f64 = self
            .edges
            .iter()
            .zip(x)
            .map(|(e, v)| f64::from(e.mult) * v)
            .sum();
        let rows: f64 = self
            .rows
            .iter()
            .map(|row| {
                1.0 - row
                    .iter()
                    .map(|&j| (1.0 - x[j]).powi(self.edges[j].mult))
                    .product::<f64>()
            })
            .sum();
        linear - rows
    }
}

/// Builds the per-edge-type recursion of a protograph ensemble on the BEC.
///
/// State component `k` is the erasure probability on the `k`-th nonzero entry
/// of the base matrix (row-major order) and `D = diag(multiplicities)`. The
/// check update raises `(1 - x_j)` to `mult(j) - δ_{jk}`, excluding one copy of
/// the outgoing edge.
pub fn make_protograph(spec: &ProtographSpec) -> Result<SystemDefinition> {
    let m = spec.base.len();
    let n = spec.base.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::InvalidSystem("empty base matrix".into()));
    }
    if spec.base.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSystem("base matrix rows differ in length".into()));
    }
    let nodes = if spec.nodes.is_empty() {
        vec![NodeChannel::Channel; n]
    } else if spec.nodes.len() == n {
        spec.nodes.clone()
    } else {
        return Err(Error::Dimension {
            expected: n,
            got: spec.nodes.len(),
        });
    };
    for node in &nodes {
        if let NodeChannel::Scaled(theta) = node {
            if !(*theta > 0.0 && *theta <= 1.0) {
                return Err(Error::InvalidSystem(format!(
                    "node channel scale {theta} outside (0, 1]"
                )));
            }
        }
    }

    let mut edges = Vec::new();
    for (row, entries) in spec.base.iter().enumerate() {
        for (col, &mult) in entries.iter().enumerate() {
            if mult > 0 {
                let mult = i32::try_from(mult)
                    .map_err(|_| Error::InvalidSystem(format!("multiplicity {mult} too large")))?;
                edges.push(Edge { row, col, mult });
            }
        }
    }
    let mut columns = vec![Vec::new(); n];
    let mut rows = vec![Vec::new(); m];
    for (k, e) in edges.iter().enumerate() {
        columns[e.col].push(k);
        rows[e.row].push(k);
    }
    if let Some(r) = rows.iter().position(Vec::is_empty) {
        return Err(Error::InvalidSystem(format!("row {r} of the base matrix is zero")));
    }
    if let Some(c) = columns.iter().position(Vec::is_empty) {
        return Err(Error::InvalidSystem(format!("column {c} of the base matrix is zero")));
    }

    let scaling = edges.iter().map(|e| f64::from(e.mult)).collect();
    let punctured = nodes.contains(&NodeChannel::Punctured);
    let sys = SystemDefinition::new(
        "protograph",
        Arc::new(ProtographMaps {
            edges,
            columns,
            rows,
            nodes,
        }),
        scaling,
        "eps_j(eps) per bit node",
    )?;
    Ok(if punctured {
        sys.with_zero_parameter(ZeroParameter::Exempt(
            "punctured bit nodes are erased at every epsilon".into(),
        ))
    } else {
        sys
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff::{close_rel, gradient, DERIVATIVE_STEP};
    use crate::VectorState;
    use approx::assert_abs_diff_eq;

    fn regular36() -> SystemDefinition {
        make_protograph(&ProtographSpec::new(vec![vec![3, 3]])).unwrap()
    }

    #[test]
    fn single_row_expansion() {
        // entries share row 0 and sit in columns 0 and 1, both multiplicity 3
        let sys = regular36();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.scaling(), &[3.0, 3.0]);
        let x = [0.3, 0.6];
        let f = sys.variable_map(&x, 0.4);
        assert_abs_diff_eq!(f[0], 0.4 * 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 0.4 * 0.36, epsilon = 1e-15);
        let g = sys.check_map(&x);
        assert_abs_diff_eq!(g[0], 1.0 - 0.7f64.powi(2) * 0.4f64.powi(3), epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0 - 0.7f64.powi(3) * 0.4f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn all_ones_check_update_is_one() {
        let sys = make_protograph(&ProtographSpec::new(vec![vec![1, 2, 1], vec![2, 1, 1]])).unwrap();
        assert!(sys.check_map(&vec![1.0; sys.dim()]).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn step_from_ones() {
        let sys = regular36();
        let y = sys.step(&VectorState::ones(2), 0.5).unwrap();
        assert_eq!(y.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn gradients_match_maps() {
        let sys = make_protograph(&ProtographSpec::new(vec![vec![1, 2, 1], vec![2, 1, 1]])).unwrap();
        let d = sys.scaling().to_vec();
        let x: Vec<f64> = (0..sys.dim()).map(|k| 0.15 + 0.13 * k as f64).collect();
        let fd = gradient(|p| sys.variable_potential(p, 0.7), &x, DERIVATIVE_STEP);
        let gd = gradient(|p| sys.check_potential(p), &x, DERIVATIVE_STEP);
        let f = sys.variable_map(&x, 0.7);
        let g = sys.check_map(&x);
        for k in 0..sys.dim() {
            assert!(close_rel(fd[k], f[k] * d[k], 1e-5), "F' at {k}");
            assert!(close_rel(gd[k], g[k] * d[k], 1e-5), "G' at {k}");
        }
    }

    #[test]
    fn zero_rows_and_columns_are_rejected() {
        assert!(make_protograph(&ProtographSpec::new(vec![vec![3, 0]])).is_err());
        assert!(make_protograph(&ProtographSpec::new(vec![vec![3, 3], vec![0, 0]])).is_err());
        assert!(make_protograph(&ProtographSpec::new(vec![])).is_err());
        assert!(make_protograph(&ProtographSpec::new(vec![vec![3, 3], vec![1]])).is_err());
    }

    #[test]
    fn punctured_nodes_are_flagged() {
        let spec = ProtographSpec {
            base: vec![vec![1, 2, 1], vec![2, 1, 1]],
            nodes: vec![NodeChannel::Punctured, NodeChannel::Channel, NodeChannel::Channel],
        };
        let sys = make_protograph(&spec).unwrap();
        assert!(matches!(sys.zero_parameter(), ZeroParameter::Exempt(_)));
    }
}

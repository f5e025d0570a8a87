use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Map `ε ↦ (ε₁(ε), ε₂(ε))` from the scalar parameter to the two channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelPath {
    /// `ε ↦ (ε, ε)`
    Diagonal,
    /// `ε ↦ (ε, θε)`
    Scaled { theta: f64 },
    /// Piecewise-linear interpolation of `(ε, ε₁, ε₂)` knots.
    Table { points: Vec<[f64; 3]> },
}

impl ChannelPath {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelPath::Diagonal => Ok(()),
            ChannelPath::Scaled { theta } => {
                if (0.0..=1.0).contains(theta) {
                    Ok(())
                } else {
                    Err(Error::InvalidSystem(format!("path scale {theta} outside [0, 1]")))
                }
            }
            ChannelPath::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidSystem("path table needs two knots".into()));
                }
                if points[0] != [0.0, 0.0, 0.0] {
                    return Err(Error::InvalidSystem(
                        "path table must start at (0, 0, 0)".into(),
                    ));
                }
                if points.last().is_none_or(|p| p[0] < 1.0) {
                    return Err(Error::InvalidSystem("path table must reach epsilon = 1".into()));
                }
                for w in points.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if b[0] <= a[0] || b[1] < a[1] || b[2] < a[2] {
                        return Err(Error::InvalidSystem(format!(
                            "path table is not monotone between {a:?} and {b:?}"
                        )));
                    }
                }
                if points
                    .iter()
                    .any(|p| !(0.0..=1.0).contains(&p[1]) || !(0.0..=1.0).contains(&p[2]))
                {
                    return Err(Error::InvalidSystem(
                        "channel erasure rates must lie in [0, 1]".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Channel pair at `eps`. Tables extrapolate linearly past their last knot.
    pub fn eval(&self, eps: f64) -> (f64, f64) {
        match self {
            ChannelPath::Diagonal => (eps, eps),
            ChannelPath::Scaled { theta } => (eps, theta * eps),
            ChannelPath::Table { points } => {
                let seg = points
                    .windows(2)
                    .position(|w| eps <= w[1][0])
                    .unwrap_or(points.len() - 2);
                let (a, b) = (points[seg], points[seg + 1]);
                let t = (eps - a[0]) / (b[0] - a[0]);
                (a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2]))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ChannelPath::Diagonal => "eps -> (eps, eps)".into(),
            ChannelPath::Scaled { theta } => format!("eps -> (eps, {theta}*eps)"),
            ChannelPath::Table { points } => format!("piecewise-linear table, {} knots", points.len()),
        }
    }
}

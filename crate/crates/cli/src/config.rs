//! Run configuration: one JSON document naming a system, the analyses to run
//! on it and where to write results. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use saturate_core::coupled::CoupledOptions;
use saturate_core::systems::{
    make_emac, make_protograph, make_slepian_wolf, ChannelPath, NodeChannel, ProtographSpec,
    SlepianWolfParams,
};
use saturate_core::{EdgePolynomial, Ensemble, SystemDefinition};

use crate::failure::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleConfig {
    Regular {
        variable_degree: usize,
        check_degree: usize,
    },
    /// Edge-perspective coefficients keyed by degree.
    Irregular {
        lambda: BTreeMap<String, f64>,
        rho: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    Diagonal,
    Scaled { theta: f64 },
    Table { points: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeConfig {
    Channel,
    Scaled { factor: f64 },
    Punctured,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    SlepianWolf {
        user1: EnsembleConfig,
        user2: EnsembleConfig,
        gamma: f64,
        p: f64,
        #[serde(default = "diagonal")]
        path: PathConfig,
    },
    Emac {
        user1: EnsembleConfig,
        user2: EnsembleConfig,
    },
    Protograph {
        base: Vec<Vec<u32>>,
        #[serde(default)]
        nodes: Vec<NodeConfig>,
    },
}

fn diagonal() -> PathConfig {
    PathConfig::Diagonal
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub threshold: Option<ThresholdConfig>,
    pub coupled: Option<CoupledConfig>,
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Parameters at which the energy gap is tabulated.
    pub grid: Vec<f64>,
    #[serde(default)]
    pub bisection_tol: Option<f64>,
    /// Slepian-Wolf only: one report per `θ` on the path `ε ↦ (ε, θε)`.
    #[serde(default)]
    pub theta_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledConfig {
    pub half_length: Vec<usize>,
    pub window: Vec<usize>,
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub one_sided: bool,
    /// Also bisect for the coupled BP threshold of each `(L, w)`.
    #[serde(default)]
    pub bp_threshold: bool,
    /// Record every n-th iterate in the profile (the final one is always kept).
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Lattice points per axis for the Hessian bound.
    #[serde(default = "nine")]
    pub hessian_points: usize,
}

fn one() -> usize {
    1
}

fn nine() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default = "sixteen")]
    pub half_length: usize,
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    #[serde(default = "twenty")]
    pub compare_grid: usize,
    /// Parameters for the inequality battery; by default one below the BP
    /// threshold, one between the thresholds and one above the potential
    /// threshold.
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    /// Perturb the variable-node potential so the gradient check must fail.
    #[serde(default)]
    pub corrupt_variable_potential: bool,
}

fn one_u64() -> u64 {
    1
}

fn sixteen() -> usize {
    16
}

fn twenty() -> usize {
    20
}

fn default_windows() -> Vec<usize> {
    vec![1, 3]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A parsed configuration together with the hash of its source bytes.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load(text: &str) -> Result<LoadedConfig, Failure> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Failure::Config(format!("bad config: {e}")))?;
    let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
    Ok(LoadedConfig { config, hash })
}

fn degrees(name: &str, map: &BTreeMap<String, f64>) -> Result<EdgePolynomial, Failure> {
    let parsed = map
        .iter()
        .map(|(k, v)| {
            k.parse::<usize>()
                .map(|d| (d, *v))
                .map_err(|_| Failure::Config(format!("{name} degree {k:?} is not an integer")))
        })
        .collect::<Result<BTreeMap<usize, f64>, Failure>>()?;
    Ok(EdgePolynomial::from_degree_map(&parsed)?)
}

fn ensemble(cfg: &EnsembleConfig) -> Result<Ensemble, Failure> {
    Ok(match cfg {
        EnsembleConfig::Regular {
            variable_degree,
            check_degree,
        } => Ensemble::regular(*variable_degree, *check_degree)?,
        EnsembleConfig::Irregular { lambda, rho } => Ensemble::new(
            degrees("lambda", lambda)?,
            degrees("rho", rho)?,
        ),
    })
}

fn path(cfg: &PathConfig) -> ChannelPath {
    match cfg {
        PathConfig::Diagonal => ChannelPath::Diagonal,
        PathConfig::Scaled { theta } => ChannelPath::Scaled { theta: *theta },
        PathConfig::Table { points } => ChannelPath::Table {
            points: points.clone(),
        },
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemDefinition, Failure> {
        Ok(match self {
            SystemConfig::SlepianWolf {
                user1,
                user2,
                gamma,
                p,
                path: route,
            } => make_slepian_wolf(SlepianWolfParams {
                user1: ensemble(user1)?,
                user2: ensemble(user2)?,
                gamma: *gamma,
                p: *p,
                path: path(route),
            })?,
            SystemConfig::Emac { user1, user2 } => make_emac(ensemble(user1)?, ensemble(user2)?)?,
            SystemConfig::Protograph { base, nodes } => make_protograph(&ProtographSpec {
                base: base.clone(),
                nodes: nodes
                    .iter()
                    .map(|n| match n {
                        NodeConfig::Channel => NodeChannel::Channel,
                        NodeConfig::Scaled { factor } => NodeChannel::Scaled(*factor),
                        NodeConfig::Punctured => NodeChannel::Punctured,
                    })
                    .collect(),
            })?,
        })
    }

    /// The same system with its path replaced by `ε ↦ (ε, θε)`.
    pub fn with_theta(&self, theta: f64) -> Result<SystemConfig, Failure> {
        match self {
            SystemConfig::SlepianWolf {
                user1,
                user2,
                gamma,
                p,
                ..
            } => Ok(SystemConfig::SlepianWolf {
                user1: user1.clone(),
                user2: user2.clone(),
                gamma: *gamma,
                p: *p,
                path: PathConfig::Scaled { theta },
            }),
            _ => Err(Failure::Config("theta_sweep needs a slepian_wolf system".into())),
        }
    }
}

fn check_grid(name: &str, values: &[f64]) -> Result<(), Failure> {
    if values.is_empty() {
        return Err(Failure::Config(format!("{name} is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Failure::Config(format!("{name} value {v} outside [0, 1]")));
    }
    Ok(())
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        check_grid("threshold grid", &self.grid)?;
        if let Some(t) = self.bisection_tol {
            if !(t > 0.0 && t < 0.5) {
                return Err(Failure::Config(format!("bisection_tol {t} outside (0, 0.5)")));
            }
        }
        if let Some(thetas) = &self.theta_sweep {
            check_grid("theta_sweep", thetas)?;
        }
        Ok(())
    }
}

impl CoupledConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        check_grid("coupled epsilon", &self.epsilon)?;
        if self.half_length.is_empty() || self.window.is_empty() {
            return Err(Failure::Config("coupled half_length and window must be nonempty".into()));
        }
        if self.window.contains(&0) {
            return Err(Failure::Config("coupling window must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Failure::Config("record_every must be at least 1".into()));
        }
        if self.hessian_points < 2 {
            return Err(Failure::Config("hessian_points must be at least 2".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Failure::Config(format!("coupled tol {t} must be positive")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(Failure::Config("coupled max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> CoupledOptions {
        let d = CoupledOptions::default();
        CoupledOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.samples == 0 {
            return Err(Failure::Config("verify samples must be at least 1".into()));
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Failure::Config("verify windows must be nonempty and at least 1".into()));
        }
        if self.compare_grid < 2 {
            return Err(Failure::Config("compare_grid must be at least 2".into()));
        }
        if let Some(eps) = &self.epsilon {
            check_grid("verify epsilon", eps)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROTOGRAPH: &str = r#"{"system": {"kind": "protograph", "base": [[3, 3]]}}"#;

    #[test]
    fn minimal_config_parses_and_builds() {
        let cfg = load(PROTOGRAPH).unwrap();
        assert_eq!(cfg.config.system.build().unwrap().dim(), 2);
        assert_eq!(cfg.hash.len(), 64);
        assert_eq!(cfg.config.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"system": {"kind": "protograph", "base": [[3, 3]], "bias": 1}}"#;
        assert!(matches!(load(text), Err(Failure::Config(_))));
        let text = r#"{"system": {"kind": "protograph", "base": [[3, 3]]}, "extra": {}}"#;
        assert!(matches!(load(text), Err(Failure::Config(_))));
        let text = r#"{"system": {"kind": "emac",
            "user1": {"kind": "regular", "variable_degree": 3, "check_degree": 6, "x": 0},
            "user2": {"kind": "regular", "variable_degree": 3, "check_degree": 6}}}"#;
        assert!(matches!(load(text), Err(Failure::Config(_))));
    }

    #[test]
    fn irregular_ensembles_use_degree_keys() {
        let text = r#"{"system": {"kind": "slepian_wolf", "gamma": 0.0, "p": 0.3,
            "user1": {"kind": "irregular", "lambda": {"2": 0.5, "3": 0.5}, "rho": {"6": 1.0}},
            "user2": {"kind": "regular", "variable_degree": 3, "check_degree": 6}}}"#;
        let sys = load(text).unwrap().config.system.build().unwrap();
        assert_eq!(sys.dim(), 2);
    }

    #[test]
    fn construction_errors_are_config_errors() {
        let text = r#"{"system": {"kind": "protograph", "base": [[3, 0], [0, 0]]}}"#;
        let cfg = load(text).unwrap();
        assert!(matches!(cfg.config.system.build(), Err(Failure::Config(_))));
    }

    #[test]
    fn empty_grid_and_zero_window_are_rejected() {
        let t = ThresholdConfig {
            grid: vec![],
            bisection_tol: None,
            theta_sweep: None,
        };
        assert!(t.validate().is_err());
        let c = CoupledConfig {
            half_length: vec![16],
            window: vec![0],
            epsilon: vec![0.4],
            one_sided: false,
            bp_threshold: false,
            record_every: 1,
            tol: None,
            max_iter: None,
            hessian_points: 9,
        };
        assert!(c.validate().is_err());
    }
}

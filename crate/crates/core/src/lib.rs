//! Potential-function analysis of vector density-evolution recursions and
//! their spatially-coupled versions.
//!
//! A [`SystemDefinition`] bundles the maps `f`, `g` and their potentials; the
//! [`systems`] module builds the Slepian-Wolf, erasure-MAC and protograph
//! examples. On top of that sit thresholds and fixed-point enumeration
//! ([`thresholds`], [`fixed_points`]), the coupled recursion ([`coupled`]) and
//! numerical checks of the supporting inequalities ([`verify`], [`inequalities`]).

pub mod coupled;
pub mod error;
pub mod exec;
pub mod fixed_points;
pub mod inequalities;
pub mod numdiff;
pub mod poly;
pub mod potential;
pub mod state;
pub mod system;
pub mod systems;
pub mod thresholds;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use poly::{EdgePolynomial, Ensemble, NodePolynomial, Polynomial};
pub use state::VectorState;
pub use system::{IterationOptions, IterationResult, MonotoneDirection, SystemDefinition, SystemMaps, ZeroParameter};

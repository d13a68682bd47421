//! Local update methods on quadratic models.
//!
//! Clients hold quadratic losses; a local update procedure (FedAvg, Reptile,
//! FOMAML, MAML and proximal variants) is gradient descent on a distorted
//! surrogate loss. The crate computes surrogate minimizers, condition numbers,
//! server convergence rates, distance bounds and the resulting trade-off
//! frontiers between convergence speed and solution quality.

pub mod bounds;
pub mod engine;
pub mod error;
pub mod frontier;
pub mod matrix;
pub mod popfile;
pub mod rng;
pub mod scheme;
pub mod verify;
pub mod world;

pub use engine::{OptimizerKind, RunConfig, RunMode, ServerOptSpec, Trajectory};
pub use error::{Error, Result};
pub use matrix::{EigenDecomposition, Matrix, SpectrumBounds, SymmetricMatrix};
pub use scheme::{SchemeFamily, WeightScheme};
pub use world::{ClientModel, Population, PopulationSpec, QuadraticExample};

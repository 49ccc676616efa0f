//! Energy-preserving full- and reduced-order solvers for multi-symplectic
//! Hamiltonian PDEs on periodic grids.

// Negated comparisons deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avf;
pub mod circulant;
pub mod deim;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fom;
pub mod io;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod pod;
pub mod rom;
pub mod scalar;

pub use error::{Error, Result};
pub use models::{ModelKind, ModelParams, ModelSpec};
pub use operators::{DiffOp, DiffPolynomial, Grid};
pub use rom::Variant;
pub use scalar::Real;

pub type Grid64 = Grid<f64>;
pub type DiffOp64 = DiffOp<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type PodBasis64 = pod::PodBasis<f64>;
pub type DeimOperator64 = deim::DeimOperator<f64>;
pub type AvfConfig64 = avf::AvfConfig<f64>;
pub type Trajectory64 = fom::Trajectory<f64>;
pub type EnergyTrace64 = fom::EnergyTrace<f64>;
pub type CaseConfig64 = experiment::CaseConfig<f64>;

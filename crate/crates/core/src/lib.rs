//! Entropy conserving and entropy stable finite-volume schemes for
//! vector-kinetic (discrete-velocity BGK) relaxations of scalar conservation
//! laws and the shallow water equations.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`.

// NaN-rejecting `!(a > b)` guards and index loops over small fixed arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cases;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fluxes;
pub mod grid;
pub mod integrator;
pub mod kinetic;
pub mod linalg;
pub mod models;
pub mod scalar;

pub use cases::{build_case, CaseConfig, CaseId, ReferenceKind};
pub use diagnostics::{EntropyReport, EocTable, NormWeight};
pub use error::{Error, Result};
pub use fluxes::SchemeKind;
pub use grid::BoundaryKind;
pub use integrator::{run, LambdaPolicy};
pub use models::Model;
pub use scalar::Real;

pub type Grid = grid::Grid<f64>;
pub type Field = grid::Field<f64>;
pub type KineticField = kinetic::KineticField<f64>;
pub type VelocitySet = kinetic::VelocitySet<f64>;
pub type StepConfig = integrator::StepConfig<f64>;
pub type RunState = integrator::RunState<f64>;
pub type RunOutcome = integrator::RunOutcome<f64>;
pub type State = linalg::State<f64>;

//! Numerical toolkit for parametric nonlinear evolution inclusions
//! `−x′ ∈ A_λ(t, x) + F(t, x, λ) + g·u` and the optimal control problems they
//! govern.
//!
//! The numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the command-line
//! front end and the acceptance suite use.

// Validation uses negated comparisons so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod control;
pub mod convex;
pub mod error;
pub mod inclusion;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod pgconv;
pub mod sampling;
pub mod scalar;
pub mod sensitivity;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ConvexBody = convex::ConvexBody<f64>;
pub type SetSequenceLimits = convex::SetSequenceLimits<f64>;
pub type MonotoneOp = operators::MonotoneOp<f64>;
pub type WeightedPLaplacian = operators::WeightedPLaplacian<f64>;
pub type HypothesisConstants = operators::HypothesisConstants<f64>;
pub type TimeFn = operators::TimeFn<f64>;
pub type TimeGrid = inclusion::TimeGrid<f64>;
pub type Trajectory = inclusion::Trajectory<f64>;
pub type MultiMap = inclusion::MultiMap<f64>;
pub type FilippovCertificate = inclusion::FilippovCertificate<f64>;
pub type ControlProblem = control::ControlProblem<f64>;
pub type AdmissiblePair = control::AdmissiblePair<f64>;
pub type OptimalSetSample = control::OptimalSetSample<f64>;
pub type ValueSurface = sensitivity::ValueSurface<f64>;
pub type SequenceReport = sensitivity::SequenceReport<f64>;
pub type CoefficientFamily = pgconv::CoefficientFamily<f64>;
pub type PGReport = pgconv::PGReport<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type ConvexBody = crate::convex::ConvexBody<f32>;
    pub type MonotoneOp = crate::operators::MonotoneOp<f32>;
    pub type TimeGrid = crate::inclusion::TimeGrid<f32>;
    pub type Trajectory = crate::inclusion::Trajectory<f32>;
    pub type MultiMap = crate::inclusion::MultiMap<f32>;
}

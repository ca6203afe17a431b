//! Core library for sharpflow: a spectral Galerkin discretization of a
//! conserved-order-parameter phase-field equation on the unit square with
//! optional singular stochastic forcing, plus the measurement tools used to
//! study its sharp-interface behavior.
//!
//! Module map:
//! - [`spectral`]: cosine eigenbasis, coefficient fields, transforms, snapshots
//! - [`noise`]: forcing families, exact stochastic-convolution stepping,
//!   renormalization constants and Wick powers
//! - [`profile`]: interface geometries, the tanh transition profile and the
//!   limiting free-boundary data
//! - [`solver`]: the time stepper and trajectory recording
//! - [`analysis`]: space-time norms, spectral stability estimates, rate fits,
//!   Monte Carlo aggregation

pub mod analysis;
pub mod error;
pub mod noise;
pub mod profile;
pub mod solver;
pub mod spectral;

pub use analysis::{
    monte_carlo, rate_fit, residual_report, spectral_estimate_check, McOutcome, ResidualReport,
    SweepAxis, SweepPoint, SweepResult,
};
pub use error::{Error, Result};
pub use noise::{NoiseFamily, NoiseSpec, RenormConstant, StochasticConvolution};
pub use profile::{InterfaceGeometry, LambdaFormula, ProfileParams};
pub use solver::{SolverConfig, Stepper, TrajectoryRecord};
pub use spectral::{ModeIndex, SpectralField};

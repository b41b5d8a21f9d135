//! Bayesian emulation of factor-of-safety deterioration curves for cut slopes.
//!
//! Curves are modelled either as a single constrained quadratic or as a
//! two-piece quadratic B-spline. Their log-scale parameters get Gaussian
//! process priors over five static initial conditions, and the hierarchy is
//! fitted by MCMC.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fos_models;
pub mod gp_emulator;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod prediction;
pub mod scalar;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type QuadraticParams = fos_models::QuadraticParams<f64>;
pub type BSplineParams = fos_models::BSplineParams<f64>;
pub type CurveParams = fos_models::CurveParams<f64>;
pub type KnotVector = fos_models::KnotVector<f64>;
pub type InitialConditions = gp_emulator::InitialConditions<f64>;
pub type StandardizationStats = gp_emulator::StandardizationStats<f64>;
pub type EmulatorHyper = gp_emulator::EmulatorHyper<f64>;
pub type Matrix = linalg::Matrix<f64>;

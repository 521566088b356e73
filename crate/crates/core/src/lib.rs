//! Simulation and verification toolkit for long-range-dependent random grain
//! fields with Poisson marginals.

pub mod error;
pub mod model;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    angular_ell, c_phi, covariance_rx, mean_mu, scaling_exponent, sigma_alpha,
    variance_scaling_check, GrainShape, GrainSpec, Point, RegimeKind, ScalingRegime, TestFunction,
};

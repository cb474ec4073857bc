//! Simulation toolkit for signSGD-based federated learning over a fading
//! multiple-access channel.
//!
//! Devices one-bit quantize their mean-centered local gradients, align the
//! sign of their transmissions with the sign of their uplink channel, and
//! transmit simultaneously. The server receives the noisy superposition and
//! estimates the average gradient with the Bayesian over-the-air (BayAirComp)
//! MMSE aggregation function, which uses the Gaussian moments reported by each
//! device together with the channel magnitudes.
//!
//! Modules:
//!
//! - [`gradient_model`]: moment estimation, centering, one-bit quantization.
//! - [`channel`]: COST-231 Hata path loss, Rayleigh block fading, MAC reception.
//! - [`precoding`]: sign-alignment and truncated channel-inversion precoders.
//! - [`aggregation`]: BayAirComp, majority vote, linear baseline and the
//!   quadrature oracle for the posterior mean.
//! - [`fedtrain`]: desk-scale models, data partitioning and the round loop.
//! - [`analysis`]: MSE bound, SNR limits of the gradient-error inner product,
//!   convergence envelope, plus their Monte-Carlo counterparts.
//! - [`experiment`]: config schema, dataset loading and the suite runner used
//!   by the `bayaircomp` binary.

pub mod aggregation;
pub mod analysis;
pub mod channel;
mod error;
pub mod experiment;
pub mod fedtrain;
pub mod gradient_model;
pub mod precoding;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};

/// `sqrt(2/pi)`: the mean of a standard half-normal variable.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

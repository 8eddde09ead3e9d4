//! Two-point correlation functions for real zeros of Gaussian random
//! polynomial ensembles, computed from the Kac-Rice formula.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: Gamma, double factorials, sphere areas.
//! * [`ensembles`]: covariance kernels and the eight pair-covariance entries.
//! * [`kacrice`]: pair covariance assembly, Ω, its spectrum, closed-form densities.
//! * [`mc`]: Monte Carlo estimators for K(t), densities and determinant moments.
//! * [`asymptotics`]: theorem constants, curves, power-law fits.
//! * [`empirical`]: direct root sampling and pair-correlation histograms for n = 1.
//! * [`validate`]: the invariant suites behind `zerocorr validate`.

pub mod asymptotics;
pub mod dense;
pub mod empirical;
pub mod ensembles;
mod error;
pub mod kacrice;
pub mod mc;
pub mod rng;
pub mod scalar;
pub mod specfun;
pub mod validate;

pub use error::{Error, Result};

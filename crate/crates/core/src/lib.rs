//! Simulation and likelihood-based inference for Nicholson's blowfly
//! population dynamics.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. File formats, the command-line front end and all other IO live in
//! the companion `blowfly` crate.
//!
//! Layout:
//!
//! - [`data`]: observation series, initialization window, spline start state
//! - [`model`]: parameters, delay state, keyed RNG streams, the POMP trait
//! - [`blowfly`]: the stochastic delay process, negative binomial
//!   measurement model, deterministic skeletons
//! - [`smc`]: bootstrap particle filter
//! - [`mif`]: iterated filtering
//! - [`arma`]: exact log-ARMA likelihood and fitting
//! - [`criteria`]: NLAR prediction-error criteria, AIC and chi-squared reports
//! - [`lgssm`]: linear-Gaussian test model with an exact Kalman likelihood
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` deliberately also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod arma;
pub mod blowfly;
pub mod criteria;
pub mod data;
mod error;
mod fmath;
pub mod lgssm;
pub mod mif;
pub mod model;
pub mod optim;
pub mod rng;
pub mod smc;
pub mod special;

pub use error::{Error, Result};
pub use model::{BlowflyParams, DelayBuffer, DelayState, FitResult, Pomp, Trajectory};
pub use rng::{Channel, RngStreamKey};

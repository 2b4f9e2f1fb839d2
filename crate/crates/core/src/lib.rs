//! Bayesian recovery of a drift perturbation and constant volatility from
//! binary-option prices.
//!
//! The pipeline is:
//!
//! 1. [`pde`] prices a cash-or-nothing call in log-moneyness with
//!    Crank-Nicolson, giving the forward map `theta -> F(theta)`.
//! 2. [`synthetic`] produces noisy observations from a known truth.
//! 3. [`inference`] samples the flat-prior Gaussian-likelihood posterior with
//!    random-walk Metropolis-Hastings and reports the conditional mean.
//! 4. [`lm`] is the deterministic Levenberg-Marquardt baseline.
//! 5. [`report`] turns results into CSV tables, traces, histograms and drift
//!    curves; [`experiment`] wires everything behind a TOML config.

pub mod error;
pub mod experiment;
pub mod inference;
pub mod lm;
pub mod pde;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
pub use pde::{GridSpec, ModelParams};

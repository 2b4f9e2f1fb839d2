//! Flat-prior Gaussian-likelihood posterior over `(theta1, theta2, theta3,
//! sigma0)` and its exploration by random-walk Metropolis-Hastings.

mod diagnostics;
mod mh;

pub use diagnostics::{conditional_mean, effective_sample_size, posterior_histogram, Histogram};
pub use mh::{mh_step, run_chain, Chain, LogDensity, MhState, SamplerSettings, StepOutcome};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{observe_row, solve_terminal, GridSpec, MarketModel, ModelParams, N_PARAMS};
use crate::synthetic::Observations;

/// Default lower bound on the likelihood scale, as a fraction of RMS(Y).
pub const SIGMA_EPS_FLOOR: f64 = 0.01;

/// Uniform prior support `lower <= theta <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    pub lower: [f64; N_PARAMS],
    pub upper: [f64; N_PARAMS],
}

impl Default for PriorBox {
    fn default() -> Self {
        PriorBox {
            lower: [-10.0, -10.0, -10.0, 0.05],
            upper: [10.0, 10.0, 10.0, 10.0],
        }
    }
}

impl PriorBox {
    pub fn new(lower: [f64; N_PARAMS], upper: [f64; N_PARAMS]) -> Result<Self> {
        let b = PriorBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..N_PARAMS {
            if !(self.lower[k].is_finite()
                && self.upper[k].is_finite()
                && self.lower[k] < self.upper[k])
            {
                return Err(Error::InvalidInput(format!(
                    "prior bounds for coordinate {k} must be finite with lower < upper, got [{}, {}]",
                    self.lower[k], self.upper[k]
                )));
            }
        }
        if self.lower[3] <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sigma0 lower bound must be positive, got {}",
                self.lower[3]
            )));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64; N_PARAMS]) -> bool {
        (0..N_PARAMS).all(|k| self.lower[k] <= theta[k] && theta[k] <= self.upper[k])
    }

    /// Nearest point of the box.
    pub fn clamp(&self, theta: &[f64; N_PARAMS]) -> [f64; N_PARAMS] {
        std::array::from_fn(|k| theta[k].clamp(self.lower[k], self.upper[k]))
    }
}

/// `Sigma_eps = max(relative_level, floor) * RMS(values)`.
pub fn calibrate_sigma_eps(values: &[f64], relative_level: f64, floor: f64) -> f64 {
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64).sqrt();
    relative_level.max(floor) * rms
}

/// Everything needed to evaluate the unnormalized log posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSpec {
    pub data: Observations,
    pub grid: GridSpec,
    pub r: f64,
    pub prior: PriorBox,
    pub sigma_eps: f64,
}

impl PosteriorSpec {
    pub fn new(
        data: Observations,
        grid: GridSpec,
        r: f64,
        prior: PriorBox,
        sigma_eps: f64,
    ) -> Result<Self> {
        grid.validate()?;
        prior.validate()?;
        data.validate(Some(&grid))?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "interest rate must be >= 0, got {r}"
            )));
        }
        if !(sigma_eps > 0.0 && sigma_eps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma_eps must be positive, got {sigma_eps}"
            )));
        }
        Ok(PosteriorSpec {
            data,
            grid,
            r,
            prior,
            sigma_eps,
        })
    }

    /// Builds the posterior with `sigma_eps` from [`calibrate_sigma_eps`].
    pub fn calibrated(
        data: Observations,
        grid: GridSpec,
        r: f64,
        prior: PriorBox,
        floor: f64,
    ) -> Result<Self> {
        let sigma_eps = calibrate_sigma_eps(&data.values, data.relative_level, floor);
        Self::new(data, grid, r, prior, sigma_eps)
    }

    /// `F(theta)` at the measurement points.
    pub fn forward(&self, theta: &[f64; N_PARAMS]) -> Result<Vec<f64>> {
        let params = ModelParams::from_vector(*theta, self.r);
        params.check_solvable()?;
        let row = solve_terminal(&MarketModel::from(&params), &self.grid)?;
        observe_row(&self.grid, &row, &self.data.points)
    }

    /// `||Y - F(theta)||^2`.
    pub fn residual_sq(&self, theta: &[f64; N_PARAMS]) -> Result<f64> {
        let pred = self.forward(theta)?;
        Ok(self
            .data
            .values
            .iter()
            .zip(&pred)
            .map(|(y, f)| (y - f) * (y - f))
            .sum())
    }

    /// `-||Y - F(theta)||^2 / (2 sigma_eps^2)` inside the prior box,
    /// `-inf` outside it or when the forward solve fails.
    pub fn log_posterior(&self, theta: &ModelParams) -> f64 {
        self.log_density(&theta.as_vector())
    }
}

impl LogDensity<N_PARAMS> for PosteriorSpec {
    fn log_density(&self, theta: &[f64; N_PARAMS]) -> f64 {
        if !theta.iter().all(|v| v.is_finite()) || !self.prior.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match self.residual_sq(theta) {
            Ok(rss) if rss.is_finite() => -rss / (2.0 * self.sigma_eps * self.sigma_eps),
            Ok(_) => {
                debug!("non-finite residual at {theta:?}");
                f64::NEG_INFINITY
            }
            Err(e) => {
                debug!("forward solve failed at {theta:?}: {e}");
                f64::NEG_INFINITY
            }
        }
    }
}

/// `log_posterior` as a free function.
pub fn log_posterior(spec: &PosteriorSpec, theta: &ModelParams) -> f64 {
    spec.log_posterior(theta)
}

//! Closed-form cash-or-nothing call price in log-moneyness, valid when the
//! drift equals the risk-free rate.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    initial_condition, solve_forward_with_boundary, DirichletData, GridSpec, MarketModel,
    Perturbation,
};
use crate::error::Result;

/// `U(y, tau) = exp(-r tau) * Phi((-y + (r - sigma0^2 / 2) tau) / (sigma0 sqrt(tau)))`.
///
/// At `tau = 0` the payoff `H(-y)` is returned.
pub fn digital_price(y: f64, tau: f64, sigma0: f64, r: f64) -> f64 {
    if tau <= 0.0 {
        return initial_condition(y);
    }
    let vol = sigma0.abs() * tau.sqrt();
    let d2 = (-y + (r - 0.5 * sigma0 * sigma0) * tau) / vol;
    let std = Normal::standard();
    (-r * tau).exp() * std.cdf(d2)
}

/// Analytic prices at every grid node at `tau_star`.
pub fn digital_price_curve(grid: &GridSpec, sigma0: f64, r: f64) -> Vec<f64> {
    grid.nodes()
        .into_iter()
        .map(|y| digital_price(y, grid.tau_star, sigma0, r))
        .collect()
}

/// Max-norm gap on `|y| <= window` between the Crank-Nicolson solution for a
/// flat drift and [`digital_price`] at `tau_star`.
///
/// With `exact_boundary` the Dirichlet data are the closed-form prices at
/// `y_min` / `y_max`, which leaves only the discretization error.
pub fn oracle_error(
    grid: &GridSpec,
    sigma0: f64,
    r: f64,
    window: f64,
    exact_boundary: bool,
) -> Result<f64> {
    let model = MarketModel {
        perturbation: Perturbation::Cubic([0.0; 3]),
        sigma0,
        r,
    };
    let exact = |tau: f64| {
        (
            digital_price(grid.y_min, tau, sigma0, r),
            digital_price(grid.y_max, tau, sigma0, r),
        )
    };
    let boundary: &dyn DirichletData = if exact_boundary {
        &exact
    } else {
        &grid.boundary
    };
    let sol = solve_forward_with_boundary(&model, grid, boundary)?;
    Ok(grid
        .nodes()
        .into_iter()
        .zip(sol.terminal())
        .filter(|(y, _)| y.abs() <= window)
        .map(|(y, u)| (u - digital_price(y, grid.tau_star, sigma0, r)).abs())
        .fold(0.0, f64::max))
}

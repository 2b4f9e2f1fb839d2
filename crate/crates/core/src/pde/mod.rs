//! Forward pricing of a binary (cash-or-nothing) call in log-moneyness.
//!
//! With `y = log(K/x)` and time to maturity `tau`, the price `U(y, tau)`
//! solves
//!
//! ```text
//! U_tau = (sigma0^2 / 2) U_yy + (sigma0^2 / 2 - mu(y)) U_y - r U,   U(y, 0) = H(-y)
//! ```
//!
//! where the drift is `mu(y) = r + f(y)` with `f(0) = 0`. The equation is
//! integrated with Crank-Nicolson on a uniform grid with Dirichlet values
//! at both ends of the truncated domain (see [`BoundaryCondition`]).

mod analytic;
mod scheme;
mod tridiag;

pub use analytic::{digital_price, digital_price_curve, oracle_error};
pub use scheme::{
    assemble_cn, assemble_cn_with_boundaries, CnCoefficients, CnStepper, TridiagonalSystem,
};
pub use tridiag::{ThomasFactors, Tridiagonal, PIVOT_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unknowns recovered by inference: `(theta1, theta2, theta3, sigma0)`.
pub const N_PARAMS: usize = 4;

/// Coordinate names in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["theta1", "theta2", "theta3", "sigma0"];

/// Cubic drift perturbation plus constant volatility, with the risk-free rate
/// carried along as a fixed market constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub sigma0: f64,
    pub r: f64,
}

impl ModelParams {
    /// Builds parameters, enforcing `sigma0 > 0`, `r >= 0` and finiteness.
    pub fn new(theta: [f64; 3], sigma0: f64, r: f64) -> Result<Self> {
        let p = ModelParams {
            theta1: theta[0],
            theta2: theta[1],
            theta3: theta[2],
            sigma0,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.check_solvable()?;
        if self.sigma0 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        Ok(())
    }

    /// The weaker condition the forward solver needs. The equation only
    /// involves `sigma0^2`, so a non-positive `sigma0` still prices; this lets
    /// unconstrained optimizers wander through it.
    pub fn check_solvable(&self) -> Result<()> {
        if !self
            .as_vector()
            .iter()
            .chain([&self.r])
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "non-finite entry in {self:?}"
            )));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidParams(format!(
                "interest rate must be non-negative, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// `(theta1, theta2, theta3, sigma0)`.
    pub fn as_vector(&self) -> [f64; N_PARAMS] {
        [self.theta1, self.theta2, self.theta3, self.sigma0]
    }

    pub fn from_vector(v: [f64; N_PARAMS], r: f64) -> Self {
        ModelParams {
            theta1: v[0],
            theta2: v[1],
            theta3: v[2],
            sigma0: v[3],
            r,
        }
    }

    /// `f(y) = theta1 y + theta2 y^2 + theta3 y^3`.
    pub fn perturbation(&self, y: f64) -> f64 {
        y * (self.theta1 + y * (self.theta2 + y * self.theta3))
    }

    /// `mu(y) = r + f(y)`.
    pub fn drift(&self, y: f64) -> f64 {
        self.r + self.perturbation(y)
    }
}

/// Drift value `mu(y) = r + theta1 y + theta2 y^2 + theta3 y^3`.
pub fn drift_eval(params: &ModelParams, y: f64) -> f64 {
    params.drift(y)
}

/// Shape of the drift perturbation `f(y)`.
///
/// The inference model is always cubic; `Sine` exists so synthetic data can
/// come from a function outside that family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    Cubic([f64; 3]),
    Sine,
}

impl Perturbation {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Perturbation::Cubic([t1, t2, t3]) => y * (t1 + y * (t2 + y * t3)),
            Perturbation::Sine => y.sin(),
        }
    }
}

/// Everything the forward solver needs: drift shape, volatility and rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    pub perturbation: Perturbation,
    pub sigma0: f64,
    pub r: f64,
}

impl MarketModel {
    pub fn drift(&self, y: f64) -> f64 {
        self.r + self.perturbation.eval(y)
    }

    fn check(&self) -> Result<()> {
        let coeffs_finite = match self.perturbation {
            Perturbation::Cubic(t) => t.iter().all(|v| v.is_finite()),
            Perturbation::Sine => true,
        };
        if !(coeffs_finite && self.sigma0.is_finite() && self.r.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite entry in {self:?}"
            )));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidParams(format!(
                "interest rate must be non-negative, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

impl From<&ModelParams> for MarketModel {
    fn from(p: &ModelParams) -> Self {
        MarketModel {
            perturbation: Perturbation::Cubic([p.theta1, p.theta2, p.theta3]),
            sigma0: p.sigma0,
            r: p.r,
        }
    }
}

/// Dirichlet data imposed at `y_min` (deep in the money) and `y_max`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `U(y_min) = exp(-r tau)`, `U(y_max) = 0`: the discounted unit payoff.
    #[default]
    Discounted,
    /// `U(y_min) = 1`, `U(y_max) = 0` at every level. Identical to
    /// `Discounted` when `r = 0`.
    Unit,
}

/// Boundary values as a function of `tau`, returned as `(left, right)`.
pub trait DirichletData {
    fn values(&self, tau: f64, r: f64) -> (f64, f64);
}

impl DirichletData for BoundaryCondition {
    fn values(&self, tau: f64, r: f64) -> (f64, f64) {
        match self {
            BoundaryCondition::Discounted => ((-r * tau).exp(), 0.0),
            BoundaryCondition::Unit => (1.0, 0.0),
        }
    }
}

impl<F: Fn(f64) -> (f64, f64)> DirichletData for F {
    fn values(&self, tau: f64, _r: f64) -> (f64, f64) {
        self(tau)
    }
}

/// Uniform `(y, tau)` lattice. `n_y` counts both boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub n_tau: usize,
    pub tau_star: f64,
    #[serde(default)]
    pub boundary: BoundaryCondition,
}

impl Default for GridSpec {
    /// `y` in `[-1.5, 1.5]` with 100 nodes (`dy = 1/33`), 400 steps of
    /// `dtau = 0.001`.
    fn default() -> Self {
        GridSpec {
            y_min: -1.5,
            y_max: 1.5,
            n_y: 100,
            n_tau: 400,
            tau_star: 0.4,
            boundary: BoundaryCondition::Discounted,
        }
    }
}

impl GridSpec {
    pub fn new(y_min: f64, y_max: f64, n_y: usize, n_tau: usize, tau_star: f64) -> Result<Self> {
        let g = GridSpec {
            y_min,
            y_max,
            n_y,
            n_tau,
            tau_star,
            boundary: BoundaryCondition::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().first() {
            None => Ok(()),
            Some((field, msg)) => Err(Error::InvalidGrid(format!("{field}: {msg}"))),
        }
    }

    /// Every violated constraint as `(field, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (field, v) in [("y_min", self.y_min), ("y_max", self.y_max)] {
            if !v.is_finite() {
                out.push((field, format!("must be finite, got {v}")));
            }
        }
        if !(self.y_min < 0.0) {
            out.push(("y_min", format!("must be negative, got {}", self.y_min)));
        }
        if !(self.y_max > 0.0) {
            out.push(("y_max", format!("must be positive, got {}", self.y_max)));
        }
        if self.n_y < 3 {
            out.push(("n_y", format!("must be >= 3, got {}", self.n_y)));
        }
        if self.n_tau < 1 {
            out.push(("n_tau", "must be >= 1".into()));
        }
        if !(self.tau_star > 0.0 && self.tau_star.is_finite()) {
            out.push((
                "tau_star",
                format!("must be positive, got {}", self.tau_star),
            ));
        }
        out
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    pub fn dtau(&self) -> f64 {
        self.tau_star / self.n_tau as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_y {
            self.y_max
        } else {
            self.y_min + i as f64 * self.dy()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_y).map(|i| self.node(i)).collect()
    }

    /// The `n_y - 2` nodes strictly between the boundaries.
    pub fn interior_nodes(&self) -> Vec<f64> {
        (1..self.n_y - 1).map(|i| self.node(i)).collect()
    }

    /// Halves `dy` and quarters `dtau` over the same domain and horizon.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n_y: 2 * (self.n_y - 1) + 1,
            n_tau: 4 * self.n_tau,
            ..*self
        }
    }
}

/// Initial payoff `H(-y)`. A node sitting exactly at the money takes the
/// midpoint value 1/2; with a one-sided value the discontinuity is
/// effectively displaced by `dy / 2` and the scheme drops to first order.
pub fn initial_condition(y: f64) -> f64 {
    if y < 0.0 {
        1.0
    } else if y > 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Full price surface. `values[j][i]` is `U(y_i, tau_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
    pub params: MarketModel,
}

impl PdeSolution {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j][i]
    }

    /// Prices at `tau_star`, one per node.
    pub fn terminal(&self) -> &[f64] {
        self.values
            .last()
            .expect("solution has at least one time level")
    }
}

/// Crank-Nicolson solve of the cubic-drift model, keeping every time level.
pub fn solve_forward(params: &ModelParams, grid: &GridSpec) -> Result<PdeSolution> {
    params.check_solvable()?;
    solve_forward_model(&MarketModel::from(params), grid)
}

/// Same as [`solve_forward`] for an arbitrary drift shape.
pub fn solve_forward_model(model: &MarketModel, grid: &GridSpec) -> Result<PdeSolution> {
    solve_forward_with_boundary(model, grid, &grid.boundary)
}

/// Full surface with caller-supplied Dirichlet data, e.g. exact values in a
/// convergence study.
pub fn solve_forward_with_boundary(
    model: &MarketModel,
    grid: &GridSpec,
    boundary: &dyn DirichletData,
) -> Result<PdeSolution> {
    let mut values = Vec::with_capacity(grid.n_tau + 1);
    march(model, grid, boundary, |row| values.push(row.to_vec()))?;
    Ok(PdeSolution {
        grid: *grid,
        values,
        params: *model,
    })
}

/// Prices at `tau_star` only; the hot path for likelihood evaluation.
pub fn solve_terminal(model: &MarketModel, grid: &GridSpec) -> Result<Vec<f64>> {
    let mut last = Vec::new();
    march(model, grid, &grid.boundary, |row| {
        last.clear();
        last.extend_from_slice(row);
    })?;
    Ok(last)
}

/// Steps from `tau = 0` to `tau_star`, handing each full row (boundaries
/// included) to `visit`.
fn march(
    model: &MarketModel,
    grid: &GridSpec,
    boundary: &dyn DirichletData,
    mut visit: impl FnMut(&[f64]),
) -> Result<()> {
    model.check()?;
    grid.validate()?;
    let (_, system) = scheme::assemble_model(model, grid, 0.0, 0.0)?;
    let stepper = system.stepper().map_err(|e| Error::StepFailed {
        time_index: 1,
        source: Box::new(e),
    })?;

    let n = grid.n_y;
    let dtau = grid.dtau();
    let mut row: Vec<f64> = grid.nodes().into_iter().map(initial_condition).collect();
    visit(&row);

    // The payoff row is exact; from here on the interior sees the Dirichlet
    // data of both levels.
    let mut now = boundary.values(0.0, model.r);
    let mut scratch = vec![0.0; n - 2];
    for j in 1..=grid.n_tau {
        let next = boundary.values(j as f64 * dtau, model.r);
        stepper
            .advance_with(&mut row[1..n - 1], &mut scratch, now, next)
            .map_err(|e| Error::StepFailed {
                time_index: j,
                source: Box::new(e),
            })?;
        row[0] = next.0;
        row[n - 1] = next.1;
        visit(&row);
        now = next;
    }
    Ok(())
}

/// Reads `U(., tau_star)` at the requested points; on-node points are exact,
/// others linearly interpolated.
pub fn observe(solution: &PdeSolution, points: &[f64]) -> Result<Vec<f64>> {
    observe_row(&solution.grid, solution.terminal(), points)
}

/// [`observe`] on a bare row of nodal values.
pub fn observe_row(grid: &GridSpec, row: &[f64], points: &[f64]) -> Result<Vec<f64>> {
    if row.len() != grid.n_y {
        return Err(Error::DimensionMismatch {
            expected: grid.n_y,
            got: row.len(),
        });
    }
    let dy = grid.dy();
    points
        .iter()
        .map(|&y| {
            if !(grid.y_min..=grid.y_max).contains(&y) {
                return Err(Error::PointOutOfRange {
                    point: y,
                    y_min: grid.y_min,
                    y_max: grid.y_max,
                });
            }
            let s = (y - grid.y_min) / dy;
            let nearest = s.round();
            if (s - nearest).abs() < 1e-9 {
                return Ok(row[(nearest as usize).min(grid.n_y - 1)]);
            }
            let left = (s.floor() as usize).min(grid.n_y - 2);
            let w = s - left as f64;
            Ok((1.0 - w) * row[left] + w * row[left + 1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(theta: [f64; 3], sigma0: f64, r: f64) -> ModelParams {
        ModelParams::new(theta, sigma0, r).unwrap()
    }

    #[test]
    fn drift_examples() {
        assert_eq!(drift_eval(&p([1.0, 0.0, 0.0], 1.0, 0.0), 0.0), 0.0);
        assert!((drift_eval(&p([1.0, 0.0, 0.0], 1.0, 0.05), 0.5) - 0.55).abs() < 1e-15);
        let sin_taylor = p([1.0, 0.0, -1.0 / 6.0], 1.0, 0.0);
        assert!((drift_eval(&sin_taylor, 0.2) - (0.2 - 0.008 / 6.0)).abs() < 1e-15);
        assert!((drift_eval(&sin_taylor, 0.2) - 0.198667).abs() < 1e-6);
    }

    #[test]
    fn params_invariants() {
        assert!(ModelParams::new([0.0; 3], 0.0, 0.0).is_err());
        assert!(ModelParams::new([0.0; 3], 1.0, -0.1).is_err());
        assert!(ModelParams::new([f64::NAN, 0.0, 0.0], 1.0, 0.0).is_err());
        let degenerate = ModelParams::from_vector([0.0; 4], 0.05);
        assert!(degenerate.check_solvable().is_ok());
        assert!(degenerate.validate().is_err());
    }

    #[test]
    fn default_grid_layout() {
        let g = GridSpec::default();
        assert!((g.dy() - 1.0 / 33.0).abs() < 1e-15);
        assert!((g.dtau() - 0.001).abs() < 1e-15);
        assert_eq!(g.interior_nodes().len(), 98);
        assert_eq!(g.node(99), 1.5);
        // no node at the money on the default grid
        assert!(g.nodes().iter().all(|&y| y != 0.0));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 1.0, 10, 10, 0.1).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 2, 10, 0.1).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 3, 0, 0.1).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 3, 1, 0.0).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 3, 1, 0.1).is_ok());
    }

    #[test]
    fn initial_condition_tie_break() {
        assert_eq!(initial_condition(-1e-12), 1.0);
        assert_eq!(initial_condition(0.0), 0.5);
        assert_eq!(initial_condition(1e-12), 0.0);
    }

    #[test]
    fn surface_has_exact_initial_row_and_pinned_boundaries() {
        let g = GridSpec::default();
        let sol = solve_forward(&p([1.0, 0.0, 0.0], 1.0, 0.05), &g).unwrap();
        assert_eq!(sol.values.len(), g.n_tau + 1);
        for (i, y) in g.nodes().into_iter().enumerate() {
            assert_eq!(sol.value(i, 0), initial_condition(y));
        }
        for (j, row) in sol.values.iter().enumerate().skip(1) {
            assert_eq!(row[0], (-0.05 * j as f64 * g.dtau()).exp());
            assert_eq!(row[g.n_y - 1], 0.0);
            assert!(row.iter().all(|v| (-0.05..=1.05).contains(v)));
        }
    }

    #[test]
    fn short_horizon_reproduces_payoff_away_from_the_money() {
        let g = GridSpec::new(-1.5, 1.5, 100, 1, 1e-12).unwrap();
        let sol = solve_forward(&p([1.0, 0.0, 0.0], 1.0, 0.05), &g).unwrap();
        for (i, y) in g.nodes().into_iter().enumerate() {
            if y.abs() > 0.1 {
                assert!((sol.terminal()[i] - initial_condition(y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn terminal_fast_path_agrees_with_full_surface() {
        let g = GridSpec::default();
        let params = p([0.3, -0.2, 0.1], 0.8, 0.02);
        let full = solve_forward(&params, &g).unwrap();
        let last = solve_terminal(&MarketModel::from(&params), &g).unwrap();
        assert_eq!(full.terminal(), &last[..]);
    }

    #[test]
    fn observe_boundaries_and_interpolation() {
        let g = GridSpec::new(-1.0, 1.0, 5, 1, 0.1).unwrap();
        let row = [1.0, 0.8, 0.6, 0.4, 0.0];
        let got = observe_row(&g, &row, &[-1.0, 1.0, 0.25, 0.0]).unwrap();
        assert_eq!(got[0], 1.0);
        assert_eq!(got[1], 0.0);
        assert!((got[2] - 0.5).abs() < 1e-15);
        assert_eq!(got[3], 0.6);
        assert!(matches!(
            observe_row(&g, &row, &[1.0001]),
            Err(Error::PointOutOfRange { .. })
        ));
    }

    #[test]
    fn observe_reads_solution_boundaries() {
        let g = GridSpec::default();
        let sol = solve_forward(&p([1.0, 0.0, 0.0], 1.0, 0.05), &g).unwrap();
        let v = observe(&sol, &[g.y_min, g.y_max]).unwrap();
        assert_eq!(v, vec![(-0.05f64 * 0.4).exp(), 0.0]);

        let unit = GridSpec {
            boundary: BoundaryCondition::Unit,
            ..g
        };
        let sol = solve_forward(&p([1.0, 0.0, 0.0], 1.0, 0.05), &unit).unwrap();
        assert_eq!(
            observe(&sol, &[unit.y_min, unit.y_max]).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn solve_is_deterministic() {
        let g = GridSpec::default();
        let params = p([1.0, 0.5, -0.3], 1.2, 0.05);
        let a = solve_forward(&params, &g).unwrap();
        let b = solve_forward(&params, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_volatility_still_solves() {
        let g = GridSpec::default();
        let out = solve_forward(&ModelParams::from_vector([0.0; 4], 0.05), &g).unwrap();
        assert!(out.terminal().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn negative_rate_rejected() {
        let bad = ModelParams::from_vector([0.0, 0.0, 0.0, 1.0], -0.01);
        assert!(solve_forward(&bad, &GridSpec::default()).is_err());
    }
}

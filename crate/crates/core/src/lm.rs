//! Levenberg-Marquardt least squares, the deterministic baseline.
//!
//! Each iteration solves `(J^T J + lambda I) delta = J^T (Y - F(theta))` with
//! a central-difference Jacobian. A step that lowers `||Y - F||` is taken and
//! `lambda` shrinks; otherwise `lambda` grows and the step is recomputed with
//! the same Jacobian. No bounds are applied unless asked for.

use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{PosteriorSpec, PriorBox};
use crate::pde::{N_PARAMS, PARAM_NAMES};

/// Damping beyond which the iteration is declared stalled.
const LAMBDA_MAX: f64 = 1e16;
/// Replacement for a zero damping when the undamped system is singular.
const LAMBDA_FLOOR: f64 = 1e-12;

/// A residual model `theta -> F(theta)` with fixed observations `Y`.
pub trait LeastSquaresProblem: Sync {
    fn observed(&self) -> &[f64];

    fn predict(&self, theta: &[f64; N_PARAMS]) -> Result<Vec<f64>>;

    /// Coordinates whose finite-difference probes must stay positive.
    fn positive_coordinates(&self) -> [bool; N_PARAMS] {
        [false; N_PARAMS]
    }

    /// Box used when [`LmSettings::project_to_box`] is set.
    fn bounds(&self) -> Option<PriorBox> {
        None
    }
}

impl LeastSquaresProblem for PosteriorSpec {
    fn observed(&self) -> &[f64] {
        &self.data.values
    }

    fn predict(&self, theta: &[f64; N_PARAMS]) -> Result<Vec<f64>> {
        self.forward(theta)
    }

    fn positive_coordinates(&self) -> [bool; N_PARAMS] {
        [false, false, false, true]
    }

    fn bounds(&self) -> Option<PriorBox> {
        Some(self.prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    pub tol_step: f64,
    pub tol_grad: f64,
    pub fd_step: f64,
    /// Clamp every iterate into the problem's bounds.
    pub project_to_box: bool,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_iters: 200,
            tol_step: 1e-8,
            tol_grad: 1e-8,
            fd_step: 1e-5,
            project_to_box: false,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        let errs: Vec<String> = self
            .problems()
            .into_iter()
            .map(|(f, m)| format!("{f}: {m}"))
            .collect();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(errs.join("; ")))
        }
    }

    /// Every violated constraint as `(field, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            out.push(("lambda0", format!("must be >= 0, got {}", self.lambda0)));
        }
        if !(self.lambda_up > 1.0 && self.lambda_up.is_finite()) {
            out.push(("lambda_up", format!("must be > 1, got {}", self.lambda_up)));
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            out.push((
                "lambda_down",
                format!("must lie in (0, 1), got {}", self.lambda_down),
            ));
        }
        for (name, v) in [
            ("tol_step", self.tol_step),
            ("tol_grad", self.tol_grad),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name, format!("must be positive, got {v}")));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `||delta|| <= tol_step * (||theta|| + tol_step)`.
    StepTolerance,
    /// `max |J^T r| <= tol_grad`.
    GradientTolerance,
    MaxIterations,
    /// No damping up to `1e16` produced a decrease.
    Stalled,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::StepTolerance | Termination::GradientTolerance
        )
    }
}

/// One accepted iterate (iteration 0 is the starting point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmIterate {
    pub iter: usize,
    pub theta: [f64; N_PARAMS],
    pub residual: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub theta_final: [f64; N_PARAMS],
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub history: Vec<LmIterate>,
}

impl LmResult {
    /// `||Y - F(theta)||` after each accepted step, starting point first.
    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.residual).collect()
    }

    /// `iter,theta1,theta2,theta3,sigma0,residual,lambda`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iter"];
        header.extend(PARAM_NAMES);
        header.extend(["residual", "lambda"]);
        w.write_record(&header)?;
        for h in &self.history {
            let mut rec = vec![h.iter.to_string()];
            rec.extend(h.theta.iter().map(|v| v.to_string()));
            rec.push(h.residual.to_string());
            rec.push(h.lambda.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn residuals<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    theta: &[f64; N_PARAMS],
) -> Result<Vec<f64>> {
    let pred = problem.predict(theta)?;
    let obs = problem.observed();
    if pred.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: pred.len(),
        });
    }
    Ok(obs.iter().zip(&pred).map(|(y, f)| y - f).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `m x 4` finite-difference sensitivity `dF/dtheta`, stored column-major as
/// four columns.
///
/// Column `p` uses `h = fd_step * max(1, |theta_p|)` and central differences,
/// except on positive coordinates where `theta_p - h <= 0`; those use a
/// forward difference so every probe stays on the positive side.
pub fn jacobian_fd<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    theta: &[f64; N_PARAMS],
    fd_step: f64,
) -> Result<[Vec<f64>; N_PARAMS]> {
    let positive = problem.positive_coordinates();
    let cols: Vec<Result<Vec<f64>>> = (0..N_PARAMS)
        .into_par_iter()
        .map(|p| {
            let h = fd_step * theta[p].abs().max(1.0);
            let mut plus = *theta;
            plus[p] += h;
            let f_plus = problem.predict(&plus)?;
            if positive[p] && theta[p] - h <= 0.0 {
                let f0 = problem.predict(theta)?;
                Ok(f_plus.iter().zip(&f0).map(|(a, b)| (a - b) / h).collect())
            } else {
                let mut minus = *theta;
                minus[p] -= h;
                let f_minus = problem.predict(&minus)?;
                Ok(f_plus
                    .iter()
                    .zip(&f_minus)
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect())
            }
        })
        .collect();
    let mut out: [Vec<f64>; N_PARAMS] = Default::default();
    for (p, col) in cols.into_iter().enumerate() {
        out[p] = col.map_err(|e| Error::JacobianColumn {
            column: p,
            source: Box::new(e),
        })?;
    }
    Ok(out)
}

/// `J^T J` and `J^T r` for a column-stored Jacobian.
pub fn normal_equations(jac: &[Vec<f64>; N_PARAMS], r: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let jtj = Matrix4::from_fn(|a, b| jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum());
    let jtr = Vector4::from_fn(|a, _| jac[a].iter().zip(r).map(|(x, y)| x * y).sum());
    (jtj, jtr)
}

/// Solves `(J^T J + lambda I) delta = J^T r`; `None` when singular.
pub fn lm_step(jtj: &Matrix4<f64>, jtr: &Vector4<f64>, lambda: f64) -> Option<Vector4<f64>> {
    let damped = jtj + Matrix4::identity() * lambda;
    damped
        .cholesky()
        .map(|c| c.solve(jtr))
        .or_else(|| damped.lu().solve(jtr))
        .filter(|d| d.iter().all(|v| v.is_finite()))
}

pub fn lm_solve<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    init: [f64; N_PARAMS],
    settings: &LmSettings,
) -> Result<LmResult> {
    settings.validate()?;
    if !init.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite initial guess {init:?}"
        )));
    }
    let bounds = if settings.project_to_box {
        problem.bounds()
    } else {
        None
    };
    let project = |t: [f64; N_PARAMS]| bounds.map_or(t, |b| b.clamp(&t));

    let mut theta = project(init);
    let mut r = residuals(problem, &theta)?;
    let mut rnorm = norm(&r);
    let mut lambda = settings.lambda0;
    let mut history = vec![LmIterate {
        iter: 0,
        theta,
        residual: rnorm,
        lambda,
    }];

    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    'outer: while iterations < settings.max_iters {
        let jac = jacobian_fd(problem, &theta, settings.fd_step)?;
        let (jtj, jtr) = normal_equations(&jac, &r);
        if jtr.amax() <= settings.tol_grad {
            termination = Termination::GradientTolerance;
            break;
        }

        loop {
            let Some(delta) = lm_step(&jtj, &jtr, lambda) else {
                lambda = (lambda * settings.lambda_up).max(LAMBDA_FLOOR);
                if lambda > LAMBDA_MAX {
                    termination = Termination::Stalled;
                    break 'outer;
                }
                continue;
            };
            let trial = project(std::array::from_fn(|k| theta[k] + delta[k]));
            let step_norm = norm(&std::array::from_fn::<f64, N_PARAMS, _>(|k| {
                trial[k] - theta[k]
            }));
            // A failed forward solve counts as an uphill step.
            let trial_r = residuals(problem, &trial).ok();
            let trial_norm = trial_r.as_deref().map_or(f64::INFINITY, norm);

            if trial_norm < rnorm {
                theta = trial;
                r = trial_r.expect("finite norm implies residuals");
                rnorm = trial_norm;
                lambda *= settings.lambda_down;
                iterations += 1;
                history.push(LmIterate {
                    iter: iterations,
                    theta,
                    residual: rnorm,
                    lambda,
                });
                if step_norm <= settings.tol_step * (norm(&theta) + settings.tol_step) {
                    termination = Termination::StepTolerance;
                    break 'outer;
                }
                break;
            }
            if step_norm <= settings.tol_step * (norm(&theta) + settings.tol_step) {
                termination = Termination::StepTolerance;
                break 'outer;
            }
            lambda = (lambda * settings.lambda_up).max(LAMBDA_FLOOR);
            if lambda > LAMBDA_MAX {
                termination = Termination::Stalled;
                break 'outer;
            }
        }
    }

    Ok(LmResult {
        theta_final: theta,
        iterations,
        converged: termination.converged(),
        termination,
        history,
    })
}

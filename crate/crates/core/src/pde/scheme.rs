//! Crank-Nicolson assembly for the log-moneyness pricing equation.
//!
//! Central differences in `y` and equal time weighting give, at interior
//! node `i` with `v_i = sigma0^2 / 2 - mu(y_i)`,
//!
//! ```text
//! a_i = -dtau / (4 dy^2) * (sigma0^2 + dy v_i)      multiplies U_{i+1}
//! c_i = -dtau / (4 dy^2) * (sigma0^2 - dy v_i)      multiplies U_{i-1}
//! b   =  dtau / (2 dy^2) * sigma0^2
//! ```
//!
//! and the update `A u^{n+1} = B u^n + e` with
//! `A = tridiag(c_i, 1 + b, a_i)`, `B = tridiag(-c_i, 1 - b - r dtau, -a_i)`.
//! The discount term is taken fully explicitly. `e` carries the Dirichlet
//! values from both time levels into the first and last interior rows:
//! `e_first = -c_first (L^n + L^{n+1})`, `e_last = -a_last (R^n + R^{n+1})`.

use log::warn;

use super::tridiag::{ThomasFactors, Tridiagonal};
use super::{GridSpec, MarketModel, ModelParams};
use crate::error::{Error, Result};

/// Per-node scheme coefficients, indexed over interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CnCoefficients {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: Vec<f64>,
}

/// The two operators of one Crank-Nicolson step plus the boundary forcing.
///
/// `boundary_vector` is the forcing for the constant Dirichlet values the
/// system was assembled with. Time-dependent boundaries go through
/// [`CnStepper::advance_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub matrix_a: Tridiagonal,
    pub matrix_b: Tridiagonal,
    pub boundary_vector: Vec<f64>,
    /// `-c` of the first interior row.
    pub left_coupling: f64,
    /// `-a` of the last interior row.
    pub right_coupling: f64,
}

impl TridiagonalSystem {
    pub fn dim(&self) -> usize {
        self.boundary_vector.len()
    }

    /// One step: solves `A u_next = B u_now + e` with the Thomas algorithm.
    pub fn step(&self, u_now: &[f64]) -> Result<Vec<f64>> {
        let mut u = u_now.to_vec();
        let mut scratch = vec![0.0; self.dim()];
        self.stepper()?.advance(&mut u, &mut scratch)?;
        Ok(u)
    }

    /// Factors `A` once for repeated stepping.
    pub fn stepper(&self) -> Result<CnStepper<'_>> {
        Ok(CnStepper {
            system: self,
            factors: self.matrix_a.factor()?,
        })
    }
}

/// A [`TridiagonalSystem`] with `A` already factored.
#[derive(Debug, Clone)]
pub struct CnStepper<'a> {
    system: &'a TridiagonalSystem,
    factors: ThomasFactors,
}

impl CnStepper<'_> {
    /// Replaces `u` (interior values) by the next time level using the
    /// assembled constant boundary forcing.
    pub fn advance(&self, u: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.check_dims(u, scratch)?;
        self.system.matrix_b.mul_vec_into(u, scratch);
        for (s, e) in scratch.iter_mut().zip(&self.system.boundary_vector) {
            *s += e;
        }
        self.finish(u, scratch)
    }

    /// Like [`advance`](Self::advance) with boundary values that change
    /// between the current (`now`) and next level, given as `(left, right)`.
    pub fn advance_with(
        &self,
        u: &mut [f64],
        scratch: &mut [f64],
        now: (f64, f64),
        next: (f64, f64),
    ) -> Result<()> {
        self.check_dims(u, scratch)?;
        self.system.matrix_b.mul_vec_into(u, scratch);
        let last = scratch.len() - 1;
        scratch[0] += self.system.left_coupling * (now.0 + next.0);
        scratch[last] += self.system.right_coupling * (now.1 + next.1);
        self.finish(u, scratch)
    }

    fn check_dims(&self, u: &[f64], scratch: &[f64]) -> Result<()> {
        let n = self.system.dim();
        if u.len() != n || scratch.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len().min(scratch.len()),
            });
        }
        Ok(())
    }

    fn finish(&self, u: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.factors.solve_in_place(scratch)?;
        u.copy_from_slice(scratch);
        Ok(())
    }
}

/// Assembles the scheme for the cubic-drift model with constant boundary
/// forcing for `U(y_min) = 1`, `U(y_max) = 0`.
pub fn assemble_cn(
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<(CnCoefficients, TridiagonalSystem)> {
    assemble_cn_with_boundaries(params, grid, 1.0, 0.0)
}

/// [`assemble_cn`] with arbitrary constant Dirichlet values.
pub fn assemble_cn_with_boundaries(
    params: &ModelParams,
    grid: &GridSpec,
    left: f64,
    right: f64,
) -> Result<(CnCoefficients, TridiagonalSystem)> {
    params.check_solvable()?;
    grid.validate()?;
    assemble_model(&MarketModel::from(params), grid, left, right)
}

pub(crate) fn assemble_model(
    model: &MarketModel,
    grid: &GridSpec,
    left: f64,
    right: f64,
) -> Result<(CnCoefficients, TridiagonalSystem)> {
    let dy = grid.dy();
    let dtau = grid.dtau();
    let n = grid.n_y - 2;
    let s2 = model.sigma0 * model.sigma0;
    let scale = dtau / (4.0 * dy * dy);
    let b = dtau * s2 / (2.0 * dy * dy);

    let mut a = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for k in 0..n {
        let y = grid.node(k + 1);
        let v = 0.5 * s2 - model.drift(y);
        let ak = -scale * (s2 + dy * v);
        let ck = -scale * (s2 - dy * v);
        if !(ak.is_finite() && ck.is_finite() && b.is_finite()) {
            return Err(Error::NonFiniteCoefficient { node: k + 1 });
        }
        a.push(ak);
        c.push(ck);
    }

    let implicit_diag = vec![1.0 + b; n];
    let explicit_diag = vec![1.0 - b - model.r * dtau; n];
    let matrix_a = Tridiagonal::new(c.clone(), implicit_diag, a.clone())?;
    let matrix_b = Tridiagonal::new(
        c.iter().map(|v| -v).collect(),
        explicit_diag,
        a.iter().map(|v| -v).collect(),
    )?;
    if !matrix_a.is_strictly_diagonally_dominant() {
        warn!(
            "implicit Crank-Nicolson operator is not strictly diagonally dominant \
             (sigma0 = {}, dy = {dy}, dtau = {dtau})",
            model.sigma0
        );
    }

    let left_coupling = -c[0];
    let right_coupling = -a[n - 1];
    let mut boundary_vector = vec![0.0; n];
    boundary_vector[0] += 2.0 * left_coupling * left;
    boundary_vector[n - 1] += 2.0 * right_coupling * right;

    Ok((
        CnCoefficients { a, b, c },
        TridiagonalSystem {
            matrix_a,
            matrix_b,
            boundary_vector,
            left_coupling,
            right_coupling,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: [f64; 3], sigma0: f64, r: f64) -> ModelParams {
        ModelParams::new(theta, sigma0, r).unwrap()
    }

    #[test]
    fn diffusion_coefficient_on_default_grid() {
        // 0.001 / (2 / 1089) = 0.5445
        let (coeffs, _) = assemble_cn(&params([0.0; 3], 1.0, 0.0), &GridSpec::default()).unwrap();
        assert!((coeffs.b - 0.5445).abs() < 1e-12);
    }

    #[test]
    fn coefficient_identity_holds() {
        let g = GridSpec::default();
        let (coeffs, _) = assemble_cn(&params([2.0, -1.0, 0.7], 1.3, 0.04), &g).unwrap();
        for (a, c) in coeffs.a.iter().zip(&coeffs.c) {
            assert!((a + c + coeffs.b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_drift_gives_constant_asymmetry() {
        let g = GridSpec::default();
        let (coeffs, _) = assemble_cn(&params([0.0; 3], 1.0, 0.0), &g).unwrap();
        let expected = -(g.dtau() / (2.0 * g.dy())) * 0.5;
        for (a, c) in coeffs.a.iter().zip(&coeffs.c) {
            assert!((a - c - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_vector_only_touches_end_rows() {
        let (coeffs, sys) =
            assemble_cn(&params([1.0, 0.0, 0.0], 1.0, 0.1), &GridSpec::default()).unwrap();
        assert_eq!(sys.dim(), 98);
        assert_eq!(sys.boundary_vector[0], -2.0 * coeffs.c[0]);
        assert!(sys.boundary_vector[1..].iter().all(|&v| v == 0.0));
        assert!(sys.matrix_a.is_strictly_diagonally_dominant());
    }

    #[test]
    fn homogeneous_step_stays_zero() {
        let (_, mut sys) =
            assemble_cn(&params([1.0, 0.0, 0.0], 1.0, 0.1), &GridSpec::default()).unwrap();
        sys.boundary_vector.iter_mut().for_each(|v| *v = 0.0);
        let next = sys.step(&vec![0.0; sys.dim()]).unwrap();
        assert!(next.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_steady_without_discount() {
        let g = GridSpec::default();
        let (_, sys) =
            assemble_cn_with_boundaries(&params([0.0; 3], 1.0, 0.0), &g, 1.0, 1.0).unwrap();
        let next = sys.step(&vec![1.0; sys.dim()]).unwrap();
        for v in next {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_interior_node_gets_both_boundaries() {
        let g = GridSpec::new(-1.0, 1.0, 3, 1, 0.01).unwrap();
        let (coeffs, sys) =
            assemble_cn_with_boundaries(&params([0.0; 3], 1.0, 0.0), &g, 2.0, 3.0).unwrap();
        let expected = -2.0 * coeffs.c[0] * 2.0 - 2.0 * coeffs.a[0] * 3.0;
        assert!((sys.boundary_vector[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn wrong_length_state_rejected() {
        let (_, sys) = assemble_cn(&params([0.0; 3], 1.0, 0.0), &GridSpec::default()).unwrap();
        assert!(matches!(
            sys.step(&[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

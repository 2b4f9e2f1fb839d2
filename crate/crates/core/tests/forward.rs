use binary_iop::pde::{
    assemble_cn, digital_price, initial_condition, oracle_error, solve_forward,
    solve_forward_model, MarketModel, Perturbation, Tridiagonal,
};
use binary_iop::{GridSpec, ModelParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn dense(t: &Tridiagonal) -> DMatrix<f64> {
    let n = t.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            t.diag[i]
        } else if j + 1 == i {
            t.lower[i]
        } else if i + 1 == j {
            t.upper[i]
        } else {
            0.0
        }
    })
}

#[test]
fn one_step_matches_dense_lu() {
    let grid = GridSpec::default();
    let params = ModelParams::new([1.0, 0.0, 0.0], 1.0, 0.1).unwrap();
    let (_, sys) = assemble_cn(&params, &grid).unwrap();
    let u0: Vec<f64> = grid
        .interior_nodes()
        .into_iter()
        .map(initial_condition)
        .collect();

    let a = dense(&sys.matrix_a);
    let b = dense(&sys.matrix_b);
    let rhs = &b * DVector::from_vec(u0.clone()) + DVector::from_vec(sys.boundary_vector.clone());
    let reference = a.lu().solve(&rhs).unwrap();

    let got = sys.step(&u0).unwrap();
    for (g, r) in got.iter().zip(reference.iter()) {
        assert!((g - r).abs() <= 1e-12 * r.abs().max(1.0), "{g} vs {r}");
    }
}

/// Risk-neutral simulation of `1{S_tau >= K}` discounted, with
/// `y = log(K / S_0)`.
#[test]
fn closed_form_matches_monte_carlo() {
    let (sigma0, r, tau): (f64, f64, f64) = (1.0, 0.1, 0.4);
    let n = 400_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    for y in [-1.0, -0.4, 0.0, 0.25, 0.9] {
        let hits = z
            .iter()
            .filter(|&&z| -y + (r - 0.5 * sigma0 * sigma0) * tau + sigma0 * tau.sqrt() * z >= 0.0)
            .count();
        let p = hits as f64 / n as f64;
        let mc = (-r * tau).exp() * p;
        let se = (-r * tau).exp() * (p * (1.0 - p) / n as f64).sqrt();
        let exact = digital_price(y, tau, sigma0, r);
        assert!(
            (mc - exact).abs() < 4.0 * se + 1e-12,
            "y={y}: mc {mc} exact {exact} se {se}"
        );
    }
}

#[test]
fn oracle_error_on_default_grid() {
    let e = oracle_error(&GridSpec::default(), 1.0, 0.1, 1.0, false).unwrap();
    assert!(e <= 2e-3, "{e}");
}

#[test]
fn determinism() {
    let grid = GridSpec::default();
    let p = ModelParams::new([0.3, -0.2, 0.1], 0.8, 0.05).unwrap();
    let a = solve_forward(&p, &grid).unwrap();
    let b = solve_forward(&p, &grid).unwrap();
    assert_eq!(a.values, b.values);
}

fn small_grid() -> impl Strategy<Value = GridSpec> {
    (
        0.3f64..3.0,
        0.3f64..3.0,
        3usize..60,
        1usize..80,
        0.01f64..1.0,
    )
        .prop_map(|(lo, hi, n_y, n_tau, t)| GridSpec::new(-lo, hi, n_y, n_tau, t).unwrap())
}

fn params() -> impl Strategy<Value = ModelParams> {
    (
        -3.0f64..3.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
        0.05f64..3.0,
        0.0f64..0.5,
    )
        .prop_map(|(t1, t2, t3, s, r)| ModelParams::new([t1, t2, t3], s, r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn initial_row_is_the_payoff(grid in small_grid(), p in params()) {
        let sol = solve_forward(&p, &grid).unwrap();
        for (i, y) in grid.nodes().into_iter().enumerate().skip(1).take(grid.n_y - 2) {
            prop_assert_eq!(sol.value(i, 0), initial_condition(y));
        }
    }

    #[test]
    fn coefficient_identity(grid in small_grid(), p in params()) {
        let (coef, _) = assemble_cn(&p, &grid).unwrap();
        for (a, c) in coef.a.iter().zip(&coef.c) {
            prop_assert!((a + c + coef.b).abs() <= 1e-12 * coef.b.max(1.0));
        }
    }

    #[test]
    fn constants_are_preserved(
        grid in small_grid(),
        p in params(),
        kappa in -5.0f64..5.0,
    ) {
        let p = ModelParams { r: 0.0, ..p };
        let (_, sys) = binary_iop::pde::assemble_cn_with_boundaries(&p, &grid, kappa, kappa).unwrap();
        let stepper = sys.stepper().unwrap();
        let mut u = vec![kappa; sys.dim()];
        let mut scratch = vec![0.0; sys.dim()];
        for _ in 0..grid.n_tau {
            stepper.advance_with(&mut u, &mut scratch, (kappa, kappa), (kappa, kappa)).unwrap();
        }
        for v in &u {
            prop_assert!((v - kappa).abs() <= 1e-12 * kappa.abs().max(1.0), "{} vs {}", v, kappa);
        }
    }

    // Central differences are only free of spurious wiggles while the cell
    // Peclet number |sigma0^2/2 - mu| dy / sigma0^2 stays below 1, so the
    // property is checked in that regime.
    #[test]
    fn price_is_nearly_monotone_in_y(
        t in prop::array::uniform3(-1.0f64..1.0),
        sigma0 in 0.5f64..3.0,
        r in 0.0f64..0.5,
    ) {
        let p = ModelParams::new(t, sigma0, r).unwrap();
        let grid = GridSpec::default();
        let dy = (grid.y_max - grid.y_min) / (grid.n_y - 1) as f64;
        for y in grid.nodes() {
            let mu = r + t[0] * y + t[1] * y * y + t[2] * y * y * y;
            prop_assert!((0.5 * sigma0 * sigma0 - mu).abs() * dy / (sigma0 * sigma0) < 1.0);
        }
        let sol = solve_forward(&p, &grid).unwrap();
        let row = sol.terminal();
        let mut running_min = f64::INFINITY;
        for &u in row {
            prop_assert!(u <= running_min + 0.05, "overshoot {}", u - running_min);
            running_min = running_min.min(u);
        }
    }
}

#[test]
fn sine_and_cubic_models_solve() {
    let grid = GridSpec::default();
    for pert in [
        Perturbation::Sine,
        Perturbation::Cubic([1.0, 0.0, -1.0 / 6.0]),
    ] {
        let m = MarketModel {
            perturbation: pert,
            sigma0: 1.0,
            r: 0.05,
        };
        let sol = solve_forward_model(&m, &grid).unwrap();
        assert!(sol.terminal().iter().all(|v| v.is_finite()));
    }
}

//! Levenberg-Marquardt on the same problem the sampler solves: noiseless
//! prices from `f(y) = y`, `sigma0 = 1`, started at the origin and at 3.5 in
//! every coordinate.
//!
//! ```text
//! cargo run --release --example lm_baseline -- [noise_level]
//! ```

use std::time::Instant;

use binary_iop::inference::{PosteriorSpec, PriorBox, SIGMA_EPS_FLOOR};
use binary_iop::lm::{lm_solve, LmSettings};
use binary_iop::pde::MarketModel;
use binary_iop::synthetic::{generate, NoiseSpec};
use binary_iop::{GridSpec, ModelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise_level: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0.0);
    let grid = GridSpec::default();
    let r = 0.05;
    let truth = ModelParams::new([1.0, 0.0, 0.0], 1.0, r)?;
    let data = generate(
        &MarketModel::from(&truth),
        &grid,
        &grid.interior_nodes(),
        &NoiseSpec {
            relative_level: noise_level,
            seed: 42,
        },
    )?;
    let spec = PosteriorSpec::calibrated(
        data.observations(),
        grid,
        r,
        PriorBox::default(),
        SIGMA_EPS_FLOOR,
    )?;

    for start in [[0.0; 4], [3.5; 4]] {
        let t0 = Instant::now();
        let res = lm_solve(&spec, start, &LmSettings::default())?;
        println!(
            "start {start:?}: {:?} after {} iterations in {:.1?}",
            res.termination,
            res.iterations,
            t0.elapsed()
        );
        let errs: Vec<f64> = res
            .theta_final
            .iter()
            .zip(truth.as_vector())
            .map(|(a, b)| a - b)
            .collect();
        println!("  theta_final {:?}", res.theta_final);
        println!("  error       {errs:.4?}");
        println!(
            "  ||Y - F||: {:.3e} -> {:.3e}",
            res.history[0].residual,
            res.history.last().map_or(f64::NAN, |h| h.residual)
        );
    }
    Ok(())
}

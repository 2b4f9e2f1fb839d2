//! Recovers `(theta1, theta2, theta3, sigma0)` from noiseless prices generated
//! with `f(y) = y`, `sigma0 = 1`, sampling the posterior with random-walk
//! Metropolis-Hastings from a deliberately poor starting point.
//!
//! ```text
//! cargo run --release --example mcmc_recovery -- [k_total] [k_burn] [start]
//! ```
//!
//! `start` is a single number used for all four coordinates (clamped into the
//! prior box), default 0.

use std::time::Instant;

use binary_iop::inference::{
    conditional_mean, effective_sample_size, run_chain, PosteriorSpec, PriorBox, SamplerSettings,
    SIGMA_EPS_FLOOR,
};
use binary_iop::pde::{MarketModel, PARAM_NAMES};
use binary_iop::synthetic::{generate, NoiseSpec};
use binary_iop::{GridSpec, ModelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let k_total: usize = args
        .first()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(100_000);
    let k_burn: usize = args
        .get(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(k_total * 3 / 10);
    let start: f64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(0.0);
    let noise_level: f64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(0.0);

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
    let prior = PriorBox::default();
    let spec = PosteriorSpec::calibrated(data.observations(), grid, r, prior, SIGMA_EPS_FLOOR)?;
    let settings = SamplerSettings {
        k_total,
        k_burn,
        ..SamplerSettings::default()
    };

    let init = prior.clamp(&[start; 4]);
    let t0 = Instant::now();
    let chain = run_chain(&spec, init, &settings)?;
    let elapsed = t0.elapsed();
    let cm = conditional_mean(&chain)?;

    println!("sigma_eps = {:.4e}", spec.sigma_eps);
    println!("start {init:?}, {k_total} iterations ({k_burn} burn-in) in {elapsed:.1?}");
    println!(
        "acceptance: overall {:.3}, after burn-in {:.3}; final gamma {:?}",
        chain.acceptance_rate(),
        chain.post_burn_acceptance_rate(),
        chain.proposal_gamma
    );
    println!("{:<8} {:>10} {:>10} {:>8}", "coord", "CM", "truth", "ESS");
    for (k, name) in PARAM_NAMES.iter().enumerate() {
        let tail: Vec<f64> = chain.post_burn_samples().iter().map(|s| s[k]).collect();
        println!(
            "{name:<8} {:>10.4} {:>10.4} {:>8.0}",
            cm[k],
            truth.as_vector()[k],
            effective_sample_size(&tail)
        );
    }
    Ok(())
}

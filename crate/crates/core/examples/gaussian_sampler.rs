//! Random-walk Metropolis-Hastings on closed-form targets, no PDE involved:
//! a standard normal and a correlated 2-D Gaussian with burn-in adaptation.
//!
//! ```text
//! cargo run --release --example gaussian_sampler
//! ```

use binary_iop::inference::{conditional_mean, effective_sample_size, run_chain, SamplerSettings};

fn main() -> binary_iop::Result<()> {
    let normal = |x: &[f64; 1]| -0.5 * x[0] * x[0];
    let settings = SamplerSettings {
        k_total: 100_000,
        k_burn: 1_000,
        gamma: vec![2.4],
        adapt: false,
        ..SamplerSettings::default()
    };
    let chain = run_chain(&normal, [0.0], &settings)?;
    let xs = &chain.coordinate(0)[chain.burn_in..];
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    println!("N(0, 1), gamma = 2.4: mean {mean:+.4}, variance {var:.4}");
    println!(
        "  acceptance {:.3}, ESS {:.0} of {}",
        chain.acceptance_rate(),
        effective_sample_size(xs),
        xs.len()
    );

    // rho = 0.9, unit variances; start far away with a small proposal and
    // let the burn-in scaling find a workable step.
    let rho: f64 = 0.9;
    let corr = move |x: &[f64; 2]| {
        -0.5 * (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (1.0 - rho * rho)
    };
    let settings = SamplerSettings {
        k_total: 60_000,
        k_burn: 20_000,
        gamma: vec![0.01, 0.01],
        adapt_interval: 500,
        ..SamplerSettings::default()
    };
    let chain = run_chain(&corr, [5.0, -5.0], &settings)?;
    let cm = conditional_mean(&chain)?;
    let post = chain.post_burn_samples();
    let cov = post
        .iter()
        .map(|s| (s[0] - cm[0]) * (s[1] - cm[1]))
        .sum::<f64>()
        / (post.len() as f64 - 1.0);
    println!("correlated 2-D Gaussian (rho = {rho}) from (5, -5):");
    println!("  final gamma {:?}", chain.proposal_gamma);
    println!("  mean ({:+.3}, {:+.3}), covariance {cov:.3}", cm[0], cm[1]);
    println!(
        "  post burn-in acceptance {:.3}",
        chain.post_burn_acceptance_rate()
    );
    Ok(())
}

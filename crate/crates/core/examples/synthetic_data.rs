//! Generates noisy prices for `f(y) = sin y`, writes them as `y,value` CSV
//! and reads them back.
//!
//! ```text
//! cargo run --example synthetic_data -- [noise_level] [seed] [out.csv]
//! ```

use std::fs::File;
use std::io::BufWriter;

use binary_iop::pde::{MarketModel, Perturbation};
use binary_iop::synthetic::{generate, NoiseSpec, Observations};
use binary_iop::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let level: f64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0.05);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let out = args
        .get(2)
        .cloned()
        .unwrap_or_else(|| "synthetic_sine.csv".into());

    let grid = GridSpec::default();
    let truth = MarketModel {
        perturbation: Perturbation::Sine,
        sigma0: 1.0,
        r: 0.05,
    };
    let noise = NoiseSpec {
        relative_level: level,
        seed,
    };
    let clean = generate(
        &truth,
        &grid,
        &grid.interior_nodes(),
        &NoiseSpec {
            relative_level: 0.0,
            ..noise
        },
    )?;
    let data = generate(&truth, &grid, &grid.interior_nodes(), &noise)?;

    // Only the truth-free form is written out or passed to inference.
    let obs = data.observations();
    obs.write_csv(BufWriter::new(File::create(&out)?))?;
    let back = Observations::read_csv(File::open(&out)?, level)?;
    assert_eq!(back, obs);

    let ratios: Vec<f64> = data
        .values
        .iter()
        .zip(&clean.values)
        .map(|(y, f)| y / f - 1.0)
        .collect();
    let m = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / m;
    let sd = (ratios.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    println!("{} points written to {out}", obs.len());
    println!("relative perturbation: mean {mean:+.4}, sd {sd:.4} (nominal {level})");
    for (y, v) in obs.points.iter().zip(&obs.values).step_by(16) {
        println!("  y = {y:+.4}  U = {v:.6}");
    }
    Ok(())
}

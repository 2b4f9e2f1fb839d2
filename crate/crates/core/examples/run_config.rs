//! Runs a whole experiment from a TOML config, the same path the
//! `binary-iop run` command takes.
//!
//! ```text
//! cargo run --release --example run_config -- [config.toml] [out_dir]
//! ```
//!
//! Defaults to `configs/smoke.toml`, which finishes in about a second.

use std::path::PathBuf;

use binary_iop::experiment::{load_config, run_experiment, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args
        .first()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.toml"));
    let config = load_config(&path)?;
    let options = RunOptions {
        output: args.get(1).map(PathBuf::from),
        ..RunOptions::default()
    };
    let outcome = run_experiment(&config, &options)?;
    for (g, table) in outcome.tables.iter().enumerate() {
        println!("initial guess {g}");
        print!("{}", table.to_text());
    }
    for cell in &outcome.cells {
        if let Ok((chain, _)) = &cell.mcmc {
            println!(
                "{}: acceptance {:.3}, seed {}",
                cell.name,
                chain.acceptance_rate(),
                cell.sampler_seed
            );
        }
    }
    println!("artifacts in {}", outcome.output_dir.display());
    Ok(())
}

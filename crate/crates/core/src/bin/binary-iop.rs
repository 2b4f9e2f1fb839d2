use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use log::error;

use binary_iop::experiment::{
    forward_curve, load_config, output_dir, parse_config, run_experiment, RunOptions,
};
use binary_iop::pde::oracle_error;
use binary_iop::{Error, GridSpec};

/// Recover a cubic drift perturbation and constant volatility from binary
/// option prices by Metropolis-Hastings, with a Levenberg-Marquardt baseline.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory; overrides `output_dir` in the config
    /// [default: results/<name>].
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    /// Worker threads for independent (noise level, guess) cells and
    /// Jacobian columns [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Replace both `sampler.seed` and `noise.seed`.
    #[arg(long, global = true, value_name = "S")]
    seed_override: Option<u64>,

    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate data, sample, fit and write every report file.
    Run { config: PathBuf },
    /// Solve the forward problem for the configured truth and write
    /// `forward_<name>.csv` (`y,value` at every grid node).
    Forward { config: PathBuf },
    /// Check a config (or a run manifest) and report every problem at once.
    Validate { config: PathBuf },
    /// Compare the solver with the closed-form digital price for a flat
    /// drift (sigma0 = 1, r = 0.1, default grid and one refinement).
    Oracle,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn config_reference() -> String {
    let example = parse_config("name = \"example\"\n[truth]\ndrift = \"identity\"\n")
        .and_then(|c| c.to_toml())
        .unwrap_or_default();
    format!(
        "Exit codes: 0 success, 1 validation failure, 2 runtime failure.\n\n\
         Config reference. Only `name` and `truth.drift` (identity | sine | cubic) are\n\
         required; `truth.coefficients = [c1, c2, c3]` goes with drift = \"cubic\";\n\
         `measurement.points` is \"all_interior_nodes\" or a list of y values.\n\
         Every other key is shown with its default:\n\n{example}"
    )
}

fn main() -> ExitCode {
    let matches = Cli::command()
        .after_long_help(config_reference())
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            if cli.quiet {
                eprintln!("{e}");
            }
            match e {
                Error::Config(_) => ExitCode::from(EXIT_VALIDATION),
                _ => ExitCode::from(EXIT_RUNTIME),
            }
        }
    }
}

fn execute(cli: &Cli) -> binary_iop::Result<()> {
    let options = RunOptions {
        output: cli.output.clone(),
        jobs: cli.jobs,
        seed_override: cli.seed_override,
    };
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config)?;
            let outcome = run_experiment(&cfg, &options)?;
            if !cli.quiet {
                for t in &outcome.tables {
                    println!("{}", t.to_text());
                }
                println!("wrote {}", outcome.output_dir.display());
            }
            Ok(())
        }
        Command::Forward { config } => {
            let cfg = options.apply(&load_config(config)?);
            let curve = forward_curve(&cfg)?;
            let dir = output_dir(&cfg);
            std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            let path = dir.join(format!("forward_{}.csv", cfg.name));
            let file = std::fs::File::create(&path).map_err(|e| io_error(&path, e))?;
            curve.write_csv(std::io::BufWriter::new(file))?;
            if !cli.quiet {
                println!("wrote {} ({} nodes)", path.display(), curve.len());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(config)?;
            if !cli.quiet {
                println!(
                    "{}: ok ({} noise levels x {} initial guesses)",
                    config.display(),
                    cfg.noise.levels.len(),
                    cfg.initial_guesses.len()
                );
            }
            Ok(())
        }
        Command::Oracle => {
            let (sigma0, r) = (1.0, 0.1);
            let coarse = GridSpec::default();
            let fine = coarse.refined();
            println!("flat drift, sigma0 = {sigma0}, r = {r}; max |U - U_exact| on |y| <= 1");
            for (label, exact) in [("default boundary", false), ("exact boundary", true)] {
                let a = oracle_error(&coarse, sigma0, r, 1.0, exact)?;
                let b = oracle_error(&fine, sigma0, r, 1.0, exact)?;
                println!(
                    "{label:>16}: n_y={} {a:.3e}, n_y={} {b:.3e}, ratio {:.2}",
                    coarse.n_y,
                    fine.n_y,
                    a / b
                );
            }
            Ok(())
        }
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

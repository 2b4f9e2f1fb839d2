//! Compares the Crank-Nicolson surface against the closed-form digital price
//! for a flat drift (`mu = r`), on the default grid and one refinement.
//!
//! The second table swaps the default boundary for the exact prices at
//! `y_min` / `y_max`, which removes the domain-truncation error and exposes
//! the scheme's own convergence rate.
//!
//! ```text
//! cargo run --release --example forward_oracle
//! ```

use binary_iop::pde::oracle_error;
use binary_iop::GridSpec;

fn main() -> binary_iop::Result<()> {
    let (sigma0, r) = (1.0, 0.1);
    let coarse = GridSpec::default();
    let fine = coarse.refined();

    for (label, exact) in [("default boundary", false), ("exact boundary", true)] {
        let e_coarse = oracle_error(&coarse, sigma0, r, 1.0, exact)?;
        let e_fine = oracle_error(&fine, sigma0, r, 1.0, exact)?;
        println!("{label}");
        println!("  n_y  n_tau  max|U - U_exact| on |y| <= 1");
        println!("  {:>3} {:>6}  {e_coarse:.3e}", coarse.n_y, coarse.n_tau);
        println!("  {:>3} {:>6}  {e_fine:.3e}", fine.n_y, fine.n_tau);
        println!("  reduction factor {:.2}", e_coarse / e_fine);
    }
    Ok(())
}

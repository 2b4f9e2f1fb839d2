//! Builds a recovery table and drift-curve file from hand-entered estimates
//! and writes them as a plotting tool would consume them.
//!
//! ```text
//! cargo run --example drift_report -- [out_dir]
//! ```

use binary_iop::pde::Perturbation;
use binary_iop::report::{
    build_drift_curve, build_recovery_table, LabeledRun, Method, ReportDir, DRIFT_SAMPLES,
    DRIFT_Y_RANGE,
};

fn main() -> binary_iop::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "drift_report_out".into());
    let runs = [
        LabeledRun {
            label: "MCMC 0%".into(),
            method: Method::Mcmc,
            noise_level: 0.0,
            theta: [0.997, -0.001, -0.153, 1.000],
        },
        LabeledRun {
            label: "LM 0%".into(),
            method: Method::Lm,
            noise_level: 0.0,
            theta: [0.997, 0.000, -0.154, 1.000],
        },
        LabeledRun {
            label: "MCMC 5%".into(),
            method: Method::Mcmc,
            noise_level: 0.05,
            theta: [1.08, -0.05, -0.10, 0.99],
        },
    ];
    let expected = [1.0, 0.0, -1.0 / 6.0, 1.0];
    let table = build_recovery_table(&runs, expected, Some([0.0; 4]))?;
    print!("{}", table.to_text());

    let mut curves = vec![("truth".to_string(), Perturbation::Sine)];
    for r in &runs {
        let [a, b, c, _] = r.theta;
        curves.push((r.label.replace(' ', "_"), Perturbation::Cubic([a, b, c])));
    }
    let drift = build_drift_curve(&curves, DRIFT_Y_RANGE, DRIFT_SAMPLES)?;
    for (label, values) in drift.series.iter().skip(1) {
        let gap = values
            .iter()
            .zip(&drift.series[0].1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("{label}: max |f - sin| on [-1, 1] = {gap:.4}");
    }

    let dir = ReportDir::create(&out)?;
    let t = dir.write_table("demo", &table)?;
    let d = dir.write_drift("demo", &drift)?;
    println!("wrote {} and {}", t.display(), d.display());
    Ok(())
}

use std::fs;
use std::path::Path;
use std::process::Command;

use binary_iop::experiment::{
    load_config, parse_config, run_experiment, RunOptions, MANIFEST_FILE,
};
use binary_iop::pde::Perturbation;
use binary_iop::report::{build_drift_curve, RecoveryTable};
use binary_iop::Error;
use proptest::prelude::*;

const TINY: &str = r#"
name = "tiny"
initial_guesses = [[0.0, 0.0, 0.0, 0.0], [0.5, 0.5, 0.5, 0.5]]

[truth]
drift = "sine"

[noise]
levels = [0.0, 0.05]
seed = 7

[sampler]
k_total = 400
k_burn = 100
adapt_interval = 100
early_window = 200

[report]
hist_bins = 8
drift_samples = 11
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn options(dir: &Path) -> RunOptions {
    RunOptions {
        output: Some(dir.to_path_buf()),
        jobs: Some(2),
        seed_override: None,
    }
}

#[test]
fn config_round_trip_is_stable() {
    let cfg = parse_config(TINY).unwrap();
    let text = cfg.to_toml().unwrap();
    let again = parse_config(&text).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.to_toml().unwrap(), text);
}

#[test]
fn reruns_and_manifest_replays_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let outcome = run_experiment(&cfg, &options(&a)).unwrap();
    run_experiment(&cfg, &options(&b)).unwrap();

    let fa = files(&a);
    let fb = files(&b);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "summary.txt",
        MANIFEST_FILE,
        "table_tiny_g0.csv",
        "table_tiny_g1.csv",
        "drift_tiny_g0.csv",
        "trace_tiny_n1_g1.csv",
        "hist_tiny_n0_g0_sigma0.csv",
        "lm_tiny_n1_g0.csv",
        "data_tiny_n1.csv",
    ] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    // Everything but the manifest (which records its own output path) is
    // byte-identical.
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na != MANIFEST_FILE {
            assert_eq!(ca, cb, "{na} differs between runs");
        }
    }

    // Replaying the manifest into a third directory gives the same traces.
    let replay_cfg = load_config(&a.join(MANIFEST_FILE)).unwrap();
    let c = tmp.path().join("c");
    run_experiment(&replay_cfg, &options(&c)).unwrap();
    for ((na, ca), (_, cc)) in fa.iter().zip(&files(&c)) {
        if na != MANIFEST_FILE {
            assert_eq!(ca, cc, "{na} differs after replay");
        }
    }

    // Labels survive the trip to disk.
    let table =
        RecoveryTable::read_csv(fs::File::open(a.join("table_tiny_g0.csv")).unwrap()).unwrap();
    assert_eq!(table, outcome.tables[0]);
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        [
            "initial guess",
            "MCMC 0%",
            "LM 0%",
            "MCMC 5%",
            "LM 5%",
            "expected"
        ]
    );
    assert_eq!(table.expected().values, [1.0, 0.0, -1.0 / 6.0, 1.0]);
}

#[test]
fn seed_override_changes_chains() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY).unwrap();
    let a = run_experiment(&cfg, &options(&tmp.path().join("a"))).unwrap();
    let mut o = options(&tmp.path().join("b"));
    o.seed_override = Some(1234);
    let b = run_experiment(&cfg, &o).unwrap();
    assert_eq!(b.config.sampler.seed, 1234);
    assert_ne!(a.cells[0].conditional_mean(), b.cells[0].conditional_mean());
}

#[test]
fn failing_cell_is_marked_and_outputs_kept() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(TINY).unwrap();
    cfg.sampler.gamma = vec![50.0; 4];
    cfg.sampler.min_early_acceptance = 0.2;
    let out = tmp.path().join("fail");
    let err = run_experiment(&cfg, &options(&out)).unwrap_err();
    assert!(matches!(err, Error::Runtime(_)), "{err}");
    let manifest = fs::read_to_string(out.join(MANIFEST_FILE)).unwrap();
    assert!(manifest.contains("status = \"FAILED\""));
    assert!(out.join("lm_tiny_n0_g0.csv").exists());
    assert!(fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .contains("FAILED"));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_binary-iop"))
}

#[test]
fn cli_exit_codes_and_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.toml");
    fs::write(&good, TINY).unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nmystery = 1\n[truth]\ndrift = \"identity\"\n[prior.sigma0]\nlower = 0.0\nupper = 1.0\n").unwrap();
    let failing = tmp.path().join("failing.toml");
    fs::write(
        &failing,
        TINY.replace(
            "adapt_interval = 100",
            "adapt_interval = 100\ngamma = [50.0, 50.0, 50.0, 50.0]\nmin_early_acceptance = 0.2",
        ),
    )
    .unwrap();
    let before = fs::read(&good).unwrap();

    let st = cli()
        .args(["validate"])
        .arg(&good)
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));

    let out = cli().args(["validate"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("mystery") && stderr.contains("prior.sigma0.lower"),
        "{stderr}"
    );

    let dir = tmp.path().join("run");
    let st = cli()
        .args(["run", "--quiet", "--jobs", "1", "--output"])
        .arg(&dir)
        .arg(&good)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(dir.join(MANIFEST_FILE).exists());

    let st = cli()
        .args(["run", "--quiet", "--output"])
        .arg(tmp.path().join("f"))
        .arg(&failing)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    let fwd = tmp.path().join("fwd");
    let st = cli()
        .args(["forward", "--quiet", "--output"])
        .arg(&fwd)
        .arg(&good)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let text = fs::read_to_string(fwd.join("forward_tiny.csv")).unwrap();
    assert!(text.starts_with("y,value\n"));
    assert_eq!(text.lines().count(), 101);

    let out = cli().arg("oracle").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ratio"));

    assert_eq!(fs::read(&good).unwrap(), before);
}

proptest! {
    #[test]
    fn polynomial_curves_pass_through_origin(
        t in prop::array::uniform3(-10.0f64..10.0),
        half in 0.1f64..5.0,
        n in 1usize..200,
    ) {
        let c = build_drift_curve(&[("p".into(), Perturbation::Cubic(t))], (-half, half), 2 * n + 1).unwrap();
        prop_assert_eq!(c.y[n], 0.0);
        prop_assert_eq!(c.series[0].1[n], 0.0);
        prop_assert_eq!(Perturbation::Cubic(t).eval(0.0), 0.0);
    }
}

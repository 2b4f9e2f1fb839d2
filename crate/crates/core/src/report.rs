//! Recovery tables, drift curves and the files an experiment leaves behind.
//!
//! Every data file is CSV with floats written in shortest round-trip form,
//! so reading a file back gives bit-identical values.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{posterior_histogram, Chain};
use crate::lm::LmResult;
use crate::pde::{Perturbation, N_PARAMS, PARAM_NAMES};
use crate::synthetic::parse_f64;

pub const DRIFT_Y_RANGE: (f64, f64) = (-1.0, 1.0);
pub const DRIFT_SAMPLES: usize = 201;
pub const HIST_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mcmc,
    Lm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcmc => "mcmc",
            Method::Lm => "lm",
        }
    }
}

/// One estimate to be tabulated.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRun {
    pub label: String,
    pub method: Method,
    pub noise_level: f64,
    pub theta: [f64; N_PARAMS],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    InitialGuess,
    Result { method: Method, noise_level: f64 },
    Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub kind: RowKind,
    pub values: [f64; N_PARAMS],
}

/// Rows in display order: optional initial guess, results, expected value.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTable {
    pub rows: Vec<TableRow>,
}

pub fn build_recovery_table(
    runs: &[LabeledRun],
    expected: [f64; N_PARAMS],
    initial_guess: Option<[f64; N_PARAMS]>,
) -> Result<RecoveryTable> {
    if runs.is_empty() {
        return Err(Error::InvalidInput(
            "recovery table needs at least one run".into(),
        ));
    }
    let mut seen = HashSet::new();
    for run in runs {
        if !seen.insert(run.label.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate run label `{}`",
                run.label
            )));
        }
    }
    let mut rows = Vec::with_capacity(runs.len() + 2);
    if let Some(g) = initial_guess {
        rows.push(TableRow {
            label: "initial guess".into(),
            kind: RowKind::InitialGuess,
            values: g,
        });
    }
    rows.extend(runs.iter().map(|r| TableRow {
        label: r.label.clone(),
        kind: RowKind::Result {
            method: r.method,
            noise_level: r.noise_level,
        },
        values: r.theta,
    }));
    rows.push(TableRow {
        label: "expected".into(),
        kind: RowKind::Expected,
        values: expected,
    });
    Ok(RecoveryTable { rows })
}

const TABLE_HEADER: [&str; 7] = [
    "label",
    "method",
    "noise_level",
    "theta1",
    "theta2",
    "theta3",
    "sigma0",
];

impl RecoveryTable {
    pub fn expected(&self) -> &TableRow {
        self.rows
            .last()
            .expect("table always ends with the expected row")
    }

    /// `label,method,noise_level,theta1,theta2,theta3,sigma0`; `method` is
    /// `initial_guess` or `expected` for the two bookkeeping rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TABLE_HEADER)?;
        for row in &self.rows {
            let (method, noise) = match row.kind {
                RowKind::InitialGuess => ("initial_guess", String::new()),
                RowKind::Expected => ("expected", String::new()),
                RowKind::Result {
                    method,
                    noise_level,
                } => (method.as_str(), noise_level.to_string()),
            };
            let mut rec = vec![row.label.clone(), method.to_string(), noise];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        check_header(r.headers()?, &TABLE_HEADER)?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let kind = match &rec[1] {
                "initial_guess" => RowKind::InitialGuess,
                "expected" => RowKind::Expected,
                m => RowKind::Result {
                    method: match m {
                        "mcmc" => Method::Mcmc,
                        "lm" => Method::Lm,
                        other => {
                            return Err(Error::InvalidInput(format!("unknown method `{other}`")))
                        }
                    },
                    noise_level: parse_f64(&rec[2])?,
                },
            };
            let mut values = [0.0; N_PARAMS];
            for (k, v) in values.iter_mut().enumerate() {
                *v = parse_f64(&rec[3 + k])?;
            }
            rows.push(TableRow {
                label: rec[0].to_string(),
                kind,
                values,
            });
        }
        if rows.iter().filter(|r| r.kind == RowKind::Expected).count() != 1
            || rows.last().map(|r| r.kind) != Some(RowKind::Expected)
        {
            return Err(Error::InvalidInput(
                "table must end with exactly one expected row".into(),
            ));
        }
        Ok(RecoveryTable { rows })
    }

    /// Fixed-width text rendering with four decimals.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = format!("{:<width$}", "");
        for name in PARAM_NAMES {
            let _ = write!(out, " {name:>9}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<width$}", row.label);
            for v in row.values {
                let _ = write!(out, " {v:>9.4}");
            }
            out.push('\n');
        }
        out
    }
}

/// Sampled drift perturbations `f(y)`, one column per labeled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCurve {
    pub y: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

/// Uniform samples of each curve; cubic entries are evaluated as
/// polynomials, `Sine` as `sin y`.
pub fn build_drift_curve(
    curves: &[(String, Perturbation)],
    y_range: (f64, f64),
    n_samples: usize,
) -> Result<DriftCurve> {
    let (lo, hi) = y_range;
    if n_samples < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 drift samples, got {n_samples}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!("bad drift range [{lo}, {hi}]")));
    }
    // Endpoint-weighted form: exact at both ends, and exactly 0 at the
    // middle sample of a symmetric range.
    let m = (n_samples - 1) as f64;
    let y: Vec<f64> = (0..n_samples)
        .map(|i| (lo * (m - i as f64) + hi * i as f64) / m)
        .collect();
    let series = curves
        .iter()
        .map(|(label, f)| (label.clone(), y.iter().map(|&v| f.eval(v)).collect()))
        .collect();
    Ok(DriftCurve { y, series })
}

impl DriftCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend(self.series.iter().map(|(l, _)| l.clone()));
        w.write_record(&header)?;
        for (i, y) in self.y.iter().enumerate() {
            let mut rec = vec![y.to_string()];
            rec.extend(self.series.iter().map(|(_, v)| v[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("y") {
            return Err(Error::InvalidInput(
                "drift file must start with a `y` column".into(),
            ));
        }
        let mut y = Vec::new();
        let mut series: Vec<(String, Vec<f64>)> = headers
            .iter()
            .skip(1)
            .map(|h| (h.to_string(), Vec::new()))
            .collect();
        for rec in r.records() {
            let rec = rec?;
            y.push(parse_f64(&rec[0])?);
            for (k, (_, v)) in series.iter_mut().enumerate() {
                v.push(parse_f64(&rec[k + 1])?);
            }
        }
        Ok(DriftCurve { y, series })
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "expected header `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Writes artifacts under one output directory.
#[derive(Debug, Clone)]
pub struct ReportDir {
    root: PathBuf,
}

impl ReportDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(ReportDir { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn write_with(
        &self,
        file: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<PathBuf> {
        let path = self.root.join(file);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// `table_<name>.csv`.
    pub fn write_table(&self, name: &str, table: &RecoveryTable) -> Result<PathBuf> {
        self.write_with(&format!("table_{name}.csv"), |w| table.write_csv(w))
    }

    /// `trace_<name>.csv` in the chain format.
    pub fn write_trace(&self, name: &str, chain: &Chain<N_PARAMS>) -> Result<PathBuf> {
        self.write_with(&format!("trace_{name}.csv"), |w| chain.write_csv(w))
    }

    /// `hist_<name>_<coord>.csv` for each parameter, post burn-in.
    pub fn write_histograms(
        &self,
        name: &str,
        chain: &Chain<N_PARAMS>,
        n_bins: usize,
    ) -> Result<Vec<PathBuf>> {
        PARAM_NAMES
            .iter()
            .enumerate()
            .map(|(k, coord)| {
                let h = posterior_histogram(chain, k, n_bins)?;
                self.write_with(&format!("hist_{name}_{coord}.csv"), |w| h.write_csv(w))
            })
            .collect()
    }

    /// `drift_<name>.csv`.
    pub fn write_drift(&self, name: &str, curve: &DriftCurve) -> Result<PathBuf> {
        self.write_with(&format!("drift_{name}.csv"), |w| curve.write_csv(w))
    }

    /// `lm_<name>.csv` with the iteration history.
    pub fn write_lm(&self, name: &str, result: &LmResult) -> Result<PathBuf> {
        self.write_with(&format!("lm_{name}.csv"), |w| result.write_csv(w))
    }

    pub fn write_text(&self, file: &str, text: &str) -> Result<PathBuf> {
        self.write_with(file, |w| {
            w.write_all(text.as_bytes()).map_err(|e| Error::io(file, e))
        })
    }
}

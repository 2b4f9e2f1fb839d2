//! TOML experiment configuration and the pipeline that runs it.
//!
//! A config describes one truth, a list of noise levels and a list of
//! initial guesses. Every (noise level, guess) pair is a cell: data are
//! generated once per noise level, then each cell runs the sampler and,
//! optionally, Levenberg-Marquardt. Cells run in parallel.
//!
//! Seeds: all noise levels share `noise.seed`, so the 5% data are the 0%
//! data perturbed by one fixed set of normals. Cell `c` (row-major over
//! levels then guesses) samples with `sampler.seed + c`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    conditional_mean, effective_sample_size, run_chain, Chain, PosteriorSpec, PriorBox,
    SamplerSettings, SIGMA_EPS_FLOOR,
};
use crate::lm::{lm_solve, LmResult, LmSettings};
use crate::pde::{solve_terminal, GridSpec, MarketModel, Perturbation, N_PARAMS, PARAM_NAMES};
use crate::report::{
    build_drift_curve, build_recovery_table, DriftCurve, LabeledRun, Method, RecoveryTable,
    ReportDir,
};
use crate::synthetic::{generate, MeasurementSet, NoiseSpec, Observations};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFamily {
    /// `f(y) = y`.
    Identity,
    /// `f(y) = sin y`; inference still fits the cubic family.
    Sine,
    /// `f(y) = c1 y + c2 y^2 + c3 y^3` with explicit `coefficients`.
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthConfig {
    pub drift: DriftFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default = "default_r")]
    pub r: f64,
}

fn one() -> f64 {
    1.0
}

fn default_r() -> f64 {
    0.05
}

impl TruthConfig {
    pub fn perturbation(&self) -> Perturbation {
        match self.drift {
            DriftFamily::Identity => Perturbation::Cubic([1.0, 0.0, 0.0]),
            DriftFamily::Sine => Perturbation::Sine,
            DriftFamily::Cubic => {
                let c = self.coefficients.as_deref().unwrap_or(&[]);
                Perturbation::Cubic(std::array::from_fn(|k| {
                    c.get(k).copied().unwrap_or(f64::NAN)
                }))
            }
        }
    }

    pub fn model(&self) -> MarketModel {
        MarketModel {
            perturbation: self.perturbation(),
            sigma0: self.sigma0,
            r: self.r,
        }
    }

    /// The parameter vector a perfect recovery would give: the cubic Taylor
    /// coefficients of `f` at 0, and `sigma0`.
    pub fn expected(&self) -> [f64; N_PARAMS] {
        let [a, b, c] = match self.perturbation() {
            Perturbation::Cubic(t) => t,
            Perturbation::Sine => [1.0, 0.0, -1.0 / 6.0],
        };
        [a, b, c, self.sigma0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_noise_seed")]
    pub seed: u64,
}

fn default_levels() -> Vec<f64> {
    vec![0.0]
}

fn default_noise_seed() -> u64 {
    42
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            levels: default_levels(),
            seed: default_noise_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(default = "theta_bounds")]
    pub theta1: Bounds,
    #[serde(default = "theta_bounds")]
    pub theta2: Bounds,
    #[serde(default = "theta_bounds")]
    pub theta3: Bounds,
    #[serde(default = "sigma_bounds")]
    pub sigma0: Bounds,
}

fn theta_bounds() -> Bounds {
    let d = PriorBox::default();
    Bounds {
        lower: d.lower[0],
        upper: d.upper[0],
    }
}

fn sigma_bounds() -> Bounds {
    let d = PriorBox::default();
    Bounds {
        lower: d.lower[3],
        upper: d.upper[3],
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            theta1: theta_bounds(),
            theta2: theta_bounds(),
            theta3: theta_bounds(),
            sigma0: sigma_bounds(),
        }
    }
}

impl PriorConfig {
    fn entries(&self) -> [(&'static str, Bounds); N_PARAMS] {
        [
            (PARAM_NAMES[0], self.theta1),
            (PARAM_NAMES[1], self.theta2),
            (PARAM_NAMES[2], self.theta3),
            (PARAM_NAMES[3], self.sigma0),
        ]
    }

    pub fn to_box(&self) -> PriorBox {
        let e = self.entries();
        PriorBox {
            lower: std::array::from_fn(|k| e[k].1.lower),
            upper: std::array::from_fn(|k| e[k].1.upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub settings: LmSettings,
}

fn yes() -> bool {
    true
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            enabled: true,
            settings: LmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointsKeyword {
    AllInteriorNodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementPoints {
    Keyword(PointsKeyword),
    Explicit(Vec<f64>),
}

impl MeasurementPoints {
    pub fn resolve(&self, grid: &GridSpec) -> Vec<f64> {
        match self {
            MeasurementPoints::Keyword(PointsKeyword::AllInteriorNodes) => grid.interior_nodes(),
            MeasurementPoints::Explicit(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    #[serde(default = "all_interior")]
    pub points: MeasurementPoints,
    /// Lower bound on the likelihood scale as a fraction of RMS(Y).
    #[serde(default = "default_floor")]
    pub sigma_eps_floor: f64,
}

fn all_interior() -> MeasurementPoints {
    MeasurementPoints::Keyword(PointsKeyword::AllInteriorNodes)
}

fn default_floor() -> f64 {
    SIGMA_EPS_FLOOR
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            points: all_interior(),
            sigma_eps_floor: SIGMA_EPS_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub hist_bins: usize,
    pub drift_range: [f64; 2],
    pub drift_samples: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            hist_bins: crate::report::HIST_BINS,
            drift_range: [
                crate::report::DRIFT_Y_RANGE.0,
                crate::report::DRIFT_Y_RANGE.1,
            ],
            drift_samples: crate::report::DRIFT_SAMPLES,
        }
    }
}

fn default_guesses() -> Vec<Vec<f64>> {
    vec![vec![0.0; N_PARAMS]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Used in every output file name.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub truth: TruthConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub lm: LmConfig,
    #[serde(default = "default_guesses")]
    pub initial_guesses: Vec<Vec<f64>>,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

/// Parses config text. Unknown keys and every semantic problem are reported
/// together, each prefixed with its field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
    let mut unknown = Vec::new();
    let parsed: std::result::Result<ExperimentConfig, _> =
        serde_ignored::deserialize(de, |path| unknown.push(format!("{path}: unknown key")));
    let mut errors = unknown;
    match parsed {
        Ok(cfg) => {
            errors.extend(cfg.problems());
            if errors.is_empty() {
                Ok(cfg)
            } else {
                Err(Error::Config(errors))
            }
        }
        Err(e) => {
            errors.push(e.to_string().trim_end().to_string());
            Err(Error::Config(errors))
        }
    }
}

/// Reads a config file, or the `[config]` table of a run manifest.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    if table.contains_key("manifest") {
        let cfg = table
            .get("config")
            .ok_or_else(|| Error::Config(vec!["manifest has no [config] table".into()]))?;
        let text = toml::to_string(cfg).map_err(|e| Error::Config(vec![e.to_string()]))?;
        return parse_config(&text);
    }
    parse_config(&text)
}

/// Alias for [`load_config`] that only checks.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    load_config(path)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Every violated invariant as `path: message`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |path: String, msg: String| out.push(format!("{path}: {msg}"));

        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            push(
                "name".into(),
                format!(
                    "must be non-empty and use only [A-Za-z0-9_-], got `{}`",
                    self.name
                ),
            );
        }

        let t = &self.truth;
        match (t.drift, &t.coefficients) {
            (DriftFamily::Cubic, None) => push(
                "truth.coefficients".into(),
                "required when drift = \"cubic\"".into(),
            ),
            (DriftFamily::Cubic, Some(c)) if c.len() != 3 || !c.iter().all(|v| v.is_finite()) => {
                push(
                    "truth.coefficients".into(),
                    format!("must be 3 finite numbers, got {c:?}"),
                )
            }
            (DriftFamily::Identity | DriftFamily::Sine, Some(_)) => push(
                "truth.coefficients".into(),
                "only allowed when drift = \"cubic\"".into(),
            ),
            _ => {}
        }
        if !(t.sigma0 > 0.0 && t.sigma0.is_finite()) {
            push(
                "truth.sigma0".into(),
                format!("must be positive, got {}", t.sigma0),
            );
        }
        if !(t.r >= 0.0 && t.r.is_finite()) {
            push("truth.r".into(), format!("must be >= 0, got {}", t.r));
        }

        for (field, msg) in self.grid.problems() {
            push(format!("grid.{field}"), msg);
        }

        if self.noise.levels.is_empty() {
            push("noise.levels".into(), "must list at least one level".into());
        }
        for (i, l) in self.noise.levels.iter().enumerate() {
            if !(*l >= 0.0 && l.is_finite()) {
                push(
                    format!("noise.levels[{i}]"),
                    format!("must be finite and >= 0, got {l}"),
                );
            }
        }

        for (name, b) in self.prior.entries() {
            if !(b.lower.is_finite() && b.upper.is_finite()) {
                push(format!("prior.{name}"), "bounds must be finite".into());
            } else if b.lower >= b.upper {
                push(
                    format!("prior.{name}.upper"),
                    format!("must exceed lower ({}), got {}", b.lower, b.upper),
                );
            }
        }
        if !(self.prior.sigma0.lower > 0.0) {
            push(
                "prior.sigma0.lower".into(),
                format!("must be positive, got {}", self.prior.sigma0.lower),
            );
        }

        for (field, msg) in self.sampler.problems() {
            push(format!("sampler.{field}"), msg);
        }
        if self.sampler.gamma.len() != N_PARAMS {
            push(
                "sampler.gamma".into(),
                format!("needs {N_PARAMS} entries, got {}", self.sampler.gamma.len()),
            );
        }
        for (field, msg) in self.lm.settings.problems() {
            push(format!("lm.settings.{field}"), msg);
        }

        if self.initial_guesses.is_empty() {
            push(
                "initial_guesses".into(),
                "must list at least one guess".into(),
            );
        }
        let prior = self.prior.to_box();
        for (i, g) in self.initial_guesses.iter().enumerate() {
            if g.len() != N_PARAMS || !g.iter().all(|v| v.is_finite()) {
                push(
                    format!("initial_guesses[{i}]"),
                    format!("must be {N_PARAMS} finite numbers, got {g:?}"),
                );
                continue;
            }
            for k in 0..N_PARAMS {
                // sigma0 = 0 is allowed so the origin can serve as a guess;
                // the sampler starts from the nearest point of the box.
                let lower = if k == 3 {
                    0.0f64.min(prior.lower[3])
                } else {
                    prior.lower[k]
                };
                if !(lower <= g[k] && g[k] <= prior.upper[k]) {
                    push(
                        format!("initial_guesses[{i}]"),
                        format!("{} = {} lies outside the prior box", PARAM_NAMES[k], g[k]),
                    );
                }
            }
        }

        if let MeasurementPoints::Explicit(p) = &self.measurement.points {
            if p.is_empty() {
                push("measurement.points".into(), "must not be empty".into());
            }
            if p.windows(2).any(|w| !(w[0] < w[1])) {
                push(
                    "measurement.points".into(),
                    "must be strictly increasing".into(),
                );
            }
            if let Some(v) = p
                .iter()
                .find(|v| !(self.grid.y_min..=self.grid.y_max).contains(*v))
            {
                push(
                    "measurement.points".into(),
                    format!(
                        "{v} lies outside [{}, {}]",
                        self.grid.y_min, self.grid.y_max
                    ),
                );
            }
        }
        if !(self.measurement.sigma_eps_floor > 0.0 && self.measurement.sigma_eps_floor.is_finite())
        {
            push(
                "measurement.sigma_eps_floor".into(),
                format!("must be positive, got {}", self.measurement.sigma_eps_floor),
            );
        }

        if self.report.hist_bins == 0 {
            push("report.hist_bins".into(), "must be >= 1".into());
        }
        if self.report.drift_samples < 2 {
            push(
                "report.drift_samples".into(),
                format!("must be >= 2, got {}", self.report.drift_samples),
            );
        }
        let [lo, hi] = self.report.drift_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            push(
                "report.drift_range".into(),
                format!("must be finite with lower < upper, got [{lo}, {hi}]"),
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn guess(&self, g: usize) -> [f64; N_PARAMS] {
        std::array::from_fn(|k| self.initial_guesses[g][k])
    }

    /// Seed used by the sampler in cell `(level, guess)`.
    pub fn cell_seed(&self, level: usize, guess: usize) -> u64 {
        let c = level * self.initial_guesses.len() + guess;
        self.sampler.seed.wrapping_add(c as u64)
    }

    pub fn cell_name(&self, level: usize, guess: usize) -> String {
        format!("{}_n{level}_g{guess}", self.name)
    }

    /// Synthetic data for noise level `level`.
    pub fn measurements(&self, level: usize) -> Result<MeasurementSet> {
        let points = self.measurement.points.resolve(&self.grid);
        generate(
            &self.truth.model(),
            &self.grid,
            &points,
            &NoiseSpec {
                relative_level: self.noise.levels[level],
                seed: self.noise.seed,
            },
        )
    }

    pub fn posterior(&self, data: Observations) -> Result<PosteriorSpec> {
        PosteriorSpec::calibrated(
            data,
            self.grid,
            self.truth.r,
            self.prior.to_box(),
            self.measurement.sigma_eps_floor,
        )
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Replaces both `sampler.seed` and `noise.seed`.
    pub seed_override: Option<u64>,
}

impl RunOptions {
    pub fn apply(&self, config: &ExperimentConfig) -> ExperimentConfig {
        let mut c = config.clone();
        if let Some(s) = self.seed_override {
            c.sampler.seed = s;
            c.noise.seed = s;
        }
        if let Some(o) = &self.output {
            c.output_dir = Some(o.clone());
        }
        c
    }
}

/// Resolved output directory: explicit, else `results/<name>`.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(&config.name))
}

/// Everything one cell produced.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub name: String,
    pub level: usize,
    pub guess: usize,
    pub noise_level: f64,
    pub sampler_seed: u64,
    /// Where the chain started: the guess clamped into the prior box.
    pub mcmc_init: [f64; N_PARAMS],
    pub mcmc: std::result::Result<(Chain<N_PARAMS>, [f64; N_PARAMS]), String>,
    pub lm: Option<std::result::Result<LmResult, String>>,
}

impl CellOutcome {
    pub fn failed(&self) -> bool {
        self.mcmc.is_err() || matches!(self.lm, Some(Err(_)))
    }

    pub fn conditional_mean(&self) -> Option<[f64; N_PARAMS]> {
        self.mcmc.as_ref().ok().map(|(_, cm)| *cm)
    }

    pub fn lm_theta(&self) -> Option<[f64; N_PARAMS]> {
        match &self.lm {
            Some(Ok(r)) => Some(r.theta_final),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub output_dir: PathBuf,
    pub cells: Vec<CellOutcome>,
    pub tables: Vec<RecoveryTable>,
    pub drift: Vec<DriftCurve>,
    pub failed: bool,
}

fn run_cell(
    config: &ExperimentConfig,
    spec: &PosteriorSpec,
    level: usize,
    guess: usize,
) -> CellOutcome {
    let name = config.cell_name(level, guess);
    let raw = config.guess(guess);
    let mcmc_init = spec.prior.clamp(&raw);
    let settings = SamplerSettings {
        seed: config.cell_seed(level, guess),
        ..config.sampler.clone()
    };
    info!(
        "{name}: sampling from {mcmc_init:?}, seed {}",
        settings.seed
    );
    let mcmc = run_chain(spec, mcmc_init, &settings)
        .and_then(|chain| conditional_mean(&chain).map(|cm| (chain, cm)))
        .map_err(|e| format!("mcmc: {e}"));
    if let Err(e) = &mcmc {
        warn!("{name}: {e}");
    }
    let lm = config.lm.enabled.then(|| {
        info!("{name}: levenberg-marquardt from {raw:?}");
        lm_solve(spec, raw, &config.lm.settings).map_err(|e| format!("lm: {e}"))
    });
    CellOutcome {
        name,
        level,
        guess,
        noise_level: config.noise.levels[level],
        sampler_seed: settings.seed,
        mcmc_init,
        mcmc,
        lm,
    }
}

/// Runs every cell and writes all artifacts. A failing cell is recorded in
/// the manifest and the summary; the run then returns an error after all
/// files are written.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentOutcome> {
    let config = options.apply(config);
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| run_resolved(config))
}

fn run_resolved(config: ExperimentConfig) -> Result<ExperimentOutcome> {
    let out = ReportDir::create(output_dir(&config))?;

    let mut specs = Vec::with_capacity(config.noise.levels.len());
    for level in 0..config.noise.levels.len() {
        let data = config.measurements(level)?;
        let obs = data.observations();
        let path = out
            .path()
            .join(format!("data_{}_n{level}.csv", config.name));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        obs.write_csv(std::io::BufWriter::new(file))?;
        specs.push(config.posterior(obs)?);
    }

    let n_guess = config.initial_guesses.len();
    let cells: Vec<CellOutcome> = (0..specs.len() * n_guess)
        .into_par_iter()
        .map(|c| run_cell(&config, &specs[c / n_guess], c / n_guess, c % n_guess))
        .collect();

    for cell in &cells {
        if let Ok((chain, _)) = &cell.mcmc {
            out.write_trace(&cell.name, chain)?;
            out.write_histograms(&cell.name, chain, config.report.hist_bins)?;
        }
        if let Some(Ok(lm)) = &cell.lm {
            out.write_lm(&cell.name, lm)?;
        }
    }

    let expected = config.truth.expected();
    let mut tables = Vec::new();
    let mut curves = Vec::new();
    for g in 0..n_guess {
        let mut runs = Vec::new();
        let mut drift = vec![("truth".to_string(), config.truth.perturbation())];
        for cell in cells.iter().filter(|c| c.guess == g) {
            let pct = percent(cell.noise_level);
            if let Some(cm) = cell.conditional_mean() {
                runs.push(LabeledRun {
                    label: format!("MCMC {pct}"),
                    method: Method::Mcmc,
                    noise_level: cell.noise_level,
                    theta: cm,
                });
                drift.push((
                    format!("mcmc_{pct}"),
                    Perturbation::Cubic([cm[0], cm[1], cm[2]]),
                ));
            }
            if let Some(t) = cell.lm_theta() {
                runs.push(LabeledRun {
                    label: format!("LM {pct}"),
                    method: Method::Lm,
                    noise_level: cell.noise_level,
                    theta: t,
                });
                drift.push((format!("lm_{pct}"), Perturbation::Cubic([t[0], t[1], t[2]])));
            }
        }
        let tag = format!("{}_g{g}", config.name);
        if !runs.is_empty() {
            let table = build_recovery_table(&runs, expected, Some(config.guess(g)))?;
            out.write_table(&tag, &table)?;
            tables.push(table);
        }
        let [lo, hi] = config.report.drift_range;
        let curve = build_drift_curve(&drift, (lo, hi), config.report.drift_samples)?;
        out.write_drift(&tag, &curve)?;
        curves.push(curve);
    }

    let failed = cells.iter().any(CellOutcome::failed);
    out.write_text(SUMMARY_FILE, &summary_text(&config, &cells, &tables))?;
    out.write_text(MANIFEST_FILE, &manifest_text(&config, &cells, failed)?)?;

    let outcome = ExperimentOutcome {
        output_dir: out.path().to_path_buf(),
        config,
        cells,
        tables,
        drift: curves,
        failed,
    };
    if outcome.failed {
        let msgs = outcome
            .cells
            .iter()
            .flat_map(|c| {
                let mcmc = c.mcmc.as_ref().err().cloned();
                let lm = match &c.lm {
                    Some(Err(e)) => Some(e.clone()),
                    _ => None,
                };
                mcmc.into_iter()
                    .chain(lm)
                    .map(move |e| format!("{}: {e}", c.name))
            })
            .collect::<Vec<_>>();
        return Err(Error::Runtime(msgs));
    }
    Ok(outcome)
}

fn percent(level: f64) -> String {
    format!("{}%", level * 100.0)
}

fn summary_text(
    config: &ExperimentConfig,
    cells: &[CellOutcome],
    tables: &[RecoveryTable],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}", config.name);
    let _ = writeln!(
        s,
        "truth {:?}, sigma0 = {}, r = {}; expected {:?}",
        config.truth.drift,
        config.truth.sigma0,
        config.truth.r,
        config.truth.expected()
    );
    let _ = writeln!(
        s,
        "sampler K = {}, k* = {}, gamma0 = {:?}, proposal adaptation {}",
        config.sampler.k_total,
        config.sampler.k_burn,
        config.sampler.gamma,
        if config.sampler.adapt {
            format!(
                "on (every {} steps during burn-in)",
                config.sampler.adapt_interval
            )
        } else {
            "off".into()
        }
    );
    for (g, table) in tables.iter().enumerate() {
        let _ = writeln!(s, "\ninitial guess {g}");
        s.push_str(&table.to_text());
    }
    let _ = writeln!(s, "\ncells");
    for c in cells {
        let _ = write!(
            s,
            "{} (noise {}, seed {}): ",
            c.name,
            percent(c.noise_level),
            c.sampler_seed
        );
        match &c.mcmc {
            Ok((chain, _)) => {
                let ess: Vec<String> = (0..N_PARAMS)
                    .map(|k| {
                        format!(
                            "{:.0}",
                            effective_sample_size(
                                &chain
                                    .post_burn_samples()
                                    .iter()
                                    .map(|x| x[k])
                                    .collect::<Vec<_>>()
                            )
                        )
                    })
                    .collect();
                let _ = write!(
                    s,
                    "acceptance {:.3} (post burn-in {:.3}), gamma {:?}, ESS [{}]",
                    chain.acceptance_rate(),
                    chain.post_burn_acceptance_rate(),
                    chain.proposal_gamma,
                    ess.join(", ")
                );
            }
            Err(e) => {
                let _ = write!(s, "FAILED {e}");
            }
        }
        match &c.lm {
            Some(Ok(r)) => {
                let _ = write!(
                    s,
                    "; LM {:?} after {} iterations",
                    r.termination, r.iterations
                );
            }
            Some(Err(e)) => {
                let _ = write!(s, "; LM FAILED {e}");
            }
            None => {}
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest: ManifestHeader,
    config: &'a ExperimentConfig,
    cells: Vec<ManifestCell>,
}

#[derive(Serialize)]
struct ManifestHeader {
    status: &'static str,
    crate_version: &'static str,
    output_dir: String,
}

#[derive(Serialize)]
struct ManifestCell {
    name: String,
    status: &'static str,
    noise_level: f64,
    noise_seed: u64,
    sampler_seed: u64,
    initial_guess: Vec<f64>,
    mcmc_init: [f64; N_PARAMS],
    #[serde(skip_serializing_if = "Option::is_none")]
    conditional_mean: Option<[f64; N_PARAMS]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lm_theta: Option<[f64; N_PARAMS]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lm_termination: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<String>,
}

fn manifest_text(config: &ExperimentConfig, cells: &[CellOutcome], failed: bool) -> Result<String> {
    let m = Manifest {
        manifest: ManifestHeader {
            status: if failed { "FAILED" } else { "ok" },
            crate_version: env!("CARGO_PKG_VERSION"),
            output_dir: output_dir(config).display().to_string(),
        },
        config,
        cells: cells
            .iter()
            .map(|c| ManifestCell {
                name: c.name.clone(),
                status: if c.failed() { "FAILED" } else { "ok" },
                noise_level: c.noise_level,
                noise_seed: config.noise.seed,
                sampler_seed: c.sampler_seed,
                initial_guess: config.initial_guesses[c.guess].clone(),
                mcmc_init: c.mcmc_init,
                conditional_mean: c.conditional_mean(),
                acceptance_rate: c.mcmc.as_ref().ok().map(|(ch, _)| ch.acceptance_rate()),
                lm_theta: c.lm_theta(),
                lm_termination: match &c.lm {
                    Some(Ok(r)) => Some(format!("{:?}", r.termination)),
                    _ => None,
                },
                errors: c
                    .mcmc
                    .as_ref()
                    .err()
                    .cloned()
                    .into_iter()
                    .chain(match &c.lm {
                        Some(Err(e)) => Some(e.clone()),
                        _ => None,
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&m).map_err(|e| Error::Config(vec![e.to_string()]))
}

/// Noise-free forward solve of the configured truth; returns `(y, U(y, tau*))`
/// at every grid node.
pub fn forward_curve(config: &ExperimentConfig) -> Result<Observations> {
    config.validate()?;
    let row = solve_terminal(&config.truth.model(), &config.grid)?;
    Observations::new(config.grid.nodes(), row, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
[truth]
drift = "identity"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.sampler, SamplerSettings::default());
        assert_eq!(c.prior.to_box(), PriorBox::default());
        assert_eq!(c.truth.sigma0, 1.0);
        assert_eq!(c.noise.levels, vec![0.0]);
        assert_eq!(c.initial_guesses, vec![vec![0.0; 4]]);
        assert!(c.lm.enabled);
        assert_eq!(c.measurement.points.resolve(&c.grid).len(), 98);
    }

    #[test]
    fn all_errors_reported_with_paths() {
        let text = r#"
name = "bad"
colour = "red"
[truth]
drift = "identity"
sigma0 = -1.0
[noise]
levels = [0.0, -0.05]
[prior.sigma0]
lower = 0.0
upper = 10.0
[sampler]
k_total = 100
k_burn = 100
typo = 3
"#;
        let Err(Error::Config(errs)) = parse_config(text) else {
            panic!("expected config errors");
        };
        let joined = errs.join("\n");
        for needle in [
            "colour",
            "sampler.typo",
            "truth.sigma0",
            "noise.levels[1]",
            "prior.sigma0.lower",
            "sampler.k_burn",
        ] {
            assert!(joined.contains(needle), "missing {needle} in\n{joined}");
        }
    }

    #[test]
    fn cubic_needs_coefficients() {
        let text = "name = \"c\"\n[truth]\ndrift = \"cubic\"\n";
        let Err(Error::Config(errs)) = parse_config(text) else {
            panic!()
        };
        assert!(errs[0].starts_with("truth.coefficients"));
        let ok = "name = \"c\"\n[truth]\ndrift = \"cubic\"\ncoefficients = [0.5, 0.0, -0.1]\n";
        assert_eq!(
            parse_config(ok).unwrap().truth.expected(),
            [0.5, 0.0, -0.1, 1.0]
        );
    }

    #[test]
    fn explicit_points_and_guesses_checked() {
        let text = r#"
name = "p"
initial_guesses = [[0.0, 0.0, 0.0, 0.0], [20.0, 0.0, 0.0, 1.0], [1.0]]
[truth]
drift = "sine"
[measurement]
points = [0.5, 0.1, 3.0]
"#;
        let Err(Error::Config(errs)) = parse_config(text) else {
            panic!()
        };
        let joined = errs.join("\n");
        assert!(joined.contains("initial_guesses[1]"));
        assert!(joined.contains("initial_guesses[2]"));
        assert!(!joined.contains("initial_guesses[0]"));
        assert!(joined.contains("strictly increasing"));
        assert!(joined.contains("3 lies outside"));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.measurement.points = MeasurementPoints::Explicit(vec![-0.5, 0.0, 0.5]);
        c.initial_guesses.push(vec![3.5; 4]);
        let text = c.to_toml().unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn seed_override_and_cells() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.initial_guesses.push(vec![3.5; 4]);
        c.noise.levels.push(0.05);
        let o = RunOptions {
            seed_override: Some(9),
            ..RunOptions::default()
        }
        .apply(&c);
        assert_eq!((o.sampler.seed, o.noise.seed), (9, 9));
        assert_eq!(o.cell_seed(1, 1), 12);
        assert_eq!(o.cell_name(1, 0), "tiny_n1_g0");
    }

    #[test]
    fn sine_expected_is_taylor_cubic() {
        let c = parse_config("name = \"s\"\n[truth]\ndrift = \"sine\"\n").unwrap();
        assert_eq!(c.truth.expected(), [1.0, 0.0, -1.0 / 6.0, 1.0]);
    }
}

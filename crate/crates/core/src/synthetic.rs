//! Synthetic measurements `Y_j = F_j(truth) * (1 + eps_j)`.
//!
//! Noise is drawn from a ChaCha8 stream seeded with `NoiseSpec::seed`;
//! standard normals come from `rand_distr::StandardNormal` (ziggurat). Runs
//! with the same seed are bitwise reproducible with this crate; other
//! implementations will only agree in distribution.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{observe_row, solve_terminal, GridSpec, MarketModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the multiplicative perturbation.
    pub relative_level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_level >= 0.0 && self.relative_level.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "relative noise level must be finite and >= 0, got {}",
                self.relative_level
            )));
        }
        Ok(())
    }
}

/// Generated data together with the truth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: NoiseSpec,
    pub truth: MarketModel,
}

impl MeasurementSet {
    /// Drops the truth; this is the only form inference and fitting accept.
    pub fn observations(&self) -> Observations {
        Observations {
            points: self.points.clone(),
            values: self.values.clone(),
            relative_level: self.noise.relative_level,
        }
    }
}

/// Observed prices without any record of the parameters behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    /// Noise level the data is believed to carry; used to size the
    /// likelihood.
    pub relative_level: f64,
}

impl Observations {
    pub fn new(points: Vec<f64>, values: Vec<f64>, relative_level: f64) -> Result<Self> {
        let obs = Observations {
            points,
            values,
            relative_level,
        };
        obs.validate(None)?;
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks lengths, ordering, finiteness and (optionally) grid bounds.
    pub fn validate(&self, grid: Option<&GridSpec>) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("no measurement points".into()));
        }
        if self.points.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: self.values.len(),
            });
        }
        check_points(&self.points, grid)?;
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite observed value {v}"
            )));
        }
        Ok(())
    }

    /// Writes `y,value` rows with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["y", "value"])?;
        for (y, v) in self.points.iter().zip(&self.values) {
            w.write_record([y.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(reader: R, relative_level: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["y", "value"] {
            return Err(Error::InvalidInput(format!(
                "expected header `y,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            points.push(parse_f64(&rec[0])?);
            values.push(parse_f64(&rec[1])?);
        }
        Observations::new(points, values, relative_level)
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("cannot parse `{s}` as a number")))
}

fn check_points(points: &[f64], grid: Option<&GridSpec>) -> Result<()> {
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "measurement points must be strictly increasing".into(),
        ));
    }
    if let Some(g) = grid {
        if let Some(&p) = points.iter().find(|p| !(g.y_min..=g.y_max).contains(*p)) {
            return Err(Error::PointOutOfRange {
                point: p,
                y_min: g.y_min,
                y_max: g.y_max,
            });
        }
    }
    Ok(())
}

/// Noisy prices at `points` for the given truth.
pub fn generate(
    truth: &MarketModel,
    grid: &GridSpec,
    points: &[f64],
    noise: &NoiseSpec,
) -> Result<MeasurementSet> {
    noise.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidInput("no measurement points".into()));
    }
    check_points(points, Some(grid))?;

    let row = solve_terminal(truth, grid)?;
    let clean = observe_row(grid, &row, points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let values = clean
        .into_iter()
        .map(|f| {
            let z: f64 = StandardNormal.sample(&mut rng);
            f * (1.0 + noise.relative_level * z)
        })
        .collect();
    Ok(MeasurementSet {
        points: points.to_vec(),
        values,
        noise: *noise,
        truth: *truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{observe, solve_forward, Perturbation};
    use crate::ModelParams;

    fn identity_truth() -> MarketModel {
        MarketModel::from(&ModelParams::new([1.0, 0.0, 0.0], 1.0, 0.05).unwrap())
    }

    #[test]
    fn noiseless_equals_forward_observation() {
        let g = GridSpec::default();
        let pts = g.interior_nodes();
        let noise = NoiseSpec {
            relative_level: 0.0,
            seed: 3,
        };
        let data = generate(&identity_truth(), &g, &pts, &noise).unwrap();
        let sol =
            solve_forward(&ModelParams::new([1.0, 0.0, 0.0], 1.0, 0.05).unwrap(), &g).unwrap();
        assert_eq!(data.values, observe(&sol, &pts).unwrap());
    }

    #[test]
    fn seed_determinism() {
        let g = GridSpec::default();
        let pts = g.interior_nodes();
        let noise = NoiseSpec {
            relative_level: 0.05,
            seed: 11,
        };
        let a = generate(&identity_truth(), &g, &pts, &noise).unwrap();
        let b = generate(&identity_truth(), &g, &pts, &noise).unwrap();
        assert_eq!(a, b);
        let c = generate(
            &identity_truth(),
            &g,
            &pts,
            &NoiseSpec { seed: 12, ..noise },
        )
        .unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn relative_noise_has_expected_spread() {
        let g = GridSpec::default();
        let pts = g.interior_nodes();
        let clean = generate(
            &identity_truth(),
            &g,
            &pts,
            &NoiseSpec {
                relative_level: 0.0,
                seed: 0,
            },
        )
        .unwrap();
        let noisy = generate(
            &identity_truth(),
            &g,
            &pts,
            &NoiseSpec {
                relative_level: 0.05,
                seed: 42,
            },
        )
        .unwrap();
        let ratios: Vec<f64> = noisy
            .values
            .iter()
            .zip(&clean.values)
            .map(|(y, f)| y / f - 1.0)
            .collect();
        let m = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / m;
        let sd = (ratios.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        assert_eq!(ratios.len(), 98);
        assert!((0.03..=0.07).contains(&sd), "sample sd {sd}");
    }

    #[test]
    fn sine_truth_is_supported() {
        let g = GridSpec::default();
        let truth = MarketModel {
            perturbation: Perturbation::Sine,
            sigma0: 1.0,
            r: 0.05,
        };
        let data = generate(
            &truth,
            &g,
            &g.interior_nodes(),
            &NoiseSpec {
                relative_level: 0.0,
                seed: 0,
            },
        )
        .unwrap();
        assert!(data.values.iter().all(|v| v.is_finite()));
        assert_eq!(data.observations().values, data.values);
    }

    #[test]
    fn bad_points_rejected() {
        let g = GridSpec::default();
        let noise = NoiseSpec {
            relative_level: 0.0,
            seed: 0,
        };
        assert!(generate(&identity_truth(), &g, &[0.1, 0.0], &noise).is_err());
        assert!(generate(&identity_truth(), &g, &[2.0], &noise).is_err());
        assert!(generate(&identity_truth(), &g, &[], &noise).is_err());
        let neg = NoiseSpec {
            relative_level: -0.1,
            seed: 0,
        };
        assert!(generate(&identity_truth(), &g, &[0.0], &neg).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let obs = Observations::new(
            vec![-0.5, 0.1, 1.0 / 3.0],
            vec![0.9, 0.123456789012345, 1e-17],
            0.05,
        )
        .unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("y,value\n"));
        let back = Observations::read_csv(&buf[..], 0.05).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn csv_header_checked() {
        assert!(Observations::read_csv("x,v\n0,1\n".as_bytes(), 0.0).is_err());
    }
}

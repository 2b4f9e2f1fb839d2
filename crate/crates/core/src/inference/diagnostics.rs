use std::io::Write;

use crate::error::{Error, Result};

use super::Chain;

/// Mean of the samples after the burn-in index.
pub fn conditional_mean<const D: usize>(chain: &Chain<D>) -> Result<[f64; D]> {
    if chain.burn_in >= chain.len() {
        return Err(Error::InvalidInput(format!(
            "burn-in ({}) leaves no samples in a chain of length {}",
            chain.burn_in,
            chain.len()
        )));
    }
    let tail = chain.post_burn_samples();
    let n = tail.len() as f64;
    let mut mean = [0.0; D];
    for s in tail {
        for k in 0..D {
            mean[k] += s[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Normalized histogram: `mass[b]` is the fraction of samples in
/// `[edges[b], edges[b + 1])`, the last bin closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    /// `bin_left,bin_right,mass`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_left", "bin_right", "mass"])?;
        for (b, m) in self.mass.iter().enumerate() {
            w.write_record([
                self.edges[b].to_string(),
                self.edges[b + 1].to_string(),
                m.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Mass divided by bin width.
    pub fn density(&self) -> Vec<f64> {
        self.mass
            .iter()
            .enumerate()
            .map(|(b, m)| m / (self.edges[b + 1] - self.edges[b]))
            .collect()
    }
}

/// Histogram of one coordinate over the post burn-in samples, spanning the
/// sample range. A constant trace gets a unit-width range centred on it.
pub fn posterior_histogram<const D: usize>(
    chain: &Chain<D>,
    coordinate: usize,
    n_bins: usize,
) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be >= 1".into()));
    }
    if coordinate >= D {
        return Err(Error::InvalidInput(format!(
            "coordinate {coordinate} out of range for dimension {D}"
        )));
    }
    let tail = chain.post_burn_samples();
    if tail.is_empty() {
        return Err(Error::InvalidInput("no samples after burn-in".into()));
    }
    histogram(tail.iter().map(|s| s[coordinate]), n_bins)
}

fn histogram(values: impl Iterator<Item = f64> + Clone, n_bins: usize) -> Result<Histogram> {
    let (mut lo, mut hi) = values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut total = 0usize;
    for v in values {
        let b = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
        total += 1;
    }
    let edges = (0..=n_bins)
        .map(|b| {
            if b == n_bins {
                hi
            } else {
                lo + b as f64 * width
            }
        })
        .collect();
    let mass = counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect();
    Ok(Histogram { edges, mass })
}

/// Effective sample size from Geyer's initial positive sequence of
/// autocorrelation pair sums.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let autocorr = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = autocorr(lag) + autocorr(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau.max(1.0 / n as f64)
}

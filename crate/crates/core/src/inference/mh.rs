use std::io::{Read, Write};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{N_PARAMS, PARAM_NAMES};
use crate::synthetic::parse_f64;

/// Unnormalized log density; `-inf` marks zero probability.
pub trait LogDensity<const D: usize> {
    fn log_density(&self, x: &[f64; D]) -> f64;
}

impl<const D: usize, F: Fn(&[f64; D]) -> f64> LogDensity<D> for F {
    fn log_density(&self, x: &[f64; D]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhState<const D: usize> {
    pub position: [f64; D],
    pub log_post: f64,
}

/// Result of one Metropolis-Hastings transition, with the random numbers
/// that decided it so the decision can be replayed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<const D: usize> {
    pub state: MhState<D>,
    pub proposal: [f64; D],
    pub accepted: bool,
    /// `log pi(proposal) - log pi(current)`.
    pub log_ratio: f64,
    /// Uniform draw in `[0, 1)`; the move is accepted iff `uniform < exp(log_ratio)`.
    pub uniform: f64,
}

/// One random-walk step: `proposal = current + gamma .* z`, `z ~ N(0, I)`,
/// accepted with probability `min(1, exp(log_ratio))`.
///
/// Exactly `D` normals and one uniform are drawn per call, in that order.
pub fn mh_step<const D: usize, T, R>(
    target: &T,
    current: &MhState<D>,
    gamma: &[f64; D],
    rng: &mut R,
) -> StepOutcome<D>
where
    T: LogDensity<D> + ?Sized,
    R: Rng + ?Sized,
{
    let proposal: [f64; D] = std::array::from_fn(|k| {
        let z: f64 = rng.sample(StandardNormal);
        current.position[k] + gamma[k] * z
    });
    let uniform: f64 = rng.random();
    let proposed_log_post = target.log_density(&proposal);
    let log_ratio = if proposed_log_post == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        proposed_log_post - current.log_post
    };
    let accepted = uniform < log_ratio.exp();
    let state = if accepted {
        MhState {
            position: proposal,
            log_post: proposed_log_post,
        }
    } else {
        *current
    };
    StepOutcome {
        state,
        proposal,
        accepted,
        log_ratio,
        uniform,
    }
}

/// Sampler controls.
///
/// While `adapt` is on, every `adapt_interval` steps before `k_burn` the whole
/// proposal vector is doubled if the window acceptance rate exceeded
/// `target_acceptance.1` and halved if it fell below `target_acceptance.0`.
/// The scale is frozen from `k_burn` on, so the retained segment is a plain
/// time-homogeneous chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub k_total: usize,
    pub k_burn: usize,
    /// Per-coordinate proposal standard deviations.
    pub gamma: Vec<f64>,
    pub seed: u64,
    pub adapt: bool,
    pub adapt_interval: usize,
    pub target_acceptance: (f64, f64),
    /// Abort when the acceptance rate over the first `early_window` steps is
    /// below this.
    pub min_early_acceptance: f64,
    pub early_window: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            k_total: 100_000,
            k_burn: 30_000,
            gamma: vec![0.02, 0.02, 0.02, 0.01],
            seed: 1,
            adapt: true,
            adapt_interval: 1000,
            target_acceptance: (0.20, 0.45),
            min_early_acceptance: 0.005,
            early_window: 5000,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        let errs: Vec<String> = self
            .problems()
            .into_iter()
            .map(|(f, m)| format!("{f}: {m}"))
            .collect();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(errs.join("; ")))
        }
    }

    /// Every violated constraint as `(field, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.k_total == 0 {
            out.push(("k_total", "must be >= 1".to_string()));
        }
        if self.k_burn >= self.k_total {
            out.push((
                "k_burn",
                format!(
                    "must be smaller than k_total ({}), got {}",
                    self.k_total, self.k_burn
                ),
            ));
        }
        if self.gamma.is_empty() || !self.gamma.iter().all(|g| g.is_finite() && *g > 0.0) {
            out.push((
                "gamma",
                format!("entries must be positive, got {:?}", self.gamma),
            ));
        }
        if self.adapt_interval == 0 {
            out.push(("adapt_interval", "must be >= 1".into()));
        }
        let (lo, hi) = self.target_acceptance;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            out.push((
                "target_acceptance",
                format!("must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"),
            ));
        }
        if !(0.0..1.0).contains(&self.min_early_acceptance) {
            out.push((
                "min_early_acceptance",
                format!("must lie in [0, 1), got {}", self.min_early_acceptance),
            ));
        }
        out
    }
}

/// Every state visited by the sampler (repeats included), one per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<const D: usize = N_PARAMS> {
    pub samples: Vec<[f64; D]>,
    pub log_posts: Vec<f64>,
    pub accepted: Vec<bool>,
    pub accept_count: usize,
    pub burn_in: usize,
    /// Proposal scale in force after burn-in.
    pub proposal_gamma: [f64; D],
    pub seed: u64,
}

impl<const D: usize> Chain<D> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accept_count as f64 / self.len().max(1) as f64
    }

    /// Acceptance rate over the retained (post burn-in) segment.
    pub fn post_burn_acceptance_rate(&self) -> f64 {
        let tail = &self.accepted[self.burn_in.min(self.len())..];
        tail.iter().filter(|a| **a).count() as f64 / tail.len().max(1) as f64
    }

    pub fn post_burn_samples(&self) -> &[[f64; D]] {
        &self.samples[self.burn_in.min(self.len())..]
    }

    /// Trace of one coordinate.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }
}

impl Chain<N_PARAMS> {
    /// `k,theta1,theta2,theta3,sigma0,log_post,accepted`; `k` starts at 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k"];
        header.extend(PARAM_NAMES);
        header.extend(["log_post", "accepted"]);
        w.write_record(&header)?;
        for (k, ((s, lp), acc)) in self
            .samples
            .iter()
            .zip(&self.log_posts)
            .zip(&self.accepted)
            .enumerate()
        {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            rec.push(lp.to_string());
            rec.push(u8::from(*acc).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a trace written by [`write_csv`](Self::write_csv). Burn-in, proposal
    /// scale and seed are not part of the file and must be supplied.
    pub fn read_csv<R: Read>(
        reader: R,
        burn_in: usize,
        proposal_gamma: [f64; N_PARAMS],
        seed: u64,
    ) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut chain = Chain {
            samples: Vec::new(),
            log_posts: Vec::new(),
            accepted: Vec::new(),
            accept_count: 0,
            burn_in,
            proposal_gamma,
            seed,
        };
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 7 {
                return Err(Error::InvalidInput(format!(
                    "expected 7 columns, got {}",
                    rec.len()
                )));
            }
            let s: [f64; N_PARAMS] = [
                parse_f64(&rec[1])?,
                parse_f64(&rec[2])?,
                parse_f64(&rec[3])?,
                parse_f64(&rec[4])?,
            ];
            chain.samples.push(s);
            chain.log_posts.push(parse_f64(&rec[5])?);
            let acc = &rec[6] == "1";
            chain.accept_count += usize::from(acc);
            chain.accepted.push(acc);
        }
        Ok(chain)
    }
}

/// Runs `settings.k_total` Metropolis-Hastings iterations from `init`.
pub fn run_chain<const D: usize, T>(
    target: &T,
    init: [f64; D],
    settings: &SamplerSettings,
) -> Result<Chain<D>>
where
    T: LogDensity<D> + ?Sized,
{
    settings.validate()?;
    if settings.gamma.len() != D {
        return Err(Error::DimensionMismatch {
            expected: D,
            got: settings.gamma.len(),
        });
    }
    let (lo, hi) = settings.target_acceptance;
    let init_lp = target.log_density(&init);
    if !init_lp.is_finite() {
        return Err(Error::InvalidInput(format!(
            "initial state {init:?} has zero posterior probability (outside the prior support?)"
        )));
    }

    let mut gamma: [f64; D] = std::array::from_fn(|k| settings.gamma[k]);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut state = MhState {
        position: init,
        log_post: init_lp,
    };
    let k_total = settings.k_total;
    let mut chain = Chain {
        samples: Vec::with_capacity(k_total),
        log_posts: Vec::with_capacity(k_total),
        accepted: Vec::with_capacity(k_total),
        accept_count: 0,
        burn_in: settings.k_burn,
        proposal_gamma: gamma,
        seed: settings.seed,
    };
    let mut window_accepts = 0usize;

    for k in 0..k_total {
        let out = mh_step(target, &state, &gamma, &mut rng);
        state = out.state;
        chain.samples.push(state.position);
        chain.log_posts.push(state.log_post);
        chain.accepted.push(out.accepted);
        chain.accept_count += usize::from(out.accepted);
        window_accepts += usize::from(out.accepted);

        let done = k + 1;
        if done == settings.early_window {
            let rate = chain.accept_count as f64 / done as f64;
            if rate < settings.min_early_acceptance {
                return Err(Error::LowAcceptance {
                    rate,
                    window: done,
                    threshold: settings.min_early_acceptance,
                });
            }
        }
        if done % settings.adapt_interval == 0 {
            let rate = window_accepts as f64 / settings.adapt_interval as f64;
            window_accepts = 0;
            if settings.adapt && done <= settings.k_burn {
                let factor = if rate > hi {
                    2.0
                } else if rate < lo {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    gamma.iter_mut().for_each(|g| *g *= factor);
                    debug!("step {done}: acceptance {rate:.3}, proposal scale x{factor}");
                }
            }
        }
        if done % 10_000 == 0 {
            info!(
                "step {done}/{k_total}: acceptance {:.3}, log-post {:.4e}",
                chain.accept_count as f64 / done as f64,
                state.log_post
            );
        }
    }
    chain.proposal_gamma = gamma;
    Ok(chain)
}

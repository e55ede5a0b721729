//! Monte Carlo batches over independent episodes, censored-aware
//! estimates of the stopping times, and the analytic expectation bounds.
//!
//! Censored runs are never averaged in silently. A report carries the mean
//! over uncensored runs, a lower-bound mean that counts censored runs at the
//! horizon, and the censor fraction: under neutral noise the expectation is
//! infinite and no single number summarizes the sample honestly.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{validate_divisive_init, DivisiveInit, ModelParams};
use crate::episode::{run_episode, EpisodeConfig, RecordMode, StopRule, StopTime, StoppingRecord};
use crate::error::{Error, Result};
use crate::noise::{derive_stream, Orientation};
use crate::stats;
use crate::walk::truncated_means;

/// An expectation bound; `Infinite` when the expectation diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

impl Bound {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Bound::Finite(v) => Some(v),
            Bound::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Bound::Infinite)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Bound::Finite(v) => s.serialize_f64(v),
            Bound::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Bound::Finite(v)),
            Repr::Text(s) if s == "infinite" => Ok(Bound::Infinite),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("unknown bound {s:?}"))),
        }
    }
}

fn check_oriented(params: &ModelParams) -> Result<()> {
    let noise = &params.noise;
    if noise.delta1 > noise.delta2 {
        return Err(Error::arg(
            "delta1 > delta2: normalize the support with an orientation first",
        ));
    }
    Ok(())
}

/// Bound on `E T`: infinite for neutral noise, otherwise
/// `2n / (delta2 - delta1) * (x*_Nc - x*_1 + (Nc - 1) delta2)`.
pub fn consensus_time_bound(init: &DivisiveInit, params: &ModelParams) -> Result<Bound> {
    check_oriented(params)?;
    validate_divisive_init(init, params)?;
    let noise = &params.noise;
    if noise.is_neutral() {
        return Ok(Bound::Infinite);
    }
    let values = &init.cluster_values;
    let spread = values[values.len() - 1] - values[0];
    let clusters = values.len() as f64;
    let rate = 2.0 * params.n as f64 / (noise.delta2 - noise.delta1);
    Ok(Bound::Finite(
        rate * (spread + (clusters - 1.0) * noise.delta2),
    ))
}

/// Bound on `E T_l`: infinite for neutral noise, otherwise
/// `2n / (delta2 - delta1) * (|A - x*_far| + epsilon + Nc delta2)` where
/// `x*_far` is the cluster the noisy agent starts in.
pub fn capture_time_bound(init: &DivisiveInit, params: &ModelParams) -> Result<Bound> {
    check_oriented(params)?;
    let Some(a) = params.leader else {
        return Err(Error::arg("leader bound needs a leader opinion"));
    };
    validate_divisive_init(init, params)?;
    let noise = &params.noise;
    if noise.is_neutral() {
        return Ok(Bound::Infinite);
    }
    let values = &init.cluster_values;
    let distance = match noise.orientation {
        Orientation::Upward => a - values[0],
        Orientation::Downward => values[values.len() - 1] - a,
    };
    let clusters = values.len() as f64;
    let rate = 2.0 * params.n as f64 / (noise.delta2 - noise.delta1);
    Ok(Bound::Finite(
        rate * (distance + params.epsilon + clusters * noise.delta2),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub episode: EpisodeConfig,
    pub runs: usize,
    pub master_seed: u64,
    /// Truncation horizons for the tail probe, strictly increasing and no
    /// larger than the episode horizon.
    #[serde(default)]
    pub horizons: Vec<u64>,
    pub parallelism: usize,
}

impl ExperimentConfig {
    pub fn new(episode: EpisodeConfig, runs: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            episode,
            runs,
            master_seed,
            horizons: Vec::new(),
            parallelism: 1,
        }
    }

    pub fn horizons(mut self, horizons: Vec<u64>) -> Self {
        self.horizons = horizons;
        self
    }

    pub fn parallelism(mut self, threads: usize) -> Self {
        self.parallelism = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::arg("run count must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(Error::arg("parallelism must be at least 1"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("horizons must be strictly increasing"));
        }
        if let Some(&last) = self.horizons.last() {
            if last > self.episode.horizon {
                return Err(Error::arg(format!(
                    "truncation horizon {last} exceeds the episode horizon {}",
                    self.episode.horizon
                )));
            }
        }
        self.episode.validate()
    }
}

/// Runs every episode with the stream of its run index and returns the
/// records in run-index order, independent of thread scheduling. Episodes
/// stop as soon as all detectors have fired and record nothing else.
pub fn batch_run(config: &ExperimentConfig) -> Result<Vec<StoppingRecord>> {
    config.validate()?;
    let episode = config
        .episode
        .clone()
        .record(RecordMode::None)
        .stop(StopRule::AfterDetection { extra_steps: 0 });
    let run = |k: u64| {
        let mut stream = derive_stream(config.master_seed, k);
        run_episode(&episode, &mut stream)
            .map(|(_, rec)| rec)
            .map_err(|e| Error::Worker {
                run_index: k,
                source: Box::new(e),
            })
    };
    let runs = config.runs as u64;
    if config.parallelism == 1 {
        return (0..runs).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::arg(format!("thread pool: {e}")))?;
    pool.install(|| (0..runs).into_par_iter().map(run).collect())
}

/// Which stopping time a report is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "T")]
    Consensus,
    #[serde(rename = "T_l")]
    LeaderCapture,
}

impl Quantity {
    /// Leader capture when a leader is configured, consensus otherwise.
    pub fn for_params(params: &ModelParams) -> Self {
        if params.leader.is_some() {
            Quantity::LeaderCapture
        } else {
            Quantity::Consensus
        }
    }

    pub fn pick(self, rec: &StoppingRecord) -> Option<StopTime> {
        match self {
            Quantity::Consensus => Some(rec.consensus),
            Quantity::LeaderCapture => rec.leader_capture,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonMean {
    pub horizon: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub quantity: Quantity,
    pub runs: usize,
    pub horizon: u64,
    pub mean_uncensored: Option<f64>,
    pub mean_lower_bound: f64,
    pub censor_fraction: f64,
    pub ci95: Option<[f64; 2]>,
    pub analytic_bound: Bound,
    pub horizon_means: Vec<HorizonMean>,
    pub survival_slope: Option<f64>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn from_records(config: &ExperimentConfig, records: &[StoppingRecord]) -> Result<Self> {
        let params = &config.episode.params;
        let quantity = Quantity::for_params(params);
        let samples: Vec<(u64, bool)> = records
            .iter()
            .filter_map(|r| quantity.pick(r))
            .map(|s| (s.step, s.censored))
            .collect();
        if samples.is_empty() {
            return Err(Error::arg("no samples to summarize"));
        }
        let uncensored: Vec<f64> = samples
            .iter()
            .filter(|s| !s.1)
            .map(|s| s.0 as f64)
            .collect();
        let all: Vec<f64> = samples.iter().map(|s| s.0 as f64).collect();
        let censored = samples.len() - uncensored.len();

        let analytic_bound = match quantity {
            Quantity::Consensus => consensus_time_bound(&config.episode.init, params)?,
            Quantity::LeaderCapture => capture_time_bound(&config.episode.init, params)?,
        };
        let horizon_means = config
            .horizons
            .iter()
            .zip(truncated_means(&samples, &config.horizons))
            .map(|(&horizon, mean)| HorizonMean { horizon, mean })
            .collect();
        let t_lo = stats::median_step(&samples).unwrap_or(1);
        let curve = stats::survival_curve(&samples, t_lo, config.episode.horizon);

        let mut notes = Vec::new();
        if params.noise.is_silent() {
            notes.push("no noise: the divisive state is a fixed point".to_string());
        }
        if uncensored.len() < stats::MIN_NORMAL_SAMPLES {
            notes.push(format!(
                "{} uncensored samples: no normal-approximation interval",
                uncensored.len()
            ));
        }
        if censored > 0 {
            notes.push(format!(
                "{censored} runs censored at {}; mean_lower_bound counts them at the horizon",
                config.episode.horizon
            ));
        }
        Ok(EstimateReport {
            quantity,
            runs: samples.len(),
            horizon: config.episode.horizon,
            mean_uncensored: stats::mean(&uncensored),
            mean_lower_bound: stats::mean(&all).unwrap_or(0.0),
            censor_fraction: censored as f64 / samples.len() as f64,
            ci95: stats::normal_ci95(&uncensored),
            analytic_bound,
            horizon_means,
            survival_slope: stats::loglog_slope(&curve),
            notes,
        })
    }

    /// `Some(mean <= bound)` when the bound is finite and fewer than 5% of
    /// runs are censored; `None` when the comparison is not meaningful.
    pub fn bound_dominance(&self) -> Option<bool> {
        let bound = self.analytic_bound.finite()?;
        (self.censor_fraction < 0.05).then_some(self.mean_lower_bound <= bound)
    }
}

pub fn estimate_mean_stopping_time(config: &ExperimentConfig) -> Result<EstimateReport> {
    let records = batch_run(config)?;
    EstimateReport::from_records(config, &records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbe {
    pub quantity: Quantity,
    pub horizon_means: Vec<HorizonMean>,
    pub survival_slope: Option<f64>,
    pub censor_fraction: f64,
    pub strictly_increasing: bool,
    /// Relative change of the truncated mean between the last two horizons.
    pub last_relative_change: f64,
    pub noise_free: bool,
    pub label: String,
}

/// Truncated means across the horizon schedule plus the log-log survival
/// slope. Growth without bound across horizons is consistent with an
/// infinite expectation but cannot prove one.
pub fn tail_probe(config: &ExperimentConfig) -> Result<TailProbe> {
    if config.horizons.len() < 3 {
        return Err(Error::arg("tail probe needs at least 3 horizons"));
    }
    let report = estimate_mean_stopping_time(config)?;
    let means: Vec<f64> = report.horizon_means.iter().map(|h| h.mean).collect();
    let k = means.len();
    let noise_free = config.episode.params.noise.is_silent();
    Ok(TailProbe {
        quantity: report.quantity,
        strictly_increasing: means.windows(2).all(|w| w[0] < w[1]),
        last_relative_change: (means[k - 1] - means[k - 2]) / means[k - 2],
        horizon_means: report.horizon_means,
        survival_slope: report.survival_slope,
        censor_fraction: report.censor_fraction,
        noise_free,
        label: if noise_free {
            "noise-free: every run censored".to_string()
        } else {
            "consistency evidence, not proof".to_string()
        },
    })
}

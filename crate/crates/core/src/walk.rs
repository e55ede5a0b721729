//! Random-walk oracles for the merge and stopping-time analysis.
//!
//! All walks use the uniform noise law and draw their increments from a
//! [`NoiseStream`], so a walk fed the same stream as an episode sees the
//! same increments step for step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Bound;
use crate::noise::{derive_stream, NoiseParams, NoiseStream};
use crate::stats;

/// Safety cap for walks whose stopping time is integrable.
const INTEGRABLE_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSample {
    pub steps: u64,
    pub censored: bool,
    /// Walk value at the stopping step (or at the horizon when censored).
    pub value: f64,
}

/// `T_c = inf{t >= 1 : S_t > c}` for `S_t = X_1 + ... + X_t`.
pub fn first_passage_tc(
    noise: &NoiseParams,
    c: f64,
    stream: &mut NoiseStream,
    horizon: u64,
) -> Result<WalkSample> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::arg(format!(
            "threshold c must be nonnegative (got {c})"
        )));
    }
    let mut s = 0.0;
    for t in 1..=horizon {
        s += stream.draw(noise);
        if s > c {
            return Ok(WalkSample {
                steps: t,
                censored: false,
                value: s,
            });
        }
    }
    Ok(WalkSample {
        steps: horizon,
        censored: true,
        value: s,
    })
}

/// First `t >= 1` with `X_1 + ... + X_{t-1} + weight * X_t >= level`.
pub fn weighted_first_passage(
    noise: &NoiseParams,
    weight: f64,
    level: f64,
    stream: &mut NoiseStream,
    horizon: u64,
) -> WalkSample {
    let mut prefix = 0.0;
    let mut last = 0.0;
    for t in 1..=horizon {
        let x = stream.draw(noise);
        last = prefix + weight * x;
        if last >= level {
            return WalkSample {
                steps: t,
                censored: false,
                value: last,
            };
        }
        prefix += x;
    }
    WalkSample {
        steps: horizon,
        censored: true,
        value: last,
    }
}

/// `T_0' = inf{t >= 1 : Q_t >= 0}` with `Q_t = X_1 + ... + X_{t-1} + alpha X_t`.
pub fn weighted_walk_t0prime(
    noise: &NoiseParams,
    alpha: f64,
    stream: &mut NoiseStream,
    horizon: u64,
) -> Result<WalkSample> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::arg(format!("alpha must exceed 1 (got {alpha})")));
    }
    Ok(weighted_first_passage(noise, alpha, 0.0, stream, horizon))
}

/// The isolated-cluster merge walk: with `m` agents in the noisy agent's
/// cluster, `R_t = xi(1) + ... + xi(t-1) + m xi(t)` first reaches
/// `m (x2 - x1 - epsilon)` exactly when the noisy agent comes within
/// `epsilon` of the next cluster.
pub fn merge_walk(
    noise: &NoiseParams,
    cluster_size: usize,
    gap: f64,
    epsilon: f64,
    stream: &mut NoiseStream,
    horizon: u64,
) -> WalkSample {
    let m = cluster_size as f64;
    weighted_first_passage(noise, m, m * (gap - epsilon), stream, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exit {
    pub steps: u64,
    pub side: Side,
    pub value: f64,
}

/// First exit of `S_t` from `[-a, b]`: `S_t < -a` or `S_t > b`.
pub fn two_sided_exit(
    noise: &NoiseParams,
    a: f64,
    b: f64,
    stream: &mut NoiseStream,
) -> Result<Exit> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::arg("exit thresholds a and b must be positive"));
    }
    if noise.delta1 + noise.delta2 == 0.0 {
        return Err(Error::arg("degenerate increments never exit"));
    }
    let mut s = 0.0;
    let mut t = 0u64;
    loop {
        t += 1;
        s += stream.draw(noise);
        if s < -a {
            return Ok(Exit {
                steps: t,
                side: Side::Low,
                value: s,
            });
        }
        if s > b {
            return Ok(Exit {
                steps: t,
                side: Side::High,
                value: s,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldReport {
    pub samples: usize,
    pub mu: f64,
    pub mean_stopping_time: f64,
    pub mean_stopped_sum: f64,
    pub mu_times_mean_time: f64,
    /// `|E S_T - mu E T| / (mu E T)`.
    pub relative_gap: f64,
    /// Interval for the signed relative gap.
    pub gap_ci95: [f64; 2],
}

/// Estimates both sides of `E S_T = E X_1 * E T` for `T = T_c`, one walk
/// per run index of `master_seed`.
pub fn wald_check(
    noise: &NoiseParams,
    c: f64,
    master_seed: u64,
    samples: usize,
) -> Result<WaldReport> {
    let mu = noise.mean();
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::arg(
            "Wald check needs positive drift: T_c is not integrable for mean-zero increments",
        ));
    }
    if samples < 2 {
        return Err(Error::arg("Wald check needs at least 2 samples"));
    }
    let mut times = Vec::with_capacity(samples);
    let mut sums = Vec::with_capacity(samples);
    for k in 0..samples {
        let mut stream = derive_stream(master_seed, k as u64);
        let w = first_passage_tc(noise, c, &mut stream, INTEGRABLE_CAP)?;
        if w.censored {
            return Err(Error::arg(format!(
                "walk {k} did not stop within {INTEGRABLE_CAP} steps"
            )));
        }
        times.push(w.steps as f64);
        sums.push(w.value);
    }
    let mean_t = stats::mean(&times).unwrap_or(0.0);
    let mean_s = stats::mean(&sums).unwrap_or(0.0);
    let rhs = mu * mean_t;
    let diffs: Vec<f64> = sums.iter().zip(&times).map(|(s, t)| s - mu * t).collect();
    let se = stats::std_dev(&diffs).unwrap_or(0.0) / (samples as f64).sqrt();
    let signed = (mean_s - rhs) / rhs;
    let half = stats::Z95 * se / rhs;
    Ok(WaldReport {
        samples,
        mu,
        mean_stopping_time: mean_t,
        mean_stopped_sum: mean_s,
        mu_times_mean_time: rhs,
        relative_gap: signed.abs(),
        gap_ci95: [signed - half, signed + half],
    })
}

/// Which stopping rule a [`WalkReport`] summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "walk", rename_all = "snake_case")]
pub enum WalkKind {
    FirstPassage {
        c: f64,
    },
    WeightedZero {
        alpha: f64,
    },
    Merge {
        cluster_size: usize,
        gap: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub delta1: f64,
    pub delta2: f64,
    #[serde(flatten)]
    pub kind: WalkKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub params: WalkParams,
    pub sample_count: usize,
    pub horizon: u64,
    /// Mean over uncensored samples.
    pub mean: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub censor_fraction: f64,
    pub bound: Option<Bound>,
    pub survival_curve: Vec<(u64, f64)>,
}

/// Runs `sample_count` walks of one kind and summarizes them.
pub fn walk_experiment(
    noise: &NoiseParams,
    kind: WalkKind,
    master_seed: u64,
    sample_count: usize,
    horizon: u64,
) -> Result<WalkReport> {
    if sample_count == 0 {
        return Err(Error::arg("sample_count must be at least 1"));
    }
    let mut samples = Vec::with_capacity(sample_count);
    for k in 0..sample_count {
        let mut stream = derive_stream(master_seed, k as u64);
        let w = match kind {
            WalkKind::FirstPassage { c } => first_passage_tc(noise, c, &mut stream, horizon)?,
            WalkKind::WeightedZero { alpha } => {
                weighted_walk_t0prime(noise, alpha, &mut stream, horizon)?
            }
            WalkKind::Merge {
                cluster_size,
                gap,
                epsilon,
            } => merge_walk(noise, cluster_size, gap, epsilon, &mut stream, horizon),
        };
        samples.push((w.steps, w.censored));
    }
    let uncensored: Vec<f64> = samples
        .iter()
        .filter(|s| !s.1)
        .map(|s| s.0 as f64)
        .collect();
    let censored = samples.len() - uncensored.len();
    let bound = match kind {
        WalkKind::FirstPassage { c } if noise.mean() > 0.0 => {
            Some(Bound::Finite((c + noise.delta2) / noise.mean()))
        }
        _ if noise.is_neutral() => Some(Bound::Infinite),
        _ => None,
    };
    let t_lo = stats::median_step(&samples).unwrap_or(1);
    Ok(WalkReport {
        params: WalkParams {
            delta1: noise.delta1,
            delta2: noise.delta2,
            kind,
        },
        sample_count,
        horizon,
        mean: stats::mean(&uncensored),
        ci95: stats::normal_ci95(&uncensored),
        censor_fraction: censored as f64 / sample_count as f64,
        bound,
        survival_curve: stats::survival_curve(&samples, t_lo, horizon),
    })
}

/// Mean of `min(T, h)` for each horizon `h`; censored samples count as `h`.
pub fn truncated_means(samples: &[(u64, bool)], horizons: &[u64]) -> Vec<f64> {
    horizons
        .iter()
        .map(|&h| {
            let total: f64 = samples
                .iter()
                .map(|&(t, censored)| if censored { h } else { t.min(h) } as f64)
                .sum();
            total / samples.len().max(1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(d: f64) -> NoiseParams {
        NoiseParams::new(d, d).unwrap()
    }

    #[test]
    fn first_passage_respects_overshoot_bound() {
        let noise = NoiseParams::new(0.0, 0.05).unwrap();
        let mut total = 0.0;
        for k in 0..2000 {
            let mut s = derive_stream(11, k);
            let w = first_passage_tc(&noise, 0.01, &mut s, 1_000_000).unwrap();
            assert!(!w.censored && w.steps >= 1);
            assert!(w.value > 0.01 && w.value - 0.01 <= 0.05);
            total += w.steps as f64;
        }
        let mean = total / 2000.0;
        assert!(mean <= 2.0 * (0.01 + 0.05) / 0.05, "{mean}");
    }

    #[test]
    fn large_first_draw_stops_immediately() {
        let noise = NoiseParams::new(0.0, 0.05).unwrap();
        for k in 0..200 {
            let mut probe = derive_stream(4, k);
            let first = probe.draw(&noise);
            let mut s = derive_stream(4, k);
            let w = first_passage_tc(&noise, 0.02, &mut s, 100).unwrap();
            assert_eq!(w.steps == 1, first > 0.02);
        }
    }

    #[test]
    fn zero_threshold_one_sided_noise_stops_at_one() {
        // With delta1 = 0 and c = 0, S_1 > 0 almost surely, so E S_T = mu.
        let noise = NoiseParams::new(0.0, 0.05).unwrap();
        for k in 0..500 {
            let w = first_passage_tc(&noise, 0.0, &mut derive_stream(1, k), 10).unwrap();
            assert_eq!(w.steps, 1);
        }
        assert!(first_passage_tc(&noise, -0.1, &mut derive_stream(1, 0), 10).is_err());
    }

    #[test]
    fn t0prime_rejects_small_alpha() {
        assert!(weighted_walk_t0prime(&sym(0.05), 1.0, &mut derive_stream(0, 0), 10).is_err());
    }

    #[test]
    fn t0prime_first_step_is_a_coin_flip() {
        let n = 20_000;
        let hits = (0..n)
            .filter(|&k| {
                let w =
                    weighted_walk_t0prime(&sym(0.05), 3.0, &mut derive_stream(2, k), 1).unwrap();
                !w.censored
            })
            .count();
        let p = hits as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 4.0 * sigma, "{p}");
    }

    #[test]
    fn merge_walk_matches_scaled_weighted_walk() {
        // R_t / m = (prefix sum) / m + xi(t): dividing by m and the level by
        // m gives the same stopping time as the weighted walk with weight m.
        let noise = NoiseParams::new(0.048, 0.05).unwrap();
        for k in 0..50 {
            let a = merge_walk(&noise, 4, 1.5, 1.0, &mut derive_stream(8, k), 100_000);
            let b =
                weighted_first_passage(&noise, 4.0, 4.0 * 0.5, &mut derive_stream(8, k), 100_000);
            assert_eq!(a.steps, b.steps);
        }
    }

    #[test]
    fn two_sided_exit_examples() {
        assert!(two_sided_exit(&NoiseParams::none(), 1.0, 1.0, &mut derive_stream(0, 0)).is_err());

        let n = 20_000;
        let mut immediate = 0;
        let mut high = 0;
        for k in 0..n {
            let e = two_sided_exit(&sym(0.05), 0.01, 0.01, &mut derive_stream(3, k)).unwrap();
            immediate += usize::from(e.steps == 1);
            high += usize::from(e.side == Side::High);
        }
        // P(|X_1| > 0.01) = 0.08 / 0.1 = 0.8.
        let p = immediate as f64 / n as f64;
        assert!((p - 0.8).abs() < 4.0 * (0.16 / n as f64).sqrt(), "{p}");
        let q = high as f64 / n as f64;
        assert!((q - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{q}");

        let up = NoiseParams::new(0.0, 0.05).unwrap();
        for k in 0..500 {
            let e = two_sided_exit(&up, 0.3, 0.3, &mut derive_stream(3, k)).unwrap();
            assert_eq!(e.side, Side::High);
        }
    }

    #[test]
    fn wald_refuses_zero_drift() {
        assert!(wald_check(&sym(0.05), 0.5, 0, 100).is_err());
    }

    #[test]
    fn wald_small_sample_is_close() {
        let noise = NoiseParams::new(0.048, 0.05).unwrap();
        let r = wald_check(&noise, 0.5, 17, 4000).unwrap();
        assert!(r.relative_gap < 0.05, "{r:?}");
        assert!(r.gap_ci95[0] <= r.gap_ci95[1]);
    }

    #[test]
    fn truncated_means_cap_samples() {
        let s = [(5, false), (50, false), (500, true)];
        assert_eq!(
            truncated_means(&s, &[10, 100, 500]),
            vec![25.0 / 3.0, 155.0 / 3.0, 555.0 / 3.0]
        );
    }

    #[test]
    fn walk_report_fields() {
        let noise = NoiseParams::new(0.0, 0.05).unwrap();
        let r = walk_experiment(&noise, WalkKind::FirstPassage { c: 0.01 }, 1, 300, 1000).unwrap();
        assert_eq!(r.censor_fraction, 0.0);
        assert_eq!(r.bound, Some(Bound::Finite((0.01 + 0.05) / 0.025)));
        assert!(r.mean.unwrap() <= 2.4);
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "params",
            "sample_count",
            "mean",
            "ci95",
            "censor_fraction",
            "bound",
            "survival_curve",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let neutral = walk_experiment(
            &sym(0.05),
            WalkKind::WeightedZero { alpha: 2.0 },
            1,
            50,
            1000,
        )
        .unwrap();
        assert_eq!(neutral.bound, Some(Bound::Infinite));
        assert!(walk_experiment(&noise, WalkKind::FirstPassage { c: 0.01 }, 1, 0, 10).is_err());
    }
}

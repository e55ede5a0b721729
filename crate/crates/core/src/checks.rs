//! Verification suite: each check runs a seeded Monte Carlo experiment and
//! compares it with an analytic bound or an oracle. Tolerances are fixed here;
//! only sample sizes live in [`Scale`].
//!
//! Checks of infinite expectations and of limsup bounds are finite-sample
//! probes and are labelled as consistency evidence.

use std::fmt;

use serde::Serialize;

use crate::dynamics::{
    d_v, d_v_a, run_noise_free_to_fixed_point, DivisiveInit, ModelParams, OpinionState,
};
use crate::episode::{run_episode, EpisodeConfig, RecordMode, StopRule};
use crate::error::Result;
use crate::estimator::{
    capture_time_bound, consensus_time_bound, estimate_mean_stopping_time, tail_probe,
    EstimateReport, ExperimentConfig,
};
use crate::noise::{derive_stream, NoiseParams};
use crate::walk::{merge_walk, wald_check};

pub const EPSILON: f64 = 1.0;
pub const LEADER: f64 = 4.01;
pub const ORIENTED: (f64, f64) = (0.048, 0.05);
pub const NEUTRAL: (f64, f64) = (0.05, 0.05);

/// Largest admissible censor fraction for the oriented consensus check.
pub const MAX_CENSOR_ORIENTED: f64 = 0.01;
/// Minimum number of leader runs whose capture time must be uncensored.
pub const MIN_LEADER_CAPTURES: usize = 99;
/// Offset after `T_l` before the long-run leader band is checked.
pub const LEADER_SETTLE: u64 = 200;
/// Length of the leader band window.
pub const LEADER_WINDOW: u64 = 10_000;
/// Band multiple of delta2: `2 delta2` plus slack `delta2`.
pub const LEADER_BAND: f64 = 3.0;
/// Relative tolerance of the Wald identity.
pub const WALD_TOLERANCE: f64 = 0.02;
/// Steps simulated past `T` in the persistence check.
pub const PERSISTENCE_STEPS: u64 = 100_000;
/// Rounding allowance in the leader contraction envelope.
const ENVELOPE_SLACK: f64 = 1e-12;

/// Sample sizes and horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scale {
    pub noise_free_states: usize,
    pub noise_free_max_n: usize,
    pub noise_free_max_steps: u64,
    pub persistence_runs: usize,
    pub oriented_runs: usize,
    pub oriented_horizon: u64,
    pub neutral_runs: usize,
    pub neutral_horizons: Vec<u64>,
    pub leader_runs: usize,
    pub leader_horizon: u64,
    pub oracle_instances: usize,
    pub wald_samples: usize,
}

impl Scale {
    pub fn acceptance() -> Self {
        Scale {
            noise_free_states: 1000,
            noise_free_max_n: 20,
            noise_free_max_steps: 10_000,
            persistence_runs: 100,
            oriented_runs: 200,
            oriented_horizon: 3_100_000,
            neutral_runs: 50,
            neutral_horizons: vec![100_000, 1_000_000, 10_000_000],
            leader_runs: 100,
            leader_horizon: 10_000_000,
            oracle_instances: 100,
            wald_samples: 100_000,
        }
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale::acceptance()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub evidence: &'static str,
    pub detail: String,
}

impl CheckOutcome {
    fn new(
        id: u8,
        name: &'static str,
        evidence: &'static str,
        passed: bool,
        detail: String,
    ) -> Self {
        CheckOutcome {
            id,
            name,
            passed,
            evidence,
            detail,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{mark}] {} {} ({}): {}",
            self.id, self.name, self.evidence, self.detail
        )
    }
}

/// The two-cluster-level divisive state used by every figure configuration.
pub fn figure_init() -> DivisiveInit {
    DivisiveInit::from_clusters(&[(0.0, 4), (1.5, 4), (3.0, 2)])
}

pub fn figure_params((delta1, delta2): (f64, f64), leader: Option<f64>) -> Result<ModelParams> {
    let p = ModelParams::new(10, EPSILON, NoiseParams::new(delta1, delta2)?)?;
    match leader {
        Some(a) => p.with_leader(a),
        None => Ok(p),
    }
}

/// Random noise-free states all reach an exact fixed point whose opinions
/// are pairwise equal or more than epsilon apart.
pub fn noise_free_dichotomy(seed: u64, scale: &Scale) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    let mut longest = 0;
    // Continuous states, then states on the quarter lattice where pairs at
    // distance exactly epsilon are common, then the bare boundary pair.
    let lattice = scale.noise_free_states / 5;
    let mut states = Vec::with_capacity(scale.noise_free_states + lattice + 1);
    for k in 0..scale.noise_free_states + lattice {
        let mut rng = derive_stream(seed, k as u64);
        let n = 1 + (rng.uniform() * scale.noise_free_max_n as f64) as usize;
        let x: Vec<f64> = if k < scale.noise_free_states {
            (0..n).map(|_| 5.0 * rng.uniform()).collect()
        } else {
            (0..n)
                .map(|_| (rng.uniform() * 21.0).floor() / 4.0)
                .collect()
        };
        states.push(x);
    }
    states.push(vec![0.0, EPSILON]);
    for (k, x) in states.into_iter().enumerate() {
        let n = x.len();
        let params = ModelParams::noise_free(n, EPSILON)?;
        match run_noise_free_to_fixed_point(
            &OpinionState::new(x),
            &params,
            scale.noise_free_max_steps,
        ) {
            Ok((end, steps)) => {
                longest = longest.max(steps);
                let split = end
                    .x
                    .iter()
                    .any(|a| end.x.iter().any(|b| a != b && (a - b).abs() <= EPSILON));
                if split {
                    failures.push(format!(
                        "state {k}: terminal pair within epsilon but unequal"
                    ));
                }
            }
            Err(e) => failures.push(format!("state {k}: {e}")),
        }
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{} random, {lattice} lattice and 1 boundary state reached exact fixed points (longest {longest} steps)",
            scale.noise_free_states
        )
    } else {
        failures.join("; ")
    };
    Ok(CheckOutcome::new(
        1,
        "noise-free-dichotomy",
        "exact",
        passed,
        detail,
    ))
}

/// After consensus, the diameter never exceeds delta2 again.
pub fn cohesion_persistence(seed: u64, scale: &Scale) -> Result<CheckOutcome> {
    let params = figure_params(ORIENTED, None)?;
    let delta2 = params.noise.delta2;
    let cfg = EpisodeConfig::new(figure_init(), params, scale.oriented_horizon)
        .record(RecordMode::Metrics)
        .stop(StopRule::AfterDetection {
            extra_steps: PERSISTENCE_STEPS,
        });
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..scale.persistence_runs {
        let (out, rec) = run_episode(&cfg, &mut derive_stream(seed, k as u64))?;
        let Some(t) = rec.consensus.value() else {
            failures.push(format!("run {k}: T censored"));
            continue;
        };
        let rows = out.metrics().unwrap_or_default();
        if rec.steps < t + PERSISTENCE_STEPS {
            failures.push(format!("run {k}: horizon cut the continuation short"));
        }
        for r in rows.iter().filter(|r| r.t > t) {
            worst = worst.max(r.d_v);
            if r.d_v > delta2 {
                failures.push(format!("run {k}: d_V({}) = {} > delta2", r.t, r.d_v));
                break;
            }
        }
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{} runs, {PERSISTENCE_STEPS} steps past T each: max d_V = {worst} <= {delta2}",
            scale.persistence_runs
        )
    } else {
        failures.join("; ")
    };
    Ok(CheckOutcome::new(
        2,
        "cohesion-persistence",
        "exact",
        passed,
        detail,
    ))
}

/// Oriented noise: censor fraction and censored-aware mean of `T` against
/// the consensus bound. Returns the report for reuse by the tail check.
pub fn oriented_consensus(
    seed: u64,
    parallelism: usize,
    scale: &Scale,
) -> Result<(CheckOutcome, EstimateReport)> {
    let params = figure_params(ORIENTED, None)?;
    let bound = consensus_time_bound(&figure_init(), &params)?;
    let episode = EpisodeConfig::new(figure_init(), params, scale.oriented_horizon);
    let cfg = ExperimentConfig::new(episode, scale.oriented_runs, seed).parallelism(parallelism);
    let report = estimate_mean_stopping_time(&cfg)?;
    let limit = bound.finite().unwrap_or(f64::INFINITY);
    let passed = report.censor_fraction <= MAX_CENSOR_ORIENTED && report.mean_lower_bound <= limit;
    let detail = format!(
        "{} runs: censor fraction {} (max {MAX_CENSOR_ORIENTED}), mean T {:.1} vs bound {bound}",
        report.runs, report.censor_fraction, report.mean_lower_bound
    );
    Ok((
        CheckOutcome::new(3, "oriented-consensus-bound", "statistical", passed, detail),
        report,
    ))
}

/// Neutral noise: truncated means of `T` keep growing with the horizon and
/// exceed the oriented mean.
pub fn neutral_tail(
    seed: u64,
    parallelism: usize,
    oriented_mean: f64,
    scale: &Scale,
) -> Result<CheckOutcome> {
    let params = figure_params(NEUTRAL, None)?;
    let horizon = *scale.neutral_horizons.last().unwrap_or(&1);
    let episode = EpisodeConfig::new(figure_init(), params, horizon);
    let cfg = ExperimentConfig::new(episode, scale.neutral_runs, seed)
        .horizons(scale.neutral_horizons.clone())
        .parallelism(parallelism);
    let probe = tail_probe(&cfg)?;
    let at = |h: u64| {
        probe
            .horizon_means
            .iter()
            .find(|m| m.horizon == h)
            .map(|m| m.mean)
    };
    let mid = scale.neutral_horizons.get(1).copied().unwrap_or(horizon);
    let neutral_mid = at(mid).unwrap_or(f64::NAN);
    let passed = probe.strictly_increasing && oriented_mean < neutral_mid;
    let means: Vec<String> = probe
        .horizon_means
        .iter()
        .map(|m| format!("{}:{:.1}", m.horizon, m.mean))
        .collect();
    let detail = format!(
        "truncated means [{}], censored {:.2}, slope {}, oriented mean {oriented_mean:.1} vs neutral {neutral_mid:.1} at {mid}",
        means.join(", "),
        probe.censor_fraction,
        probe
            .survival_slope
            .map_or("n/a".to_string(), |s| format!("{s:.3}")),
    );
    Ok(CheckOutcome::new(
        4,
        "neutral-heavy-tail",
        "consistency evidence",
        passed,
        detail,
    ))
}

/// Leader runs: capture frequency, mean capture time against the leader
/// bound, the long-run band around the leader, and the geometric
/// contraction envelope driven by the recorded draws.
pub fn leader_capture(seed: u64, scale: &Scale) -> Result<CheckOutcome> {
    let params = figure_params(ORIENTED, Some(LEADER))?;
    let bound = capture_time_bound(&figure_init(), &params)?;
    let eps = params.epsilon;
    let delta2 = params.noise.delta2;
    let n = params.n as f64;
    let rho = n / (n + 1.0);
    let noisy = params.noisy_agent;
    let band = LEADER_BAND * delta2;
    let cfg = EpisodeConfig::new(figure_init(), params.clone(), scale.leader_horizon)
        .record(RecordMode::Full)
        .stop(StopRule::AfterDetection {
            extra_steps: LEADER_SETTLE + LEADER_WINDOW,
        });

    let mut failures = Vec::new();
    let mut captures = 0;
    let mut total = 0.0;
    let mut worst_band: f64 = 0.0;
    for k in 0..scale.leader_runs {
        let (out, rec) = run_episode(&cfg, &mut derive_stream(seed, k as u64))?;
        let tl = rec.leader_capture.expect("leader configured");
        total += tl.step as f64;
        let Some(tl) = tl.value() else { continue };
        captures += 1;
        if rec.consensus.value().is_none_or(|t| t > tl) {
            failures.push(format!("run {k}: T_l = {tl} precedes T"));
        }
        let Some(traj) = out.trajectory() else {
            continue;
        };
        let last = traj.len() as u64 - 1;
        if last < tl + LEADER_SETTLE + LEADER_WINDOW {
            failures.push(format!("run {k}: horizon cut the leader window short"));
        }
        for t in tl..=last {
            let x = traj.state(t as usize);
            if d_v(x).max(d_v_a(x, LEADER)) > eps {
                failures.push(format!("run {k}: cohesion around the leader lost at {t}"));
                break;
            }
        }
        for t in (tl + LEADER_SETTLE + 1)..=last {
            let dist = d_v_a(traj.state(t as usize), LEADER);
            worst_band = worst_band.max(dist);
            if dist > band {
                failures.push(format!("run {k}: d_V^A({t}) = {dist} > {band}"));
                break;
            }
        }
        // From T_l + 1 on, every non-noisy agent obeys
        // |A - x_j(t+1)| <= rho |A - x_j(t)| + |xi(t)| / (n + 1).
        let start = tl + 1;
        for j in (0..params.n).filter(|&j| j != noisy) {
            let mut envelope = (LEADER - traj.state(start as usize)[j]).abs();
            for t in start..last {
                let xi = traj.xi()[t as usize];
                envelope = rho * envelope + xi.abs() / (n + 1.0);
                let dist = (LEADER - traj.state(t as usize + 1)[j]).abs();
                if dist > envelope * (1.0 + ENVELOPE_SLACK) + ENVELOPE_SLACK {
                    failures.push(format!(
                        "run {k}, agent {}: |A - x| = {dist} above envelope {envelope} at {}",
                        j + 1,
                        t + 1
                    ));
                    break;
                }
            }
        }
    }
    let mean = total / scale.leader_runs.max(1) as f64;
    let limit = bound.finite().unwrap_or(f64::INFINITY);
    if captures < MIN_LEADER_CAPTURES.min(scale.leader_runs) {
        failures.push(format!("only {captures} captures"));
    }
    if mean > limit {
        failures.push(format!("mean T_l {mean} above bound {bound}"));
    }
    failures.truncate(10);
    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{captures}/{} captured, mean T_l {mean:.1} vs bound {bound}, max d_V^A in band window {worst_band:.4} <= {band}",
            scale.leader_runs
        )
    } else {
        failures.join("; ")
    };
    Ok(CheckOutcome::new(
        5,
        "leader-capture",
        "statistical + exact envelope",
        passed,
        detail,
    ))
}

/// Two-cluster instances: the merge time seen by the episode equals the
/// first passage of the merge walk fed the same noise stream.
pub fn walk_oracle(seed: u64, scale: &Scale) -> Result<CheckOutcome> {
    const HORIZON: u64 = 10_000_000;
    let mut failures = Vec::new();
    let mut sum = 0u64;
    for k in 0..scale.oracle_instances as u64 {
        let mut setup = derive_stream(seed, 2 * k);
        let m1 = 1 + (setup.uniform() * 4.0) as usize;
        let m2 = 1 + (setup.uniform() * 4.0) as usize;
        let n = m1 + m2;
        let delta2 = EPSILON / (2 * n) as f64;
        let delta1 = 0.95 * delta2 * setup.uniform();
        let low = 2.0 * setup.uniform() - 1.0;
        let gap = EPSILON + 0.01 + 0.3 * setup.uniform();
        let init = DivisiveInit::from_clusters(&[(low, m1), (low + gap, m2)]);
        let noise = NoiseParams::new(delta1, delta2)?;
        let params = ModelParams::new(n, EPSILON, noise)?;
        let cfg = EpisodeConfig::new(init.clone(), params, HORIZON)
            .record(RecordMode::None)
            .stop(StopRule::AfterDetection { extra_steps: 0 });
        let (_, rec) = run_episode(&cfg, &mut derive_stream(seed, 2 * k + 1))?;
        let walk = merge_walk(
            &noise,
            m1,
            init.cluster_values[1] - init.cluster_values[0],
            EPSILON,
            &mut derive_stream(seed, 2 * k + 1),
            HORIZON,
        );
        let t_bar = rec.merges[0];
        sum += t_bar.step;
        if t_bar.censored || walk.censored || t_bar.step != walk.steps {
            failures.push(format!(
                "instance {k}: episode T_bar {:?} vs walk {:?}",
                t_bar.value(),
                (!walk.censored).then_some(walk.steps)
            ));
        }
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{} instances agree exactly (mean T_bar {:.1})",
            scale.oracle_instances,
            sum as f64 / scale.oracle_instances.max(1) as f64
        )
    } else {
        failures.join("; ")
    };
    Ok(CheckOutcome::new(
        6,
        "walk-oracle-equivalence",
        "exact",
        passed,
        detail,
    ))
}

/// Wald's identity for the oriented first-passage walk.
pub fn wald_identity(seed: u64, scale: &Scale) -> Result<CheckOutcome> {
    let noise = NoiseParams::new(ORIENTED.0, ORIENTED.1)?;
    let r = wald_check(&noise, 0.5, seed, scale.wald_samples)?;
    let passed = r.relative_gap < WALD_TOLERANCE;
    let detail = format!(
        "{} walks: E S_T = {:.6}, mu E T = {:.6}, relative gap {:.4} (ci [{:.4}, {:.4}], limit {WALD_TOLERANCE})",
        r.samples, r.mean_stopped_sum, r.mu_times_mean_time, r.relative_gap, r.gap_ci95[0], r.gap_ci95[1]
    );
    Ok(CheckOutcome::new(
        7,
        "wald-identity",
        "statistical",
        passed,
        detail,
    ))
}

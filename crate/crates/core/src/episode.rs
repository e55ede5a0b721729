//! Single-episode driver and stopping-time detectors.
//!
//! Three stopping times are tracked:
//!
//! - `T`: first step with opinion diameter `d_V <= epsilon`;
//! - `T_bar`: for each cluster beyond the noisy agent's own (in the
//!   direction the noise pushes), the first step at which the noisy agent is
//!   within `epsilon` of every member of that cluster. Merges are detected in
//!   order, so the list is nondecreasing;
//! - `T_l`: first step with `max_i |x_i - A| <= epsilon` (leader runs only).
//!
//! Detectors that have not fired when the horizon is reached are censored at
//! the horizon.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    advance, d_v, d_v_a, validate_divisive_init, ClusterPartition, DivisiveInit, ModelParams,
};
use crate::error::{Error, Result};
use crate::noise::{NoiseStream, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Every state and noise draw.
    #[default]
    Full,
    /// `(t, d_V, d_V^A, x_noisy, xi)` per step.
    Metrics,
    /// Stopping record only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Always simulate `horizon` steps.
    #[default]
    Horizon,
    /// Stop `extra_steps` after every applicable detector has fired (or at
    /// the horizon, whichever comes first).
    AfterDetection { extra_steps: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub init: DivisiveInit,
    pub params: ModelParams,
    pub horizon: u64,
    #[serde(default)]
    pub record: RecordMode,
    #[serde(default)]
    pub stop: StopRule,
}

impl EpisodeConfig {
    pub fn new(init: DivisiveInit, params: ModelParams, horizon: u64) -> Self {
        EpisodeConfig {
            init,
            params,
            horizon,
            record: RecordMode::Full,
            stop: StopRule::Horizon,
        }
    }

    pub fn record(mut self, record: RecordMode) -> Self {
        self.record = record;
        self
    }

    pub fn stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon < 1 {
            return Err(Error::arg("horizon must be at least 1"));
        }
        validate_divisive_init(&self.init, &self.params)?;
        Ok(())
    }
}

/// A first-hit time, or the horizon as a lower bound when censored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopTime {
    pub step: u64,
    pub censored: bool,
}

impl StopTime {
    pub fn hit(step: u64) -> Self {
        StopTime {
            step,
            censored: false,
        }
    }

    pub fn censored_at(horizon: u64) -> Self {
        StopTime {
            step: horizon,
            censored: true,
        }
    }

    fn from_option(t: Option<u64>, horizon: u64) -> Self {
        t.map_or(Self::censored_at(horizon), Self::hit)
    }

    /// The hit time if uncensored.
    pub fn value(&self) -> Option<u64> {
        (!self.censored).then_some(self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRecord {
    #[serde(rename = "T")]
    pub consensus: StopTime,
    #[serde(rename = "T_bar")]
    pub merges: Vec<StopTime>,
    #[serde(rename = "T_l", default, skip_serializing_if = "Option::is_none")]
    pub leader_capture: Option<StopTime>,
    pub horizon: u64,
    /// Last simulated step.
    pub steps: u64,
}

/// States and noise draws of one episode. Row `k` is the state at step `k`;
/// `xi[k]` is the draw applied to reach it (`xi[0] = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    values: Vec<f64>,
    xi: Vec<f64>,
    leader: Option<f64>,
}

impl Trajectory {
    pub fn new(n: usize, leader: Option<f64>) -> Self {
        Trajectory {
            n,
            values: Vec::new(),
            xi: Vec::new(),
            leader,
        }
    }

    pub fn push(&mut self, x: &[f64], xi: f64) {
        assert_eq!(x.len(), self.n, "state width");
        self.values.extend_from_slice(x);
        self.xi.push(xi);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn leader(&self) -> Option<f64> {
        self.leader
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn state_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n.max(1)).take(self.len())
    }

    /// Writes `t,x_1,...,x_n[,leader],xi` with shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("x_{i}")));
        if self.leader.is_some() {
            header.push("leader".into());
        }
        header.push("xi".into());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (k, x) in self.states().enumerate() {
            row.clear();
            row.push(k.to_string());
            row.extend(x.iter().map(f64::to_string));
            if let Some(a) = self.leader {
                row.push(a.to_string());
            }
            row.push(self.xi[k].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"t") || cols.last() != Some(&"xi") {
            return Err(Error::Format(
                "header must start with t and end with xi".into(),
            ));
        }
        let has_leader = cols.len() >= 3 && cols[cols.len() - 2] == "leader";
        let n = cols.len() - 2 - usize::from(has_leader);
        for (i, c) in cols[1..=n].iter().enumerate() {
            if *c != format!("x_{}", i + 1) {
                return Err(Error::Format(format!("unexpected column {c}")));
            }
        }
        let parse = |s: &str, line: usize| {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("row {line}: {e}")))
        };
        let mut traj = Trajectory::new(n, None);
        let mut x = vec![0.0; n];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let t: usize = rec[0]
                .parse()
                .map_err(|e| Error::Format(format!("row {line}: {e}")))?;
            if t != line {
                return Err(Error::Format(format!(
                    "row {line}: expected t={line}, got {t}"
                )));
            }
            for (i, v) in x.iter_mut().enumerate() {
                *v = parse(&rec[i + 1], line)?;
            }
            if has_leader {
                let a = parse(&rec[n + 1], line)?;
                traj.leader.get_or_insert(a);
            }
            traj.push(&x, parse(&rec[rec.len() - 1], line)?);
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: u64,
    pub d_v: f64,
    pub d_v_a: Option<f64>,
    pub x_noisy: f64,
    pub xi: f64,
}

/// Writes `t,d_V,d_V_A,x_noisy,xi`; `d_V_A` is empty without a leader.
pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "d_V", "d_V_A", "x_noisy", "xi"])?;
    for r in rows {
        out.write_record([
            r.t.to_string(),
            r.d_v.to_string(),
            r.d_v_a.map(|v| v.to_string()).unwrap_or_default(),
            r.x_noisy.to_string(),
            r.xi.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeOutput {
    Trajectory(Trajectory),
    Metrics(Vec<MetricsRow>),
    None,
}

impl EpisodeOutput {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            EpisodeOutput::Trajectory(t) => Some(t),
            _ => None,
        }
    }

    pub fn metrics(&self) -> Option<&[MetricsRow]> {
        match self {
            EpisodeOutput::Metrics(m) => Some(m),
            _ => None,
        }
    }
}

/// Sequential merge detector: one target cluster at a time, in the order
/// the noisy agent meets them.
#[derive(Debug, Clone)]
struct MergeTracker {
    targets: Vec<Range<usize>>,
    sign: f64,
    noisy: usize,
    epsilon: f64,
    hits: Vec<u64>,
}

impl MergeTracker {
    fn new(
        partition: &ClusterPartition,
        noisy: usize,
        epsilon: f64,
        orientation: Orientation,
    ) -> Self {
        let own = partition.cluster_of(noisy);
        let targets = match (own, orientation) {
            (None, _) => Vec::new(),
            (Some(g), Orientation::Upward) => partition.0[g + 1..].to_vec(),
            (Some(g), Orientation::Downward) => partition.0[..g].iter().rev().cloned().collect(),
        };
        MergeTracker {
            targets,
            sign: orientation.sign(),
            noisy,
            epsilon,
            hits: Vec::new(),
        }
    }

    #[inline]
    fn observe(&mut self, t: u64, x: &[f64]) {
        let anchor = x[self.noisy];
        while let Some(r) = self.targets.get(self.hits.len()) {
            if x[r.clone()]
                .iter()
                .all(|&v| self.sign * (v - anchor) <= self.epsilon)
            {
                self.hits.push(t);
            } else {
                break;
            }
        }
    }

    fn done(&self) -> bool {
        self.hits.len() == self.targets.len()
    }

    fn times(&self, horizon: u64) -> Vec<StopTime> {
        (0..self.targets.len())
            .map(|k| StopTime::from_option(self.hits.get(k).copied(), horizon))
            .collect()
    }
}

struct Detectors {
    epsilon: f64,
    leader: Option<f64>,
    consensus: Option<u64>,
    capture: Option<u64>,
    merges: MergeTracker,
}

impl Detectors {
    fn new(partition: &ClusterPartition, params: &ModelParams) -> Self {
        Detectors {
            epsilon: params.epsilon,
            leader: params.leader,
            consensus: None,
            capture: None,
            merges: MergeTracker::new(
                partition,
                params.noisy_agent,
                params.epsilon,
                params.noise.orientation,
            ),
        }
    }

    #[inline]
    fn observe(&mut self, t: u64, x: &[f64]) {
        if !self.merges.done() {
            self.merges.observe(t, x);
        }
        if self.consensus.is_none() && d_v(x) <= self.epsilon {
            self.consensus = Some(t);
        }
        if let Some(a) = self.leader {
            if self.capture.is_none() && d_v_a(x, a) <= self.epsilon {
                self.capture = Some(t);
            }
        }
    }

    fn done(&self) -> bool {
        self.consensus.is_some()
            && self.merges.done()
            && (self.leader.is_none() || self.capture.is_some())
    }

    fn record(&self, horizon: u64, steps: u64) -> StoppingRecord {
        StoppingRecord {
            consensus: StopTime::from_option(self.consensus, horizon),
            merges: self.merges.times(horizon),
            leader_capture: self
                .leader
                .map(|_| StopTime::from_option(self.capture, horizon)),
            horizon,
            steps,
        }
    }
}

enum Recorder {
    Full(Trajectory),
    Metrics(Vec<MetricsRow>),
    None,
}

impl Recorder {
    #[inline]
    fn push(&mut self, t: u64, x: &[f64], xi: f64, params: &ModelParams) {
        match self {
            Recorder::Full(traj) => traj.push(x, xi),
            Recorder::Metrics(rows) => rows.push(MetricsRow {
                t,
                d_v: d_v(x),
                d_v_a: params.leader.map(|a| d_v_a(x, a)),
                x_noisy: x[params.noisy_agent],
                xi,
            }),
            Recorder::None => {}
        }
    }

    fn finish(self) -> EpisodeOutput {
        match self {
            Recorder::Full(t) => EpisodeOutput::Trajectory(t),
            Recorder::Metrics(m) => EpisodeOutput::Metrics(m),
            Recorder::None => EpisodeOutput::None,
        }
    }
}

/// Simulates one episode from the divisive initial state, drawing one noise
/// value per step from `stream`. Deterministic in `(config, stream)`.
pub fn run_episode(
    config: &EpisodeConfig,
    stream: &mut NoiseStream,
) -> Result<(EpisodeOutput, StoppingRecord)> {
    config.validate()?;
    let params = &config.params;
    let noise = params.noise;
    let mut cur = config.init.expand().x;
    let mut next = vec![0.0; cur.len()];

    let mut detectors = Detectors::new(&config.init.partition(), params);
    let mut recorder = match config.record {
        RecordMode::Full => Recorder::Full(Trajectory::new(params.n, params.leader)),
        RecordMode::Metrics => Recorder::Metrics(Vec::new()),
        RecordMode::None => Recorder::None,
    };

    detectors.observe(0, &cur);
    recorder.push(0, &cur, 0.0, params);
    let mut done_at = detectors.done().then_some(0u64);
    let mut steps = 0;
    for t in 1..=config.horizon {
        if let (StopRule::AfterDetection { extra_steps }, Some(d)) = (config.stop, done_at) {
            if t > d.saturating_add(extra_steps) {
                break;
            }
        }
        let xi = stream.draw(&noise);
        advance(&cur, &mut next, params, xi);
        std::mem::swap(&mut cur, &mut next);
        steps = t;
        if done_at.is_none() {
            detectors.observe(t, &cur);
            if detectors.done() {
                done_at = Some(t);
            }
        }
        recorder.push(t, &cur, xi, params);
    }
    Ok((recorder.finish(), detectors.record(config.horizon, steps)))
}

/// Index of the first state in `window` whose diameter is at most `epsilon`.
pub fn detect_phi_consensus<'a, I>(window: I, epsilon: f64) -> Option<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    window.into_iter().position(|x| d_v(x) <= epsilon)
}

/// Merge times, relative to the start of `window`, for each cluster beyond
/// the noisy agent's own. `None` entries were not reached in the window.
pub fn detect_merge<'a, I>(
    window: I,
    partition: &ClusterPartition,
    noisy_agent: usize,
    epsilon: f64,
    orientation: Orientation,
) -> Vec<Option<usize>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut tracker = MergeTracker::new(partition, noisy_agent, epsilon, orientation);
    for (k, x) in window.into_iter().enumerate() {
        tracker.observe(k as u64, x);
        if tracker.done() {
            break;
        }
    }
    (0..tracker.targets.len())
        .map(|k| tracker.hits.get(k).map(|&t| t as usize))
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Divergence {
    #[error("trajectory has {found} agents, params expect {expected}")]
    Shape { expected: usize, found: usize },

    #[error("step {step}: recorded noise {xi} outside the support")]
    Noise { step: usize, xi: f64 },

    #[error("step {step}, agent {}: recorded {recorded}, replayed {replayed}", agent + 1)]
    Value {
        step: usize,
        agent: usize,
        recorded: f64,
        replayed: f64,
    },
}

/// Re-applies the noisy update with the recorded draws and requires bitwise
/// agreement at every step.
pub fn replay_verify(
    traj: &Trajectory,
    params: &ModelParams,
) -> std::result::Result<(), Divergence> {
    if traj.is_empty() {
        return Ok(());
    }
    if traj.n() != params.n {
        return Err(Divergence::Shape {
            expected: params.n,
            found: traj.n(),
        });
    }
    let mut next = vec![0.0; params.n];
    for k in 1..traj.len() {
        let xi = traj.xi()[k];
        if !params.noise.contains(xi) {
            return Err(Divergence::Noise { step: k, xi });
        }
        advance(traj.state(k - 1), &mut next, params, xi);
        let recorded = traj.state(k);
        if let Some(agent) = (0..params.n).find(|&i| recorded[i].to_bits() != next[i].to_bits()) {
            return Err(Divergence::Value {
                step: k,
                agent,
                recorded: recorded[agent],
                replayed: next[agent],
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{derive_stream, NoiseParams};

    fn fig1_init() -> DivisiveInit {
        DivisiveInit::from_clusters(&[(0.0, 4), (1.5, 4), (3.0, 2)])
    }

    fn windows(rows: &[Vec<f64>]) -> impl Iterator<Item = &[f64]> {
        rows.iter().map(Vec::as_slice)
    }

    #[test]
    fn phi_consensus_detector() {
        let rows = vec![vec![0.0, 3.0], vec![0.0, 3.0], vec![0.2, 0.9]];
        assert_eq!(detect_phi_consensus(windows(&rows), 1.0), Some(2));
        assert_eq!(detect_phi_consensus(windows(&rows[..2]), 1.0), None);
        assert_eq!(detect_phi_consensus(windows(&rows[2..]), 1.0), Some(0));
    }

    #[test]
    fn merge_detector_on_synthetic_path() {
        // Noisy agent 1 alone in cluster 1, cluster 2 = {agent 2} at 2.0;
        // x_1 creeps upward and first reaches 1.0 at step 7.
        let path = [0.0, 0.1, 0.3, 0.5, 0.4, 0.7, 0.95, 1.0, 1.2];
        let rows: Vec<Vec<f64>> = path.iter().map(|&v| vec![v, 2.0]).collect();
        let part = DivisiveInit::from_clusters(&[(0.0, 1), (2.0, 1)]).partition();
        let hits = detect_merge(windows(&rows), &part, 0, 1.0, Orientation::Upward);
        assert_eq!(hits, vec![Some(7)]);

        let near: Vec<Vec<f64>> = vec![vec![1.1, 2.0]];
        assert_eq!(
            detect_merge(windows(&near), &part, 0, 1.0, Orientation::Upward),
            vec![Some(0)]
        );
        assert_eq!(
            detect_merge(windows(&rows[..7]), &part, 0, 1.0, Orientation::Upward),
            vec![None]
        );
    }

    #[test]
    fn merges_are_sequential() {
        // Reaching the top cluster does not count before the middle one.
        let part = DivisiveInit::from_clusters(&[(0.0, 1), (1.5, 1), (3.0, 1)]).partition();
        let rows = vec![
            vec![0.0, 1.5, 3.0],
            vec![0.6, 1.5, 3.0],
            vec![2.0, 1.8, 2.4],
        ];
        assert_eq!(
            detect_merge(windows(&rows), &part, 0, 1.0, Orientation::Upward),
            vec![Some(1), Some(2)]
        );
    }

    #[test]
    fn downward_merge_targets_lower_clusters() {
        let part = DivisiveInit::from_clusters(&[(0.0, 1), (1.5, 2)]).partition();
        let rows = vec![vec![0.0, 1.5, 1.5], vec![0.0, 1.5, 1.0]];
        assert_eq!(
            detect_merge(windows(&rows), &part, 2, 1.0, Orientation::Downward),
            vec![Some(1)]
        );
    }

    #[test]
    fn silent_noise_leaves_fixed_point() {
        let params = ModelParams::noise_free(10, 1.0).unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params, 500);
        let (out, rec) = run_episode(&cfg, &mut derive_stream(1, 0)).unwrap();
        let traj = out.trajectory().unwrap();
        assert_eq!(traj.len(), 501);
        assert!(traj.states().all(|x| x == traj.state(0)));
        assert!(rec.consensus.censored);
        assert!(rec.merges.iter().all(|m| m.censored && m.step == 500));
        assert_eq!(rec.leader_capture, None);
    }

    #[test]
    fn horizon_one_is_censored() {
        let params = ModelParams::new(10, 1.0, NoiseParams::new(0.048, 0.05).unwrap()).unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params, 1).record(RecordMode::None);
        let (out, rec) = run_episode(&cfg, &mut derive_stream(1, 0)).unwrap();
        assert_eq!(out, EpisodeOutput::None);
        assert_eq!(rec.consensus, StopTime::censored_at(1));
        assert_eq!(rec.steps, 1);
    }

    #[test]
    fn invalid_config_rejected_before_stepping() {
        let params = ModelParams::noise_free(10, 1.0)
            .unwrap()
            .with_leader(3.5)
            .unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params, 10);
        let mut s = derive_stream(1, 0);
        assert!(matches!(
            run_episode(&cfg, &mut s),
            Err(Error::InvalidInit(_))
        ));
        assert_eq!(s.draws(), 0);
        let zero = EpisodeConfig::new(fig1_init(), ModelParams::noise_free(10, 1.0).unwrap(), 0);
        assert!(run_episode(&zero, &mut s).is_err());
    }

    #[test]
    fn two_singletons_merge_under_upward_drift() {
        let noise = NoiseParams::new(0.0, 0.05).unwrap();
        let params = ModelParams::new(2, 1.0, noise).unwrap();
        let init = DivisiveInit::from_clusters(&[(0.0, 1), (1.2, 1)]);
        let cfg = EpisodeConfig::new(init, params, 1_000_000)
            .record(RecordMode::Full)
            .stop(StopRule::AfterDetection { extra_steps: 0 });
        for seed in 0..20 {
            let (out, rec) = run_episode(&cfg, &mut derive_stream(seed, 3)).unwrap();
            let t_bar = rec.merges[0].value().expect("uncensored");
            let traj = out.trajectory().unwrap();
            let at = traj.state(t_bar as usize);
            assert!(1.2 - at[0] <= 1.0);
            assert!(1.2 - traj.state(t_bar as usize - 1)[0] > 1.0);
            assert!(rec.consensus.step >= t_bar);
        }
    }

    #[test]
    fn replay_accepts_recorded_and_flags_perturbation() {
        let noise = NoiseParams::new(0.05, 0.05).unwrap();
        let params = ModelParams::new(10, 1.0, noise).unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params.clone(), 300);
        let (out, _) = run_episode(&cfg, &mut derive_stream(9, 1)).unwrap();
        let mut traj = out.trajectory().unwrap().clone();
        assert_eq!(replay_verify(&traj, &params), Ok(()));

        traj.state_mut(120)[6] += 1e-12;
        match replay_verify(&traj, &params) {
            Err(Divergence::Value { step, agent, .. }) => assert_eq!((step, agent), (120, 6)),
            other => panic!("{other:?}"),
        }

        let empty = Trajectory::new(10, None);
        assert_eq!(replay_verify(&empty, &params), Ok(()));
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let noise = NoiseParams::new(0.048, 0.05).unwrap();
        let params = ModelParams::new(10, 1.0, noise)
            .unwrap()
            .with_leader(4.01)
            .unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params.clone(), 200);
        let (out, _) = run_episode(&cfg, &mut derive_stream(5, 5)).unwrap();
        let traj = out.trajectory().unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x_1,x_2,x_3,x_4,x_5,x_6,x_7,x_8,x_9,x_10,leader,xi"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,0,0,0,0,1.5,1.5,1.5,1.5,3,3,4.01,0"
        );
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(&back, traj);
        assert_eq!(replay_verify(&back, &params), Ok(()));
    }

    #[test]
    fn metrics_mode_rows() {
        let noise = NoiseParams::new(0.048, 0.05).unwrap();
        let params = ModelParams::new(10, 1.0, noise).unwrap();
        let cfg = EpisodeConfig::new(fig1_init(), params, 50).record(RecordMode::Metrics);
        let (out, _) = run_episode(&cfg, &mut derive_stream(5, 5)).unwrap();
        let rows = out.metrics().unwrap();
        assert_eq!(rows.len(), 51);
        assert_eq!(rows[0].d_v, 3.0);
        assert_eq!(rows[0].d_v_a, None);
        let mut buf = Vec::new();
        write_metrics_csv(rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,d_V,d_V_A,x_noisy,xi\n0,3,,0,0\n"));
    }

    #[test]
    fn record_serializes_with_stable_names() {
        let rec = StoppingRecord {
            consensus: StopTime::hit(12),
            merges: vec![StopTime::hit(3), StopTime::hit(12)],
            leader_capture: None,
            horizon: 100,
            steps: 12,
        };
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"T":{"step":12,"censored":false},"T_bar":[{"step":3,"censored":false},{"step":12,"censored":false}],"horizon":100,"steps":12}"#
        );
    }
}

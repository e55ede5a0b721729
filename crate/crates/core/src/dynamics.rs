//! The HK update rule and the quantities the consensus results are stated in.
//!
//! Agents average every opinion within the closed confidence interval
//! `|x_j - x_i| <= epsilon` (no tolerance band). An optional leader holds a
//! fixed opinion `A`: it enters the average of every agent it neighbors as
//! one extra term, never updates, and is never part of the agent set.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseParams, Orientation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionState {
    pub t: u64,
    pub x: Vec<f64>,
}

impl OpinionState {
    pub fn new(x: Vec<f64>) -> Self {
        OpinionState { t: 0, x }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub epsilon: f64,
    pub noise: NoiseParams,
    /// Zero-based index of the agent receiving noise.
    pub noisy_agent: usize,
    pub leader: Option<f64>,
}

impl ModelParams {
    /// The noisy agent defaults to the lowest agent for upward noise and the
    /// highest for downward noise.
    pub fn new(n: usize, epsilon: f64, noise: NoiseParams) -> Result<Self> {
        let noisy_agent = match noise.orientation {
            Orientation::Upward => 0,
            Orientation::Downward => n.saturating_sub(1),
        };
        let p = ModelParams {
            n,
            epsilon,
            noise,
            noisy_agent,
            leader: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn noise_free(n: usize, epsilon: f64) -> Result<Self> {
        Self::new(n, epsilon, NoiseParams::none())
    }

    pub fn with_leader(mut self, leader: f64) -> Result<Self> {
        self.leader = Some(leader);
        self.validate()?;
        Ok(self)
    }

    pub fn with_noisy_agent(mut self, agent: usize) -> Result<Self> {
        self.noisy_agent = agent;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::arg("n must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg(format!(
                "epsilon must be positive and finite (got {})",
                self.epsilon
            )));
        }
        self.noise.validate()?;
        if self.noisy_agent >= self.n {
            return Err(Error::arg(format!(
                "noisy agent {} out of range for n={}",
                self.noisy_agent + 1,
                self.n
            )));
        }
        if let Some(a) = self.leader {
            if !a.is_finite() {
                return Err(Error::arg("leader opinion must be finite"));
            }
        }
        Ok(())
    }
}

/// Cluster layout of a divisive initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisiveInit {
    pub cluster_values: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl DivisiveInit {
    pub fn new(cluster_values: Vec<f64>, cluster_sizes: Vec<usize>) -> Self {
        DivisiveInit {
            cluster_values,
            cluster_sizes,
        }
    }

    /// Builds from `(value, size)` pairs.
    pub fn from_clusters(clusters: &[(f64, usize)]) -> Self {
        let (values, sizes) = clusters.iter().copied().unzip();
        DivisiveInit::new(values, sizes)
    }

    pub fn n(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn clusters(&self) -> usize {
        self.cluster_values.len()
    }

    /// Lowest cluster first, so lower clusters hold lower agent indices.
    pub fn expand(&self) -> OpinionState {
        let x = self
            .cluster_values
            .iter()
            .zip(&self.cluster_sizes)
            .flat_map(|(&v, &m)| std::iter::repeat_n(v, m))
            .collect();
        OpinionState::new(x)
    }

    pub fn partition(&self) -> ClusterPartition {
        let mut start = 0;
        let ranges = self
            .cluster_sizes
            .iter()
            .map(|&m| {
                let r = start..start + m;
                start += m;
                r
            })
            .collect();
        ClusterPartition(ranges)
    }
}

/// Agent index ranges of the initial clusters, lowest cluster first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition(pub Vec<Range<usize>>);

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cluster(&self, g: usize) -> Range<usize> {
        self.0[g].clone()
    }

    pub fn cluster_of(&self, agent: usize) -> Option<usize> {
        self.0.iter().position(|r| r.contains(&agent))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InitViolation {
    #[error("a divisive system needs at least 2 clusters (got {clusters})")]
    TooFewClusters { clusters: usize },

    #[error("{values} cluster values but {sizes} cluster sizes")]
    LengthMismatch { values: usize, sizes: usize },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("cluster {cluster} has a non-finite value")]
    NonFinite { cluster: usize },

    #[error("cluster sizes sum to {total}, expected n={n}")]
    SizeMismatch { total: usize, n: usize },

    #[error("gap between clusters {lower} and {} is {gap}, must exceed epsilon={epsilon}", lower + 1)]
    GapTooSmall {
        lower: usize,
        gap: f64,
        epsilon: f64,
    },

    #[error("leader A={leader} must lie strictly beyond {limit} (outermost cluster +/- epsilon)")]
    LeaderTooClose { leader: f64, limit: f64 },
}

/// Checks the divisive conditions and, with a leader, that the leader sits
/// more than `epsilon` beyond the outermost cluster on the side the noise
/// pushes towards. Cluster numbers in violations are one-based.
pub fn validate_divisive_init(
    init: &DivisiveInit,
    params: &ModelParams,
) -> std::result::Result<(), InitViolation> {
    let values = &init.cluster_values;
    let sizes = &init.cluster_sizes;
    if values.len() != sizes.len() {
        return Err(InitViolation::LengthMismatch {
            values: values.len(),
            sizes: sizes.len(),
        });
    }
    if values.len() < 2 {
        return Err(InitViolation::TooFewClusters {
            clusters: values.len(),
        });
    }
    if let Some(g) = values.iter().position(|v| !v.is_finite()) {
        return Err(InitViolation::NonFinite { cluster: g + 1 });
    }
    if let Some(g) = sizes.iter().position(|&m| m == 0) {
        return Err(InitViolation::EmptyCluster { cluster: g + 1 });
    }
    let total = init.n();
    if total != params.n {
        return Err(InitViolation::SizeMismatch { total, n: params.n });
    }
    // Consecutive gaps suffice: all pairwise gaps are sums of them.
    for (g, w) in values.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if gap.is_nan() || gap <= params.epsilon {
            return Err(InitViolation::GapTooSmall {
                lower: g + 1,
                gap,
                epsilon: params.epsilon,
            });
        }
    }
    if let Some(a) = params.leader {
        let ok = match params.noise.orientation {
            Orientation::Upward => a > values[values.len() - 1] + params.epsilon,
            Orientation::Downward => a < values[0] - params.epsilon,
        };
        if !ok {
            let limit = match params.noise.orientation {
                Orientation::Upward => values[values.len() - 1] + params.epsilon,
                Orientation::Downward => values[0] - params.epsilon,
            };
            return Err(InitViolation::LeaderTooClose { leader: a, limit });
        }
    }
    Ok(())
}

/// Neighbor row of one agent: agent indices (zero-based, ascending) and
/// whether the leader is in range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    pub agents: Vec<usize>,
    pub leader: bool,
}

impl fmt::Display for Neighbors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, a) in self.agents.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", a + 1)?;
        }
        if self.leader {
            write!(f, ",leader")?;
        }
        write!(f, "}}")
    }
}

pub fn neighbor_set(state: &OpinionState, params: &ModelParams, i: usize) -> Result<Neighbors> {
    let x = &state.x;
    if i >= x.len() {
        return Err(Error::arg(format!(
            "agent {} out of range for n={}",
            i + 1,
            x.len()
        )));
    }
    let xi = x[i];
    let agents = (0..x.len())
        .filter(|&j| (x[j] - xi).abs() <= params.epsilon)
        .collect();
    let leader = params
        .leader
        .is_some_and(|a| (a - xi).abs() <= params.epsilon);
    Ok(Neighbors { agents, leader })
}

/// Writes the neighbor averages of `x` into `out`. Terms are summed in index
/// order with the leader last, so agents with equal neighbor sets receive
/// bitwise-equal values.
#[inline]
pub(crate) fn average_into(x: &[f64], out: &mut [f64], epsilon: f64, leader: Option<f64>) {
    debug_assert_eq!(x.len(), out.len());
    for (o, &xi) in out.iter_mut().zip(x) {
        let mut sum = 0.0;
        let mut count = 0u32;
        for &xj in x {
            if (xj - xi).abs() <= epsilon {
                sum += xj;
                count += 1;
            }
        }
        if let Some(a) = leader {
            if (a - xi).abs() <= epsilon {
                sum += a;
                count += 1;
            }
        }
        *o = sum / f64::from(count);
    }
}

/// One noisy update into a caller-owned buffer; `xi` is not range-checked.
#[inline]
pub(crate) fn advance(x: &[f64], out: &mut [f64], params: &ModelParams, xi: f64) {
    average_into(x, out, params.epsilon, params.leader);
    out[params.noisy_agent] += xi;
}

fn check_len(state: &OpinionState, params: &ModelParams) -> Result<()> {
    if state.n() != params.n {
        return Err(Error::arg(format!(
            "state has {} agents, params expect {}",
            state.n(),
            params.n
        )));
    }
    Ok(())
}

pub fn step_noise_free(state: &OpinionState, params: &ModelParams) -> OpinionState {
    let mut x = vec![0.0; state.n()];
    average_into(&state.x, &mut x, params.epsilon, params.leader);
    OpinionState { t: state.t + 1, x }
}

/// Noise-free update followed by `xi` added to the noisy agent.
pub fn step_noisy(state: &OpinionState, params: &ModelParams, xi: f64) -> Result<OpinionState> {
    check_len(state, params)?;
    if !params.noise.contains(xi) {
        let (lo, hi) = params.noise.support();
        return Err(Error::arg(format!(
            "noise value {xi} outside support [{lo}, {hi}]"
        )));
    }
    let mut x = vec![0.0; state.n()];
    advance(&state.x, &mut x, params, xi);
    Ok(OpinionState { t: state.t + 1, x })
}

/// Opinion diameter `max_{i,j} |x_i - x_j|` over the agents (leader excluded).
pub fn d_v(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Largest distance from any agent to the leader opinion `a`.
pub fn d_v_a(x: &[f64], a: f64) -> f64 {
    x.iter().fold(0.0, |m: f64, &v| m.max((v - a).abs()))
}

/// Iterates the noise-free rule until two consecutive states are bitwise
/// equal. Returns the terminal state and the number of steps that changed
/// the state.
pub fn run_noise_free_to_fixed_point(
    state: &OpinionState,
    params: &ModelParams,
    max_steps: u64,
) -> Result<(OpinionState, u64)> {
    check_len(state, params)?;
    let mut cur = state.x.clone();
    let mut next = vec![0.0; cur.len()];
    for steps in 0..=max_steps {
        average_into(&cur, &mut next, params.epsilon, params.leader);
        if cur
            .iter()
            .zip(&next)
            .all(|(a, b)| a.to_bits() == b.to_bits())
        {
            return Ok((
                OpinionState {
                    t: state.t + steps,
                    x: cur,
                },
                steps,
            ));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Err(Error::NonConvergence { max_steps })
}

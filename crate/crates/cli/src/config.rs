//! The JSON run configuration and the figure presets.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use hk_noise::{DivisiveInit, EpisodeConfig, ModelParams, NoiseParams, Orientation};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub value: f64,
    pub size: usize,
}

/// One run configuration. `delta1 > delta2` describes noise pushing
/// downward; it is run as the mirrored law on the highest agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub n: usize,
    pub epsilon: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub clusters: Vec<ClusterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<f64>,
    pub seed: u64,
    pub horizon: u64,
    pub runs: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        };
        f.write_str(name)
    }
}

pub const PRESET_SEED: u64 = 2024;
pub const ORIENTED_RUNS: usize = 200;
pub const NEUTRAL_RUNS: usize = 50;

impl Preset {
    pub fn config(self) -> RunConfigFile {
        let (delta1, delta2) = match self {
            Preset::Fig1 | Preset::Fig3 => (0.05, 0.05),
            Preset::Fig2 | Preset::Fig4 => (0.048, 0.05),
        };
        let leader = matches!(self, Preset::Fig3 | Preset::Fig4).then_some(4.01);
        let neutral = delta1 == delta2;
        RunConfigFile {
            n: 10,
            epsilon: 1.0,
            delta1,
            delta2,
            clusters: [(0.0, 4), (1.5, 4), (3.0, 2)]
                .iter()
                .map(|&(value, size)| ClusterSpec { value, size })
                .collect(),
            leader,
            seed: PRESET_SEED,
            horizon: if neutral || leader.is_some() {
                10_000_000
            } else {
                3_100_000
            },
            runs: if neutral { NEUTRAL_RUNS } else { ORIENTED_RUNS },
            output_dir: PathBuf::from("out").join(self.to_string()),
        }
    }
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = match e.path().to_string() {
                p if p == "." => "<root>".to_string(),
                p => p,
            };
            CliError::schema(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level checks that do not depend on the dynamics.
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::schema("n", "must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CliError::schema("epsilon", "must be a positive real"));
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::schema(name, "must be a nonnegative real"));
            }
        }
        if self.clusters.is_empty() {
            return Err(CliError::schema(
                "clusters",
                "must list at least one cluster",
            ));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if !c.value.is_finite() {
                return Err(CliError::schema(
                    &format!("clusters[{i}].value"),
                    "must be finite",
                ));
            }
            if c.size == 0 {
                return Err(CliError::schema(
                    &format!("clusters[{i}].size"),
                    "must be at least 1",
                ));
            }
        }
        if self.leader.is_some_and(|a| !a.is_finite()) {
            return Err(CliError::schema("leader", "must be finite"));
        }
        if self.horizon == 0 {
            return Err(CliError::schema("horizon", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(CliError::schema("runs", "must be at least 1"));
        }
        Ok(())
    }

    pub fn noise(&self) -> CliResult<NoiseParams> {
        let noise = if self.delta1 > self.delta2 {
            NoiseParams::oriented(self.delta2, self.delta1, Orientation::Downward)?
        } else {
            NoiseParams::new(self.delta1, self.delta2)?
        };
        Ok(noise)
    }

    pub fn init(&self) -> DivisiveInit {
        let pairs: Vec<(f64, usize)> = self.clusters.iter().map(|c| (c.value, c.size)).collect();
        DivisiveInit::from_clusters(&pairs)
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        let p = ModelParams::new(self.n, self.epsilon, self.noise()?)?;
        Ok(match self.leader {
            Some(a) => p.with_leader(a)?,
            None => p,
        })
    }

    /// The episode configuration, with the initial state checked.
    pub fn episode(&self) -> CliResult<EpisodeConfig> {
        self.validate()?;
        let cfg = EpisodeConfig::new(self.init(), self.params()?, self.horizon);
        cfg.validate()?;
        Ok(cfg)
    }
}

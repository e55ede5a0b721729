//! Hegselmann-Krause opinion dynamics driven by a single noisy agent.
//!
//! - [`dynamics`]: the bounded-confidence update, diameters and divisive initial states.
//! - [`noise`]: the bounded uniform noise law and per-run random streams.
//! - [`episode`]: one noisy run with stopping-time detection, recording and replay.
//! - [`walk`]: the random-walk first-passage models behind the stopping times.
//! - [`estimator`]: Monte Carlo batches, censoring-aware estimates and analytic bounds.
//! - [`checks`]: the verification suite run by `hk-noise verify`.

pub mod checks;
pub mod dynamics;
pub mod episode;
mod error;
pub mod estimator;
pub mod noise;
mod stats;
pub mod walk;

pub use dynamics::{
    d_v, d_v_a, neighbor_set, run_noise_free_to_fixed_point, step_noise_free, step_noisy,
    validate_divisive_init, ClusterPartition, DivisiveInit, InitViolation, ModelParams, Neighbors,
    OpinionState,
};
pub use episode::{
    detect_merge, detect_phi_consensus, replay_verify, run_episode, write_metrics_csv, Divergence,
    EpisodeConfig, EpisodeOutput, MetricsRow, RecordMode, StopRule, StopTime, StoppingRecord,
    Trajectory,
};
pub use error::{Error, Result};
pub use estimator::{
    batch_run, capture_time_bound, consensus_time_bound, estimate_mean_stopping_time, tail_probe,
    Bound, EstimateReport, ExperimentConfig, Quantity, TailProbe,
};
pub use noise::{derive_stream, NoiseParams, NoiseStream, Orientation};

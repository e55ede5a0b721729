//! Shared fixtures for the criterion benches.

use hk_noise::checks::{figure_init, figure_params, LEADER, ORIENTED};
use hk_noise::{EpisodeConfig, ModelParams, OpinionState, RecordMode, StopRule};

/// `n` opinions evenly spread over `[0, 5]`.
pub fn spread_state(n: usize) -> OpinionState {
    let step = 5.0 / n.max(1) as f64;
    OpinionState::new((0..n).map(|i| i as f64 * step).collect())
}

pub fn noisy_params(n: usize) -> ModelParams {
    ModelParams::new(
        n,
        1.0,
        hk_noise::NoiseParams::new(0.0, 0.5 / n as f64).unwrap(),
    )
    .unwrap()
}

/// The oriented figure configuration, optionally with the leader.
pub fn figure_episode(leader: bool, record: RecordMode, horizon: u64) -> EpisodeConfig {
    let params = figure_params(ORIENTED, leader.then_some(LEADER)).unwrap();
    EpisodeConfig::new(figure_init(), params, horizon)
        .record(record)
        .stop(StopRule::AfterDetection { extra_steps: 0 })
}

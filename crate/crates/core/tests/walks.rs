use hk_noise::walk::{
    first_passage_tc, truncated_means, two_sided_exit, walk_experiment, Side, WalkKind,
};
use hk_noise::{derive_stream, NoiseParams};

const HORIZONS: [u64; 3] = [1_000, 10_000, 100_000];

fn samples(kind: WalkKind, noise: &NoiseParams, count: usize) -> Vec<(u64, bool)> {
    (0..count as u64)
        .map(|k| {
            let mut s = derive_stream(31, k);
            let w = match kind {
                WalkKind::FirstPassage { c } => {
                    first_passage_tc(noise, c, &mut s, 100_000).unwrap()
                }
                WalkKind::WeightedZero { alpha } => {
                    hk_noise::walk::weighted_walk_t0prime(noise, alpha, &mut s, 100_000).unwrap()
                }
                WalkKind::Merge { .. } => unreachable!(),
            };
            (w.steps, w.censored)
        })
        .collect()
}

#[test]
fn neutral_first_passage_keeps_growing() {
    let noise = NoiseParams::new(0.05, 0.05).unwrap();
    let m = truncated_means(
        &samples(WalkKind::FirstPassage { c: 0.5 }, &noise, 400),
        &HORIZONS,
    );
    assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
}

#[test]
fn neutral_weighted_walk_keeps_growing() {
    let noise = NoiseParams::new(0.05, 0.05).unwrap();
    let kind = WalkKind::WeightedZero { alpha: 4.0 };
    let m = truncated_means(&samples(kind, &noise, 2000), &HORIZONS);
    assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
}

#[test]
fn oriented_first_passage_respects_its_bound() {
    let noise = NoiseParams::new(0.048, 0.05).unwrap();
    let r = walk_experiment(
        &noise,
        WalkKind::FirstPassage { c: 0.5 },
        3,
        2000,
        10_000_000,
    )
    .unwrap();
    assert_eq!(r.censor_fraction, 0.0);
    let bound = r.bound.unwrap().finite().unwrap();
    assert!(r.mean.unwrap() <= bound, "{:?} vs {bound}", r.mean);
}

#[test]
fn two_sided_exit_probability_is_about_fair() {
    let noise = NoiseParams::new(0.05, 0.05).unwrap();
    let count = 4000;
    let up = (0..count)
        .filter(|&k| {
            let e = two_sided_exit(&noise, 0.2, 0.2, &mut derive_stream(41, k)).unwrap();
            e.side == Side::High
        })
        .count() as f64
        / count as f64;
    assert!(
        (up - 0.5).abs() < 4.0 * (0.25 / count as f64).sqrt(),
        "{up}"
    );
}

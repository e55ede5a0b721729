use hk_noise::{derive_stream, NoiseParams, Orientation};

const DRAWS: usize = 100_000;
/// Kolmogorov critical value at level 0.001.
const KS_CRITICAL: f64 = 1.949;

fn draws(noise: &NoiseParams, seed: u64, run: u64, count: usize) -> Vec<f64> {
    let mut s = derive_stream(seed, run);
    (0..count).map(|_| s.draw(noise)).collect()
}

fn ks_statistic(sample: &mut [f64], lo: f64, hi: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn draws_follow_the_uniform_law() {
    for (d1, d2) in [(0.048, 0.05), (0.05, 0.05), (0.0, 0.02)] {
        let noise = NoiseParams::new(d1, d2).unwrap();
        let mut x = draws(&noise, 11, 0, DRAWS);
        assert!(x.iter().all(|&v| noise.contains(v)));
        let d = ks_statistic(&mut x, -d1, d2);
        assert!(
            d * (DRAWS as f64).sqrt() < KS_CRITICAL,
            "KS {d} for ({d1}, {d2})"
        );
    }
}

#[test]
fn oriented_mean_within_three_sigma() {
    let noise = NoiseParams::new(0.048, 0.05).unwrap();
    let n = 1_000_000;
    let mean = draws(&noise, 5, 3, n).iter().sum::<f64>() / n as f64;
    let sigma = (0.098 / 12f64.sqrt()) / (n as f64).sqrt();
    assert!((mean - 0.001).abs() < 3.0 * sigma, "mean {mean}");
}

#[test]
fn neutral_noise_is_symmetric() {
    let noise = NoiseParams::new(0.05, 0.05).unwrap();
    let x = draws(&noise, 9, 0, DRAWS);
    let p = x.iter().filter(|&&v| v >= 0.0).count() as f64 / DRAWS as f64;
    let sigma = (0.25 / DRAWS as f64).sqrt();
    assert!((p - 0.5).abs() < 3.0 * sigma, "P(xi >= 0) = {p}");
}

#[test]
fn streams_and_lags_are_uncorrelated() {
    let noise = NoiseParams::new(0.048, 0.05).unwrap();
    let a = draws(&noise, 77, 0, DRAWS);
    let b = draws(&noise, 77, 1, DRAWS);
    let c = draws(&noise, 78, 0, DRAWS);
    let limit = 4.0 / (DRAWS as f64).sqrt();
    assert!(correlation(&a, &b).abs() < limit);
    assert!(correlation(&a, &c).abs() < limit);
    assert!(correlation(&a[1..], &a[..DRAWS - 1]).abs() < limit);
}

#[test]
fn same_seed_and_index_replay() {
    let noise = NoiseParams::new(0.048, 0.05).unwrap();
    assert_eq!(draws(&noise, 1, 4, 1000), draws(&noise, 1, 4, 1000));
    assert_ne!(draws(&noise, 1, 4, 10), draws(&noise, 1, 5, 10));
}

#[test]
fn downward_orientation_mirrors_the_law() {
    let up = NoiseParams::new(0.01, 0.05).unwrap();
    let down = NoiseParams::oriented(0.01, 0.05, Orientation::Downward).unwrap();
    let a = draws(&up, 3, 0, 1000);
    let b = draws(&down, 3, 0, 1000);
    assert!(b.iter().all(|&v| (-0.05..=0.01).contains(&v)));
    assert!(a.iter().zip(&b).all(|(x, y)| (x + y).abs() < 1e-12));
}

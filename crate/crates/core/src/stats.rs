//! Sample summaries shared by the walk and estimator reports.

/// Two-sided 95% normal quantile.
pub(crate) const Z95: f64 = 1.959_963_984_540_054;

/// Normal intervals are only reported from this many samples on.
pub(crate) const MIN_NORMAL_SAMPLES: usize = 30;

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub(crate) fn normal_ci95(xs: &[f64]) -> Option<[f64; 2]> {
    if xs.len() < MIN_NORMAL_SAMPLES {
        return None;
    }
    let m = mean(xs)?;
    let half = Z95 * std_dev(xs)? / (xs.len() as f64).sqrt();
    Some([m - half, m + half])
}

/// Empirical survival `P(T > t)` on a geometric grid from `t_lo` to
/// `horizon`. Censored samples survive every grid point below the horizon.
pub(crate) fn survival_curve(samples: &[(u64, bool)], t_lo: u64, horizon: u64) -> Vec<(u64, f64)> {
    const POINTS: usize = 24;
    if samples.is_empty() || horizon == 0 {
        return Vec::new();
    }
    let lo = t_lo.max(1) as f64;
    let hi = horizon as f64;
    if lo >= hi {
        return Vec::new();
    }
    let ratio = (hi / lo).powf(1.0 / (POINTS - 1) as f64);
    let mut grid: Vec<u64> = (0..POINTS)
        .map(|k| {
            ((lo * ratio.powi(k as i32)).round() as u64)
                .min(horizon - 1)
                .max(1)
        })
        .collect();
    grid.dedup();
    let n = samples.len() as f64;
    grid.into_iter()
        .map(|t| {
            let alive = samples
                .iter()
                .filter(|&&(step, censored)| censored || step > t)
                .count();
            (t, alive as f64 / n)
        })
        .collect()
}

/// Least-squares slope of `ln S(t)` against `ln t` over the points with
/// positive survival. Needs at least three such points.
pub(crate) fn loglog_slope(curve: &[(u64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|&&(_, s)| s > 0.0)
        .map(|&(t, s)| ((t as f64).ln(), s.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Median of the (possibly censored) step values.
pub(crate) fn median_step(samples: &[(u64, bool)]) -> Option<u64> {
    let mut steps: Vec<u64> = samples.iter().map(|s| s.0).collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_unstable();
    Some(steps[steps.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert_eq!(mean(&[]), None);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(std_dev(&[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(normal_ci95(&[1.0; 10]), None);
        let ci = normal_ci95(&[2.0; 40]).unwrap();
        assert_eq!(ci, [2.0, 2.0]);
    }

    #[test]
    fn power_law_survival_slope() {
        // P(T > t) = (t / 100)^(-1/2) for t >= 100, sampled by inversion.
        let n = 20_000;
        let samples: Vec<(u64, bool)> = (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) / n as f64;
                let t = 100.0 / (u * u);
                if t >= 1e6 {
                    (1_000_000, true)
                } else {
                    (t as u64, false)
                }
            })
            .collect();
        let curve = survival_curve(&samples, 200, 1_000_000);
        let slope = loglog_slope(&curve).unwrap();
        assert!((slope + 0.5).abs() < 0.02, "{slope}");
    }

    #[test]
    fn empty_or_short_curves() {
        assert!(survival_curve(&[], 1, 100).is_empty());
        assert!(survival_curve(&[(5, false)], 100, 100).is_empty());
        assert_eq!(loglog_slope(&[(1, 1.0), (2, 0.5)]), None);
    }
}

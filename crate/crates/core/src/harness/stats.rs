use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Trailing-window mean; the first `window − 1` entries average the prefix.
pub fn rolling_stats(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::config("rolling window must be at least 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        // recompute exactly at window boundaries to keep drift away
        if i % 4096 == 4095 {
            sum = series[(i + 1).saturating_sub(window)..=i].iter().sum();
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// Trailing-window mean over the entries that are present; `None` where the
/// window holds no values.
pub fn rolling_mean_sparse(series: &[Option<f64>], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 {
        return Err(Error::config("rolling window must be at least 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, x) in series.iter().enumerate() {
        if let Some(v) = x {
            sum += v;
            count += 1;
        }
        if i >= window {
            if let Some(v) = series[i - window] {
                sum -= v;
                count -= 1;
            }
        }
        if i % 4096 == 4095 {
            sum = series[(i + 1).saturating_sub(window)..=i].iter().flatten().sum();
        }
        out.push((count > 0).then(|| sum / count as f64));
    }
    Ok(out)
}

/// Two-sided Student-t critical value for `level` with `df` degrees of freedom.
pub fn t_critical(df: usize, level: f64) -> Result<f64> {
    if df == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::config("t critical value needs df ≥ 1 and level in (0, 1)"));
    }
    let t = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::config(e.to_string()))?;
    Ok(t.inverse_cdf(0.5 + level / 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
    /// Only one seed: widths are reported as zero.
    pub single_seed: bool,
}

/// Per-step mean and `t(n−1) · s / √n` half width across seeds.
pub fn confidence_interval(values_per_seed: &[Vec<f64>], level: f64) -> Result<ConfidenceBand> {
    let n = values_per_seed.len();
    if n == 0 {
        return Err(Error::config("no seeds to aggregate"));
    }
    let len = values_per_seed[0].len();
    if values_per_seed.iter().any(|v| v.len() != len) {
        return Err(Error::config("seed series have different lengths"));
    }
    let mean: Vec<f64> = (0..len)
        .map(|t| values_per_seed.iter().map(|v| v[t]).sum::<f64>() / n as f64)
        .collect();
    if n == 1 {
        return Ok(ConfidenceBand {
            half_width: vec![0.0; len],
            mean,
            single_seed: true,
        });
    }
    let tc = t_critical(n - 1, level)?;
    let half_width = (0..len)
        .map(|t| {
            let var = values_per_seed.iter().map(|v| (v[t] - mean[t]).powi(2)).sum::<f64>() / (n - 1) as f64;
            tc * (var / n as f64).sqrt()
        })
        .collect();
    Ok(ConfidenceBand {
        mean,
        half_width,
        single_seed: false,
    })
}

/// Mean of the present values.
pub fn mean_present(xs: &[Option<f64>]) -> Option<f64> {
    let (s, c) = xs.iter().flatten().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn rolling_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rolling_stats(&s, 1).unwrap(), s.to_vec());
        assert_eq!(rolling_stats(&s, 2).unwrap(), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(rolling_stats(&[2.5; 10], 3).unwrap(), vec![2.5; 10]);
        assert!(rolling_stats(&s, 0).is_err());
    }

    #[test]
    fn sparse_rolling_skips_gaps() {
        let s = [None, Some(1.0), None, Some(3.0), Some(5.0)];
        let r = rolling_mean_sparse(&s, 2).unwrap();
        assert_eq!(r, vec![None, Some(1.0), Some(1.0), Some(3.0), Some(4.0)]);
    }

    proptest! {
        #[test]
        fn rolling_matches_direct_mean(xs in proptest::collection::vec(-1e3f64..1e3, 1..300), w in 1usize..50) {
            let r = rolling_stats(&xs, w).unwrap();
            for i in 0..xs.len() {
                let lo = (i + 1).saturating_sub(w);
                let direct = xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
                prop_assert!((r[i] - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn long_series_stays_exact() {
        let xs: Vec<f64> = (0..20_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3).collect();
        let r = rolling_stats(&xs, 500).unwrap();
        let direct = xs[19_500..].iter().sum::<f64>() / 500.0;
        assert!((r[19_999] - direct).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_have_zero_width() {
        let b = confidence_interval(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]], 0.95).unwrap();
        assert_eq!(b.half_width, vec![0.0, 0.0]);
        assert_eq!(b.mean, vec![1.0, 2.0]);
    }

    #[test]
    fn two_seed_t_value() {
        let b = confidence_interval(&[vec![0.0], vec![2.0]], 0.95).unwrap();
        assert_eq!(b.mean, vec![1.0]);
        // t-table: t_{0.975, 1} = 12.706
        assert!((b.half_width[0] - 12.706).abs() < 1e-3);
    }

    #[test]
    fn single_seed_is_flagged() {
        let b = confidence_interval(&[vec![3.0, 4.0]], 0.95).unwrap();
        assert!(b.single_seed);
        assert_eq!(b.half_width, vec![0.0, 0.0]);
    }

    #[test]
    fn width_shrinks_like_inverse_sqrt_n() {
        let mut r = rng::from_seed(10);
        let steps = 2000;
        let mut widths = Vec::new();
        for n in [4, 16, 64] {
            let seeds: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..steps).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let b = confidence_interval(&seeds, 0.95).unwrap();
            let tc = t_critical(n - 1, 0.95).unwrap();
            // average s/√n recovered from the half width
            widths.push(b.half_width.iter().sum::<f64>() / steps as f64 / tc);
        }
        assert!((widths[0] / widths[1] - 2.0).abs() < 0.15, "{widths:?}");
        assert!((widths[1] / widths[2] - 2.0).abs() < 0.15, "{widths:?}");
    }
}

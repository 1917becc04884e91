//! Small descriptive-statistics helpers shared by the fit, sampler and
//! result-aggregation code.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population (divide-by-N) standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Linearly interpolated sample quantile (the common "type 7" definition:
/// the p-quantile sits at fractional order-statistic index (n-1)*p).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "quantile level must be in [0, 1]");
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value in quantile"));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Population skewness m3 / m2^(3/2); NaN for fewer than 2 points or zero
/// variance.
pub fn skewness(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return f64::NAN;
    }
    m3 / m2.powf(1.5)
}

/// Equal-width histogram over [min, max] of the data. A degenerate sample
/// (all values equal) collapses to one bin holding everything.
pub fn histogram(xs: &[f64], bins: usize) -> Vec<(f64, f64, u64)> {
    assert!(bins > 0);
    if xs.is_empty() {
        return Vec::new();
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![(lo, hi, xs.len() as u64)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantile_midpoint_median() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_relative_eq!(median(&xs), 50.5);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(quantile(&xs, 0.0), 1.0);
        assert_relative_eq!(quantile(&xs, 1.0), 4.0);
        assert_relative_eq!(quantile(&xs, 0.5), 2.5);
    }

    #[test]
    fn skewness_of_symmetric_sample_is_zero() {
        let xs = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_relative_eq!(skewness(&xs), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_counts_everything() {
        let xs = vec![0.0, 0.1, 0.5, 0.9, 1.0];
        let h = histogram(&xs, 2);
        assert_eq!(h.iter().map(|b| b.2).sum::<u64>(), 5);
    }

    #[test]
    fn histogram_degenerate_sample() {
        let h = histogram(&[3.0, 3.0, 3.0], 50);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].2, 3);
    }
}

//! Small descriptive statistics and seeding helpers.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance (divisor n − 1); zero for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Population variance (divisor n).
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Moment-based skewness g1 = m3 / m2^{3/2}.
pub fn skewness(v: &[f64]) -> f64 {
    let m = mean(v);
    let n = v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Moment-based excess kurtosis g2 = m4 / m2² − 3.
pub fn excess_kurtosis(v: &[f64]) -> f64 {
    let m = mean(v);
    let n = v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Two-sided standard normal critical value for a confidence `level` in (0, 1).
pub fn normal_critical(level: f64) -> f64 {
    let z = Normal::standard();
    z.inverse_cdf(0.5 + level / 2.0)
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log(1 + e^t).
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Clips `p` into `[lo, hi]` and reports whether it moved.
pub fn clip(p: f64, lo: f64, hi: f64) -> (f64, bool) {
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

/// Mixes a base seed with a stream tag and an index (SplitMix64 finalizer).
///
/// Used for per-trial and per-purpose seeds so that results do not depend on
/// scheduling order.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    for _ in 0..2 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_95() {
        assert!((normal_critical(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn moments_of_symmetric_sample() {
        let v = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_eq!(mean(&v), 0.0);
        assert_eq!(sample_variance(&v), 2.5);
        assert_eq!(skewness(&v), 0.0);
        // m2 = 2, m4 = 6.8 -> 6.8 / 4 - 3
        assert!((excess_kurtosis(&v) + 1.3).abs() < 1e-12);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for t in [-5.0, -0.3, 0.0, 0.7, 4.0] {
            assert!((softplus(t) - (1.0f64 + t.exp()).ln()).abs() < 1e-12);
        }
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ_by_index_and_stream() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}

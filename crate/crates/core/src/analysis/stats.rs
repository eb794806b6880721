use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi_square_1_sf, student_t_two_sided};

const VARIANCE_TOL: f64 = 1e-300;

/// z quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Pooled-variance two-sample t test.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let df = na + nb - 2.0;
    let pooled = (ss(a, ma) + ss(b, mb)) / df;
    if pooled.is_nan() || pooled <= VARIANCE_TOL {
        return Err(Error::InvalidParameter("pooled variance is zero".into()));
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: u32,
    pub p: f64,
}

/// Goodness of fit of two counts against an even split, optionally with
/// the Yates continuity correction.
pub fn chi_square_uniform_two(counts: (u64, u64), continuity: bool) -> Result<ChiSquare> {
    let n = counts.0 + counts.1;
    if n == 0 {
        return Err(Error::InvalidParameter("chi-square needs at least one observation".into()));
    }
    let expected = n as f64 / 2.0;
    let c = if continuity { 0.5 } else { 0.0 };
    let statistic: f64 = [counts.0, counts.1]
        .iter()
        .map(|&o| ((o as f64 - expected).abs() - c).max(0.0).powi(2) / expected)
        .sum();
    Ok(ChiSquare {
        statistic,
        df: 1,
        p: chi_square_1_sf(statistic),
    })
}

/// A count out of `n` with a 95% normal-approximation interval, clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub n: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn proportion_interval(count: u64, n: u64) -> Proportion {
    if n == 0 {
        return Proportion {
            count,
            n,
            estimate: 0.0,
            lower: 0.0,
            upper: 0.0,
        };
    }
    let p = count as f64 / n as f64;
    let half = Z_95 * (p * (1.0 - p) / n as f64).sqrt();
    Proportion {
        count,
        n,
        estimate: p,
        lower: (p - half).max(0.0),
        upper: (p + half).min(1.0),
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_test_examples() {
        let r = two_sample_t(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(r.t, -2.0 / (5.0f64 / 3.0 * 0.5).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, -2.190_890_230_020_664, epsilon = 1e-12);
        assert_eq!(r.df, 6.0);
        let same = two_sample_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(same.t, 0.0);
        assert_abs_diff_eq!(same.p, 1.0, epsilon = 1e-12);
        assert!(two_sample_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(two_sample_t(&[2.0, 2.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn t_test_is_antisymmetric() {
        let a = [0.3, 0.7, 0.2, 0.9, 0.5];
        let b = [0.1, 0.4, 0.35];
        let ab = two_sample_t(&a, &b).unwrap();
        let ba = two_sample_t(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_uniform_two((94, 61), true).unwrap();
        assert_abs_diff_eq!(r.statistic, 2.0 * 16.0f64.powi(2) / 77.5, epsilon = 1e-12);
        assert_eq!(chi_square_uniform_two((10, 10), true).unwrap().statistic, 0.0);
        assert_abs_diff_eq!(chi_square_uniform_two((20, 10), false).unwrap().statistic, 10.0 / 3.0, epsilon = 1e-12);
        assert!(chi_square_uniform_two((0, 0), true).is_err());
        // Clamping: a difference under the correction gives zero.
        assert_eq!(chi_square_uniform_two((3, 2), true).unwrap().statistic, 0.0);
    }

    #[test]
    fn chi_square_symmetric_and_zero_on_ties() {
        for n in [1, 7, 40] {
            assert_eq!(chi_square_uniform_two((n, n), false).unwrap().statistic, 0.0);
        }
        assert_eq!(
            chi_square_uniform_two((12, 30), true).unwrap(),
            chi_square_uniform_two((30, 12), true).unwrap()
        );
    }

    #[test]
    fn proportions() {
        let p = proportion_interval(94, 193);
        assert_abs_diff_eq!(p.estimate, 94.0 / 193.0, epsilon = 1e-15);
        assert!(p.lower < p.estimate && p.estimate < p.upper);
        assert_eq!(proportion_interval(0, 0).estimate, 0.0);
        assert_eq!(proportion_interval(0, 5).lower, 0.0);
    }
}

//! Sample statistics for the measurement sequence.

use statrs::distribution::{ContinuousCDF, Continuous, StudentsT};

/// Two-sided 95% Student-t critical value `t(0.975, dof)`.
///
/// Starts from the inverse-beta quantile and polishes it with Newton steps
/// on the CDF, which is accurate to near machine precision.
pub fn t_critical_975(dof: u32) -> f64 {
    assert!(dof >= 1, "t quantile needs at least one degree of freedom");
    let dist = StudentsT::new(0.0, 1.0, f64::from(dof)).expect("valid t distribution");
    let mut t = dist.inverse_cdf(0.975);
    for _ in 0..3 {
        let err = dist.cdf(t) - 0.975;
        let pdf = dist.pdf(t);
        if pdf <= 0.0 || err == 0.0 {
            break;
        }
        t -= err / pdf;
    }
    t
}

/// Mean and 95% confidence-interval half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

/// `half_width = t(0.975, n-1) * s / sqrt(n)` with `s` the unbiased sample
/// standard deviation. Returns `None` for fewer than two samples.
pub fn mean_ci95(samples: &[f64]) -> Option<MeanCi> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    // Welford keeps the variance exact-ish for readings with a large offset.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = (m2 / (n - 1) as f64).max(0.0);
    let half_width = t_critical_975((n - 1) as u32) * var.sqrt() / (n as f64).sqrt();
    Some(MeanCi { mean, half_width, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_table_values() {
        // Standard table values.
        assert!((t_critical_975(9) - 2.262157).abs() < 1e-6);
        assert!((t_critical_975(1) - 12.706205).abs() < 1e-6);
        assert!((t_critical_975(30) - 2.042272).abs() < 1e-6);
    }

    #[test]
    fn identical_readings_have_zero_width() {
        let ci = mean_ci95(&[7.0; 10]).unwrap();
        assert_eq!(ci.mean, 7.0);
        assert_eq!(ci.half_width, 0.0);
    }

    #[test]
    fn one_through_ten() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ci = mean_ci95(&xs).unwrap();
        assert!((ci.mean - 5.5).abs() < 1e-12);
        // s = sqrt(82.5 / 9) = 3.02765, t = 2.262157
        assert!((ci.half_width - 2.165851).abs() < 1e-5, "{}", ci.half_width);
    }

    #[test]
    fn too_few_samples() {
        assert!(mean_ci95(&[1.0]).is_none());
        assert!(mean_ci95(&[]).is_none());
    }
}

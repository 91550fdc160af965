//! Confidence intervals over independent replications.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and Student-t half-width of `samples` at two-sided `level`.
pub fn mean_and_halfwidth(samples: &[f64], level: f64) -> (f64, f64) {
    let n = samples.len();
    assert!(n >= 2, "need at least two replications");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.5 + level / 2.0);
    (mean, t * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantile() {
        // t_{0.995, 9} = 3.2498355...
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let (m, h) = mean_and_halfwidth(&xs, 0.99);
        assert_eq!(m, 5.5);
        let sd = (55.0f64 / 6.0).sqrt();
        assert!((h - 3.249_835_5 * sd / 10f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn wider_at_higher_level() {
        let xs = [0.3, 0.1, 0.4, 0.15];
        assert!(mean_and_halfwidth(&xs, 0.99).1 > mean_and_halfwidth(&xs, 0.95).1);
    }
}

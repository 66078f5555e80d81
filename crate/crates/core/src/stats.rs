//! Small-sample statistics for paired Monte-Carlo comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two samples.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn std_err(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    std_dev(x) / (x.len() as f64).sqrt()
}

/// Upper quantile of Student's t with `dof` degrees of freedom.
pub fn t_quantile(p: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof.max(1) as f64)
        .map(|t| t.inverse_cdf(p))
        .unwrap_or(f64::INFINITY)
}

/// Paired comparison `a − b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedStats {
    pub n: usize,
    pub mean_diff: f64,
    pub stderr: f64,
    /// Lower end of the one-sided 95% confidence interval for the mean difference.
    pub lower95: f64,
}

impl PairedStats {
    pub fn new(a: &[f64], b: &[f64]) -> PairedStats {
        assert_eq!(a.len(), b.len(), "paired samples must have equal length");
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n = d.len();
        let m = mean(&d);
        let se = std_err(&d);
        let lower95 = if n >= 2 {
            m - t_quantile(0.95, n - 1) * se
        } else {
            f64::NEG_INFINITY
        };
        PairedStats {
            n,
            mean_diff: m,
            stderr: se,
            lower95,
        }
    }

    /// Mean difference is positive with 95% one-sided confidence.
    pub fn positive_at_95(&self) -> bool {
        self.lower95 > 0.0
    }
}

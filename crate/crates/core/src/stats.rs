//! Sample moments with standard errors.

use serde::{Deserialize, Serialize};

use crate::sum::Neumaier;

/// Mean and variance of a sample, with their standard errors.
///
/// `variance` is the unbiased estimate and is absent for fewer than two
/// observations. Its standard error uses the fourth central moment:
/// `√((m₄ - (n-3)/(n-1)·s⁴) / n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub std_error_mean: Option<f64>,
    pub std_error_var: Option<f64>,
}

impl Moments {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                variance: None,
                std_error_mean: None,
                std_error_var: None,
            };
        }
        let nf = n as f64;
        let mean = xs.iter().copied().collect::<Neumaier>().total() / nf;
        if n < 2 {
            return Self {
                n,
                mean,
                variance: None,
                std_error_mean: None,
                std_error_var: None,
            };
        }
        let mut m2 = Neumaier::new();
        let mut m4 = Neumaier::new();
        for &x in xs {
            let d2 = (x - mean) * (x - mean);
            m2.add(d2);
            m4.add(d2 * d2);
        }
        let s2 = m2.total() / (nf - 1.0);
        let m4 = m4.total() / nf;
        let se_var = ((m4 - (nf - 3.0) / (nf - 1.0) * s2 * s2) / nf)
            .max(0.0)
            .sqrt();
        Self {
            n,
            mean,
            variance: Some(s2),
            std_error_mean: Some((s2 / nf).sqrt()),
            std_error_var: Some(se_var),
        }
    }

    /// `|mean - target|` in units of the standard error of the mean.
    pub fn mean_z(&self, target: f64) -> Option<f64> {
        self.std_error_mean
            .map(|se| (self.mean - target).abs() / se)
    }

    /// `|variance - target|` in units of the standard error of the variance.
    pub fn variance_z(&self, target: f64) -> Option<f64> {
        match (self.variance, self.std_error_var) {
            (Some(v), Some(se)) => Some((v - target).abs() / se),
            _ => None,
        }
    }
}

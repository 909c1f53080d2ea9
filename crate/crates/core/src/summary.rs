//! Small sample summaries used by the Monte Carlo checks.

use serde::{Deserialize, Serialize};

use crate::dists::normal_quantile;
use crate::error::Result;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialBand {
    pub low: f64,
    pub high: f64,
}

impl BinomialBand {
    pub fn contains(&self, rate: f64) -> bool {
        rate >= self.low && rate <= self.high
    }
}

/// Normal-approximation band `p ± z·sqrt(p(1−p)/n)` at the given two-sided confidence.
pub fn binomial_band(p: f64, replications: usize, confidence: f64) -> Result<BinomialBand> {
    let z = normal_quantile(0.5 + 0.5 * confidence)?;
    let half = z * (p * (1.0 - p) / replications as f64).sqrt();
    Ok(BinomialBand {
        low: (p - half).max(0.0),
        high: (p + half).min(1.0),
    })
}

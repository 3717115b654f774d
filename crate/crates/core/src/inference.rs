//! Studentized statistic, p-values and confidence intervals for
//! `SW_p^p(P, Q)`.
//!
//! With `r = nm/(n+m)` the estimate converges at rate
//! `sqrt(k r / (k + r))`; dividing by the square root of the combined
//! variance gives an asymptotically standard normal statistic under
//! `H0: SW_p^p(P, Q) = delta`.

use alloc::format;

use crate::error::{invalid, Error, Result};
use crate::estimators::{harmonic_size, VarianceComponents};
use crate::normal;

/// `sqrt(k r / (k + r))`, `r = nm / (n + m)`.
pub fn effective_rate(n: usize, m: usize, k: usize) -> f64 {
    let r = harmonic_size(n, m);
    let k = k as f64;
    libm::sqrt(k * r / (k + r))
}

pub fn test_statistic(estimate: f64, delta: f64, n: usize, m: usize, k: usize, combined_variance: f64) -> Result<f64> {
    if !(combined_variance > 0.0) || !combined_variance.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    Ok(effective_rate(n, m, k) * (estimate - delta) / libm::sqrt(combined_variance))
}

/// `2 (1 - Phi(|t|))`.
pub fn two_sided_pvalue(t: f64) -> f64 {
    (2.0 * normal::sf(libm::fabs(t))).min(1.0)
}

/// Two-sided normal critical value `z_{(1 + level)/2}`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(normal::quantile(0.5 + 0.5 * level))
}

/// `estimate -/+ z sqrt(combined) / rate`.
pub fn confidence_interval(
    estimate: f64,
    n: usize,
    m: usize,
    k: usize,
    combined_variance: f64,
    level: f64,
) -> Result<(f64, f64)> {
    let z = critical_value(level)?;
    if !(combined_variance >= 0.0) {
        return Err(invalid(format!("variance must be nonnegative, got {combined_variance}")));
    }
    let half = z * libm::sqrt(combined_variance) / effective_rate(n, m, k);
    Ok((estimate - half, estimate + half))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub estimate: f64,
    pub delta: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub variance: VarianceComponents,
    pub effective_rate: f64,
    /// `|statistic|` exceeds the `(1 + level)/2` normal quantile.
    pub reject: bool,
}

impl InferenceReport {
    pub fn new(
        estimate: f64,
        n: usize,
        m: usize,
        k: usize,
        variance: VarianceComponents,
        delta: f64,
        level: f64,
    ) -> Result<Self> {
        if !delta.is_finite() {
            return Err(invalid(format!("delta must be finite, got {delta}")));
        }
        let z = critical_value(level)?;
        let statistic = test_statistic(estimate, delta, n, m, k, variance.combined)?;
        let (ci_low, ci_high) = confidence_interval(estimate, n, m, k, variance.combined, level)?;
        Ok(Self {
            estimate,
            delta,
            statistic,
            p_value: two_sided_pvalue(statistic),
            ci_low,
            ci_high,
            level,
            variance,
            effective_rate: effective_rate(n, m, k),
            reject: libm::fabs(statistic) > z,
        })
    }
}

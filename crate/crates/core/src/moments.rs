//! Expectation and variance of `C_min`-type statistics for hypothesis testing.
//!
//! The per-bin moments hold the model at its parent mean: the bin statistic
//! is `deviance_term(Y, mu)` with `Y ~ Poisson(mu)`, averaged by direct
//! summation over the Poisson probabilities. Bin moments add up across the
//! dataset, and the fitted degrees of freedom are subtracted from the
//! expectation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_poisson_pmf;
use crate::stat::deviance_term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    /// Summed per-bin moments at the parent mean.
    #[serde(rename = "kb")]
    Kb,
    #[serde(rename = "chi2")]
    ChiSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub expectation: f64,
    pub variance: f64,
    pub kind: MomentKind,
}

impl MomentPair {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Last count included in the Poisson sums.
pub fn truncation_point(mu: f64) -> u64 {
    (mu + 12.0 * mu.sqrt() + 40.0).ceil() as u64
}

pub(crate) fn bin_moments_to(mu: f64, k_max: u64) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in 0..=k_max {
        let p = ln_poisson_pmf(k, mu).exp();
        if p == 0.0 {
            continue;
        }
        let d = deviance_term(k, mu).expect("mu > 0");
        m1 += p * d;
        m2 += p * d * d;
    }
    (m1, (m2 - m1 * m1).max(0.0))
}

/// Moments of the single-bin deviance `deviance_term(Y, mu)` for `Y ~ Poisson(mu)`.
pub fn kb_bin_moments(mu: f64) -> Result<MomentPair> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("parent mean must be positive and finite, got {mu}")));
    }
    let (expectation, variance) = bin_moments_to(mu, truncation_point(mu));
    Ok(MomentPair { expectation, variance, kind: MomentKind::Kb })
}

/// `E = sum_i E_i - df`, `Var = sum_i Var_i` over the parent bin means.
pub fn expected_statistic(means: &[f64], df: f64) -> Result<MomentPair> {
    if !(df >= 0.0) {
        return Err(Error::invalid(format!("degrees of freedom must be >= 0, got {df}")));
    }
    let mut sorted: Vec<f64> = means.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut e, mut v) = (0.0, 0.0);
    // equal means are common (constant models); evaluate each distinct value once
    let mut i = 0;
    while i < sorted.len() {
        let mu = sorted[i];
        let run = sorted[i..].iter().take_while(|&&m| m == mu).count();
        let bin = kb_bin_moments(mu)?;
        e += run as f64 * bin.expectation;
        v += run as f64 * bin.variance;
        i += run;
    }
    Ok(MomentPair { expectation: e - df, variance: v, kind: MomentKind::Kb })
}

/// Large-mean reference: `chi^2` with `n_bins - df` degrees of freedom.
pub fn chi2_reference(n_bins: usize, df: f64) -> Result<MomentPair> {
    if !(df >= 0.0) || n_bins as f64 <= df {
        return Err(Error::invalid(format!("need n_bins > df >= 0, got n_bins={n_bins}, df={df}")));
    }
    let nu = n_bins as f64 - df;
    Ok(MomentPair { expectation: nu, variance: 2.0 * nu, kind: MomentKind::ChiSquared })
}

/// Standardized distance of an observed statistic from its expectation.
pub fn gof_zscore(observed: f64, moments: &MomentPair) -> Result<f64> {
    if !(moments.variance > 0.0) {
        return Err(Error::invalid("variance must be positive for a z-score"));
    }
    Ok((observed - moments.expectation) / moments.variance.sqrt())
}

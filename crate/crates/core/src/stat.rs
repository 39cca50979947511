//! Poisson deviance kernels: the joint and fixed-background `C_min`
//! statistics, the profiled background `b_hat(theta)` and `W_min`.
//!
//! Every statistic is a likelihood ratio against the saturated model, so it
//! is non-negative. A model that assigns zero mean to a bin with observed
//! counts is reported as [`Error::InfiniteDeviance`] rather than `+inf`.

use serde::{Deserialize, Serialize};

use crate::data::{Exposures, PairedDataset};
use crate::error::{Error, Region, Result};
use crate::model::SourceModel;

#[inline]
fn bin_deviance(y: u64, m: f64, region: Region, index: usize) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::NegativeMean { region, index, mean: m });
    }
    if y == 0 {
        return Ok(2.0 * m);
    }
    if m == 0.0 {
        return Err(Error::InfiniteDeviance { region, index, count: y });
    }
    let y = y as f64;
    // rounding can leave a tiny negative value next to the saturated point
    Ok((2.0 * ((m - y) + y * (y / m).ln())).max(0.0))
}

/// Single-bin Poisson deviance `2[(m - y) + y ln(y/m)]`, with `0 ln 0 = 0`.
///
/// A zero mean with `y > 0` fails with [`Error::InfiniteDeviance`] (index 0).
pub fn deviance_term(y: u64, m: f64) -> Result<f64> {
    bin_deviance(y, m, Region::Source, 0)
}

/// Deviance of the source counts against arbitrary fitted means.
pub fn source_deviance(data: &PairedDataset, fitted: &[f64]) -> Result<f64> {
    data.source()
        .iter()
        .zip(fitted)
        .enumerate()
        .try_fold(0.0, |acc, (i, (&s, &m))| Ok(acc + bin_deviance(s, m, Region::Source, i)?))
}

/// Deviance of the background counts against arbitrary fitted means.
pub fn background_deviance(data: &PairedDataset, fitted: &[f64]) -> Result<f64> {
    data.background()
        .iter()
        .zip(fitted)
        .enumerate()
        .try_fold(0.0, |acc, (i, (&b, &m))| Ok(acc + bin_deviance(b, m, Region::Background, i)?))
}

/// Joint `C_min` for a parametric source and a constant background rate `phi`:
/// the sum of the source-region and background-region deviances.
pub fn cmin_joint(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64], phi: f64) -> Result<f64> {
    let t = data.exposures();
    let mut total = 0.0;
    for (i, ((&x, &s), &b)) in data.x().iter().zip(data.source()).zip(data.background()).enumerate() {
        let mu = model.intensity(x, theta);
        total += bin_deviance(s, (mu + phi) * t.source, Region::Source, i)?;
        total += bin_deviance(b, phi * t.background, Region::Background, i)?;
    }
    Ok(total)
}

/// `C_min` of the source counts alone, with the rescaled observed background
/// `B_i / t_B` taken as the true background.
pub fn cmin_fixed(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64]) -> Result<f64> {
    let t = data.exposures();
    let mut total = 0.0;
    for (i, ((&x, &s), &b)) in data.x().iter().zip(data.source()).zip(data.background()).enumerate() {
        let mean = (model.intensity(x, theta) + b as f64 / t.background) * t.source;
        total += bin_deviance(s, mean, Region::Source, i)?;
    }
    Ok(total)
}

/// Restricted MLE of the background rate in one bin at fixed source intensity `mu >= 0`.
///
/// For `b > 0` this is the positive root of
/// `T b^2 + (T mu - S - B) b - B mu = 0` with `T = t_S + t_B`. With `b = 0` the
/// estimate is `max(0, S/T - mu)`, pegged at zero once `mu` exceeds `S/T`.
pub fn profile_bin(s: u64, b: u64, mu: f64, exposures: Exposures) -> f64 {
    let total = exposures.total();
    let (s, b) = (s as f64, b as f64);
    if b == 0.0 {
        let pooled = s / total;
        return if mu > pooled { 0.0 } else { pooled - mu };
    }
    let q = (s + b) / total - mu;
    let cross = 4.0 * b * mu / total;
    let root = (q * q + cross).max(0.0).sqrt();
    if q >= 0.0 {
        0.5 * (q + root)
    } else {
        // product of the roots is -B mu / T; avoids cancellation in q + root
        0.5 * cross / (root - q)
    }
}

/// `d b_hat / d mu` of [`profile_bin`]:
/// `(-1 + (mu - (S + B)/T + 2B/T) / sqrt(Delta)) / 2` for `B > 0`; `-1` or `0`
/// on the two branches of the empty-background case.
pub fn profile_bin_slope(s: u64, b: u64, mu: f64, exposures: Exposures) -> f64 {
    let total = exposures.total();
    let (s, b) = (s as f64, b as f64);
    if b == 0.0 {
        return if mu > s / total { 0.0 } else { -1.0 };
    }
    let d = mu - (s + b) / total;
    let delta = d * d + 4.0 * b * mu / total;
    0.5 * (-1.0 + (d + 2.0 * b / total) / delta.sqrt())
}

/// Per-bin restricted background estimates at a fixed `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfiledBackground {
    pub b_hat: Vec<f64>,
    /// Bins where `b_hat = 0`; only possible where `B_i = 0`.
    pub zero_pegged: Vec<bool>,
}

impl ProfiledBackground {
    pub fn n_pegged(&self) -> usize {
        self.zero_pegged.iter().filter(|&&z| z).count()
    }
}

fn check_intensity(mu: f64, index: usize) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeMean { region: Region::Source, index, mean: mu })
    }
}

/// Profiles the background out of the joint likelihood at fixed `theta`.
/// Requires `mu(x_i; theta) >= 0` in every bin.
pub fn profile_background(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64]) -> Result<ProfiledBackground> {
    let t = data.exposures();
    let n = data.len();
    let mut b_hat = Vec::with_capacity(n);
    let mut zero_pegged = Vec::with_capacity(n);
    for (i, ((&x, &s), &b)) in data.x().iter().zip(data.source()).zip(data.background()).enumerate() {
        let mu = model.intensity(x, theta);
        check_intensity(mu, i)?;
        let v = profile_bin(s, b, mu, t);
        b_hat.push(v);
        zero_pegged.push(v == 0.0);
    }
    Ok(ProfiledBackground { b_hat, zero_pegged })
}

/// Source and background parts of `W(theta)`, the joint deviance evaluated at
/// the profiled background `b_hat(theta)`.
pub fn wmin_parts(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64]) -> Result<(f64, f64)> {
    let t = data.exposures();
    let (mut src, mut bkg) = (0.0, 0.0);
    for (i, ((&x, &s), &b)) in data.x().iter().zip(data.source()).zip(data.background()).enumerate() {
        let mu = model.intensity(x, theta);
        check_intensity(mu, i)?;
        let bh = profile_bin(s, b, mu, t);
        src += bin_deviance(s, (mu + bh) * t.source, Region::Source, i)?;
        bkg += bin_deviance(b, bh * t.background, Region::Background, i)?;
    }
    Ok((src, bkg))
}

/// The wstat statistic `W(theta)`; its minimum over `theta` is `W_min`.
pub fn wmin(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64]) -> Result<f64> {
    wmin_parts(data, model, theta).map(|(s, b)| s + b)
}

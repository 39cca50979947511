//! Maximum-likelihood fitters for the three background treatments.
//!
//! * [`FitMethod::Joint`]: parametric source plus constant background rate,
//!   both fitted to the source and background regions.
//! * [`FitMethod::Wstat`]: background profiled out bin by bin
//!   ([`profile_background`]), source fitted to the resulting `W(theta)`.
//! * [`FitMethod::FixedBackground`]: the rescaled observed background is
//!   taken as the true background and only the source counts are fitted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::PairedDataset;
use crate::error::{Error, Result};
use crate::model::{ConstantModel, SourceModel};
use crate::optim::{find_root, minimize_bounded};
use crate::stat::{cmin_fixed, cmin_joint, profile_background, wmin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "wstat")]
    Wstat,
    #[serde(rename = "joint")]
    Joint,
    #[serde(rename = "fixed")]
    FixedBackground,
}

impl FitMethod {
    /// Table order: wstat, joint, fixed background.
    pub const ALL: [FitMethod; 3] = [FitMethod::Wstat, FitMethod::Joint, FitMethod::FixedBackground];

    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::Wstat => "wstat",
            FitMethod::Joint => "joint",
            FitMethod::FixedBackground => "fixed",
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wstat" | "w" => Ok(FitMethod::Wstat),
            "joint" => Ok(FitMethod::Joint),
            "fixed" | "fixed-background" | "fixed_background" | "fb" => Ok(FitMethod::FixedBackground),
            other => Err(Error::invalid(format!("unknown fit method `{other}` (expected wstat, joint or fixed)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub abs_tol_theta: f64,
    pub max_evaluations: usize,
    /// Upper end of the source search interval, as a multiple of the largest
    /// observed per-exposure source rate (at least 1).
    pub theta_upper_factor: f64,
    /// Restrict the fixed-background estimate to `theta >= 0` even when no
    /// background bin is empty.
    pub fixed_nonnegative: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            abs_tol_theta: 1e-9,
            max_evaluations: 500,
            theta_upper_factor: 3.0,
            fixed_nonnegative: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol_theta > 0.0) {
            return Err(Error::invalid("abs_tol_theta must be positive"));
        }
        if self.max_evaluations < 10 {
            return Err(Error::invalid("max_evaluations must be at least 10"));
        }
        if !(self.theta_upper_factor > 0.0) {
            return Err(Error::invalid("theta_upper_factor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub method: FitMethod,
    pub theta_hat: Vec<f64>,
    /// `[phi_hat]` for the joint fit, per-bin `b_hat_i` for wstat, `B_i / t_B`
    /// for the fixed background.
    pub background_hat: Vec<f64>,
    /// `C_min` (joint, fixed) or `W_min` (wstat).
    pub statistic: f64,
    pub at_boundary: bool,
    pub converged: bool,
    pub evaluations: usize,
    pub n_source: u64,
    pub n_background: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitOutcome {
    /// `(n_S, n_B)` of the fitted dataset.
    pub fn totals(&self) -> (u64, u64) {
        (self.n_source, self.n_background)
    }

    /// Background rate per unit exposure in bin `i`.
    pub fn background_rate(&self, i: usize) -> f64 {
        match self.method {
            FitMethod::Joint => self.background_hat[0],
            _ => self.background_hat[i],
        }
    }

    /// Fitted expected source-region counts `(mu_i + b_i) t_S`.
    pub fn fitted_source(&self, data: &PairedDataset, model: &dyn SourceModel) -> Vec<f64> {
        let ts = data.exposures().source;
        data.x()
            .iter()
            .enumerate()
            .map(|(i, &x)| (model.intensity(x, &self.theta_hat) + self.background_rate(i)) * ts)
            .collect()
    }

    /// Fitted expected background-region counts `b_i t_B`.
    pub fn fitted_background(&self, data: &PairedDataset) -> Vec<f64> {
        let tb = data.exposures().background;
        (0..data.len()).map(|i| self.background_rate(i) * tb).collect()
    }
}

/// Fits `data` with the constant source model; the joint method uses the
/// closed form.
pub fn fit_constant(method: FitMethod, data: &PairedDataset, settings: &OptimizerSettings) -> Result<FitOutcome> {
    match method {
        FitMethod::Joint => fit_joint_constant(data),
        FitMethod::Wstat => fit_wstat(data, &ConstantModel, settings),
        FitMethod::FixedBackground => fit_fixed(data, &ConstantModel, settings),
    }
}

/// Fits `data` with an arbitrary source model. The joint method takes the
/// closed form when the model is constant and the numerical search otherwise.
pub fn fit(method: FitMethod, data: &PairedDataset, model: &dyn SourceModel, settings: &OptimizerSettings) -> Result<FitOutcome> {
    match method {
        FitMethod::Joint if model.is_constant() => fit_joint_constant(data),
        FitMethod::Joint => fit_joint_numeric(data, model, settings),
        FitMethod::Wstat => fit_wstat(data, model, settings),
        FitMethod::FixedBackground => fit_fixed(data, model, settings),
    }
}

fn negative_warning(theta: &[f64]) -> Vec<String> {
    if theta.iter().any(|&t| t < 0.0) {
        vec!["source estimate is negative, which is not a valid Poisson intensity".to_string()]
    } else {
        Vec::new()
    }
}

/// Closed-form joint fit of the constant source and background:
/// `phi = n_B / (N t_B)`, `theta = n_S / (N t_S) - phi`.
///
/// The estimate is not clamped; `theta < 0` whenever the background region is
/// brighter than the source region.
pub fn fit_joint_constant(data: &PairedDataset) -> Result<FitOutcome> {
    let (ns, nb) = data.totals();
    let n = data.len() as f64;
    let t = data.exposures();
    let phi = nb as f64 / (n * t.background);
    let theta = ns as f64 / (n * t.source) - phi;
    let statistic = cmin_joint(data, &ConstantModel, &[theta], phi)?;
    Ok(FitOutcome {
        method: FitMethod::Joint,
        theta_hat: vec![theta],
        background_hat: vec![phi],
        statistic,
        at_boundary: false,
        converged: true,
        evaluations: 0,
        n_source: ns,
        n_background: nb,
        warnings: negative_warning(&[theta]),
    })
}

fn upper_rate(data: &PairedDataset) -> f64 {
    let t = data.exposures();
    let smax = data.source().iter().copied().max().unwrap_or(0) as f64 / t.source;
    smax.max(1.0)
}

/// Background rate maximizing the joint likelihood for given source intensities.
fn profile_rate(data: &PairedDataset, mu: &[f64]) -> f64 {
    let t = data.exposures();
    let score = |phi: f64| -> f64 {
        let mut g = 0.0;
        for ((&m, &s), &b) in mu.iter().zip(data.source()).zip(data.background()) {
            let src = if s == 0 { 1.0 } else { 1.0 - s as f64 / ((m + phi) * t.source) };
            let bkg = if b == 0 { 1.0 } else { 1.0 - b as f64 / (phi * t.background) };
            g += t.source * src + t.background * bkg;
        }
        g
    };
    let lo = mu.iter().fold(0.0_f64, |acc, &m| acc.max(-m));
    let at_lo = score(lo);
    if at_lo >= 0.0 {
        return lo;
    }
    let mut width = 1.0_f64.max(lo);
    let mut hi = lo + width;
    for _ in 0..200 {
        if score(hi) > 0.0 {
            break;
        }
        width *= 2.0;
        hi = lo + width;
    }
    find_root(score, lo, hi, 1e-15, 400).map(|r| r.x).unwrap_or(hi)
}

/// Maximizes the joint likelihood over the source parameters and a constant
/// background rate.
///
/// Each source coordinate is searched in turn with the background rate
/// profiled exactly at every trial point; the bounded search is then polished
/// by root finding on the analytic score.
pub fn fit_joint_numeric(data: &PairedDataset, model: &dyn SourceModel, settings: &OptimizerSettings) -> Result<FitOutcome> {
    settings.validate()?;
    let t = data.exposures();
    let m = model.n_params();
    let bmax = data.background().iter().copied().max().unwrap_or(0) as f64 / t.background;
    let half_width = settings.theta_upper_factor * upper_rate(data).max(bmax);

    let mut theta = vec![0.0; m];
    let mut evaluations = 0;
    let mut converged = true;
    let mut grad = vec![0.0; m];

    let profile = |theta: &[f64]| -> (Vec<f64>, f64) {
        let mu = data.source_intensities(model, theta);
        let phi = profile_rate(data, &mu);
        (mu, phi)
    };
    let objective = |theta: &[f64]| -> f64 {
        let (_, phi) = profile(theta);
        cmin_joint(data, model, theta, phi).unwrap_or(f64::INFINITY)
    };

    let sweeps = if m == 1 { 1 } else { 100 };
    for _ in 0..sweeps {
        let mut max_step = 0.0_f64;
        for j in 0..m {
            let start = theta[j];
            let mut trial = theta.clone();
            let r = minimize_bounded(
                |v| {
                    trial[j] = v;
                    objective(&trial)
                },
                start - half_width,
                start + half_width,
                settings.abs_tol_theta,
                settings.max_evaluations,
            );
            evaluations += r.evaluations;
            converged &= r.converged;
            let mut best = r.x;

            // total derivative of C along theta_j at the profiled background;
            // when the rate sits on its floor -min mu, the floor moves with theta
            let mut trial = theta.clone();
            let mut score = |v: f64| -> f64 {
                trial[j] = v;
                let (mu, phi) = profile(&trial);
                let (mut g, mut g_phi) = (0.0, 0.0);
                let (mut floor, mut floor_grad) = (0.0, 0.0);
                for (i, ((&x, &s), &b)) in data.x().iter().zip(data.source()).zip(data.background()).enumerate() {
                    model.gradient(x, &trial, &mut grad);
                    let src = if s == 0 { 1.0 } else { 1.0 - s as f64 / ((mu[i] + phi) * t.source) };
                    let bkg = if b == 0 { 1.0 } else { 1.0 - b as f64 / (phi * t.background) };
                    g += t.source * src * grad[j];
                    g_phi += t.source * src + t.background * bkg;
                    if -mu[i] > floor {
                        floor = -mu[i];
                        floor_grad = -grad[j];
                    }
                }
                if floor > 0.0 && phi == floor {
                    g += g_phi * floor_grad;
                }
                g
            };
            let mut delta = 1e-7 * best.abs().max(1.0);
            for _ in 0..12 {
                let (gl, gh) = (score(best - delta), score(best + delta));
                evaluations += 2;
                if gl < 0.0 && gh > 0.0 {
                    if let Some(root) = find_root(&mut score, best - delta, best + delta, 1e-15, 200) {
                        evaluations += root.evaluations;
                        best = root.x;
                    }
                    break;
                }
                if gl > 0.0 && gh > 0.0 || gl < 0.0 && gh < 0.0 {
                    delta *= 4.0;
                } else {
                    break;
                }
            }
            max_step = max_step.max((best - start).abs());
            theta[j] = best;
        }
        if max_step < settings.abs_tol_theta {
            break;
        }
    }

    let (_, phi) = profile(&theta);
    let statistic = cmin_joint(data, model, &theta, phi)?;
    if !converged {
        return Err(Error::NonConvergence { best: theta, objective: statistic, evaluations });
    }
    let (ns, nb) = data.totals();
    Ok(FitOutcome {
        method: FitMethod::Joint,
        warnings: negative_warning(&theta),
        theta_hat: theta,
        background_hat: vec![phi],
        statistic,
        at_boundary: false,
        converged,
        evaluations,
        n_source: ns,
        n_background: nb,
    })
}

/// Minimizes `W(theta)` over `theta in [0, theta_max]`.
///
/// When `W(0)` is within `abs_tol_theta` of the interior minimum the estimate
/// is reported exactly at 0 with `at_boundary` set.
pub fn fit_wstat(data: &PairedDataset, model: &dyn SourceModel, settings: &OptimizerSettings) -> Result<FitOutcome> {
    settings.validate()?;
    let m = model.n_params();
    let upper = settings.theta_upper_factor * upper_rate(data);
    let objective = |theta: &[f64]| wmin(data, model, theta).unwrap_or(f64::INFINITY);

    let mut theta = vec![0.0; m];
    let mut evaluations = 0;
    let mut converged = true;
    let sweeps = if m == 1 { 1 } else { 100 };
    for _ in 0..sweeps {
        let mut max_step = 0.0_f64;
        for j in 0..m {
            let mut trial = theta.clone();
            let r = minimize_bounded(
                |v| {
                    trial[j] = v;
                    objective(&trial)
                },
                0.0,
                upper,
                settings.abs_tol_theta,
                settings.max_evaluations,
            );
            evaluations += r.evaluations + 1;
            converged &= r.converged;
            trial[j] = 0.0;
            let at_zero = objective(&trial);
            let best = if at_zero <= r.fx + settings.abs_tol_theta { 0.0 } else { r.x };
            max_step = max_step.max((best - theta[j]).abs());
            theta[j] = best;
        }
        if max_step < settings.abs_tol_theta {
            break;
        }
    }

    let statistic = wmin(data, model, &theta)?;
    if !converged {
        return Err(Error::NonConvergence { best: theta, objective: statistic, evaluations });
    }
    let profiled = profile_background(data, model, &theta)?;
    let (ns, nb) = data.totals();
    Ok(FitOutcome {
        method: FitMethod::Wstat,
        at_boundary: theta.contains(&0.0),
        theta_hat: theta,
        background_hat: profiled.b_hat,
        statistic,
        converged,
        evaluations,
        n_source: ns,
        n_background: nb,
        warnings: Vec::new(),
    })
}

/// Lowest value of coordinate `j` (starting from the feasible `theta`) that
/// keeps every fixed-background model mean non-negative.
fn feasible_floor(data: &PairedDataset, model: &dyn SourceModel, theta: &[f64], j: usize) -> f64 {
    let t = data.exposures();
    let mut trial = theta.to_vec();
    let mut feasible = |v: f64| {
        trial[j] = v;
        data.x()
            .iter()
            .zip(data.background())
            .all(|(&x, &b)| model.intensity(x, &trial) + b as f64 / t.background >= 0.0)
    };
    let start = theta[j];
    let mut step = 1.0;
    let mut inside = start;
    let mut outside = None;
    for _ in 0..64 {
        let v = start - step;
        if feasible(v) {
            inside = v;
            step *= 2.0;
        } else {
            outside = Some(v);
            break;
        }
    }
    let Some(mut out) = outside else { return inside };
    for _ in 0..200 {
        let mid = 0.5 * (inside + out);
        if mid == inside || mid == out {
            break;
        }
        if feasible(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    inside
}

/// Fits the source counts with the observed background held fixed, by
/// solving the score equation (for the constant model,
/// `sum_i S_i / (theta + B_i/t_B) = N t_S`) one coordinate at a time.
///
/// The search domain is `theta >= 0` when any background bin is empty or
/// [`OptimizerSettings::fixed_nonnegative`] is set; otherwise it extends down
/// to where the lowest model mean reaches zero.
pub fn fit_fixed(data: &PairedDataset, model: &dyn SourceModel, settings: &OptimizerSettings) -> Result<FitOutcome> {
    settings.validate()?;
    let t = data.exposures();
    let m = model.n_params();
    let clamp = settings.fixed_nonnegative || data.has_empty_background_bin();
    let mut theta = vec![0.0; m];
    let mut grad = vec![0.0; m];
    let mut evaluations = 0;
    let mut converged = true;
    let mut at_boundary = false;

    let sweeps = if m == 1 { 1 } else { 100 };
    for _ in 0..sweeps {
        let mut max_step = 0.0_f64;
        at_boundary = false;
        for j in 0..m {
            let mut trial = theta.clone();
            let mut score = |v: f64| -> f64 {
                trial[j] = v;
                let mut g = 0.0;
                for ((&x, &s), &b) in data.x().iter().zip(data.source()).zip(data.background()) {
                    model.gradient(x, &trial, &mut grad);
                    if grad[j] == 0.0 {
                        continue;
                    }
                    if s == 0 {
                        g += grad[j];
                        continue;
                    }
                    let mean = (model.intensity(x, &trial) + b as f64 / t.background) * t.source;
                    g += (1.0 - s as f64 / mean) * grad[j];
                }
                g
            };

            let lo = if clamp { 0.0 } else { feasible_floor(data, model, &theta, j) };
            let at_lo = score(lo);
            evaluations += 1;
            let best = if at_lo >= 0.0 {
                at_boundary = true;
                lo
            } else {
                let mut width = upper_rate(data).max(1.0);
                let mut hi = lo + width;
                let mut bracketed = false;
                for _ in 0..200 {
                    evaluations += 1;
                    if score(hi) > 0.0 {
                        bracketed = true;
                        break;
                    }
                    width *= 2.0;
                    hi = lo + width;
                }
                let root = if bracketed {
                    find_root(&mut score, lo, hi, settings.abs_tol_theta.min(1e-12), settings.max_evaluations)
                } else {
                    None
                };
                match root {
                    Some(r) => {
                        evaluations += r.evaluations;
                        converged &= r.converged;
                        r.x
                    }
                    None => {
                        converged = false;
                        hi
                    }
                }
            };
            max_step = max_step.max((best - theta[j]).abs());
            theta[j] = best;
        }
        if max_step < settings.abs_tol_theta {
            break;
        }
    }

    let statistic = cmin_fixed(data, model, &theta)?;
    if !converged {
        return Err(Error::NonConvergence { best: theta, objective: statistic, evaluations });
    }
    let (ns, nb) = data.totals();
    Ok(FitOutcome {
        method: FitMethod::FixedBackground,
        warnings: negative_warning(&theta),
        theta_hat: theta,
        background_hat: data.background().iter().map(|&b| b as f64 / t.background).collect(),
        statistic,
        at_boundary,
        converged,
        evaluations,
        n_source: ns,
        n_background: nb,
    })
}

//! Monte Carlo effective degrees of freedom and optimism.
//!
//! `df = sum_i Cov(y_hat_i, y_i) / sigma_i^2` over replicate datasets drawn from
//! a known parent, with `sigma_i^2` the parent variance of bin `i`. The joint
//! fit counts both regions; the wstat and fixed-background fits count the
//! source region only, since their background-region predictions are either
//! the data themselves or absent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Exposures, PairedDataset, ParentModel};
use crate::error::{Error, Result};
use crate::fit::{fit, FitMethod, FitOutcome, OptimizerSettings};
use crate::model::SourceModel;
use crate::sim::sampling::{parent_key, sample_dataset, StreamSeed};
use crate::stat::{background_deviance, source_deviance};

/// Replicate streams for the independent test datasets `y*` live in the upper
/// half of the stream space.
pub const TEST_STREAM_OFFSET: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfEstimate {
    pub df: f64,
    pub standard_error: f64,
    pub replicates: usize,
    pub source: f64,
    pub background: f64,
}

/// Collects fitted and observed counts replicate by replicate.
#[derive(Debug, Clone)]
pub struct DfAccumulator {
    method: FitMethod,
    n: usize,
    var_source: Vec<f64>,
    var_background: Vec<f64>,
    fit_source: Vec<f64>,
    obs_source: Vec<f64>,
    fit_background: Vec<f64>,
    obs_background: Vec<f64>,
    replicates: usize,
}

impl DfAccumulator {
    pub fn new(method: FitMethod, parent: &ParentModel, model: &dyn SourceModel, n: usize, exposures: Exposures) -> Result<Self> {
        exposures.validate()?;
        let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let (var_source, var_background) = parent.expected_counts(model, &x, exposures)?;
        if var_source.iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("source-region parent variance must be positive"));
        }
        if method == FitMethod::Joint && var_background.iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("background-region parent variance must be positive for the joint fit"));
        }
        Ok(DfAccumulator {
            method,
            n,
            var_source,
            var_background,
            fit_source: Vec::new(),
            obs_source: Vec::new(),
            fit_background: Vec::new(),
            obs_background: Vec::new(),
            replicates: 0,
        })
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn push(&mut self, data: &PairedDataset, outcome: &FitOutcome, model: &dyn SourceModel) -> Result<()> {
        if data.len() != self.n || outcome.method != self.method {
            return Err(Error::invalid("replicate does not match the accumulator's method or size"));
        }
        self.fit_source.extend(outcome.fitted_source(data, model));
        self.obs_source.extend(data.source().iter().map(|&s| s as f64));
        if self.method == FitMethod::Joint {
            self.fit_background.extend(outcome.fitted_background(data));
            self.obs_background.extend(data.background().iter().map(|&b| b as f64));
        }
        self.replicates += 1;
        Ok(())
    }

    /// Per-replicate contributions `z_r = sum_i (y_hat_ir - mean)(y_ir - mean) / sigma_i^2`.
    fn contributions(&self, fitted: &[f64], observed: &[f64], var: &[f64]) -> Vec<f64> {
        let (n, r) = (self.n, self.replicates);
        if fitted.is_empty() {
            return vec![0.0; r];
        }
        let mut mean_fit = vec![0.0; n];
        let mut mean_obs = vec![0.0; n];
        for k in 0..r {
            for i in 0..n {
                mean_fit[i] += fitted[k * n + i];
                mean_obs[i] += observed[k * n + i];
            }
        }
        for i in 0..n {
            mean_fit[i] /= r as f64;
            mean_obs[i] /= r as f64;
        }
        (0..r)
            .map(|k| {
                (0..n)
                    .map(|i| (fitted[k * n + i] - mean_fit[i]) * (observed[k * n + i] - mean_obs[i]) / var[i])
                    .sum()
            })
            .collect()
    }

    pub fn finish(&self) -> Result<DfEstimate> {
        let r = self.replicates;
        if r < 2 {
            return Err(Error::invalid(format!("replicates must be >= 2, got {r}")));
        }
        let zs = self.contributions(&self.fit_source, &self.obs_source, &self.var_source);
        let zb = self.contributions(&self.fit_background, &self.obs_background, &self.var_background);
        let denom = (r - 1) as f64;
        let source = zs.iter().sum::<f64>() / denom;
        let background = zb.iter().sum::<f64>() / denom;
        let z: Vec<f64> = zs.iter().zip(&zb).map(|(a, b)| a + b).collect();
        let mean = z.iter().sum::<f64>() / r as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / denom;
        Ok(DfEstimate {
            df: source + background,
            standard_error: (var / r as f64).sqrt() * r as f64 / denom,
            replicates: r,
            source,
            background,
        })
    }
}

/// One Monte Carlo experiment: a method applied to datasets of size `n`
/// drawn from `parent`.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub method: FitMethod,
    pub parent: &'a ParentModel,
    pub model: &'a dyn SourceModel,
    pub n: usize,
    pub exposures: Exposures,
    pub settings: &'a OptimizerSettings,
}

impl Experiment<'_> {
    fn fit_replicates(&self, key: u64, replicates: usize) -> Result<Vec<(PairedDataset, FitOutcome)>> {
        let results: Vec<Result<(PairedDataset, FitOutcome)>> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let data = sample_dataset(self.parent, self.model, self.n, self.exposures, StreamSeed::new(key, r))?;
                let outcome = fit(self.method, &data, self.model, self.settings)?;
                Ok((data, outcome))
            })
            .collect();
        results
            .into_iter()
            .enumerate()
            .map(|(index, r)| r.map_err(|e| Error::Replicate { index, source: Box::new(e) }))
            .collect()
    }
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(Error::invalid(format!("replicates must be >= 2, got {replicates}")));
    }
    Ok(())
}

/// Effective degrees of freedom of `exp.method` from `replicates` datasets.
/// Replicate `r` is drawn on stream `r` under `parent_key(seed, parent, n)`,
/// the same datasets the simulation harness uses for that cell.
pub fn estimate_df(exp: &Experiment<'_>, replicates: usize, seed: u64) -> Result<DfEstimate> {
    check_replicates(replicates)?;
    exp.settings.validate()?;
    let mut acc = DfAccumulator::new(exp.method, exp.parent, exp.model, exp.n, exp.exposures)?;
    let key = parent_key(seed, exp.parent, exp.n);
    for (data, outcome) in exp.fit_replicates(key, replicates)? {
        acc.push(&data, &outcome, exp.model)?;
    }
    acc.finish()
}

/// `omega = 2 df / N`.
pub fn optimism(df: f64, n_points: usize) -> Result<f64> {
    if n_points == 0 {
        return Err(Error::invalid("optimism needs at least one data point"));
    }
    Ok(2.0 * df / n_points as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimismCheck {
    /// `mean(C*) - mean(C_min)`.
    pub delta: f64,
    /// `2 df` from the same replicates.
    pub expected: f64,
    pub in_sample: f64,
    pub out_of_sample: f64,
    /// Standard error of `delta`.
    pub delta_standard_error: f64,
    pub df: DfEstimate,
}

/// Compares the in-sample statistic with the statistic of the same fit
/// evaluated on an independent dataset `y*` from the parent.
///
/// The comparison covers the regions counted by [`estimate_df`]: both regions
/// for the joint fit, the source region for wstat and the fixed background.
pub fn verify_optimism(exp: &Experiment<'_>, replicates: usize, seed: u64) -> Result<OptimismCheck> {
    check_replicates(replicates)?;
    exp.settings.validate()?;
    let mut acc = DfAccumulator::new(exp.method, exp.parent, exp.model, exp.n, exp.exposures)?;
    let key = parent_key(seed, exp.parent, exp.n);
    let fits = exp.fit_replicates(key, replicates)?;

    let gaps: Vec<Result<(f64, f64)>> = fits
        .par_iter()
        .enumerate()
        .map(|(r, (data, outcome))| {
            let fresh =
                sample_dataset(exp.parent, exp.model, exp.n, exp.exposures, StreamSeed::new(key, r as u64 | TEST_STREAM_OFFSET))?;
            let src = outcome.fitted_source(data, exp.model);
            let mut inside = source_deviance(data, &src)?;
            let mut outside = source_deviance(&fresh, &src)?;
            if exp.method == FitMethod::Joint {
                let bkg = outcome.fitted_background(data);
                inside += background_deviance(data, &bkg)?;
                outside += background_deviance(&fresh, &bkg)?;
            }
            Ok((inside, outside))
        })
        .collect();

    let mut pairs = Vec::with_capacity(replicates);
    for (index, (g, (data, outcome))) in gaps.into_iter().zip(&fits).enumerate() {
        pairs.push(g.map_err(|e| Error::Replicate { index, source: Box::new(e) })?);
        acc.push(data, outcome, exp.model)?;
    }
    let df = acc.finish()?;
    let r = replicates as f64;
    let in_sample = pairs.iter().map(|p| p.0).sum::<f64>() / r;
    let out_of_sample = pairs.iter().map(|p| p.1).sum::<f64>() / r;
    let delta = out_of_sample - in_sample;
    let var = pairs.iter().map(|p| (p.1 - p.0 - delta).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(OptimismCheck {
        delta,
        expected: 2.0 * df.df,
        in_sample,
        out_of_sample,
        delta_standard_error: (var / r).sqrt(),
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstantModel;

    fn experiment<'a>(method: FitMethod, parent: &'a ParentModel, settings: &'a OptimizerSettings) -> Experiment<'a> {
        Experiment { method, parent, model: &ConstantModel, n: 100, exposures: Exposures::unit(), settings }
    }

    #[test]
    fn optimism_arithmetic() {
        assert_eq!(optimism(2.0, 100).unwrap(), 0.04);
        assert_eq!(optimism(0.0, 10).unwrap(), 0.0);
        assert!(optimism(1.0, 0).is_err());
    }

    #[test]
    fn rejects_too_few_replicates() {
        let p = ParentModel::constant(1.0, 1.0);
        let s = OptimizerSettings::default();
        let err = estimate_df(&experiment(FitMethod::Joint, &p, &s), 1, 0).unwrap_err();
        assert!(err.to_string().contains("replicates must be >= 2"), "{err}");
    }

    #[test]
    fn joint_needs_background_variance() {
        let p = ParentModel::constant(1.0, 0.0);
        let s = OptimizerSettings::default();
        assert!(estimate_df(&experiment(FitMethod::Joint, &p, &s), 10, 0).is_err());
    }

    #[test]
    fn degenerate_two_replicates() {
        let p = ParentModel::constant(1.0, 1.0);
        let s = OptimizerSettings::default();
        let d = estimate_df(&experiment(FitMethod::Joint, &p, &s), 2, 5).unwrap();
        assert_eq!(d.replicates, 2);
        assert!(d.standard_error >= 0.0 && d.df.is_finite());
    }

    #[test]
    fn joint_df_is_two() {
        let p = ParentModel::constant(1.0, 1.0);
        let s = OptimizerSettings::default();
        let d = estimate_df(&experiment(FitMethod::Joint, &p, &s), 1000, 42).unwrap();
        assert!((d.df - 2.0).abs() < 3.0 * d.standard_error.max(0.05), "{d:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let p = ParentModel::constant(1.0, 10.0);
        let s = OptimizerSettings::default();
        let e = experiment(FitMethod::Wstat, &p, &s);
        assert_eq!(estimate_df(&e, 50, 9).unwrap(), estimate_df(&e, 50, 9).unwrap());
    }

    #[test]
    fn accumulator_on_exact_linear_fit() {
        // a "fit" that returns the data gives Cov(y, y) / sigma^2 = sample var / parent var
        let p = ParentModel::constant(2.0, 0.0);
        let mut acc = DfAccumulator::new(FitMethod::FixedBackground, &p, &ConstantModel, 1, Exposures::unit()).unwrap();
        for s in [0u64, 2, 4] {
            let data = PairedDataset::from_counts(vec![s], vec![0], Exposures::unit()).unwrap();
            let outcome = FitOutcome {
                method: FitMethod::FixedBackground,
                theta_hat: vec![s as f64],
                background_hat: vec![0.0],
                statistic: 0.0,
                at_boundary: false,
                converged: true,
                evaluations: 0,
                n_source: s,
                n_background: 0,
                warnings: Vec::new(),
            };
            acc.push(&data, &outcome, &ConstantModel).unwrap();
        }
        // sample variance of {0, 2, 4} is 4, parent variance 2
        assert!((acc.finish().unwrap().df - 2.0).abs() < 1e-12);
    }
}

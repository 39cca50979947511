//! Grid experiments over constant source and background intensities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Exposures, PairedDataset, ParentModel};
use crate::efron::{DfAccumulator, DfEstimate};
use crate::error::{Error, Result};
use crate::fit::{fit_constant, FitMethod, FitOutcome, OptimizerSettings};
use crate::model::ConstantModel;
use crate::sim::ecdf::Band;
use crate::sim::sampling::{cell_key, sample_dataset, StreamSeed};

/// Largest fraction of failed fits a cell tolerates.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

fn default_m() -> usize {
    1000
}

fn default_exposure() -> f64 {
    1.0
}

fn default_methods() -> Vec<FitMethod> {
    FitMethod::ALL.to_vec()
}

fn default_replicates() -> usize {
    1000
}

/// A grid of `(theta, beta, N)` cells. Deserializes from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub theta_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    #[serde(alias = "N_values")]
    pub n_values: Vec<usize>,
    /// Realizations per cell.
    #[serde(default = "default_m", alias = "M")]
    pub m: usize,
    #[serde(default = "default_exposure", alias = "t_S")]
    pub t_s: f64,
    #[serde(default = "default_exposure", alias = "t_B")]
    pub t_b: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<FitMethod>,
    /// Datasets per df estimate; 0 skips the df column.
    #[serde(default = "default_replicates")]
    pub df_replicates: usize,
    #[serde(default)]
    pub settings: OptimizerSettings,
}

/// One `(theta, beta, N)` point of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub theta: f64,
    pub beta: f64,
    pub n: usize,
}

impl GridConfig {
    pub fn new(theta_values: Vec<f64>, beta_values: Vec<f64>, n_values: Vec<usize>) -> Self {
        GridConfig {
            theta_values,
            beta_values,
            n_values,
            m: default_m(),
            t_s: 1.0,
            t_b: 1.0,
            master_seed: 0,
            methods: default_methods(),
            df_replicates: default_replicates(),
            settings: OptimizerSettings::default(),
        }
    }

    pub fn exposures(&self) -> Result<Exposures> {
        Exposures::new(self.t_s, self.t_b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        for (name, values) in [("theta_values", &self.theta_values), ("beta_values", &self.beta_values)] {
            if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.n_values.contains(&0) {
            return Err(Error::invalid("n_values must be positive"));
        }
        if self.df_replicates == 1 {
            return Err(Error::invalid("replicates must be >= 2 (or 0 to skip df)"));
        }
        self.exposures()?;
        self.settings.validate()
    }

    /// Methods in table order (wstat, joint, fixed), without repeats.
    pub fn ordered_methods(&self) -> Vec<FitMethod> {
        FitMethod::ALL.iter().copied().filter(|m| self.methods.contains(m)).collect()
    }

    /// Cells in output order: `N`, then `theta`, then `beta`.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &theta in &self.theta_values {
                for &beta in &self.beta_values {
                    out.push(CellSpec { theta, beta, n });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: FitMethod,
    pub statistic: Band,
    /// Fractional bias `(theta_hat - theta) / theta`.
    pub bias: Band,
    pub df: Option<DfEstimate>,
    /// Fraction of realizations with `theta_hat` on the `theta = 0` boundary.
    pub boundary_fraction: f64,
    pub failures: usize,
}

/// One table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCellSummary {
    pub theta: f64,
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub master_seed: u64,
    pub methods: Vec<MethodSummary>,
}

impl SimCellSummary {
    pub fn method(&self, method: FitMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

/// Outcomes of the first `M` realizations for one method; `None` marks a
/// failed fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSamples {
    pub method: FitMethod,
    pub outcomes: Vec<Option<FitOutcome>>,
}

impl MethodSamples {
    pub fn statistics(&self) -> Vec<f64> {
        self.outcomes.iter().flatten().map(|o| o.statistic).collect()
    }

    pub fn theta_hats(&self) -> Vec<f64> {
        self.outcomes.iter().flatten().map(|o| o.theta_hat[0]).collect()
    }

    pub fn biases(&self, theta: f64) -> Vec<f64> {
        self.theta_hats().into_iter().map(|t| (t - theta) / theta).collect()
    }
}

/// Summary plus the per-realization outcomes of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub summary: SimCellSummary,
    pub samples: Vec<MethodSamples>,
    /// The `M` datasets, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datasets: Option<Vec<PairedDataset>>,
}

impl CellRun {
    pub fn samples_for(&self, method: FitMethod) -> Option<&MethodSamples> {
        self.samples.iter().find(|s| s.method == method)
    }
}

/// Realization `r` of a cell is drawn on stream `r` under
/// `cell_key(master_seed, theta, beta, N)`.
pub fn cell_dataset(config: &GridConfig, cell: CellSpec, r: u64) -> Result<PairedDataset> {
    let parent = ParentModel::constant(cell.theta, cell.beta);
    let key = cell_key(config.master_seed, cell.theta, cell.beta, cell.n);
    sample_dataset(&parent, &ConstantModel, cell.n, config.exposures()?, StreamSeed::new(key, r))
}

/// Fits `max(M, R)` realizations of `cell` with every configured method. The
/// first `M` feed the percentile bands and the first `R` the df estimate.
pub fn run_cell(config: &GridConfig, cell: CellSpec, keep_datasets: bool) -> Result<CellRun> {
    config.validate()?;
    let methods = config.ordered_methods();
    let exposures = config.exposures()?;
    let parent = ParentModel::constant(cell.theta, cell.beta);
    let m = config.m;
    let r_df = config.df_replicates;
    let count = m.max(r_df);

    let realizations: Vec<Result<(PairedDataset, Vec<Result<FitOutcome>>)>> = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let data = cell_dataset(config, cell, r)?;
            let fits = methods.iter().map(|&method| fit_constant(method, &data, &config.settings)).collect();
            Ok((data, fits))
        })
        .collect();
    let realizations: Vec<(PairedDataset, Vec<Result<FitOutcome>>)> = realizations.into_iter().collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(methods.len());
    let mut samples = Vec::with_capacity(methods.len());
    for (j, &method) in methods.iter().enumerate() {
        let failed = realizations.iter().filter(|(_, f)| f[j].is_err()).count();
        if failed as f64 > MAX_FAILURE_FRACTION * count as f64 {
            return Err(Error::CellFailed { theta: cell.theta, beta: cell.beta, n: cell.n, failed, attempted: count });
        }

        let outcomes: Vec<Option<FitOutcome>> = realizations[..m].iter().map(|(_, f)| f[j].as_ref().ok().cloned()).collect();
        let ms = MethodSamples { method, outcomes };
        let ok: Vec<&FitOutcome> = ms.outcomes.iter().flatten().collect();
        if ok.is_empty() {
            return Err(Error::CellFailed { theta: cell.theta, beta: cell.beta, n: cell.n, failed, attempted: count });
        }

        let df = if r_df >= 2 {
            let mut acc = DfAccumulator::new(method, &parent, &ConstantModel, cell.n, exposures)?;
            for (data, fits) in &realizations[..r_df] {
                if let Ok(outcome) = &fits[j] {
                    acc.push(data, outcome, &ConstantModel)?;
                }
            }
            Some(acc.finish()?)
        } else {
            None
        };

        summaries.push(MethodSummary {
            method,
            statistic: Band::from_samples(&ms.statistics())?,
            bias: Band::from_samples(&ms.biases(cell.theta))?,
            df,
            boundary_fraction: ok.iter().filter(|o| o.at_boundary).count() as f64 / ok.len() as f64,
            failures: ms.outcomes.len() - ok.len(),
        });
        samples.push(ms);
    }

    let datasets = keep_datasets.then(|| realizations.into_iter().take(m).map(|(d, _)| d).collect());
    Ok(CellRun {
        summary: SimCellSummary {
            theta: cell.theta,
            beta: cell.beta,
            n: cell.n,
            m,
            master_seed: config.master_seed,
            methods: summaries,
        },
        samples,
        datasets,
    })
}

/// Runs every cell; a failing cell does not stop the others.
pub fn run_grid_cells(config: &GridConfig, keep_datasets: bool) -> Result<Vec<(CellSpec, Result<CellRun>)>> {
    config.validate()?;
    if config.methods.is_empty() {
        return Ok(Vec::new());
    }
    Ok(config
        .cells()
        .into_par_iter()
        .map(|cell| (cell, run_cell(config, cell, keep_datasets)))
        .collect())
}

/// One summary per cell, in [`GridConfig::cells`] order.
pub fn run_grid(config: &GridConfig) -> Result<Vec<(CellSpec, Result<SimCellSummary>)>> {
    Ok(run_grid_cells(config, false)?.into_iter().map(|(c, r)| (c, r.map(|run| run.summary))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(theta: f64, beta: f64) -> GridConfig {
        let mut c = GridConfig::new(vec![theta], vec![beta], vec![20]);
        c.m = 30;
        c.df_replicates = 30;
        c.master_seed = 3;
        c
    }

    #[test]
    fn single_realization_has_zero_offsets() {
        let mut c = small(1.0, 1.0);
        c.m = 1;
        c.df_replicates = 0;
        let run = run_cell(&c, c.cells()[0], true).unwrap();
        for (s, samples) in run.summary.methods.iter().zip(&run.samples) {
            let o = samples.outcomes[0].as_ref().unwrap();
            assert_eq!(s.statistic, Band { median: o.statistic, plus: 0.0, minus: 0.0 });
            assert_eq!(s.bias.median, o.theta_hat[0] - 1.0);
            assert_eq!((s.bias.plus, s.bias.minus), (0.0, 0.0));
            assert!(s.df.is_none());
        }
        assert_eq!(run.datasets.unwrap().len(), 1);
    }

    #[test]
    fn methods_in_table_order() {
        let mut c = small(1.0, 1.0);
        c.methods = vec![FitMethod::FixedBackground, FitMethod::Wstat, FitMethod::FixedBackground];
        assert_eq!(c.ordered_methods(), vec![FitMethod::Wstat, FitMethod::FixedBackground]);
    }

    #[test]
    fn empty_methods_give_no_cells() {
        let mut c = small(1.0, 1.0);
        c.methods.clear();
        assert!(run_grid(&c).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = small(1.0, 1.0);
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = small(1.0, 1.0);
        c.beta_values = vec![0.0];
        assert!(c.validate().is_err());
        let mut c = small(1.0, 1.0);
        c.df_replicates = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cell_independent_of_grid_position() {
        let mut a = small(1.0, 1.0);
        a.theta_values = vec![0.5, 1.0];
        let mut b = a.clone();
        b.theta_values = vec![1.0, 7.0];
        let ra = run_grid(&a).unwrap();
        let rb = run_grid(&b).unwrap();
        assert_eq!(ra[1].1.as_ref().unwrap(), rb[0].1.as_ref().unwrap());
    }

    #[test]
    fn wstat_never_exceeds_fixed() {
        let c = small(0.1, 10.0);
        let run = run_cell(&c, c.cells()[0], false).unwrap();
        let w = run.samples_for(FitMethod::Wstat).unwrap().statistics();
        let f = run.samples_for(FitMethod::FixedBackground).unwrap().statistics();
        assert!(w.iter().zip(&f).all(|(w, f)| w <= f));
    }

    #[test]
    fn config_from_toml() {
        let c: GridConfig = toml::from_str("theta_values=[1.0]\nbeta_values=[2.0]\nN_values=[10]\nM=5\nmethods=[\"wstat\"]\n").unwrap();
        assert_eq!((c.m, c.n_values.clone(), c.methods.clone()), (5, vec![10], vec![FitMethod::Wstat]));
        assert_eq!((c.t_s, c.t_b, c.df_replicates), (1.0, 1.0, 1000));
        assert!(toml::from_str::<GridConfig>("theta_values=[1.0]\nbeta_values=[2.0]\nn_values=[10]\nbogus=1\n").is_err());
    }
}

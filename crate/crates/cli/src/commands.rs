use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use poisson_bkg::sim::{ecdf, report, run_grid_cells, CellRun, CellSpec, GridConfig, SimCellSummary};
use poisson_bkg::{
    chi2_reference, estimate_df, expected_statistic, fit_constant, gof_zscore, optimism, verify_optimism, ConstantModel,
    DfEstimate, Experiment, Exposures, FitMethod, FitOutcome, MomentPair, OptimismCheck, OptimizerSettings,
    PairedDataset, ParentModel,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::{DfArgs, ExposureArgs, FitArgs, MomentsArgs, SimulateArgs, SCHEMA_VERSION};

fn exposures(a: &ExposureArgs) -> CliResult<Exposures> {
    Ok(Exposures::new(a.ts, a.tb)?)
}

fn read_dataset(path: &Path, exposures: Exposures) -> CliResult<PairedDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    PairedDataset::from_csv(io::BufReader::new(file), exposures)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub outcome: FitOutcome,
}

/// Contents of one `samples/cell-*.json` file.
#[derive(Debug, Serialize, Deserialize)]
pub struct SamplesFile {
    pub schema_version: u32,
    pub cell: CellSpec,
    pub settings: OptimizerSettings,
    pub run: CellRun,
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    let (data, settings) = match (&a.data, &a.samples) {
        (Some(path), _) => (read_dataset(path, exposures(&a.exposures)?)?, a.settings.settings()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: SamplesFile =
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let r = a.realization.unwrap_or(0);
            let datasets = file.run.datasets.ok_or_else(|| {
                CliError::Validation(format!("{}: no datasets recorded (rerun simulate with --keep-samples)", path.display()))
            })?;
            let data = datasets
                .into_iter()
                .nth(r)
                .ok_or_else(|| CliError::Validation(format!("{}: realization {r} out of range", path.display())))?;
            (data.validate()?, file.settings)
        }
        (None, None) => return Err(CliError::Validation("a dataset file or --samples is required".into())),
    };
    let outcome = fit_constant(a.method, &data, &settings)?;
    write_json(&FitReport { schema_version: SCHEMA_VERSION, outcome }, a.output.as_deref())
}

#[derive(Debug, Serialize)]
struct GridSummaryFile<'a> {
    schema_version: u32,
    config: &'a GridConfig,
    cells: Vec<CellEntry<'a>>,
}

#[derive(Debug, Serialize)]
struct CellEntry<'a> {
    cell: CellSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a SimCellSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn read_config(path: &Path) -> CliResult<GridConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn cell_stem(index: usize, cell: &CellSpec) -> String {
    format!("cell-{index:03}-theta{}-beta{}-N{}", cell.theta, cell.beta, cell.n)
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut config = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    if let Some(m) = a.m {
        config.m = m;
    }
    if let Some(r) = a.replicates {
        config.df_replicates = r;
    }
    config.validate()?;
    let want_ecdf = a.ecdf || a.svg;

    let runs = run_grid_cells(&config, a.keep_samples)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;

    let methods = config.ordered_methods();
    let rows: Vec<(CellSpec, poisson_bkg::Result<SimCellSummary>)> =
        runs.iter().map(|(c, r)| (*c, r.as_ref().map(|run| run.summary.clone()).map_err(Clone::clone))).collect();
    let table = a.out.join("grid.csv");
    report::write_table(create(&table)?, config.m, &methods, &rows)
        .map_err(|e| CliError::io(&table, e))?;

    let summary = GridSummaryFile {
        schema_version: SCHEMA_VERSION,
        config: &config,
        cells: runs
            .iter()
            .map(|(cell, r)| CellEntry {
                cell: *cell,
                summary: r.as_ref().ok().map(|run| &run.summary),
                error: r.as_ref().err().map(|e| e.to_string()),
            })
            .collect(),
    };
    write_json(&summary, Some(&a.out.join("summary.json")))?;

    if a.keep_samples {
        let dir = a.out.join("samples");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for (i, (cell, run)) in runs.iter().enumerate() {
            if let Ok(run) = run {
                let file = SamplesFile { schema_version: SCHEMA_VERSION, cell: *cell, settings: config.settings, run: run.clone() };
                write_json(&file, Some(&dir.join(format!("{}.json", cell_stem(i, cell)))))?;
            }
        }
    }

    if want_ecdf {
        let dir = a.out.join("ecdf");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for (i, (cell, run)) in runs.iter().enumerate() {
            let Ok(run) = run else { continue };
            for s in &run.samples {
                for (what, values) in [("statistic", s.statistics()), ("theta_hat", s.theta_hats())] {
                    let stem = format!("{}-{}-{what}", cell_stem(i, cell), s.method);
                    let label = format!("{what} ({}), theta={}, beta={}, N={}", s.method, cell.theta, cell.beta, cell.n);
                    let series = ecdf(&values, label)?;
                    let path = dir.join(format!("{stem}.csv"));
                    series.write_csv(create(&path)?).map_err(|e| CliError::io(&path, e))?;
                    if a.svg {
                        let path: PathBuf = dir.join(format!("{stem}.svg"));
                        fs::write(&path, series.to_svg()).map_err(|e| CliError::io(&path, e))?;
                    }
                }
            }
        }
    }

    let failed: Vec<String> = runs.iter().filter_map(|(_, r)| r.as_ref().err().map(|e| e.to_string())).collect();
    eprintln!("wrote {} cells to {}", runs.len(), a.out.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Convergence(format!("{} cell(s) failed: {}", failed.len(), failed.join("; "))))
    }
}

#[derive(Debug, Serialize)]
struct MomentsReport {
    schema_version: u32,
    n_bins: usize,
    df: f64,
    kb: MomentPair,
    chi2: Option<MomentPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zscore_kb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zscore_chi2: Option<f64>,
}

pub fn moments(a: MomentsArgs) -> CliResult<()> {
    let (means, df, observed) = if let Some(path) = &a.data {
        let data = read_dataset(path, exposures(&a.exposures)?)?;
        let outcome = fit_constant(a.method, &data, &OptimizerSettings::default())?;
        let mut means = outcome.fitted_source(&data, &ConstantModel);
        let mut df = 1.0;
        if a.method == FitMethod::Joint {
            means.extend(outcome.fitted_background(&data));
            df = 2.0;
        }
        (means, a.df.unwrap_or(df), Some(a.observed.unwrap_or(outcome.statistic)))
    } else {
        let df = a.df.ok_or_else(|| CliError::Validation("--df is required with --mu".into()))?;
        let means = match (a.mu.len(), a.bins) {
            (0, _) => return Err(CliError::Validation("give --mu or --data".into())),
            (_, Some(0)) => return Err(CliError::Validation("--bins must be at least 1".into())),
            (1, Some(n)) => vec![a.mu[0]; n],
            (k, Some(n)) if k != n => {
                return Err(CliError::Validation(format!("--bins {n} does not match the {k} --mu values")))
            }
            _ => a.mu.clone(),
        };
        (means, df, a.observed)
    };
    let kb = expected_statistic(&means, df)?;
    let chi2 = chi2_reference(means.len(), df).ok();
    let zscore_kb = observed.map(|o| gof_zscore(o, &kb)).transpose()?;
    let zscore_chi2 = match (observed, &chi2) {
        (Some(o), Some(c)) => Some(gof_zscore(o, c)?),
        _ => None,
    };
    write_json(
        &MomentsReport { schema_version: SCHEMA_VERSION, n_bins: means.len(), df, kb, chi2, observed, zscore_kb, zscore_chi2 },
        None,
    )
}

#[derive(Debug, Serialize)]
struct DfReport {
    schema_version: u32,
    method: FitMethod,
    theta: f64,
    beta: f64,
    n: usize,
    seed: u64,
    estimate: DfEstimate,
    /// `2 df / n_points` with `n_points = 2N`, the source plus background bins.
    optimism: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimism_check: Option<OptimismCheck>,
}

pub fn df(a: DfArgs) -> CliResult<()> {
    if a.r < 2 {
        return Err(CliError::Validation("replicates must be ≥ 2".into()));
    }
    if !(a.theta > 0.0 && a.beta > 0.0) {
        return Err(CliError::Validation("theta and beta must be positive".into()));
    }
    let parent = ParentModel::constant(a.theta, a.beta);
    let settings = OptimizerSettings::default();
    let exp = Experiment {
        method: a.method,
        parent: &parent,
        model: &ConstantModel,
        n: a.n,
        exposures: exposures(&a.exposures)?,
        settings: &settings,
    };
    let (estimate, check) = if a.verify {
        let c = verify_optimism(&exp, a.r, a.seed)?;
        (c.df, Some(c))
    } else {
        (estimate_df(&exp, a.r, a.seed)?, None)
    };
    write_json(
        &DfReport {
            schema_version: SCHEMA_VERSION,
            method: a.method,
            theta: a.theta,
            beta: a.beta,
            n: a.n,
            seed: a.seed,
            estimate,
            optimism: optimism(estimate.df, 2 * a.n)?,
            optimism_check: check,
        },
        None,
    )
}

//! Reproducible Monte Carlo experiments.

pub mod ecdf;
pub mod harness;
pub mod report;
pub mod sampling;

pub use ecdf::{ecdf, Band, EcdfSeries};
pub use harness::{run_cell, run_grid, run_grid_cells, CellRun, CellSpec, GridConfig, MethodSamples, MethodSummary, SimCellSummary};
pub use sampling::{cell_key, parent_key, sample_dataset, PoissonSampler, StreamSeed};

//! Table output for grid runs.

use std::io;

use crate::error::Result;
use crate::fit::FitMethod;
use crate::sim::harness::{CellSpec, SimCellSummary};

/// Column names: `theta,beta,N,M`, then per method `stat`, `stat_plus`,
/// `stat_minus`, `bias`, `bias_plus`, `bias_minus`, `df`, `df_se`, then `status`.
pub fn table_header(methods: &[FitMethod]) -> Vec<String> {
    let mut h: Vec<String> = ["theta", "beta", "N", "M"].iter().map(|s| s.to_string()).collect();
    for m in methods {
        for col in ["stat", "stat_plus", "stat_minus", "bias", "bias_plus", "bias_minus", "df", "df_se"] {
            h.push(format!("{}_{col}", m.as_str()));
        }
    }
    h.push("status".into());
    h
}

fn row(cell: &CellSpec, m: usize, methods: &[FitMethod], summary: &Result<SimCellSummary>) -> Vec<String> {
    let mut r = vec![cell.theta.to_string(), cell.beta.to_string(), cell.n.to_string(), m.to_string()];
    match summary {
        Ok(s) => {
            for &method in methods {
                match s.method(method) {
                    Some(ms) => {
                        for v in [ms.statistic.median, ms.statistic.plus, ms.statistic.minus, ms.bias.median, ms.bias.plus, ms.bias.minus] {
                            r.push(format!("{v:.6}"));
                        }
                        match ms.df {
                            Some(df) => {
                                r.push(format!("{:.6}", df.df));
                                r.push(format!("{:.6}", df.standard_error));
                            }
                            None => r.extend([String::new(), String::new()]),
                        }
                    }
                    None => r.extend(std::iter::repeat_n(String::new(), 8)),
                }
            }
            r.push("ok".into());
        }
        Err(e) => {
            r.extend(std::iter::repeat_n(String::new(), 8 * methods.len()));
            r.push(format!("error: {e}"));
        }
    }
    r
}

/// Writes one row per cell in the given order.
pub fn write_table<W: io::Write>(
    w: W,
    m: usize,
    methods: &[FitMethod],
    cells: &[(CellSpec, Result<SimCellSummary>)],
) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(table_header(methods))?;
    for (cell, summary) in cells {
        out.write_record(row(cell, m, methods, summary))?;
    }
    out.flush()
}

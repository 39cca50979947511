//! Empirical distribution functions and percentile summaries.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted samples with cumulative probabilities `k / M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub label: String,
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Right-continuous empirical CDF of `samples`.
pub fn ecdf(samples: &[f64], label: impl Into<String>) -> Result<EcdfSeries> {
    if samples.is_empty() {
        return Err(Error::invalid("eCDF needs at least one sample"));
    }
    if let Some(i) = samples.iter().position(|v| v.is_nan()) {
        return Err(Error::invalid(format!("sample {i} is NaN")));
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let m = values.len() as f64;
    let probabilities = (1..=values.len()).map(|k| k as f64 / m).collect();
    Ok(EcdfSeries { label: label.into(), values, probabilities })
}

impl EcdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        k as f64 / self.values.len() as f64
    }

    /// Size of the jump at `x`, the fraction of samples equal to `x`.
    pub fn atom(&self, x: f64) -> f64 {
        let below = self.values.partition_point(|&v| v < x);
        let upto = self.values.partition_point(|&v| v <= x);
        (upto - below) as f64 / self.values.len() as f64
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["value", "probability"])?;
        for (v, p) in self.values.iter().zip(&self.probabilities) {
            out.write_record([v.to_string(), p.to_string()])?;
        }
        out.flush()
    }

    /// Standalone SVG step plot.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let lo = self.values[0];
        let hi = self.values[self.values.len() - 1];
        let span = if hi > lo { hi - lo } else { 1.0 };
        let sx = |v: f64| pad + (v - lo) / span * (w - 2.0 * pad);
        let sy = |p: f64| h - pad - p * (h - 2.0 * pad);

        let mut path = format!("M{:.2},{:.2}", sx(lo), sy(0.0));
        for (v, p) in self.values.iter().zip(&self.probabilities) {
            let _ = write!(path, " H{:.2} V{:.2}", sx(*v), sy(*p));
        }
        let _ = write!(path, " H{:.2}", sx(hi) + 10.0);

        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#,
            h - pad,
            w - pad
        );
        let _ = writeln!(svg, r#"<path d="{path}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
        for (p, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{label}</text>"#,
                pad - 6.0,
                sy(p) + 4.0
            );
        }
        for v in [lo, hi] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
                sx(v),
                h - pad + 18.0,
                format_tick(v)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
            w / 2.0,
            pad / 2.0,
            escape(&self.label)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Percentile of sorted data by linear interpolation between order
/// statistics (`h = (M - 1) p`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const LOWER_PERCENTILE: f64 = 0.159;
pub const UPPER_PERCENTILE: f64 = 0.841;

/// Median with the offsets to the 84.1st (`plus`) and from the 15.9th
/// (`minus`) percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub median: f64,
    pub plus: f64,
    pub minus: f64,
}

impl Band {
    pub fn from_samples(samples: &[f64]) -> Result<Band> {
        if samples.is_empty() {
            return Err(Error::invalid("percentile band needs at least one sample"));
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let median = percentile_sorted(&s, 0.5);
        Ok(Band {
            median,
            plus: (percentile_sorted(&s, UPPER_PERCENTILE) - median).max(0.0),
            minus: (median - percentile_sorted(&s, LOWER_PERCENTILE)).max(0.0),
        })
    }
}

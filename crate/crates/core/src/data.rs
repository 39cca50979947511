//! Paired source/background count data and the parent model that generates it.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Region, Result};
use crate::model::SourceModel;

/// Area-times-time products of the two regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposures {
    #[serde(rename = "t_S")]
    pub source: f64,
    #[serde(rename = "t_B")]
    pub background: f64,
}

impl Exposures {
    pub fn new(source: f64, background: f64) -> Result<Self> {
        let e = Exposures { source, background };
        e.validate()?;
        Ok(e)
    }

    pub fn unit() -> Self {
        Exposures { source: 1.0, background: 1.0 }
    }

    pub fn total(&self) -> f64 {
        self.source + self.background
    }

    pub fn validate(&self) -> Result<()> {
        // `!(v > 0)` also rejects NaN
        if !(self.source > 0.0) || !self.source.is_finite() {
            return Err(Error::NonPositiveExposure { which: Region::Source, value: self.source });
        }
        if !(self.background > 0.0) || !self.background.is_finite() {
            return Err(Error::NonPositiveExposure {
                which: Region::Background,
                value: self.background,
            });
        }
        Ok(())
    }
}

impl Default for Exposures {
    fn default() -> Self {
        Self::unit()
    }
}

/// N bins of source counts `S_i` and background counts `B_i` observed at grid
/// positions `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDataset {
    x: Vec<f64>,
    source: Vec<u64>,
    background: Vec<u64>,
    exposures: Exposures,
}

impl PairedDataset {
    /// Builds and validates a dataset.
    pub fn new(x: Vec<f64>, source: Vec<u64>, background: Vec<u64>, exposures: Exposures) -> Result<Self> {
        Self { x, source, background, exposures }.validate()
    }

    /// Dataset on the grid `x_i = i + 1`.
    pub fn from_counts(source: Vec<u64>, background: Vec<u64>, exposures: Exposures) -> Result<Self> {
        let x = (1..=source.len()).map(|i| i as f64).collect();
        Self::new(x, source, background, exposures)
    }

    /// Checks every structural invariant and hands the dataset back unchanged.
    pub fn validate(self) -> Result<Self> {
        let (nx, ns, nb) = (self.x.len(), self.source.len(), self.background.len());
        if nx != ns || ns != nb {
            return Err(Error::LengthMismatch { x: nx, s: ns, b: nb });
        }
        if ns == 0 {
            return Err(Error::EmptyDataset);
        }
        self.exposures.validate()?;
        for (i, w) in self.x.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonIncreasingGrid { index: i + 1 });
            }
        }
        Ok(self)
    }

    /// Reads `x,S,B` CSV rows. Counts must be non-negative integers; a value
    /// such as `3.0` is accepted, `2.5` or `-1` is not.
    pub fn from_csv<R: Read>(reader: R, exposures: Exposures) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::invalid(format!("csv header: {e}")))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("csv header must contain column `{name}`")))
        };
        let (ix, is, ib) = (col("x")?, col("S")?, col("B")?);

        let (mut x, mut s, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (index, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("csv row {}: {e}", index + 1)))?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let xv: f64 = field(ix)
                .parse()
                .map_err(|_| Error::invalid(format!("csv row {}: x is not a number", index + 1)))?;
            x.push(xv);
            s.push(parse_count(field(is), Region::Source, index)?);
            b.push(parse_count(field(ib), Region::Background, index)?);
        }
        Self::new(x, s, b, exposures)
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn source(&self) -> &[u64] {
        &self.source
    }

    pub fn background(&self) -> &[u64] {
        &self.background
    }

    pub fn exposures(&self) -> Exposures {
        self.exposures
    }

    /// `(n_S, n_B)`: total counts in each region.
    pub fn totals(&self) -> (u64, u64) {
        (self.source.iter().sum(), self.background.iter().sum())
    }

    pub fn has_empty_background_bin(&self) -> bool {
        self.background.contains(&0)
    }

    /// Per-bin source intensities `mu(x_i; theta)`.
    pub fn source_intensities(&self, model: &dyn SourceModel, theta: &[f64]) -> Vec<f64> {
        self.x.iter().map(|&x| model.intensity(x, theta)).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,S,B")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.x[i], self.source[i], self.background[i])?;
        }
        Ok(())
    }
}

fn parse_count(raw: &str, region: Region, index: usize) -> Result<u64> {
    let bad = || Error::InvalidCount { region, index, value: raw.to_string() };
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = raw.parse().map_err(|_| bad())?;
    if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
        Ok(v as u64)
    } else {
        Err(bad())
    }
}

/// Parent intensities: source parameters `theta` and a constant background
/// rate `beta` per unit exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentModel {
    pub theta: Vec<f64>,
    pub beta: f64,
}

impl ParentModel {
    pub fn constant(theta: f64, beta: f64) -> Self {
        ParentModel { theta: vec![theta], beta }
    }

    /// Expected counts `lambda_i = (mu_i + b) t_S` and `beta_i = b t_B` on the grid `x`.
    pub fn expected_counts(
        &self,
        model: &dyn SourceModel,
        x: &[f64],
        exposures: Exposures,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.theta.len() != model.n_params() || self.theta.is_empty() {
            return Err(Error::invalid(format!(
                "source model takes {} parameters, parent has {}",
                model.n_params(),
                self.theta.len()
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("background rate must be >= 0, got {}", self.beta)));
        }
        let mut lambda = Vec::with_capacity(x.len());
        for (index, &xi) in x.iter().enumerate() {
            let mean = (model.intensity(xi, &self.theta) + self.beta) * exposures.source;
            if !(mean >= 0.0) || !mean.is_finite() {
                return Err(Error::NegativeMean { region: Region::Source, index, mean });
            }
            lambda.push(mean);
        }
        let beta = vec![self.beta * exposures.background; x.len()];
        Ok((lambda, beta))
    }
}

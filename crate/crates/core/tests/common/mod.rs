//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use poisson_bkg::{
    cmin_fixed, cmin_joint, fit_constant, fit_joint_constant, fit_joint_numeric, profile_bin, profile_bin_slope, wmin,
    ConstantModel, Exposures, FitMethod, OptimizerSettings, PairedDataset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` datasets with `1 <= N <= 5` bins and counts in `0..=20`.
pub fn micro_datasets(count: usize, seed: u64) -> Vec<PairedDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let s = (0..n).map(|_| rng.random_range(0..=20)).collect();
            let b = (0..n).map(|_| rng.random_range(0..=20)).collect();
            PairedDataset::from_counts(s, b, Exposures::unit()).unwrap()
        })
        .collect()
}

fn argmin_on_grid(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let steps = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f(lo));
    for k in 1..=steps {
        let x = lo + k as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Grid minimizer of `f` on `[lo, hi]`: a pass at `coarse`, then a pass at
/// `coarse / 1000` within one coarse step of the best point.
pub fn grid_argmin(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, coarse: f64) -> f64 {
    let (x0, _) = argmin_on_grid(&mut f, lo, hi, coarse);
    let (a, b) = ((x0 - coarse).max(lo), (x0 + coarse).min(hi));
    argmin_on_grid(&mut f, a, b, coarse / 1000.0).0
}

/// Plain golden-section search.
pub fn golden(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn finite(r: poisson_bkg::Result<f64>) -> f64 {
    r.unwrap_or(f64::INFINITY)
}

pub fn oracle_wstat(d: &PairedDataset) -> f64 {
    let hi = 3.0 * (*d.source().iter().max().unwrap()).max(1) as f64;
    grid_argmin(|t| finite(wmin(d, &ConstantModel, &[t])), 0.0, hi, 1e-3)
}

pub fn oracle_fixed(d: &PairedDataset) -> f64 {
    let hi = 3.0 * (*d.source().iter().max().unwrap()).max(1) as f64;
    grid_argmin(|t| finite(cmin_fixed(d, &ConstantModel, &[t])), 0.0, hi, 1e-3)
}

/// Grid over `theta`, golden-section over the background rate.
pub fn oracle_joint(d: &PairedDataset) -> f64 {
    let cap = 3.0 * (*d.source().iter().chain(d.background()).max().unwrap()).max(1) as f64;
    let inner = |t: f64| {
        let lo = (-t).max(0.0);
        golden(|phi| finite(cmin_joint(d, &ConstantModel, &[t], phi)), lo, lo + cap, 90).1
    };
    grid_argmin(inner, -cap, cap, 1e-2)
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub datasets: usize,
    pub max_dev_wstat: f64,
    pub max_dev_fixed: f64,
    pub max_dev_joint: f64,
    pub max_closed_vs_numeric: f64,
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn max_dev(&self) -> f64 {
        self.max_dev_wstat.max(self.max_dev_fixed).max(self.max_dev_joint)
    }
}

pub fn oracle_equivalence(count: usize, seed: u64) -> OracleReport {
    let settings = OptimizerSettings::default();
    let mut rep = OracleReport { datasets: count, ..Default::default() };
    for (k, d) in micro_datasets(count, seed).iter().enumerate() {
        let w = fit_constant(FitMethod::Wstat, d, &settings).unwrap().theta_hat[0];
        let f = fit_constant(FitMethod::FixedBackground, d, &settings).unwrap().theta_hat[0];
        let jn = fit_joint_numeric(d, &ConstantModel, &settings).unwrap().theta_hat[0];
        let jc = fit_joint_constant(d).unwrap().theta_hat[0];

        let dw = (w - oracle_wstat(d)).abs();
        let df = (f - oracle_fixed(d)).abs();
        let dj = (jn - oracle_joint(d)).abs();
        let dc = (jn - jc).abs();
        rep.max_dev_wstat = rep.max_dev_wstat.max(dw);
        rep.max_dev_fixed = rep.max_dev_fixed.max(df);
        rep.max_dev_joint = rep.max_dev_joint.max(dj);
        rep.max_closed_vs_numeric = rep.max_closed_vs_numeric.max(dc);
        if dw > 1e-3 || df > 1e-3 || dj > 1e-3 || dc > 1e-8 {
            rep.failures.push(format!(
                "dataset {k} S={:?} B={:?}: wstat {dw:.2e}, fixed {df:.2e}, joint {dj:.2e}, closed {dc:.2e}",
                d.source(),
                d.background()
            ));
        }
    }
    rep
}

/// `d log L / d b` of one bin by central difference at `b_hat`.
pub fn numeric_background_score(s: u64, b: u64, mu: f64, t: Exposures, b_hat: f64) -> f64 {
    let loglik = |bb: f64| {
        let m = (mu + bb) * t.source;
        let mb = bb * t.background;
        let src = if s == 0 { -m } else { s as f64 * m.ln() - m };
        let bkg = if b == 0 { -mb } else { b as f64 * mb.ln() - mb };
        src + bkg
    };
    let h = 1e-6 * b_hat.max(1.0);
    (loglik(b_hat + h) - loglik(b_hat - h)) / (2.0 * h)
}

/// The printed slope for `t_S = t_B = 1`.
pub fn printed_slope(s: u64, b: u64, theta: f64) -> f64 {
    let u = theta - (s as f64 - b as f64) / 2.0;
    0.5 * (-1.0 + u / (u * u + (s * b) as f64).sqrt())
}

#[derive(Debug, Default)]
pub struct DerivativeReport {
    pub max_score_residual: f64,
    pub score_cases: usize,
    pub max_slope_error: f64,
    pub max_library_slope_error: f64,
    pub slope_cases: usize,
}

pub fn derivative_checks(seed: u64) -> DerivativeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = DerivativeReport::default();
    while rep.score_cases < 1000 {
        let s = rng.random_range(0..=200u64);
        let b = rng.random_range(0..=200u64);
        let mu = rng.random_range(0.0..50.0);
        let t = Exposures::new(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)).unwrap();
        let bh = profile_bin(s, b, mu, t);
        if bh > 0.0 {
            let r = numeric_background_score(s, b, mu, t, bh).abs();
            rep.max_score_residual = rep.max_score_residual.max(r);
            rep.score_cases += 1;
        }
    }
    let unit = Exposures::unit();
    while rep.slope_cases < 100 {
        let s = rng.random_range(0..=200u64);
        let b = rng.random_range(1..=200u64);
        let theta = rng.random_range(0.01..20.0);
        let h = 1e-6;
        let fd = (profile_bin(s, b, theta + h, unit) - profile_bin(s, b, theta - h, unit)) / (2.0 * h);
        let printed = printed_slope(s, b, theta);
        rep.max_slope_error = rep.max_slope_error.max((fd - printed).abs());
        rep.max_library_slope_error = rep.max_library_slope_error.max((profile_bin_slope(s, b, theta, unit) - printed).abs());
        rep.slope_cases += 1;
    }
    rep
}

//! Maximum-likelihood regression of Poisson source counts observed on top of
//! a Poisson background, with three background treatments (joint parametric
//! fit, per-bin profiled background "wstat", and fixed observed background),
//! their goodness-of-fit statistics, moment approximations for hypothesis
//! testing, Monte Carlo effective degrees of freedom, and a reproducible
//! simulation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod efron;
pub mod error;
pub mod fit;
pub mod model;
pub mod moments;
pub mod optim;
pub mod sim;
pub mod special;
pub mod stat;

pub use efron::{estimate_df, optimism, verify_optimism, DfEstimate, Experiment, OptimismCheck};
pub use data::{Exposures, PairedDataset, ParentModel};
pub use error::{Error, Region, Result};
pub use fit::{fit, fit_constant, fit_fixed, fit_joint_constant, fit_joint_numeric, fit_wstat, FitMethod, FitOutcome, OptimizerSettings};
pub use moments::{chi2_reference, expected_statistic, gof_zscore, kb_bin_moments, MomentKind, MomentPair};
pub use model::{ConstantModel, SourceModel};
pub use stat::{cmin_fixed, cmin_joint, deviance_term, profile_background, profile_bin, profile_bin_slope, wmin, ProfiledBackground};

//! Wasserstein-1 distance between empirical and reference laws of stationary
//! strong-mixing sequences: mixing functionals, the L1-valued Gaussian limit,
//! CVaR estimation and a Monte Carlo experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivariate;
pub mod cvar;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod gaussian;
pub mod kernel;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod wasserstein;

pub use bivariate::BivariatePath;
pub use cvar::{CVaRReport, RateAnnotation};
pub use distribution::{
    DistributionSpec, EmpiricalCdf, QuantileFunction, SampleBatch, TailFunction,
};
pub use error::{Error, Result};
pub use experiment::{
    ExperimentConfig, ExperimentKind, ExperimentOutput, ExperimentSummary, ModelRef, ResultRecord,
    SampleSizes,
};
pub use functionals::{ConditionReport, TruncationSchedule, Verdict};
pub use gaussian::{KappaBounds, L1Sample};
pub use kernel::{CovarianceKernel, Grid, PsdRepair};
pub use process::{
    AlphaSequence, AlphaTail, MarkovChain, MixingProfile, ModelDescriptor, ModelParams,
    ProcessModel, SeedPolicy,
};
pub use quadrature::QuadratureConfig;
pub use stats::KsTest;

//! Sampling the centered Gaussian process `Z` with covariance kernel `K`
//! and the derived `L1` functionals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{CovarianceKernel, PsdRepair};
use crate::rng;
use crate::stats;

/// Draws per matrix product; fixed so results never depend on scheduling.
const BLOCK: usize = 256;

/// `K = L Lᵀ` with `L` an `m × r` factor built from the positive spectrum.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    factor: DMatrix<f64>,
    pub repair: PsdRepair,
}

impl GaussianFactor {
    /// Eigendecomposition with eigenvalues in `[-m ε ‖K‖, m ε ‖K‖]` set to
    /// zero; anything more negative is reported as an indefinite kernel.
    pub fn new(kernel: &CovarianceKernel) -> Result<Self> {
        let m = kernel.size();
        let eig = SymmetricEigen::new(kernel.matrix.clone());
        let norm = eig.eigenvalues.amax();
        let threshold = m as f64 * f64::EPSILON * norm;
        let mut repair = PsdRepair {
            min_eigenvalue: eig.eigenvalues.min(),
            ..PsdRepair::default()
        };
        let mut columns: Vec<DVector<f64>> = Vec::new();
        for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -threshold {
                return Err(Error::Indefinite {
                    eigenvalue: lambda,
                    threshold: -threshold,
                });
            }
            // eigenvalues within the rounding floor carry no signal
            if lambda <= threshold {
                if lambda < 0.0 {
                    repair.clipped_count += 1;
                    repair.clipped_mass += -lambda;
                }
                continue;
            }
            columns.push(eig.eigenvectors.column(idx) * lambda.sqrt());
        }
        let factor = if columns.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        Ok(Self { factor, repair })
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// Columns `first..first+count` of the draw matrix; draw `j` uses its
    /// own keystream.
    fn block(&self, seed: u64, first: usize, count: usize) -> DMatrix<f64> {
        let r = self.rank();
        let m = self.factor.nrows();
        if r == 0 {
            return DMatrix::zeros(m, count);
        }
        let mut xi = DMatrix::zeros(r, count);
        for c in 0..count {
            let mut g = rng::stream(seed, (first + c) as u64);
            for i in 0..r {
                xi[(i, c)] = g.sample(StandardNormal);
            }
        }
        &self.factor * xi
    }

    /// Apply `f` to every draw (a grid path) and collect the results in draw order.
    pub fn map_draws<T: Send>(
        &self,
        draws: usize,
        seed: u64,
        f: impl Fn(&[f64]) -> T + Sync,
    ) -> Vec<T> {
        let seed = rng::derive_seed(seed, "gaussian-limit");
        let starts: Vec<usize> = (0..draws).step_by(BLOCK).collect();
        starts
            .par_iter()
            .map(|&first| {
                let count = BLOCK.min(draws - first);
                let z = self.block(seed, first, count);
                (0..count)
                    .map(|c| f(z.column(c).as_slice()))
                    .collect::<Vec<T>>()
            })
            .collect::<Vec<Vec<T>>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Paths of `Z` on the kernel grid, one row per draw.
pub fn simulate_z(kernel: &CovarianceKernel, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let factor = GaussianFactor::new(kernel)?;
    Ok(factor.map_draws(draws, seed, |z| z.to_vec()))
}

/// Sample of `∫|Z(t)| dt` with summary quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Sample {
    pub values: Vec<f64>,
    pub mean: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub psd_repair: PsdRepair,
}

pub const SUMMARY_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

pub fn l1_norm_distribution(
    kernel: &CovarianceKernel,
    draws: usize,
    seed: u64,
) -> Result<L1Sample> {
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let factor = GaussianFactor::new(kernel)?;
    let weights = kernel.grid.weights();
    let values = factor.map_draws(draws, seed, |z| {
        z.iter().zip(weights).map(|(v, w)| w * v.abs()).sum::<f64>()
    });
    Ok(L1Sample {
        mean: stats::mean(&values),
        quantiles: SUMMARY_LEVELS
            .iter()
            .map(|&p| (p, stats::quantile(&values, p)))
            .collect(),
        values,
        psd_repair: factor.repair,
    })
}

/// Bracket for `κ(Γ) = sup_{|f| <= 1} (Var ∫ f Z)^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaBounds {
    /// Best sign function found; a certified lower bound.
    pub lower: f64,
    /// Monte Carlo estimate of `‖∫|Z| dt‖_2`.
    pub upper: f64,
    /// Delta-method standard error of `upper`.
    pub upper_se: f64,
}

const EIGEN_CANDIDATES: usize = 16;
const RANDOM_CANDIDATES: usize = 64;
const ASCENT_STARTS: usize = 8;

/// Local search: flip single signs while `fᵀ M f` increases.
fn ascend(m: &DMatrix<f64>, f: &mut [f64]) -> f64 {
    let n = f.len();
    let fv = DVector::from_column_slice(f);
    let mut mf = m * &fv;
    let mut value = fv.dot(&mf);
    for _ in 0..(4 * n) {
        let mut best = (0.0, usize::MAX);
        for i in 0..n {
            // g(f with f_i negated) - g(f) = 4 (M_ii - f_i (Mf)_i)
            let gain = 4.0 * (m[(i, i)] - f[i] * mf[i]);
            if gain > best.0 {
                best = (gain, i);
            }
        }
        if best.1 == usize::MAX || best.0 <= 1e-14 * value.abs() {
            break;
        }
        let i = best.1;
        let old = f[i];
        f[i] = -old;
        mf.axpy(-2.0 * old, &m.column(i), 1.0);
        value += best.0;
    }
    value
}

pub fn kappa_bounds(kernel: &CovarianceKernel, draws: usize, seed: u64) -> Result<KappaBounds> {
    let sample = l1_norm_distribution(kernel, draws, seed)?;
    let squares: Vec<f64> = sample.values.iter().map(|v| v * v).collect();
    let second_moment = stats::mean(&squares);
    let upper = second_moment.sqrt();
    let upper_se = if upper > 0.0 && draws > 1 {
        (stats::variance(&squares) / draws as f64).sqrt() / (2.0 * upper)
    } else {
        0.0
    };

    let size = kernel.size();
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(kernel.grid.weights()));
    let m = &w * &kernel.matrix * &w;
    let mut candidates: Vec<Vec<f64>> = vec![vec![1.0; size]];
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for &idx in order.iter().take(EIGEN_CANDIDATES) {
        let v = eig.eigenvectors.column(idx);
        candidates.push(
            v.iter()
                .map(|x| if *x >= 0.0 { 1.0 } else { -1.0 })
                .collect(),
        );
    }
    let mut g = rng::stream(rng::derive_seed(seed, "kappa-signs"), 0);
    for _ in 0..RANDOM_CANDIDATES {
        candidates.push(
            (0..size)
                .map(|_| if g.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        );
    }
    let quad = |f: &[f64]| {
        let v = DVector::from_column_slice(f);
        v.dot(&(&m * &v))
    };
    let mut scored: Vec<(f64, Vec<f64>)> = candidates.into_iter().map(|f| (quad(&f), f)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for (_, f) in scored.iter_mut().take(ASCENT_STARTS) {
        best = best.max(ascend(&m, f));
    }
    Ok(KappaBounds {
        lower: best.max(0.0).sqrt(),
        upper,
        upper_se,
    })
}

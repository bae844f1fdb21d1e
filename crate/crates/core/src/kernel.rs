//! Long-run covariance kernels of the indicator process `1{X_k <= t}`.
//!
//! `K(t, s) = Σ_{k ∈ ℤ} Cov(1{X_0 <= t}, 1{X_k <= s})`, discretized on a
//! [`Grid`]. Exact kernels are available for i.i.d. sequences and finite
//! Markov chains; any other model goes through the Bartlett lag-window
//! estimator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::process::{MarkovChain, ProcessModel};

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Probability mass left outside the default grid on each side.
pub const GRID_TAIL_MASS: f64 = 1e-4;

/// Strictly increasing points with trapezoid-rule weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Trapezoid weights over `[points[0], points[m-1]]`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let m = points.len();
        if m < 2 {
            return Err(Error::invalid("grid needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "grid points must be finite and strictly increasing",
            ));
        }
        let mut weights = vec![0.0; m];
        for i in 0..m - 1 {
            let h = 0.5 * (points[i + 1] - points[i]);
            weights[i] += h;
            weights[i + 1] += h;
        }
        Ok(Self { points, weights })
    }

    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let g = Self::new(points)?;
        if weights.len() != g.len() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(
                "grid weights must be positive, one per point",
            ));
        }
        Ok(Self {
            points: g.points,
            weights,
        })
    }

    pub fn equispaced(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 || !(lo < hi) {
            return Err(Error::invalid("equispaced grid needs lo < hi and m >= 2"));
        }
        let step = (hi - lo) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| lo + step * i as f64).collect();
        points[m - 1] = hi;
        Self::new(points)
    }

    /// `m` points over `[F^{-1}(1e-4), F^{-1}(1 - 1e-4)]`, widened to a unit
    /// interval around the atom for degenerate laws.
    pub fn for_marginal(marginal: &DistributionSpec, m: usize) -> Result<Self> {
        let lo = marginal.quantile(GRID_TAIL_MASS);
        let hi = marginal.quantile(1.0 - GRID_TAIL_MASS);
        if lo < hi {
            Self::equispaced(lo, hi, m)
        } else {
            Self::equispaced(lo - 0.5, lo + 0.5, m)
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Number of grid points strictly below `x`, so that
    /// `x <= t_i  ⟺  bin(x) <= i`.
    pub fn bin(&self, x: f64) -> u32 {
        self.points.partition_point(|&t| t < x) as u32
    }
}

/// Record of eigenvalues clipped to zero before factorization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PsdRepair {
    pub clipped_count: usize,
    pub clipped_mass: f64,
    pub min_eigenvalue: f64,
}

/// Grid discretization of the long-run covariance kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceKernel {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub psd_repair: Option<PsdRepair>,
}

impl CovarianceKernel {
    pub fn new(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::invalid("kernel matrix must match the grid size"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel entries must be finite"));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self {
            grid,
            matrix: sym,
            psd_repair: None,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        let m = grid.len();
        Self {
            grid,
            matrix: DMatrix::zeros(m, m),
            psd_repair: None,
        }
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `E ∫|Z(t)| dt = ∫ √(2 K(t,t) / π) dt` on the grid.
    pub fn l1_mean_closed_form(&self) -> f64 {
        let diag: Vec<f64> = (0..self.size())
            .map(|i| (2.0 * self.get(i, i).max(0.0) / std::f64::consts::PI).sqrt())
            .collect();
        self.grid.integrate(&diag)
    }

    /// `Var ∫ f Z dt = fᵀ W K W f` for a grid function `f`.
    pub fn weighted_quadratic_form(&self, f: &[f64]) -> f64 {
        let wf = DVector::from_iterator(
            self.size(),
            f.iter().zip(self.grid.weights()).map(|(a, w)| a * w),
        );
        wf.dot(&(&self.matrix * &wf))
    }
}

/// `K(t, s) = F(t ∧ s) - F(t) F(s)`.
pub fn exact_kernel_iid(marginal: &DistributionSpec, grid: &Grid) -> CovarianceKernel {
    let f: Vec<f64> = grid.points().iter().map(|&t| marginal.cdf(t)).collect();
    let m = grid.len();
    let matrix = DMatrix::from_fn(m, m, |i, j| f[i.min(j)] - f[i] * f[j]);
    CovarianceKernel {
        grid: grid.clone(),
        matrix,
        psd_repair: None,
    }
}

const MARKOV_KERNEL_MAX_LAG: usize = 1_000_000;

/// State-level long-run covariance
/// `L = C_0 + Σ_{k>=1} (C_k + C_kᵀ)`, `C_k = D_π (P^k - 1πᵀ)`, truncated once
/// the remainder bound `2 K ρ(K) / (1 - ρ(K))` drops below `tail_tol`, where
/// `ρ(K)` is the submultiplicative row spread of `P^K`.
pub fn markov_long_run_matrix(chain: &MarkovChain, tail_tol: f64) -> Result<DMatrix<f64>> {
    if !(tail_tol > 0.0) {
        return Err(Error::invalid("tail_tol must be positive"));
    }
    let pi = chain.stationary();
    let d_pi = DMatrix::from_diagonal(pi);
    let pi_outer = pi * pi.transpose();
    let mut long_run = &d_pi - &pi_outer;
    let mut pk = chain.transition().clone();
    for k in 1..=MARKOV_KERNEL_MAX_LAG {
        let ck = &d_pi * &pk - &pi_outer;
        long_run += &ck + ck.transpose();
        let spread = chain.row_spread(&pk);
        if spread < 1.0 {
            // each later block of k lags is at most spread^j
            let remainder = 2.0 * k as f64 * spread / (1.0 - spread);
            if remainder < tail_tol {
                return Ok(long_run);
            }
        }
        pk = &pk * chain.transition();
        if pk.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::invalid(
        "Markov kernel series did not reach tolerance (spectral gap numerically zero)",
    ))
}

/// Exact kernel of a finite stationary Markov chain.
pub fn exact_kernel_markov(
    chain: &MarkovChain,
    grid: &Grid,
    tail_tol: f64,
) -> Result<CovarianceKernel> {
    let long_run = markov_long_run_matrix(chain, tail_tol)?;
    let d = chain.states();
    let values = chain.values();
    let pi = chain.stationary();
    // Centered indicators 1{v_s <= t} - F(t): the rows of L sum to zero only
    // up to rounding, and centering keeps t beyond the support exactly at 0.
    let a = DMatrix::from_fn(grid.len(), d, |i, s| {
        let t = grid.points()[i];
        let f: f64 = (0..d).filter(|&r| values[r] <= t).map(|r| pi[r]).sum();
        let ind = if values[s] <= t { 1.0 } else { 0.0 };
        if values.iter().all(|&v| v <= t) {
            0.0
        } else {
            ind - f
        }
    });
    CovarianceKernel::new(grid.clone(), &a * long_run * a.transpose())
}

/// `⌈n^{1/3}⌉`.
pub fn default_bandwidth(n: usize) -> usize {
    let b = (n as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding just above an exact cube
    if b > 1 && (b - 1).pow(3) >= n {
        b - 1
    } else {
        b.max(1)
    }
}

/// One component of an indicator process: `sign * 1{x_k <= t}`.
pub struct IndicatorPart<'a> {
    pub path: &'a [f64],
    pub sign: f64,
}

const LAGS_PER_TASK: usize = 8;

/// Bartlett estimate of the long-run covariance of the centered process
/// `Y_k(t) = Σ_p sign_p 1{x^p_k <= t}` (all parts observed at the same times).
pub fn estimate_kernel_from_parts(
    parts: &[IndicatorPart<'_>],
    grid: &Grid,
    bandwidth: usize,
) -> Result<CovarianceKernel> {
    let n = parts.first().map_or(0, |p| p.path.len());
    if parts.is_empty() || parts.iter().any(|p| p.path.len() != n) {
        return Err(Error::invalid(
            "indicator parts must be nonempty and of equal length",
        ));
    }
    if bandwidth < 1 || n < 10 * bandwidth {
        return Err(Error::invalid(format!(
            "need n >= 10 * bandwidth >= 10 (n = {n}, bandwidth = {bandwidth})"
        )));
    }
    let m = grid.len();
    let cells = m + 1;
    let bins: Vec<(Vec<u32>, f64)> = parts
        .iter()
        .map(|p| (p.path.iter().map(|&x| grid.bin(x)).collect(), p.sign))
        .collect();

    // signed cumulative counts of x <= t_i over an index range
    let cum_counts = |range: std::ops::Range<usize>| -> Vec<f64> {
        let mut hist = vec![0.0; cells];
        for (b, s) in &bins {
            for &v in &b[range.clone()] {
                hist[v as usize] += s;
            }
        }
        let mut acc = 0.0;
        hist[..m]
            .iter()
            .map(|h| {
                acc += h;
                acc
            })
            .collect()
    };
    let nf = n as f64;
    let mean: Vec<f64> = cum_counts(0..n).iter().map(|c| c / nf).collect();

    let lag_gamma = |lag: usize| -> DMatrix<f64> {
        let len = n - lag;
        let mut hist = vec![0.0; cells * cells];
        for (bp, sp) in &bins {
            for (bq, sq) in &bins {
                let s = sp * sq;
                for k in 0..len {
                    hist[bp[k] as usize * cells + bq[k + lag] as usize] += s;
                }
            }
        }
        // 2-D prefix sums: joint(i, j) = Σ_{b <= i, b' <= j} hist
        for a in 0..cells {
            for b in 1..cells {
                hist[a * cells + b] += hist[a * cells + b - 1];
            }
        }
        for a in 1..cells {
            for b in 0..cells {
                hist[a * cells + b] += hist[(a - 1) * cells + b];
            }
        }
        let first = cum_counts(0..len);
        let last = cum_counts(lag..n);
        let lf = len as f64;
        DMatrix::from_fn(m, m, |i, j| {
            (hist[i * cells + j] - mean[j] * first[i] - mean[i] * last[j] + lf * mean[i] * mean[j])
                / nf
        })
    };

    let lags: Vec<usize> = (1..=bandwidth).collect();
    let partials: Vec<DMatrix<f64>> = lags
        .par_chunks(LAGS_PER_TASK)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(m, m);
            for &lag in chunk {
                let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
                let g = lag_gamma(lag);
                acc += (&g + g.transpose()) * w;
            }
            acc
        })
        .collect();
    let mut k = lag_gamma(0);
    for p in partials {
        k += p;
    }
    CovarianceKernel::new(grid.clone(), k)
}

/// Bartlett estimate from one simulated path of `model`.
pub fn estimate_kernel_mc(
    model: &ProcessModel,
    grid: &Grid,
    n: usize,
    bandwidth: usize,
    seed: u64,
) -> Result<CovarianceKernel> {
    let path = model.path(seed, 0, n);
    estimate_kernel_from_parts(
        &[IndicatorPart {
            path: &path,
            sign: 1.0,
        }],
        grid,
        bandwidth,
    )
}

/// Plug-in standard errors of a Bartlett estimate:
/// `Var K̂_ij ≈ [(K_ii K_jj + K_ij²) Σ_{|ℓ|<=b} w_ℓ² + c_ij] / n`.
///
/// `c_ij` is the lag-0 fourth cumulant of the centered indicators, computed
/// from the marginal CDF at the grid points when `marginal_cdf` is given. It
/// is of lower order in `b` but dominates where `F(t)` or `1 - F(t)` is small
/// compared to `1/b`, because rare indicators are far from Gaussian.
pub fn bartlett_standard_errors(
    kernel: &CovarianceKernel,
    marginal_cdf: Option<&[f64]>,
    n: usize,
    bandwidth: usize,
) -> Result<DMatrix<f64>> {
    let m = kernel.size();
    let cumulant = match marginal_cdf {
        Some(f) if f.len() != m => {
            return Err(Error::invalid(
                "marginal_cdf needs one value per grid point",
            ))
        }
        Some(f) => Some(indicator_fourth_cumulant(f)),
        None => None,
    };
    let b = bandwidth as f64;
    let window: f64 = 1.0
        + 2.0
            * (1..=bandwidth)
                .map(|l| (1.0 - l as f64 / (b + 1.0)).powi(2))
                .sum::<f64>();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        let kij = kernel.get(i, j);
        let mut v = (kernel.get(i, i).max(0.0) * kernel.get(j, j).max(0.0) + kij * kij) * window;
        if let Some(c) = &cumulant {
            v += c[(i, j)];
        }
        (v.max(0.0) / n as f64).sqrt()
    }))
}

/// `E[Y_i² Y_j²] - γ_ii γ_jj - 2 γ_ij²` for `Y_i = 1{X <= t_i} - F(t_i)`,
/// `γ` the lag-0 covariance, given nondecreasing `F(t_i)`.
pub fn indicator_fourth_cumulant(cdf: &[f64]) -> DMatrix<f64> {
    let m = cdf.len();
    DMatrix::from_fn(m, m, |i, j| {
        let (a, c) = if cdf[i] <= cdf[j] {
            (cdf[i], cdf[j])
        } else {
            (cdf[j], cdf[i])
        };
        // X <= t_a, t_a < X <= t_c, X > t_c
        let fourth = a * (1.0 - a).powi(2) * (1.0 - c).powi(2)
            + (c - a) * a * a * (1.0 - c).powi(2)
            + (1.0 - c) * a * a * c * c;
        let gamma = a - a * c;
        fourth - a * (1.0 - a) * c * (1.0 - c) - 2.0 * gamma * gamma
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{constant, make_finite_markov, make_iid};

    fn sticky() -> ProcessModel {
        make_finite_markov(&[vec![0.9, 0.1], vec![0.1, 0.9]], &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn grid_weights_sum_to_length() {
        let g = Grid::new(vec![0.0, 0.1, 0.5, 2.0]).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-15);
        assert!(Grid::new(vec![0.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0]).is_err());
        let u = Grid::for_marginal(&DistributionSpec::standard_uniform(), 512).unwrap();
        assert_eq!(u.len(), 512);
        assert!((u.points()[0] - 1e-4).abs() < 1e-15);
        let c = Grid::for_marginal(&DistributionSpec::point_mass(2.0), 16).unwrap();
        assert_eq!((c.points()[0], c.points()[15]), (1.5, 2.5));
    }

    #[test]
    fn binning_matches_indicators() {
        let g = Grid::new(vec![0.0, 1.0, 2.0]).unwrap();
        for &x in &[-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let b = g.bin(x) as usize;
            for (i, &t) in g.points().iter().enumerate() {
                assert_eq!(x <= t, b <= i, "x={x} t={t}");
            }
        }
    }

    #[test]
    fn iid_kernel_examples() {
        let u = DistributionSpec::standard_uniform();
        let g = Grid::new(vec![-50.0, 0.25, 0.5, 0.75]).unwrap();
        let k = exact_kernel_iid(&u, &g);
        assert_eq!(k.get(2, 2), 0.25);
        assert_eq!(k.get(1, 3), 0.0625);
        assert_eq!(k.get(0, 2), 0.0);
    }

    #[test]
    fn markov_kernel_with_independent_rows_is_iid_kernel() {
        let m = make_finite_markov(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[0.0, 1.0]).unwrap();
        let g = Grid::equispaced(-0.5, 1.5, 9).unwrap();
        let mk = exact_kernel_markov(m.markov().unwrap(), &g, 1e-12).unwrap();
        let ik = exact_kernel_iid(m.marginal(), &g);
        assert!((mk.matrix - ik.matrix).amax() < 1e-15);
    }

    #[test]
    fn sticky_chain_kernel_is_geometric_series() {
        let m = sticky();
        let g = Grid::new(vec![-1.0, 0.5, 2.0]).unwrap();
        let k = exact_kernel_markov(m.markov().unwrap(), &g, 1e-12).unwrap();
        assert!((k.get(1, 1) - 2.25).abs() < 1e-11);
        assert_eq!(k.get(0, 0), 0.0);
        assert!(k.get(2, 2).abs() < 1e-13, "{}", k.get(2, 2));
    }

    #[test]
    fn markov_kernel_matches_brute_force_and_fundamental_matrix() {
        let m = make_finite_markov(
            &[
                vec![0.7, 0.2, 0.1],
                vec![0.3, 0.4, 0.3],
                vec![0.05, 0.15, 0.8],
            ],
            &[-1.0, 0.3, 2.0],
        )
        .unwrap();
        let chain = m.markov().unwrap();
        let p = chain.transition();
        let pi = chain.stationary();
        let d_pi = DMatrix::from_diagonal(pi);
        let outer = pi * pi.transpose();
        // brute force to k = 200
        let mut brute = &d_pi - &outer;
        let mut pk = p.clone();
        for _ in 1..=200 {
            let ck = &d_pi * &pk - &outer;
            brute += &ck + ck.transpose();
            pk = &pk * p;
        }
        // fundamental matrix: Σ_{k>=1} (P^k - 1πᵀ) = (I - P + 1πᵀ)^{-1} - I
        let ones_pi = DMatrix::from_fn(3, 3, |_, j| pi[j]);
        let z = (DMatrix::identity(3, 3) - p + &ones_pi)
            .try_inverse()
            .unwrap();
        let s = &z - DMatrix::identity(3, 3);
        let fundamental = &d_pi - &outer + &d_pi * &s + (&d_pi * &s).transpose();
        let computed = markov_long_run_matrix(chain, 1e-12).unwrap();
        assert!((&computed - &brute).amax() < 1e-10);
        assert!((&computed - &fundamental).amax() < 1e-10);
    }

    #[test]
    fn mc_kernel_of_constant_process_is_zero() {
        let c = constant(0.3).unwrap();
        let g = Grid::for_marginal(c.marginal(), 32).unwrap();
        let k = estimate_kernel_mc(&c, &g, 2000, 10, 1).unwrap();
        assert!(k.matrix.amax() < 1e-15);
    }

    #[test]
    fn mc_kernel_rejects_short_paths() {
        let u = make_iid(DistributionSpec::standard_uniform()).unwrap();
        let g = Grid::equispaced(0.0, 1.0, 8).unwrap();
        assert!(estimate_kernel_mc(&u, &g, 99, 10, 1).is_err());
        assert!(estimate_kernel_mc(&u, &g, 100, 0, 1).is_err());
    }

    #[test]
    fn mc_kernel_lag_zero_matches_direct_formula() {
        // bandwidth effect checked against a naive O(n m^2 b) implementation
        let u = sticky();
        let g = Grid::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap();
        let n = 400;
        let b = 3;
        let path = u.path(5, 0, n);
        let k = estimate_kernel_mc(&u, &g, n, b, 5).unwrap();
        let ind = |x: f64, t: f64| if x <= t { 1.0 } else { 0.0 };
        let pts = g.points();
        let mean: Vec<f64> = pts
            .iter()
            .map(|&t| path.iter().map(|&x| ind(x, t)).sum::<f64>() / n as f64)
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                let gamma = |l: usize| -> f64 {
                    (0..n - l)
                        .map(|s| {
                            (ind(path[s], pts[i]) - mean[i]) * (ind(path[s + l], pts[j]) - mean[j])
                        })
                        .sum::<f64>()
                        / n as f64
                };
                let gamma_t = |l: usize| -> f64 {
                    (0..n - l)
                        .map(|s| {
                            (ind(path[s], pts[j]) - mean[j]) * (ind(path[s + l], pts[i]) - mean[i])
                        })
                        .sum::<f64>()
                        / n as f64
                };
                let mut naive = gamma(0);
                for l in 1..=b {
                    naive += (1.0 - l as f64 / (b as f64 + 1.0)) * (gamma(l) + gamma_t(l));
                }
                assert!((k.get(i, j) - naive).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn mc_kernel_is_psd_and_thread_independent() {
        let m = sticky();
        let g = Grid::equispaced(-0.5, 1.5, 16).unwrap();
        let k1 = estimate_kernel_mc(&m, &g, 20_000, 40, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let k2 = pool.install(|| estimate_kernel_mc(&m, &g, 20_000, 40, 3).unwrap());
        assert_eq!(k1.matrix, k2.matrix);
        let eig = nalgebra::SymmetricEigen::new(k1.matrix.clone());
        assert!(eig.eigenvalues.min() > -1e-12);
    }

    #[test]
    fn mc_kernel_of_difference_process() {
        // X and an independent copy Y: the difference indicator has kernel 2 K_iid
        let u = make_iid(DistributionSpec::standard_uniform()).unwrap();
        let g = Grid::equispaced(0.1, 0.9, 5).unwrap();
        let n = 400_000;
        let x = u.path(1, 0, n);
        let y = u.path(1, 1, n);
        let k = estimate_kernel_from_parts(
            &[
                IndicatorPart {
                    path: &x,
                    sign: 1.0,
                },
                IndicatorPart {
                    path: &y,
                    sign: -1.0,
                },
            ],
            &g,
            5,
        )
        .unwrap();
        let exact = exact_kernel_iid(&DistributionSpec::standard_uniform(), &g);
        let se = bartlett_standard_errors(&exact, None, n, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let diff = (k.get(i, j) - 2.0 * exact.get(i, j)).abs();
                assert!(diff <= 5.0 * 2.0 * se[(i, j)], "({i},{j}) {diff}");
            }
        }
    }

    #[test]
    fn fourth_cumulant_matches_enumeration() {
        let values = [-1.0, 0.0, 0.5, 2.0];
        let probs = [0.05, 0.4, 0.25, 0.3];
        let d = DistributionSpec::discrete(&values, &probs).unwrap();
        let ts = [-1.5, -0.5, 0.25, 1.0, 3.0];
        let f: Vec<f64> = ts.iter().map(|&t| d.cdf(t)).collect();
        let c = indicator_fourth_cumulant(&f);
        let moment = |g: &dyn Fn(f64) -> f64| -> f64 {
            values.iter().zip(&probs).map(|(&x, &p)| p * g(x)).sum()
        };
        for (i, &ti) in ts.iter().enumerate() {
            for (j, &tj) in ts.iter().enumerate() {
                let yi = |x: f64| if x <= ti { 1.0 } else { 0.0 } - f[i];
                let yj = |x: f64| if x <= tj { 1.0 } else { 0.0 } - f[j];
                let e4 = moment(&|x| yi(x).powi(2) * yj(x).powi(2));
                let gij = moment(&|x| yi(x) * yj(x));
                let gii = moment(&|x| yi(x).powi(2));
                let gjj = moment(&|x| yj(x).powi(2));
                let want = e4 - gii * gjj - 2.0 * gij * gij;
                assert!((c[(i, j)] - want).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn rare_indicator_standard_error() {
        // lag-0 variance of Y² for Y = 1{U <= p} - p is ≈ p, far above 2p²
        let p = 1e-4;
        let g = Grid::equispaced(p, 0.5, 2).unwrap();
        let k = exact_kernel_iid(&DistributionSpec::standard_uniform(), &g);
        let gaussian = bartlett_standard_errors(&k, None, 1, 0).unwrap();
        let full = bartlett_standard_errors(&k, Some(&[p, 0.5]), 1, 0).unwrap();
        assert!((gaussian[(0, 0)].powi(2) - 2.0 * (p * (1.0 - p)).powi(2)).abs() < 1e-18);
        let var_y2 = p * (1.0 - p).powi(4) + (1.0 - p) * p.powi(4) - (p * (1.0 - p)).powi(2);
        assert!((full[(0, 0)].powi(2) - var_y2).abs() < 1e-15);
    }

    #[test]
    fn bandwidth_default() {
        assert_eq!(default_bandwidth(1_000_000), 100);
        assert_eq!(default_bandwidth(1000), 10);
        assert_eq!(default_bandwidth(1001), 11);
        assert_eq!(default_bandwidth(1), 1);
    }
}

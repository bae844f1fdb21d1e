//! Two-sample objects for a stationary bivariate sequence `(X_k, Y_k)`:
//! the directional functional `φ` and the centered statistic
//! `n (W1(μ_{n,X}, μ_{n,Y}) - W1(μ_X, μ_Y))`.

use crate::distribution::{DistributionSpec, SampleBatch};
use crate::error::{Error, Result};
use crate::kernel::Grid;
use crate::quadrature::QuadratureConfig;
use crate::wasserstein::{quantile_w1, w1_empirical_vs_empirical};

pub const DEFAULT_EQ_TOL: f64 = 1e-9;

/// A function on a [`Grid`], integrated with the grid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePath {
    grid: Grid,
    x: Vec<f64>,
}

impl BivariatePath {
    pub fn new(grid: Grid, x: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(Error::invalid(format!(
                "path has {} values for a grid of {} points",
                x.len(),
                grid.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("path values must be finite"));
        }
        Ok(Self { grid, x })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.x.iter().map(|v| v.abs()).collect();
        self.grid.integrate(&abs)
    }
}

/// `φ(x) = ∫ sign(F_X - F_Y) x 1{F_X ≠ F_Y} + |x| 1{F_X = F_Y} dt`, where
/// equality means `|F_X(t) - F_Y(t)| <= eq_tol`.
pub fn phi_functional(
    path: &BivariatePath,
    f_x: impl Fn(f64) -> f64,
    f_y: impl Fn(f64) -> f64,
    eq_tol: f64,
) -> f64 {
    let integrand: Vec<f64> = path
        .grid
        .points()
        .iter()
        .zip(&path.x)
        .map(|(&t, &v)| {
            let d = f_x(t) - f_y(t);
            if d.abs() <= eq_tol {
                v.abs()
            } else {
                d.signum() * v
            }
        })
        .collect();
    path.grid.integrate(&integrand)
}

pub fn bivariate_w1_statistic(
    x: &SampleBatch,
    y: &SampleBatch,
    mu_x: &DistributionSpec,
    mu_y: &DistributionSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "paired samples must have equal size, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let population = quantile_w1(mu_x, mu_y, quad)?;
    Ok(n * (w1_empirical_vs_empirical(x, y) - population))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(m: usize) -> Grid {
        Grid::equispaced(0.0, 1.0, m).unwrap()
    }

    fn batch(v: &[f64]) -> SampleBatch {
        SampleBatch::new(v.to_vec()).unwrap()
    }

    #[test]
    fn phi_examples() {
        let g = unit_grid(101);
        let x: Vec<f64> = g.points().iter().map(|t| (6.0 * t).sin()).collect();
        let p = BivariatePath::new(g.clone(), x).unwrap();
        let same = phi_functional(&p, |t| t, |t| t, DEFAULT_EQ_TOL);
        assert_eq!(same, p.l1_norm());

        let ones = BivariatePath::new(g.clone(), vec![1.0; 101]).unwrap();
        let v = phi_functional(&ones, |t| t.sqrt(), |t| t * t - 1.0, DEFAULT_EQ_TOL);
        assert!((v - 1.0).abs() < 1e-12);

        let zero = BivariatePath::new(g, vec![0.0; 101]).unwrap();
        assert_eq!(
            phi_functional(&zero, |t| t, |t| 0.5 * t, DEFAULT_EQ_TOL),
            0.0
        );
    }

    #[test]
    fn path_validation() {
        let g = unit_grid(4);
        assert!(BivariatePath::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(BivariatePath::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn statistic_examples() {
        let q = QuadratureConfig::default();
        let u = DistributionSpec::standard_uniform();
        let a = batch(&[0.2, 0.9, 0.4]);
        assert_eq!(bivariate_w1_statistic(&a, &a, &u, &u, &q).unwrap(), 0.0);

        let b = batch(&[0.1, 0.3, 0.8]);
        let s = bivariate_w1_statistic(&a, &b, &u, &u, &q).unwrap();
        assert!((s - 3.0 * w1_empirical_vs_empirical(&a, &b)).abs() < 1e-15);
        assert!(s >= 0.0);

        let x = batch(&[0.0, 1.0]);
        let y = batch(&[0.5, 0.5]);
        assert_eq!(bivariate_w1_statistic(&x, &y, &u, &u, &q).unwrap(), 1.0);

        assert!(bivariate_w1_statistic(&x, &a, &u, &u, &q).is_err());
    }

    #[test]
    fn statistic_subtracts_population_distance() {
        let q = QuadratureConfig::default();
        let mx = DistributionSpec::normal(0.0, 1.0).unwrap();
        let my = DistributionSpec::normal(2.0, 1.0).unwrap();
        let x = batch(&[-1.0, 0.0, 1.0, 0.5]);
        let y = batch(&[1.0, 2.0, 3.0, 2.5]);
        let s = bivariate_w1_statistic(&x, &y, &mx, &my, &q).unwrap();
        assert!(s.abs() < 1e-8, "{s}");
    }

    proptest! {
        #[test]
        fn phi_is_lipschitz_and_dominated(
            a in prop::collection::vec(-5.0f64..5.0, 33),
            b in prop::collection::vec(-5.0f64..5.0, 33),
            shift in -0.3f64..0.3,
        ) {
            let g = unit_grid(33);
            let pa = BivariatePath::new(g.clone(), a.clone()).unwrap();
            let pb = BivariatePath::new(g.clone(), b.clone()).unwrap();
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let dist = BivariatePath::new(g, diff).unwrap().l1_norm();
            let fx = |t: f64| t.clamp(0.0, 1.0);
            let fy = move |t: f64| (t + shift).clamp(0.0, 1.0);
            let phi_a = phi_functional(&pa, fx, fy, DEFAULT_EQ_TOL);
            let phi_b = phi_functional(&pb, fx, fy, DEFAULT_EQ_TOL);
            prop_assert!((phi_a - phi_b).abs() <= dist + 1e-12);
            prop_assert!(phi_a <= pa.l1_norm() + 1e-12);
        }

        #[test]
        fn statistic_is_swap_symmetric(
            a in prop::collection::vec(-3.0f64..3.0, 1..20),
            seed in 0u64..1000,
        ) {
            let q = QuadratureConfig::default();
            let mut rng = crate::rng::stream(seed, 1);
            let my = DistributionSpec::Exponential { rate: 1.0 };
            let b: Vec<f64> = (0..a.len()).map(|_| my.sample(&mut rng)).collect();
            let mx = DistributionSpec::standard_normal();
            let (x, y) = (batch(&a), batch(&b));
            let s1 = bivariate_w1_statistic(&x, &y, &mx, &my, &q).unwrap();
            let s2 = bivariate_w1_statistic(&y, &x, &my, &mx, &q).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-9 * (1.0 + s1.abs()));
        }
    }
}

//! Exact one-dimensional Kantorovich (W1) distances.
//!
//! Three equivalent forms are provided:
//!
//! ```text
//! W1(μ, ν) = ∫ |F_μ(x) - F_ν(x)| dx                 (CDF form)
//!          = ∫_0^1 |F_μ^{-1}(u) - F_ν^{-1}(u)| du    (quantile form)
//!          = sup_{f 1-Lipschitz} ∫ f dμ - ∫ f dν     (dual form)
//! ```
//!
//! Between an empirical measure and an analytic reference, `F_n` is constant
//! between consecutive order statistics, so each segment contributes
//! `∫ |i/n - F(x)| dx`, which is evaluated in closed form from the
//! antiderivatives of `F` and `1 - F` carried by [`DistributionSpec`].

use crate::distribution::{DistributionSpec, QuantileFunction, SampleBatch};
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate, integrate_from_neg_infinity, integrate_to_infinity, integrate_unit_interval,
    QuadratureConfig,
};

fn check_reference(reference: &DistributionSpec) -> Result<()> {
    reference.validate()?;
    if !reference.mean().is_finite() {
        return Err(Error::invalid("reference law has no finite mean"));
    }
    Ok(())
}

/// `∫_a^b |c - F(x)| dx` with `F` the reference CDF, in closed form.
fn segment_abs_exact(reference: &DistributionSpec, c: f64, a: f64, b: f64) -> f64 {
    let m = reference.quantile(c).clamp(a, b);
    let g = |x: f64| reference.lower_partial(x);
    let (ga, gm, gb) = (g(a), g(m), g(b));
    let below = (c * (m - a) - (gm - ga)).max(0.0);
    let above = ((gb - gm) - c * (b - m)).max(0.0);
    below + above
}

/// `W1(μ_n, μ)` between a batch and an analytic reference.
pub fn w1_empirical_vs_cdf(
    samples: &SampleBatch,
    reference: &DistributionSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    check_reference(reference)?;
    Ok(w1_sorted_vs_cdf(samples.values(), reference))
}

/// Closed-form W1 for an already sorted, nonempty slice.
pub(crate) fn w1_sorted_vs_cdf(sorted: &[f64], reference: &DistributionSpec) -> f64 {
    let n = sorted.len();
    let mut total = reference.lower_partial(sorted[0]);
    for i in 1..n {
        let (a, b) = (sorted[i - 1], sorted[i]);
        if b > a {
            total += segment_abs_exact(reference, i as f64 / n as f64, a, b);
        }
    }
    total + reference.upper_partial(sorted[n - 1])
}

/// Same quantity as [`w1_empirical_vs_cdf`], computed by adaptive
/// quadrature on every inter-order-statistic segment and on both tails.
pub fn w1_empirical_vs_cdf_quadrature(
    samples: &SampleBatch,
    reference: &DistributionSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    check_reference(reference)?;
    let x = samples.values();
    let n = x.len();
    let knots = reference.cdf_knots();
    let tail_cfg = QuadratureConfig {
        rel_tol: 1e-8,
        ..*quad
    };
    let (lo, hi) = reference.support();

    let lower = if lo.is_finite() {
        integrate(|s| reference.cdf(s), lo.min(x[0]), x[0], &knots, quad).value
    } else {
        integrate_from_neg_infinity(|s| reference.cdf(s), x[0], &knots, &tail_cfg).into_result()?
    };
    let upper = if hi.is_finite() {
        integrate(
            |s| reference.survival(s),
            x[n - 1],
            hi.max(x[n - 1]),
            &knots,
            quad,
        )
        .value
    } else {
        integrate_to_infinity(|s| reference.survival(s), x[n - 1], &knots, &tail_cfg)
            .into_result()?
    };

    let mut total = lower + upper;
    for i in 1..n {
        let (a, b) = (x[i - 1], x[i]);
        if b > a {
            let c = i as f64 / n as f64;
            let mut seg_knots = knots.clone();
            seg_knots.push(reference.quantile(c));
            total += integrate(|s| (c - reference.cdf(s)).abs(), a, b, &seg_knots, quad).value;
        }
    }
    Ok(total)
}

/// `W1` between two empirical measures.
///
/// Equal sizes use the order-statistics formula; otherwise the two quantile
/// step functions are integrated exactly over their common refinement.
pub fn w1_empirical_vs_empirical(x: &SampleBatch, y: &SampleBatch) -> f64 {
    w1_sorted_sorted(x.values(), y.values())
}

pub(crate) fn w1_sorted_sorted(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len(), y.len());
    if n == m {
        let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        return sum / n as f64;
    }
    // Breakpoints (i+1)/n and (j+1)/m measured in units of 1/(n m).
    let (nu, mu) = (n as u64, m as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0u64;
    let mut sum = 0.0;
    while i < n && j < m {
        let next_x = (i as u64 + 1) * mu;
        let next_y = (j as u64 + 1) * nu;
        let next = next_x.min(next_y);
        sum += (next - prev) as f64 * (x[i] - y[j]).abs();
        prev = next;
        if next_x == next {
            i += 1;
        }
        if next_y == next {
            j += 1;
        }
    }
    sum / (nu * mu) as f64
}

/// A test function for the dual bound, with the grid on which its
/// Lipschitz constant is checked.
pub struct LipschitzFn {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    grid: Vec<f64>,
}

impl LipschitzFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, grid: Vec<f64>) -> Self {
        Self {
            f: Box::new(f),
            grid,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Finite-difference slope check on the declared grid.
    pub fn check(&self) -> Result<()> {
        let mut grid = self.grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for w in grid.windows(2) {
            let slope = ((self.f)(w[1]) - (self.f)(w[0])).abs() / (w[1] - w[0]);
            if slope > 1.0 + 1e-9 {
                return Err(Error::invalid(format!(
                    "test function has slope {slope} on [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// `E[f(X)]` under the reference law.
pub fn expectation(
    reference: &DistributionSpec,
    f: impl Fn(f64) -> f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    match reference {
        DistributionSpec::PointMass { value } => Ok(f(*value)),
        DistributionSpec::Discrete { values, probs } => {
            Ok(values.iter().zip(probs).map(|(v, p)| p * f(*v)).sum())
        }
        _ => integrate_unit_interval(|u| f(reference.quantile(u)), &reference.level_knots(), quad)
            .into_result(),
    }
}

/// `max_f (1/n) Σ f(X_i) - E_ref[f]` over the supplied 1-Lipschitz family.
pub fn w1_dual_lower_bound(
    x: &SampleBatch,
    reference: &DistributionSpec,
    test_fns: &[LipschitzFn],
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    check_reference(reference)?;
    if test_fns.is_empty() {
        return Err(Error::invalid("at least one test function is required"));
    }
    let n = x.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for tf in test_fns {
        tf.check()?;
        let empirical = x.values().iter().map(|&v| tf.eval(v)).sum::<f64>() / n;
        let centered = empirical - expectation(reference, |v| tf.eval(v), quad)?;
        best = best.max(centered);
    }
    Ok(best)
}

/// `∫_0^1 |f^{-1}(u) - g^{-1}(u)| du` by quadrature with refinement toward
/// both endpoints.
pub fn quantile_w1(
    f_inv: &dyn QuantileFunction,
    g_inv: &dyn QuantileFunction,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    let mut knots = f_inv.quantile_knots();
    knots.extend(g_inv.quantile_knots());
    integrate_unit_interval(
        |u| (f_inv.quantile(u) - g_inv.quantile(u)).abs(),
        &knots,
        quad,
    )
    .into_result()
}

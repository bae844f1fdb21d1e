//! Conditional Value at Risk of the lower tail,
//! `CVaR_u(X) = -(1/u) ∫_0^u F^{-1}(x) dx`, and its plug-in estimator.

use serde::{Deserialize, Serialize};

use crate::distribution::{DistributionSpec, SampleBatch};
use crate::error::{Error, Result};
use crate::functionals::guarded_loglog;
use crate::gaussian::kappa_bounds;
use crate::kernel::CovarianceKernel;
use crate::quadrature::{integrate_from_zero, QuadratureConfig};
use crate::wasserstein::w1_empirical_vs_cdf;

/// Caveat attached to every rate annotation.
pub const ENVELOPE_NOTE: &str = "asymptotic almost-sure envelope; not a finite-sample guarantee";

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "CVaR level must lie in (0, 1], got {u}"
        )))
    }
}

/// Exact `CVaR_u` from the closed-form quantile integral.
pub fn cvar_exact(marginal: &DistributionSpec, u: f64, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    check_level(u)?;
    marginal.validate()?;
    if marginal.is_degenerate() {
        return Ok(-marginal.mean());
    }
    let integral = marginal.quantile_integral(u);
    if !integral.is_finite() {
        return Err(Error::Divergent(format!(
            "∫_0^{u} F^-1 is not finite for {marginal:?}"
        )));
    }
    Ok(-integral / u)
}

/// `CVaR_u` by quadrature of the quantile function, refining toward both
/// ends of `(0, u)`.
pub fn cvar_by_quadrature(
    marginal: &DistributionSpec,
    u: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    check_level(u)?;
    let knots = marginal.level_knots();
    let half = 0.5 * u;
    let lower = integrate_from_zero(|x| marginal.quantile(x), half, &knots, quad).into_result()?;
    let mirrored: Vec<f64> = knots.iter().map(|k| u - k).collect();
    let upper =
        integrate_from_zero(|x| marginal.quantile(u - x), half, &mirrored, quad).into_result()?;
    Ok(-(lower + upper) / u)
}

/// `-(1/u) ∫_0^u F_n^{-1}`: with `k = ⌊nu⌋`,
/// `-(1/u) [(1/n) Σ_{i<=k} X_(i) + (u - k/n) X_(k+1)]`.
pub fn cvar_empirical(samples: &SampleBatch, u: f64) -> Result<f64> {
    check_level(u)?;
    let x = samples.values();
    let n = x.len();
    let nf = n as f64;
    let k = ((nu_floor(nf, u)) as usize).min(n);
    let head: f64 = x[..k].iter().sum::<f64>() / nf;
    let frac = u - k as f64 / nf;
    let partial = if k < n && frac > 0.0 {
        frac * x[k]
    } else {
        0.0
    };
    Ok(-(head + partial) / u)
}

/// `⌊n u⌋`, snapping products within rounding of an integer onto it.
fn nu_floor(n: f64, u: f64) -> f64 {
    let p = n * u;
    let r = p.round();
    if (p - r).abs() <= 4.0 * f64::EPSILON * p.max(1.0) {
        r
    } else {
        p.floor()
    }
}

/// `W1(μ_n, μ) / u`, which dominates `|cvar_empirical - cvar_exact|`.
pub fn cvar_error_bound(
    samples: &SampleBatch,
    marginal: &DistributionSpec,
    u: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_level(u)?;
    Ok(w1_empirical_vs_cdf(samples, marginal, quad)? / u)
}

/// `κ/u · √(2 LL(n) / n)`.
pub fn rate_envelope(kappa_upper: f64, u: f64, n: u64) -> Result<f64> {
    check_level(u)?;
    if n < 2 {
        return Err(Error::invalid("rate annotation needs n >= 2"));
    }
    let nf = n as f64;
    Ok(kappa_upper / u * (2.0 * guarded_loglog(nf) / nf).sqrt())
}

/// Envelope with `κ` replaced by the Monte Carlo upper bound of
/// [`kappa_bounds`].
pub fn cvar_rate_annotation(
    kernel: &CovarianceKernel,
    u: f64,
    n: u64,
    draws: usize,
    seed: u64,
) -> Result<RateAnnotation> {
    let kb = kappa_bounds(kernel, draws, seed)?;
    RateAnnotation::new(kb.upper, u, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAnnotation {
    pub kappa_upper: f64,
    /// `√(2 LL(n) / n)`.
    pub normalization: f64,
    /// `kappa_upper / u * normalization`.
    pub envelope: f64,
    pub note: String,
}

impl RateAnnotation {
    pub fn new(kappa_upper: f64, u: f64, n: u64) -> Result<Self> {
        let envelope = rate_envelope(kappa_upper, u, n)?;
        let nf = n as f64;
        Ok(Self {
            kappa_upper,
            normalization: (2.0 * guarded_loglog(nf) / nf).sqrt(),
            envelope,
            note: ENVELOPE_NOTE.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVaRReport {
    pub u: f64,
    pub n: usize,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_annotation: Option<RateAnnotation>,
}

impl CVaRReport {
    /// Estimate alone, or with exact value and bound when a reference law is known.
    pub fn build(
        samples: &SampleBatch,
        reference: Option<&DistributionSpec>,
        u: f64,
        quad: &QuadratureConfig,
    ) -> Result<Self> {
        let estimate = cvar_empirical(samples, u)?;
        let (exact, w1_bound) = match reference {
            Some(r) => (
                Some(cvar_exact(r, u, quad)?),
                Some(cvar_error_bound(samples, r, u, quad)?),
            ),
            None => (None, None),
        };
        Ok(Self {
            u,
            n: samples.len(),
            estimate,
            exact,
            w1_bound,
            rate_annotation: None,
        })
    }
}

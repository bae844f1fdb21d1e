//! Scalar functionals of a mixing profile `(α, H, Q)`.
//!
//! * `∫_0^∞ √H(t) dt`, the integrability condition for i.i.d. sequences;
//! * `V = ∫_0^∞ √(Σ_{k>=0} α(k) ∧ H(t)) dt`, the scale of the bounded law of
//!   the iterated logarithm, whose finiteness is the dependent analogue;
//! * `R(u) = min{q >= 1 : α(q) <= u} · Q(u)`, its generalised inverse and
//!   `∫_0^1 R(u) Q(u) du`;
//! * the truncation schedule `(m_n, v_n, M_n, q_n)`.

use serde::{Deserialize, Serialize};

use crate::distribution::TailFunction;
use crate::error::{Error, Result};
use crate::process::{AlphaTail, MixingProfile};
use crate::quadrature::{
    integrate, integrate_to_infinity, integrate_unit_interval, Improper, QuadratureConfig,
};

/// `ln(max(e, ln(max(e, n))))`, which equals 1 for all `n <= e^e`.
pub fn guarded_loglog(n: f64) -> f64 {
    let e = std::f64::consts::E;
    n.max(e).ln().max(e).ln()
}

fn check_tail(h: &dyn TailFunction) -> Result<()> {
    let mut probes = vec![0.0, 0.5, 1.0, 2.0, 10.0, 1e3];
    probes.extend(h.tail_knots());
    for t in probes {
        let v = h.tail(t);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "tail function H({t}) = {v} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// `∫_0^∞ f` for a nonnegative integrand supported where `H > 0`.
fn integrate_over_tail(
    f: impl Fn(f64) -> f64,
    h: &dyn TailFunction,
    extra_knots: &[f64],
    quad: &QuadratureConfig,
) -> Improper {
    let mut knots = h.tail_knots();
    knots.extend_from_slice(extra_knots);
    match h.support_bound() {
        Some(m) => {
            let r = integrate(&f, 0.0, m, &knots, quad);
            if r.converged {
                Improper::Converged {
                    value: r.value,
                    error: r.error,
                }
            } else {
                Improper::Undecided {
                    partial: r.value,
                    diagnostic: "quadrature reached max_depth".into(),
                }
            }
        }
        None => integrate_to_infinity(f, 0.0, &knots, quad),
    }
}

/// `∫_0^∞ √H(t) dt`.
pub fn gine_integral(h: &dyn TailFunction, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    check_tail(h)?;
    integrate_over_tail(|t| h.tail(t).sqrt(), h, &[], quad).into_result()
}

/// Outcome of the integrability check for `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Diverges,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// The integral when it holds, otherwise the last partial value.
    pub value: f64,
    pub diagnostic: Option<String>,
}

/// Points `t` where `H(t)` crosses a tabulated `α(k)`; the integrand of `V`
/// has a kink there.
fn crossing_knots(profile: &MixingProfile) -> Vec<f64> {
    profile
        .alpha
        .prefix()
        .iter()
        .filter(|a| **a > 0.0 && **a < 1.0)
        .map(|a| profile.q(*a))
        .filter(|t| t.is_finite())
        .collect()
}

fn v_integral(profile: &MixingProfile, quad: &QuadratureConfig) -> Result<Improper> {
    quad.validate()?;
    check_tail(&profile.marginal)?;
    // Surface a missing decay certificate before integrating.
    profile.alpha.sum_min(profile.h(0.0))?;
    let alpha = &profile.alpha;
    let integrand = |t: f64| {
        alpha
            .sum_min(profile.h(t))
            .expect("certificate checked at H(0)")
            .sqrt()
    };
    Ok(integrate_over_tail(
        integrand,
        &profile.marginal,
        &crossing_knots(profile),
        quad,
    ))
}

/// `V = ∫_0^∞ √(Σ_k α(k) ∧ H(t)) dt`.
pub fn compute_v(profile: &MixingProfile, quad: &QuadratureConfig) -> Result<f64> {
    v_integral(profile, quad)?.into_result()
}

/// Whether `∫_0^∞ √(Σ_k α(k) ∧ H(t)) dt` is finite.
pub fn check_mixing_condition(
    profile: &MixingProfile,
    quad: &QuadratureConfig,
) -> Result<ConditionReport> {
    let outcome = match v_integral(profile, quad) {
        Ok(r) => r,
        Err(Error::Divergent(diagnostic)) => Improper::Diverged {
            partial: f64::INFINITY,
            diagnostic,
        },
        Err(e) => return Err(e),
    };
    Ok(match outcome {
        Improper::Converged { value, .. } => ConditionReport {
            verdict: Verdict::Holds,
            value,
            diagnostic: None,
        },
        Improper::Diverged {
            partial,
            diagnostic,
        } => ConditionReport {
            verdict: Verdict::Diverges,
            value: partial,
            diagnostic: Some(diagnostic),
        },
        Improper::Undecided {
            partial,
            diagnostic,
        } => ConditionReport {
            verdict: Verdict::Undecided,
            value: partial,
            diagnostic: Some(diagnostic),
        },
    })
}

/// `R(u) = min{q >= 1 : α(q) <= u} · Q(u)`.
pub fn r_of(u: f64, profile: &MixingProfile) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!("u = {u} outside [0, 1]")));
    }
    let q = profile.q(u);
    if q == 0.0 {
        return Ok(0.0);
    }
    match profile.alpha.count(u) {
        Some(c) => Ok(c as f64 * q),
        None => Err(Error::Unbounded(format!(
            "alpha never drops to {u}, so R({u}) is infinite"
        ))),
    }
}

/// `R^{-1}(x) = inf{u ∈ [0, 1] : R(u) <= x}`, with `inf ∅ = 1`.
pub fn r_inverse(x: f64, profile: &MixingProfile) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("R^-1 needs x >= 0, got {x}")));
    }
    let below = |u: f64| matches!(r_of(u, profile), Ok(r) if r <= x);
    if below(0.0) {
        return Ok(0.0);
    }
    if !below(1.0) {
        return Ok(1.0);
    }
    // R is nonincreasing: keep R(lo) > x >= R(hi).
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..1100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

const MAX_LEVEL_KNOTS: usize = 4000;

/// `∫_0^1 R(u) Q(u) du`.
pub fn rq_integral(profile: &MixingProfile, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    let alpha = &profile.alpha;
    if let AlphaTail::Flat = alpha.tail() {
        let cap = *alpha.prefix().last().expect("nonempty prefix");
        if cap > 0.0 && profile.q(0.5 * cap) > 0.0 {
            return Err(Error::Divergent(format!(
                "count factor is infinite on (0, {cap}) without a decay certificate"
            )));
        }
    }
    let mut knots = alpha.levels(MAX_LEVEL_KNOTS);
    knots.retain(|u| *u > 1e-300);
    knots.extend(profile.marginal.tail_level_knots());
    let integrand = |u: f64| {
        let q = profile.q(u);
        if q == 0.0 {
            return 0.0;
        }
        let c = alpha.count(u).map_or(f64::INFINITY, |c| c as f64);
        c * q * q
    };
    integrate_unit_interval(integrand, &knots, quad).into_result()
}

/// `(m_n, v_n, M_n, q_n)` for a given sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub n: u64,
    pub a: f64,
    pub m_n: f64,
    pub v_n: f64,
    #[serde(rename = "M_n")]
    pub big_m_n: f64,
    pub q_n: u64,
}

impl TruncationSchedule {
    /// `g_M(y) = (y ∧ M) ∨ (-M)` with `M = M_n`.
    pub fn truncate(&self, y: f64) -> f64 {
        y.clamp(-self.big_m_n, self.big_m_n)
    }
}

/// `m_n = a √(n / LL(n))`, `v_n = R^{-1}(m_n)`, `M_n = Q(v_n)`,
/// `q_n = min{k >= 1 : α(k) <= v_n} ∧ n`.
pub fn truncation_schedule(n: u64, a: f64, profile: &MixingProfile) -> Result<TruncationSchedule> {
    if n < 2 {
        return Err(Error::invalid("truncation schedule needs n >= 2"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("truncation schedule needs a > 0"));
    }
    let m_n = a * (n as f64 / guarded_loglog(n as f64)).sqrt();
    let v_n = r_inverse(m_n, profile)?;
    let big_m_n = profile.q(v_n);
    let q_n = profile.alpha.count(v_n).unwrap_or(n).min(n);
    if q_n as f64 * big_m_n > m_n * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "schedule invariant q_n M_n <= m_n violated: {q_n} * {big_m_n} > {m_n}"
        )));
    }
    Ok(TruncationSchedule {
        n,
        a,
        m_n,
        v_n,
        big_m_n,
        q_n,
    })
}

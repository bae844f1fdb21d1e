//! Sample batches, empirical CDFs and analytic reference marginals.
//!
//! [`DistributionSpec`] carries every closed form the rest of the crate
//! needs from a marginal law: the CDF and its cadlag inverse, the tail
//! function `H(t) = P(|X| > t)` of the magnitude with its generalised
//! inverse `Q`, partial integrals of `F` and `1 - F` (used to integrate
//! `|F_n - F|` exactly), and `∫_0^u F^{-1}`.

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Finite sample values stored in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample batch must be nonempty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample value {bad}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// `F_n^{-1}(u) = X_(⌈nu⌉)`, with `u = 0` mapped to the minimum.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.len();
        let idx = (u * n as f64).ceil() as usize;
        self.values[idx.clamp(1, n) - 1]
    }

    /// The empirical law as a discrete [`DistributionSpec`].
    pub fn lift(&self) -> DistributionSpec {
        let n = self.len() as f64;
        let mut values: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for &v in &self.values {
            if values.last() == Some(&v) {
                *probs.last_mut().unwrap() += 1.0 / n;
            } else {
                values.push(v);
                probs.push(1.0 / n);
            }
        }
        DistributionSpec::Discrete { values, probs }
    }
}

/// Right-continuous step CDF of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    batch: SampleBatch,
}

impl EmpiricalCdf {
    pub fn new(batch: SampleBatch) -> Self {
        Self { batch }
    }

    pub fn batch(&self) -> &SampleBatch {
        &self.batch
    }

    pub fn eval(&self, t: f64) -> f64 {
        let count = self.batch.values.partition_point(|&x| x <= t);
        count as f64 / self.batch.len() as f64
    }
}

/// A tail function `H` of a magnitude `|X|`, together with its generalised
/// inverse `Q(u) = inf{t >= 0 : H(t) <= u}`.
pub trait TailFunction {
    fn tail(&self, t: f64) -> f64;
    fn tail_quantile(&self, u: f64) -> f64;
    /// `Some(M)` when `H(M) = 0`.
    fn support_bound(&self) -> Option<f64>;
    /// Points `t >= 0` where `H` may jump or kink.
    fn tail_knots(&self) -> Vec<f64>;
}

/// A cadlag quantile function on `(0, 1)` with its jump points.
pub trait QuantileFunction {
    fn quantile(&self, u: f64) -> f64;
    fn quantile_knots(&self) -> Vec<f64>;
}

impl QuantileFunction for SampleBatch {
    fn quantile(&self, u: f64) -> f64 {
        SampleBatch::quantile(self, u)
    }

    fn quantile_knots(&self) -> Vec<f64> {
        let n = self.len();
        (1..n).map(|i| i as f64 / n as f64).collect()
    }
}

/// Adapter turning a closure into a [`QuantileFunction`].
pub struct QuantileFn<F> {
    f: F,
    knots: Vec<f64>,
}

impl<F: Fn(f64) -> f64> QuantileFn<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            knots: Vec::new(),
        }
    }

    pub fn with_knots(f: F, knots: Vec<f64>) -> Self {
        Self { f, knots }
    }
}

impl<F: Fn(f64) -> f64> QuantileFunction for QuantileFn<F> {
    fn quantile(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    fn quantile_knots(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Analytic marginal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform {
        low: f64,
        high: f64,
    },
    PointMass {
        value: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `P(X > x) = (scale / x)^shape` for `x >= scale`.
    Pareto {
        scale: f64,
        shape: f64,
    },
    /// Atoms in strictly increasing order with positive probabilities.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// Continuous law whose CDF interpolates linearly between knots.
    PiecewiseLinear {
        xs: Vec<f64>,
        cdf: Vec<f64>,
    },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn phi(z: f64) -> f64 {
    std_normal().pdf(z)
}

fn big_phi(z: f64) -> f64 {
    std_normal().cdf(z)
}

fn big_phi_inv(u: f64) -> f64 {
    let n = std_normal();
    let mut z = n.inverse_cdf(u);
    // polish with Newton steps; the library inverse is only accurate to ~1e-9
    for _ in 0..2 {
        let d = n.pdf(z);
        if !(z.is_finite() && d > 0.0) {
            break;
        }
        z -= (n.cdf(z) - u) / d;
    }
    z
}

impl DistributionSpec {
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        let d = DistributionSpec::Uniform { low, high };
        d.validate()?;
        Ok(d)
    }

    pub fn standard_uniform() -> Self {
        DistributionSpec::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }

    pub fn point_mass(value: f64) -> Self {
        DistributionSpec::PointMass { value }
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = DistributionSpec::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn standard_normal() -> Self {
        DistributionSpec::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Discrete law; atoms are sorted and duplicates merged.
    pub fn discrete(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::invalid(
                "discrete law needs matching nonempty values/probs",
            ));
        }
        let mut pairs: Vec<(f64, f64)> =
            values.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut v: Vec<f64> = Vec::new();
        let mut p: Vec<f64> = Vec::new();
        for (x, q) in pairs {
            if q < 0.0 || !q.is_finite() || !x.is_finite() {
                return Err(Error::invalid("discrete atoms must be finite with p >= 0"));
            }
            if q == 0.0 {
                continue;
            }
            if v.last() == Some(&x) {
                *p.last_mut().unwrap() += q;
            } else {
                v.push(x);
                p.push(q);
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "discrete probabilities sum to {total}"
            )));
        }
        p.iter_mut().for_each(|q| *q /= total);
        Ok(DistributionSpec::Discrete {
            values: v,
            probs: p,
        })
    }

    pub fn validate(&self) -> Result<()> {
        use DistributionSpec::*;
        let ok = match self {
            Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            PointMass { value } => value.is_finite(),
            Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            Exponential { rate } => rate.is_finite() && *rate > 0.0,
            Pareto { scale, shape } => scale.is_finite() && *scale > 0.0 && *shape > 0.0,
            Discrete { values, probs } => {
                !values.is_empty()
                    && values.len() == probs.len()
                    && values.windows(2).all(|w| w[0] < w[1])
                    && probs.iter().all(|p| *p > 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9
            }
            PiecewiseLinear { xs, cdf } => {
                xs.len() >= 2
                    && xs.len() == cdf.len()
                    && xs.windows(2).all(|w| w[0] < w[1])
                    && cdf.windows(2).all(|w| w[0] <= w[1])
                    && cdf[0] == 0.0
                    && (cdf[cdf.len() - 1] - 1.0).abs() < 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed distribution {self:?}")))
        }
    }

    /// True for a law concentrated on one point.
    pub fn is_degenerate(&self) -> bool {
        match self {
            DistributionSpec::PointMass { .. } => true,
            DistributionSpec::Discrete { values, .. } => values.len() == 1,
            _ => false,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            Normal { mean, sd } => big_phi((x - mean) / sd),
            Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Pareto { scale, shape } => {
                if x <= *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*shape)
                }
            }
            Discrete { values, probs } => {
                let k = values.partition_point(|&v| v <= x);
                probs[..k].iter().sum::<f64>().min(1.0)
            }
            PiecewiseLinear { xs, cdf } => {
                if x <= xs[0] {
                    return 0.0;
                }
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return 1.0;
                }
                let i = xs.partition_point(|&v| v <= x) - 1;
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                cdf[i] + w * (cdf[i + 1] - cdf[i])
            }
        }
    }

    /// `P(X > x)`, evaluated without cancellation in the upper tail.
    pub fn survival(&self, x: f64) -> f64 {
        use DistributionSpec::*;
        match self {
            Normal { mean, sd } => big_phi(-(x - mean) / sd),
            Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Pareto { scale, shape } => {
                if x <= *scale {
                    1.0
                } else {
                    (scale / x).powf(*shape)
                }
            }
            Discrete { values, probs } => {
                let k = values.partition_point(|&v| v <= x);
                probs[k..].iter().sum::<f64>().min(1.0)
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Left limit `F(x-) = P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::PointMass { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Discrete { values, probs } => {
                let k = values.partition_point(|&v| v < x);
                probs[..k].iter().sum::<f64>().min(1.0)
            }
            _ => self.cdf(x),
        }
    }

    /// Cadlag inverse `inf{x : F(x) >= u}` for `u` in `(0, 1]`; `u = 0`
    /// returns the lower end of the support.
    pub fn quantile(&self, u: f64) -> f64 {
        use DistributionSpec::*;
        let u = u.clamp(0.0, 1.0);
        match self {
            Uniform { low, high } => low + u * (high - low),
            PointMass { value } => *value,
            Normal { mean, sd } => {
                if u <= 0.0 {
                    f64::NEG_INFINITY
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    mean + sd * big_phi_inv(u)
                }
            }
            Exponential { rate } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-u).ln_1p() / rate
                }
            }
            Pareto { scale, shape } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    scale * (1.0 - u).powf(-1.0 / shape)
                }
            }
            Discrete { values, probs } => {
                let mut cum = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    cum += p;
                    if cum >= u - 1e-15 {
                        return *v;
                    }
                }
                values[values.len() - 1]
            }
            PiecewiseLinear { xs, cdf } => {
                if u <= 0.0 {
                    return xs[0];
                }
                let i = cdf.partition_point(|&c| c < u);
                if i == 0 {
                    return xs[0];
                }
                if i >= xs.len() {
                    return xs[xs.len() - 1];
                }
                let w = (u - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
                xs[i - 1] + w * (xs[i] - xs[i - 1])
            }
        }
    }

    /// `E[X]`; infinite for non-integrable laws.
    pub fn mean(&self) -> f64 {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => 0.5 * (low + high),
            PointMass { value } => *value,
            Normal { mean, .. } => *mean,
            Exponential { rate } => 1.0 / rate,
            Pareto { scale, shape } => {
                if *shape > 1.0 {
                    shape * scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            PiecewiseLinear { xs, cdf } => xs
                .windows(2)
                .zip(cdf.windows(2))
                .map(|(x, c)| (c[1] - c[0]) * 0.5 * (x[0] + x[1]))
                .sum(),
        }
    }

    /// `∫_{-∞}^x F(s) ds`.
    pub fn lower_partial(&self, x: f64) -> f64 {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => {
                let w = high - low;
                if x <= *low {
                    0.0
                } else if x < *high {
                    (x - low) * (x - low) / (2.0 * w)
                } else {
                    0.5 * w + (x - high)
                }
            }
            PointMass { value } => (x - value).max(0.0),
            Normal { mean, sd } => {
                let z = (x - mean) / sd;
                sd * (z * big_phi(z) + phi(z))
            }
            Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    x + (-rate * x).exp_m1() / rate
                }
            }
            Pareto { scale, shape } => {
                if x <= *scale {
                    0.0
                } else {
                    (x - scale) - pareto_survival_integral(*scale, *shape, *scale, x)
                }
            }
            Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .take_while(|(v, _)| **v <= x)
                .map(|(v, p)| p * (x - v))
                .sum(),
            PiecewiseLinear { xs, cdf } => {
                if x <= xs[0] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for i in 0..xs.len() - 1 {
                    if x <= xs[i] {
                        break;
                    }
                    let hi = x.min(xs[i + 1]);
                    let f_hi = self.cdf(hi);
                    acc += 0.5 * (cdf[i] + f_hi) * (hi - xs[i]);
                }
                let last = xs[xs.len() - 1];
                if x > last {
                    acc += x - last;
                }
                acc
            }
        }
    }

    /// `∫_x^∞ (1 - F(s)) ds`.
    pub fn upper_partial(&self, x: f64) -> f64 {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => {
                let w = high - low;
                if x >= *high {
                    0.0
                } else if x > *low {
                    (high - x) * (high - x) / (2.0 * w)
                } else {
                    (low - x) + 0.5 * w
                }
            }
            PointMass { value } => (value - x).max(0.0),
            Normal { mean, sd } => {
                let z = (x - mean) / sd;
                sd * (phi(z) - z * big_phi(-z))
            }
            Exponential { rate } => {
                if x <= 0.0 {
                    -x + 1.0 / rate
                } else {
                    (-rate * x).exp() / rate
                }
            }
            Pareto { scale, shape } => {
                if *shape <= 1.0 {
                    return f64::INFINITY;
                }
                if x <= *scale {
                    (scale - x) + scale / (shape - 1.0)
                } else {
                    x * (scale / x).powf(*shape) / (shape - 1.0)
                }
            }
            Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v > x)
                .map(|(v, p)| p * (v - x))
                .sum(),
            PiecewiseLinear { xs, cdf } => {
                let last = xs[xs.len() - 1];
                if x >= last {
                    return 0.0;
                }
                let mut acc = 0.0;
                if x < xs[0] {
                    acc += xs[0] - x;
                }
                for i in 0..xs.len() - 1 {
                    if xs[i + 1] <= x {
                        continue;
                    }
                    let lo = x.max(xs[i]);
                    let f_lo = self.cdf(lo);
                    acc += 0.5 * ((1.0 - f_lo) + (1.0 - cdf[i + 1])) * (xs[i + 1] - lo);
                }
                acc
            }
        }
    }

    /// `∫_0^u F^{-1}(x) dx`.
    pub fn quantile_integral(&self, u: f64) -> f64 {
        use DistributionSpec::*;
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return 0.0;
        }
        match self {
            Uniform { low, high } => low * u + 0.5 * (high - low) * u * u,
            PointMass { value } => value * u,
            Normal { mean, sd } => {
                if u >= 1.0 {
                    *mean
                } else {
                    mean * u - sd * phi(big_phi_inv(u))
                }
            }
            Exponential { rate } => {
                if u >= 1.0 {
                    1.0 / rate
                } else {
                    ((1.0 - u) * (-u).ln_1p() + u) / rate
                }
            }
            Pareto { scale, shape } => {
                if *shape <= 1.0 {
                    return if u >= 1.0 {
                        f64::INFINITY
                    } else {
                        integrate_pareto_quantile(*scale, *shape, u)
                    };
                }
                let e = 1.0 - 1.0 / shape;
                scale / e * (1.0 - (1.0 - u).powf(e))
            }
            Discrete { values, probs } => {
                let mut remaining = u;
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    let take = remaining.min(*p);
                    acc += take * v;
                    remaining -= take;
                    if remaining <= 0.0 {
                        break;
                    }
                }
                acc
            }
            PiecewiseLinear { xs, cdf } => {
                let mut acc = 0.0;
                for i in 0..xs.len() - 1 {
                    let (c0, c1) = (cdf[i], cdf[i + 1]);
                    if c1 <= c0 || c0 >= u {
                        continue;
                    }
                    let top = c1.min(u);
                    let x_top = xs[i] + (top - c0) / (c1 - c0) * (xs[i + 1] - xs[i]);
                    acc += 0.5 * (xs[i] + x_top) * (top - c0);
                }
                acc
            }
        }
    }

    /// Kinks and jumps of `F`.
    pub fn cdf_knots(&self) -> Vec<f64> {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => vec![*low, *high],
            PointMass { value } => vec![*value],
            Normal { .. } => Vec::new(),
            Exponential { .. } => vec![0.0],
            Pareto { scale, .. } => vec![*scale],
            Discrete { values, .. } => values.clone(),
            PiecewiseLinear { xs, .. } => xs.clone(),
        }
    }

    /// Levels in `(0, 1)` where the quantile function jumps or kinks.
    pub fn level_knots(&self) -> Vec<f64> {
        use DistributionSpec::*;
        match self {
            Discrete { probs, .. } => {
                let mut cum = 0.0;
                let mut out = Vec::new();
                for p in &probs[..probs.len() - 1] {
                    cum += p;
                    out.push(cum);
                }
                out
            }
            PiecewiseLinear { cdf, .. } => cdf
                .iter()
                .copied()
                .filter(|c| *c > 0.0 && *c < 1.0)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Lowest and highest support points (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        use DistributionSpec::*;
        match self {
            Uniform { low, high } => (*low, *high),
            PointMass { value } => (*value, *value),
            Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Exponential { .. } => (0.0, f64::INFINITY),
            Pareto { scale, .. } => (*scale, f64::INFINITY),
            Discrete { values, .. } => (values[0], values[values.len() - 1]),
            PiecewiseLinear { xs, .. } => (xs[0], xs[xs.len() - 1]),
        }
    }

    /// Draw one value by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    /// Level sets of `H` at which `Q` jumps or kinks.
    pub fn tail_level_knots(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .tail_knots()
            .into_iter()
            .flat_map(|t| [self.tail(t), self.tail_left(t)])
            .filter(|u| *u > 0.0 && *u < 1.0)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `H(t-) = P(|X| >= t)`.
    fn tail_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (1.0 - self.cdf_left(t)) + self.cdf(-t)
    }

    fn tail_quantile_by_bisection(&self, u: f64) -> f64 {
        if self.tail(0.0) <= u {
            return 0.0;
        }
        let mut hi = match self.support_bound() {
            Some(m) => m,
            None => {
                if u <= 0.0 {
                    return f64::INFINITY;
                }
                let mut h = 1.0;
                while self.tail(h) > u {
                    h *= 2.0;
                    if !h.is_finite() {
                        return f64::INFINITY;
                    }
                }
                h
            }
        };
        let mut lo = 0.0;
        // Atoms of |X| are exact candidates for Q.
        for k in self.tail_knots() {
            if k > lo && k < hi {
                if self.tail(k) <= u {
                    hi = k;
                } else {
                    lo = k;
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tail(mid) <= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

fn pareto_survival_integral(scale: f64, shape: f64, a: f64, b: f64) -> f64 {
    // ∫_a^b (scale/s)^shape ds for scale <= a <= b
    if (shape - 1.0).abs() < 1e-12 {
        scale * (b / a).ln()
    } else {
        scale.powf(shape) * (b.powf(1.0 - shape) - a.powf(1.0 - shape)) / (1.0 - shape)
    }
}

fn integrate_pareto_quantile(scale: f64, shape: f64, u: f64) -> f64 {
    let e = 1.0 - 1.0 / shape;
    if e.abs() < 1e-12 {
        -scale * (1.0 - u).ln()
    } else {
        scale / e * (1.0 - (1.0 - u).powf(e))
    }
}

impl TailFunction for DistributionSpec {
    fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let h = self.survival(t) + self.cdf_left(-t);
        h.clamp(0.0, 1.0)
    }

    fn tail_quantile(&self, u: f64) -> f64 {
        use DistributionSpec::*;
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            // H(t) = (high - t)/(high - low) on [low, high]
            Uniform { low, high } if *low >= 0.0 => high - u.max(0.0) * (high - low),
            PointMass { value } => value.abs(),
            Normal { mean, sd } if *mean == 0.0 => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    sd * big_phi_inv(1.0 - 0.5 * u)
                }
            }
            Exponential { rate } => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    (-u.ln() / rate).max(0.0)
                }
            }
            Pareto { scale, shape } => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    scale * u.powf(-1.0 / shape)
                }
            }
            _ => self.tail_quantile_by_bisection(u),
        }
    }

    fn support_bound(&self) -> Option<f64> {
        let (lo, hi) = self.support();
        let m = lo.abs().max(hi.abs());
        m.is_finite().then_some(m)
    }

    fn tail_knots(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.cdf_knots().into_iter().map(f64::abs).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

impl QuantileFunction for DistributionSpec {
    fn quantile(&self, u: f64) -> f64 {
        DistributionSpec::quantile(self, u)
    }

    fn quantile_knots(&self) -> Vec<f64> {
        self.level_knots()
    }
}

//! Stationary sequence generators with certified mixing bounds.
//!
//! Each [`ProcessModel`] bundles a sampler, the exact one-dimensional marginal
//! of the stationary law and an [`AlphaSequence`] that is an upper bound for
//! the strong mixing coefficients `α(k)`. All downstream functionals are
//! computed from the bound, so they are conservative.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{DistributionSpec, SampleBatch, TailFunction};
use crate::error::{Error, Result};
use crate::rng;

/// Largest possible strong mixing coefficient.
pub const ALPHA_MAX: f64 = 0.25;

/// Beyond the explicit prefix, `α(k)` is either zero, bounded by a declared
/// geometric envelope, or only known to stay at the last prefix value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaTail {
    Zero,
    /// `α(k) <= min(α(L-1), scale * ratio^k)` for `k >= L`.
    Geometric {
        scale: f64,
        ratio: f64,
    },
    /// No decay certificate.
    Flat,
}

/// Nonincreasing bound sequence `α(0), α(1), ...` with values in `[0, 1/4]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSequence {
    prefix: Vec<f64>,
    tail: AlphaTail,
}

impl AlphaSequence {
    pub fn new(prefix: Vec<f64>, tail: AlphaTail) -> Result<Self> {
        if prefix.is_empty() {
            return Err(Error::invalid("alpha prefix must contain alpha(0)"));
        }
        if prefix.iter().any(|a| !(0.0..=ALPHA_MAX).contains(a)) {
            return Err(Error::invalid("alpha values must lie in [0, 1/4]"));
        }
        if prefix.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("alpha sequence must be nonincreasing"));
        }
        if let AlphaTail::Geometric { scale, ratio } = tail {
            if !(scale.is_finite() && scale > 0.0 && ratio > 0.0 && ratio < 1.0) {
                return Err(Error::invalid(
                    "geometric tail needs scale > 0 and ratio in (0,1)",
                ));
            }
        }
        Ok(Self { prefix, tail })
    }

    /// `α ≡ 0`, the convention for constant processes.
    pub fn zero() -> Self {
        Self {
            prefix: vec![0.0],
            tail: AlphaTail::Zero,
        }
    }

    /// `α(0) = 1/4` and zero afterwards.
    pub fn independent() -> Self {
        Self {
            prefix: vec![ALPHA_MAX],
            tail: AlphaTail::Zero,
        }
    }

    /// `α(k) = min(1/4, scale * ratio^k)` for `k >= 1`.
    pub fn geometric(scale: f64, ratio: f64) -> Result<Self> {
        Self::new(vec![ALPHA_MAX], AlphaTail::Geometric { scale, ratio })
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> &AlphaTail {
        &self.tail
    }

    fn cap(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    pub fn alpha(&self, k: u64) -> f64 {
        if let Some(a) = usize::try_from(k).ok().and_then(|i| self.prefix.get(i)) {
            return *a;
        }
        match self.tail {
            AlphaTail::Zero => 0.0,
            AlphaTail::Flat => self.cap(),
            AlphaTail::Geometric { scale, ratio } => self.cap().min(scale * ratio.powf(k as f64)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.prefix[0] == 0.0
    }

    /// Smallest `k >= from` with `pred(α(k))`, for a predicate that is
    /// monotone along the sequence. Exponential then binary search.
    fn first_where(&self, from: u64, pred: impl Fn(f64) -> bool) -> Option<u64> {
        if pred(self.alpha(from)) {
            return Some(from);
        }
        let mut lo = from;
        let mut step = 1u64;
        let hi = loop {
            let probe = from.checked_add(step)?;
            if pred(self.alpha(probe)) {
                break probe;
            }
            lo = probe;
            if step >= 1 << 62 {
                return None;
            }
            step *= 2;
        };
        let mut hi = hi;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if pred(self.alpha(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// `min{q >= 1 : α(q) <= u}`; `None` when the sequence never gets there.
    pub fn count(&self, u: f64) -> Option<u64> {
        if u < 0.0 {
            return None;
        }
        if u == 0.0 && matches!(self.tail, AlphaTail::Geometric { .. }) {
            // a geometric envelope is positive at every lag
            return None;
        }
        if u < self.cap() && matches!(self.tail, AlphaTail::Flat) {
            return None;
        }
        self.first_where(1, |a| a <= u)
    }

    /// Smallest `k` with `α(k) < floor`.
    pub fn tail_cut(&self, floor: f64) -> Option<u64> {
        if floor <= self.cap() && matches!(self.tail, AlphaTail::Flat) {
            return None;
        }
        self.first_where(0, |a| a < floor)
    }

    /// Jump points `α(k)` of the count function, restricted to `(0, 1)`.
    pub fn levels(&self, limit: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.prefix.iter().skip(1).copied().collect();
        if let AlphaTail::Geometric { .. } = self.tail {
            let start = self.prefix.len() as u64;
            out.extend((start..start + limit as u64).map(|k| self.alpha(k)));
        }
        out.retain(|a| *a > 0.0);
        out.dedup();
        out
    }

    /// `Σ_{k>=0} min(α(k), h)`, exact for every tail kind.
    pub fn sum_min(&self, h: f64) -> Result<f64> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        let head: f64 = self.prefix.iter().map(|a| a.min(h)).sum();
        let c = h.min(self.cap());
        let tail = match self.tail {
            AlphaTail::Zero => 0.0,
            _ if c <= 0.0 => 0.0,
            AlphaTail::Flat => {
                return Err(Error::Divergent(format!(
                    "alpha stays at {} without a decay certificate, so the series diverges",
                    self.cap()
                )))
            }
            AlphaTail::Geometric { scale, ratio } => {
                let start = self.prefix.len() as u64;
                // first k >= start with scale * ratio^k <= c
                let guess = ((c / scale).ln() / ratio.ln()).ceil();
                let mut j = if guess.is_finite() && guess > start as f64 {
                    guess as u64
                } else {
                    start
                };
                while j > start && scale * ratio.powf((j - 1) as f64) <= c {
                    j -= 1;
                }
                while scale * ratio.powf(j as f64) > c {
                    j += 1;
                }
                (j - start) as f64 * c + scale * ratio.powf(j as f64) / (1.0 - ratio)
            }
        };
        Ok(head + tail)
    }

    /// Multiply every bound by `factor`, clamping to `1/4`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let prefix = self
            .prefix
            .iter()
            .map(|a| (a * factor).min(ALPHA_MAX))
            .collect();
        let tail = match self.tail {
            AlphaTail::Geometric { scale, ratio } => AlphaTail::Geometric {
                scale: scale * factor,
                ratio,
            },
            ref t => t.clone(),
        };
        Self::new(prefix, tail)
    }
}

/// Mixing bound together with the marginal whose magnitude gives `H` and `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub alpha: AlphaSequence,
    pub marginal: DistributionSpec,
}

impl MixingProfile {
    pub fn new(alpha: AlphaSequence, marginal: DistributionSpec) -> Result<Self> {
        marginal.validate()?;
        Ok(Self { alpha, marginal })
    }

    pub fn alpha(&self, k: u64) -> f64 {
        self.alpha.alpha(k)
    }

    /// `H(t) = P(|X_0| > t)`.
    pub fn h(&self, t: f64) -> f64 {
        self.marginal.tail(t)
    }

    /// `Q(u) = inf{t >= 0 : H(t) <= u}`.
    pub fn q(&self, u: f64) -> f64 {
        self.marginal.tail_quantile(u)
    }

    pub fn tail_cut(&self, floor: f64) -> Option<u64> {
        self.alpha.tail_cut(floor)
    }
}

/// Serializable model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    Iid {
        marginal: DistributionSpec,
    },
    Constant {
        value: f64,
    },
    GaussianAr1 {
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transform_to: Option<DistributionSpec>,
    },
    FiniteMarkov {
        transition: Vec<Vec<f64>>,
        state_values: Vec<f64>,
    },
    MDependent {
        m: usize,
        weights: Vec<f64>,
        innovation: DistributionSpec,
    },
}

/// How the sampler seed is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Use the run seed.
    #[default]
    Run,
    /// Always use this seed, whatever the run seed.
    Fixed { seed: u64 },
}

impl SeedPolicy {
    pub fn resolve(&self, run_seed: u64) -> u64 {
        match self {
            SeedPolicy::Run => run_seed,
            SeedPolicy::Fixed { seed } => *seed,
        }
    }
}

/// Model entry of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    pub params: ModelParams,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
}

/// Names accepted by [`ModelDescriptor::builtin`].
pub const BUILTIN_MODELS: &[&str] = &[
    "iid-uniform",
    "iid-normal",
    "constant",
    "sticky-markov",
    "ar1",
    "ar1-uniform",
    "ma1-uniform",
];

impl ModelDescriptor {
    pub fn new(name: impl Into<String>, params: ModelParams) -> Self {
        Self {
            name: name.into(),
            params,
            seed_policy: SeedPolicy::Run,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let params = match name {
            "iid-uniform" => ModelParams::Iid {
                marginal: DistributionSpec::standard_uniform(),
            },
            "iid-normal" => ModelParams::Iid {
                marginal: DistributionSpec::standard_normal(),
            },
            "constant" => ModelParams::Constant { value: 0.5 },
            "sticky-markov" => ModelParams::FiniteMarkov {
                transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                state_values: vec![0.0, 1.0],
            },
            "ar1" => ModelParams::GaussianAr1 {
                rho: 0.5,
                transform_to: None,
            },
            "ar1-uniform" => ModelParams::GaussianAr1 {
                rho: 0.5,
                transform_to: Some(DistributionSpec::standard_uniform()),
            },
            "ma1-uniform" => ModelParams::MDependent {
                m: 1,
                weights: vec![1.0, 1.0],
                innovation: DistributionSpec::standard_uniform(),
            },
            _ => return None,
        };
        Some(Self::new(name, params))
    }

    pub fn build(&self) -> Result<ProcessModel> {
        let mut model = match &self.params {
            ModelParams::Iid { marginal } => make_iid(marginal.clone())?,
            ModelParams::Constant { value } => constant(*value)?,
            ModelParams::GaussianAr1 { rho, transform_to } => {
                make_gaussian_ar1(*rho, transform_to.clone())?
            }
            ModelParams::FiniteMarkov {
                transition,
                state_values,
            } => make_finite_markov(transition, state_values)?,
            ModelParams::MDependent {
                m,
                weights,
                innovation,
            } => make_m_dependent(*m, weights, innovation.clone())?,
        };
        model.name = self.name.clone();
        Ok(model)
    }
}

/// Finite-state chain with its stationary law.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
    values: Vec<f64>,
    cum_rows: Vec<Vec<f64>>,
    cum_stationary: Vec<f64>,
}

impl MarkovChain {
    pub fn new(transition: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        let d = transition.len();
        if d == 0 || values.len() != d {
            return Err(Error::invalid(
                "transition must be square with one value per state",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("state values must be finite"));
        }
        for row in transition {
            if row.len() != d || row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::invalid(
                    "transition rows must be nonnegative and square",
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("transition row sums to {s}")));
            }
        }
        let p = DMatrix::from_fn(d, d, |i, j| transition[i][j]);
        if !is_primitive(&p) {
            return Err(Error::invalid("transition matrix is reducible or periodic"));
        }
        let stationary = stationary_vector(&p)?;
        let cum_rows = transition.iter().map(|r| cumulative(r)).collect();
        let cum_stationary = cumulative(stationary.as_slice());
        Ok(Self {
            transition: p,
            stationary,
            values: values.to_vec(),
            cum_rows,
            cum_stationary,
        })
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalue moduli of the transition matrix, largest first.
    pub fn eigenvalue_moduli(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .transition
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }

    /// `max_i ‖P^k(i, ·) - π‖_TV` for a given power `P^k`.
    pub fn distance_to_stationarity(&self, pk: &DMatrix<f64>) -> f64 {
        let d = self.states();
        (0..d)
            .map(|i| {
                0.5 * (0..d)
                    .map(|j| (pk[(i, j)] - self.stationary[j]).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{i,j} ‖P^k(i, ·) - P^k(j, ·)‖_TV`; submultiplicative in `k`.
    pub fn row_spread(&self, pk: &DMatrix<f64>) -> f64 {
        let d = self.states();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let tv = 0.5 * (0..d).map(|s| (pk[(i, s)] - pk[(j, s)]).abs()).sum::<f64>();
                worst = worst.max(tv);
            }
        }
        worst
    }

    /// Mixing bound `α(k) <= max_i ‖P^k(i, ·) - π‖_TV`, tabulated until it
    /// falls below `floor`, then certified by the submultiplicative spread.
    pub fn alpha_sequence(&self, floor: f64, max_lag: usize) -> Result<AlphaSequence> {
        if self.values.windows(2).all(|w| w[0] == w[1]) {
            return Ok(AlphaSequence::zero());
        }
        let mut prefix = vec![ALPHA_MAX];
        let mut running = ALPHA_MAX;
        let mut pk = self.transition.clone();
        for k in 1..=max_lag {
            let dist = self.distance_to_stationarity(&pk);
            running = running.min(dist);
            prefix.push(running);
            if dist < floor || k == max_lag {
                let spread = self.row_spread(&pk);
                if spread >= 1.0 {
                    return Err(Error::invalid(format!(
                        "no contraction after {k} steps (spectral gap numerically zero)"
                    )));
                }
                let tail = if spread == 0.0 {
                    AlphaTail::Zero
                } else {
                    // spread(jL + r) <= spread(L)^j <= spread(L)^{k/L - 1}
                    AlphaTail::Geometric {
                        scale: 1.0 / spread,
                        ratio: spread.powf(1.0 / k as f64),
                    }
                };
                return AlphaSequence::new(prefix, tail);
            }
            pk = &pk * &self.transition;
        }
        unreachable!("loop returns at k == max_lag")
    }

    fn draw_state(cum: &[f64], u: f64) -> usize {
        cum.partition_point(|&c| c < u).min(cum.len() - 1)
    }

    fn path(&self, rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut s = Self::draw_state(&self.cum_stationary, rng.sample(Open01));
        out.push(self.values[s]);
        for _ in 1..n {
            s = Self::draw_state(&self.cum_rows[s], rng.sample(Open01));
            out.push(self.values[s]);
        }
        out
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|q| {
            acc += q;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Wielandt: a nonnegative matrix is primitive (irreducible and aperiodic)
/// iff its `(d-1)^2 + 1`-th power is strictly positive.
fn is_primitive(p: &DMatrix<f64>) -> bool {
    let d = p.nrows();
    let mut b: Vec<bool> = p.iter().map(|x| *x > 0.0).collect();
    let at = |m: &Vec<bool>, i: usize, j: usize| m[i + j * d];
    let target = (d - 1) * (d - 1) + 1;
    let mut power = 1usize;
    while power < target {
        let mut next = vec![false; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i + j * d] = (0..d).any(|k| at(&b, i, k) && at(&b, k, j));
            }
        }
        b = next;
        power *= 2;
    }
    b.iter().all(|x| *x)
}

fn stationary_vector(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(d);
    rhs[d - 1] = 1.0;
    let mut pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("stationary distribution is not unique"))?;
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    let s = pi.sum();
    Ok(pi / s)
}

#[derive(Debug, Clone)]
enum Engine {
    Iid(DistributionSpec),
    Ar1 {
        rho: f64,
        transform: Option<DistributionSpec>,
    },
    Markov(MarkovChain),
    MDependent {
        weights: Vec<f64>,
        innovation: DistributionSpec,
    },
}

/// Stationary process with known marginal and certified mixing bound.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    name: String,
    params: ModelParams,
    marginal: DistributionSpec,
    mixing: MixingProfile,
    engine: Engine,
}

impl ProcessModel {
    fn assemble(
        name: &str,
        params: ModelParams,
        marginal: DistributionSpec,
        alpha: AlphaSequence,
        engine: Engine,
    ) -> Result<Self> {
        let alpha = if marginal.is_degenerate() {
            AlphaSequence::zero()
        } else {
            alpha
        };
        Ok(Self {
            name: name.to_string(),
            params,
            mixing: MixingProfile::new(alpha, marginal.clone())?,
            marginal,
            engine,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn marginal(&self) -> &DistributionSpec {
        &self.marginal
    }

    pub fn mixing(&self) -> &MixingProfile {
        &self.mixing
    }

    /// Replace the declared mixing bound (e.g. with a looser one).
    pub fn with_alpha(mut self, alpha: AlphaSequence) -> Self {
        self.mixing.alpha = alpha;
        self
    }

    pub fn markov(&self) -> Option<&MarkovChain> {
        match &self.engine {
            Engine::Markov(c) => Some(c),
            _ => None,
        }
    }

    /// True when the declared bound says the sequence is independent.
    pub fn is_independent(&self) -> bool {
        self.mixing.alpha(1) == 0.0
    }

    /// Path `X_1, ..., X_n` in time order, drawn from keystream `stream`.
    pub fn path(&self, seed: u64, stream: u64, n: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, stream);
        match &self.engine {
            Engine::Iid(d) => (0..n).map(|_| d.sample(&mut r)).collect(),
            Engine::Ar1 { rho, transform } => {
                let innovation_sd = (1.0 - rho * rho).sqrt();
                let mut x: f64 = r.sample(StandardNormal);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(match transform {
                        Some(t) => t.quantile(DistributionSpec::standard_normal().cdf(x)),
                        None => x,
                    });
                    let e: f64 = r.sample(StandardNormal);
                    x = rho * x + innovation_sd * e;
                }
                out
            }
            Engine::Markov(chain) => chain.path(&mut r, n),
            Engine::MDependent {
                weights,
                innovation,
            } => {
                let m = weights.len() - 1;
                let eps: Vec<f64> = (0..n + m).map(|_| innovation.sample(&mut r)).collect();
                (0..n)
                    .map(|k| {
                        weights
                            .iter()
                            .enumerate()
                            .map(|(j, w)| w * eps[k + m - j])
                            .sum()
                    })
                    .collect()
            }
        }
    }

    /// Sorted batch of the first `n` observations.
    pub fn sample_batch(&self, seed: u64, stream: u64, n: usize) -> Result<SampleBatch> {
        SampleBatch::new(self.path(seed, stream, n))
    }
}

/// Independent draws from `marginal`.
pub fn make_iid(marginal: DistributionSpec) -> Result<ProcessModel> {
    marginal.validate()?;
    if !marginal.mean().is_finite() {
        return Err(Error::invalid("i.i.d. marginal must have a finite mean"));
    }
    ProcessModel::assemble(
        "iid",
        ModelParams::Iid {
            marginal: marginal.clone(),
        },
        marginal.clone(),
        AlphaSequence::independent(),
        Engine::Iid(marginal),
    )
}

/// The constant sequence `X_k = value`.
pub fn constant(value: f64) -> Result<ProcessModel> {
    let marginal = DistributionSpec::point_mass(value);
    marginal.validate()?;
    ProcessModel::assemble(
        "constant",
        ModelParams::Constant { value },
        marginal.clone(),
        AlphaSequence::zero(),
        Engine::Iid(marginal),
    )
}

/// Stationary Gaussian AR(1), optionally mapped through
/// `transform_to.quantile(Φ(·))`. The declared bound `min(1/4, |rho|^k)` is the
/// maximal-correlation bound, not the exact coefficient.
pub fn make_gaussian_ar1(rho: f64, transform_to: Option<DistributionSpec>) -> Result<ProcessModel> {
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid(format!("|rho| must be < 1, got {rho}")));
    }
    let marginal = match &transform_to {
        Some(t) => {
            t.validate()?;
            t.clone()
        }
        None => DistributionSpec::standard_normal(),
    };
    let alpha = if rho == 0.0 {
        AlphaSequence::independent()
    } else {
        AlphaSequence::geometric(1.0, rho.abs())?
    };
    ProcessModel::assemble(
        "gaussian_ar1",
        ModelParams::GaussianAr1 {
            rho,
            transform_to: transform_to.clone(),
        },
        marginal,
        alpha,
        Engine::Ar1 {
            rho,
            transform: transform_to,
        },
    )
}

/// Floor below which tabulated Markov mixing bounds hand over to the
/// geometric certificate.
pub const MARKOV_ALPHA_FLOOR: f64 = 1e-12;
const MARKOV_MAX_LAG: usize = 100_000;

/// Finite-state chain started from its stationary law.
pub fn make_finite_markov(transition: &[Vec<f64>], state_values: &[f64]) -> Result<ProcessModel> {
    let chain = MarkovChain::new(transition, state_values)?;
    let alpha = chain.alpha_sequence(MARKOV_ALPHA_FLOOR, MARKOV_MAX_LAG)?;
    let marginal = DistributionSpec::discrete(state_values, chain.stationary().as_slice())?;
    ProcessModel::assemble(
        "finite_markov",
        ModelParams::FiniteMarkov {
            transition: transition.to_vec(),
            state_values: state_values.to_vec(),
        },
        marginal,
        alpha,
        Engine::Markov(chain),
    )
}

/// Moving average `X_k = Σ_j weights_j ε_{k-j}` of i.i.d. innovations.
pub fn make_m_dependent(
    m: usize,
    weights: &[f64],
    innovation: DistributionSpec,
) -> Result<ProcessModel> {
    if weights.len() != m + 1 {
        return Err(Error::invalid(format!(
            "m = {m} needs {} weights, got {}",
            m + 1,
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("weights must be finite"));
    }
    innovation.validate()?;
    if !innovation.mean().is_finite() {
        return Err(Error::invalid("innovation must have a finite mean"));
    }
    let marginal = moving_average_marginal(weights, &innovation)?;
    let alpha = AlphaSequence::new(vec![ALPHA_MAX; m + 1], AlphaTail::Zero)?;
    ProcessModel::assemble(
        "m_dependent",
        ModelParams::MDependent {
            m,
            weights: weights.to_vec(),
            innovation: innovation.clone(),
        },
        marginal,
        alpha,
        Engine::MDependent {
            weights: weights.to_vec(),
            innovation,
        },
    )
}

/// Law of `w * ε` when it has a closed form.
fn scaled_law(d: &DistributionSpec, w: f64) -> Option<DistributionSpec> {
    use DistributionSpec::*;
    Some(match d {
        PointMass { value } => PointMass { value: w * value },
        Uniform { low, high } => {
            let (a, b) = (w * low, w * high);
            Uniform {
                low: a.min(b),
                high: a.max(b),
            }
        }
        Normal { mean, sd } => Normal {
            mean: w * mean,
            sd: w.abs() * sd,
        },
        Exponential { rate } if w > 0.0 => Exponential { rate: rate / w },
        Pareto { scale, shape } if w > 0.0 => Pareto {
            scale: scale * w,
            shape: *shape,
        },
        Discrete { values, probs } => {
            let scaled: Vec<f64> = values.iter().map(|v| w * v).collect();
            return DistributionSpec::discrete(&scaled, probs).ok();
        }
        _ => return None,
    })
}

fn moving_average_marginal(
    weights: &[f64],
    innovation: &DistributionSpec,
) -> Result<DistributionSpec> {
    let active: Vec<f64> = weights.iter().copied().filter(|w| *w != 0.0).collect();
    if active.is_empty() {
        return Ok(DistributionSpec::point_mass(0.0));
    }
    let total: f64 = active.iter().sum();
    match innovation {
        DistributionSpec::PointMass { value } => {
            return Ok(DistributionSpec::point_mass(total * value))
        }
        DistributionSpec::Normal { mean, sd } => {
            let norm = active.iter().map(|w| w * w).sum::<f64>().sqrt();
            return DistributionSpec::normal(total * mean, sd * norm);
        }
        _ => {}
    }
    if active.len() == 1 {
        if let Some(d) = scaled_law(innovation, active[0]) {
            return Ok(d);
        }
    }
    Ok(convolve_numerically(&active, innovation))
}

const CONV_GRID: usize = 2049;
const CONV_LEVELS: usize = 4096;
const CONV_TAIL: f64 = 1e-10;

/// CDF of `Σ w_j ε_j` on a grid, by `F_{S + wε}(x) = ∫_0^1 F_S(x - w F_ε^{-1}(u)) du`
/// with a midpoint rule in `u`.
fn convolve_numerically(weights: &[f64], innovation: &DistributionSpec) -> DistributionSpec {
    let (slo, shi) = innovation.support();
    let q_lo = if slo.is_finite() {
        slo
    } else {
        innovation.quantile(CONV_TAIL)
    };
    let q_hi = if shi.is_finite() {
        shi
    } else {
        innovation.quantile(1.0 - CONV_TAIL)
    };
    let range = |w: f64| {
        let (a, b) = (w * q_lo, w * q_hi);
        (a.min(b), a.max(b))
    };
    let levels: Vec<f64> = (0..CONV_LEVELS)
        .map(|i| innovation.quantile((i as f64 + 0.5) / CONV_LEVELS as f64))
        .collect();
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (0..CONV_GRID)
            .map(|i| lo + (hi - lo) * i as f64 / (CONV_GRID - 1) as f64)
            .collect()
    };

    let w0 = weights[0];
    let (mut lo, mut hi) = range(w0);
    let mut xs = grid(lo, hi);
    let mut cdf: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if w0 > 0.0 {
                innovation.cdf(x / w0)
            } else {
                1.0 - innovation.cdf_left(x / w0)
            }
        })
        .collect();
    for &w in &weights[1..] {
        let (a, b) = range(w);
        let (new_lo, new_hi) = (lo + a, hi + b);
        let new_xs = grid(new_lo, new_hi);
        let prev = DistributionSpec::PiecewiseLinear {
            xs: xs.clone(),
            cdf: cdf.clone(),
        };
        let new_cdf: Vec<f64> = new_xs
            .par_iter()
            .map(|&x| levels.iter().map(|q| prev.cdf(x - w * q)).sum::<f64>() / CONV_LEVELS as f64)
            .collect();
        lo = new_lo;
        hi = new_hi;
        xs = new_xs;
        cdf = new_cdf;
    }
    let last = cdf.len() - 1;
    cdf[0] = 0.0;
    cdf[last] = 1.0;
    for i in 1..cdf.len() {
        cdf[i] = cdf[i].clamp(cdf[i - 1], 1.0);
    }
    DistributionSpec::PiecewiseLinear { xs, cdf }
}

//! Inverse-transform sampling of generalized Cox variates.
//!
//! A draw consumes one uniform to select the branch (cumulative scan in branch
//! order) and then one uniform per stage of that branch, each turned into an
//! exponential by `-ln(U)/λ`. Uniforms live in `(0, 1]`, so the logarithm is
//! always finite.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::analysis::{self, MomentSummary, TransientEvaluator};
use crate::error::{Error, Result};
use crate::model::GeneralizedCoxModel;

/// Name of the underlying generator, recorded in sample metadata.
pub const GENERATOR_NAME: &str = "xoshiro256++ (splitmix64 seeding)";

/// Number of standard errors tolerated by [`empirical_check`].
pub const CHECK_SIGMAS: f64 = 4.0;

/// Seeded deterministic uniform stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerState {
    seed: u64,
    counter: u64,
    rng: Xoshiro256PlusPlus,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Stream `index` of `seed`: the base stream advanced by `index` jumps of
    /// 2^128 draws, so streams never overlap in practice.
    pub fn stream(seed: u64, index: u32) -> Self {
        let mut s = Self::new(seed);
        for _ in 0..index {
            s.rng.jump();
        }
        s
    }

    /// Hands out the current position as a new state and moves `self` 2^128
    /// draws ahead.
    pub fn split(&mut self) -> Self {
        let child = Self {
            seed: self.seed,
            counter: 0,
            rng: self.rng.clone(),
        };
        self.rng.jump();
        child
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniforms consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Uniform on `(0, 1]` with 53 random bits; never zero.
    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        let bits = self.rng.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// `-ln(U)/λ`.
pub fn sample_exponential(state: &mut SamplerState, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonPositiveRate(lambda));
    }
    Ok(exponential_from_uniform(state.uniform(), lambda))
}

/// Inverse transform of a single uniform; `u` must lie in `(0, 1]`.
pub fn exponential_from_uniform(u: f64, lambda: f64) -> f64 {
    -u.ln() / lambda
}

/// Index of the branch selected by uniform `u`.
fn select_branch(model: &GeneralizedCoxModel, u: f64) -> usize {
    let branches = model.branches();
    let mut cum = 0.0;
    for (j, b) in branches.iter().enumerate() {
        cum += b.prob;
        if u <= cum {
            return j;
        }
    }
    // cumulative sum fell short of u by roundoff: take the last branch with
    // positive probability
    branches
        .iter()
        .rposition(|b| b.prob > 0.0)
        .unwrap_or(branches.len() - 1)
}

/// One variate together with the branch that produced it.
pub fn sample_with_branch(model: &GeneralizedCoxModel, state: &mut SamplerState) -> (usize, f64) {
    let j = select_branch(model, state.uniform());
    let t = model.branches()[j]
        .rates
        .iter()
        .map(|&rate| exponential_from_uniform(state.uniform(), rate))
        .fold(0.0, |acc, x| acc + x);
    (j, t)
}

pub fn sample(model: &GeneralizedCoxModel, state: &mut SamplerState) -> f64 {
    sample_with_branch(model, state).1
}

pub fn sample_n(model: &GeneralizedCoxModel, state: &mut SamplerState, n: usize) -> Vec<f64> {
    (0..n).map(|_| sample(model, state)).collect()
}

/// Sample moments with standard errors, compared to analytic targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub n: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    /// `sample_std / √n`.
    pub se_mean: f64,
    /// `√((m4 - s⁴)/n)` with `m4` the sample fourth central moment.
    pub se_variance: f64,
    pub zero_fraction: f64,
    pub target_mean: f64,
    pub target_variance: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
}

impl EmpiricalReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.variance_ok
    }

    pub fn mean_z(&self) -> f64 {
        (self.sample_mean - self.target_mean) / self.se_mean
    }

    pub fn variance_z(&self) -> f64 {
        (self.sample_variance - self.target_variance) / self.se_variance
    }

    /// Builds the report from raw draws.
    pub fn from_samples(samples: &[f64], target: &MomentSummary) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        let mut zeros = 0usize;
        for &x in samples {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
            if x == 0.0 {
                zeros += 1;
            }
        }
        let variance = m2 / (nf - 1.0);
        let m4 = m4 / nf;
        let se_mean = (variance / nf).sqrt();
        let se_variance = ((m4 - variance * variance).max(0.0) / nf).sqrt();
        let within = |diff: f64, se: f64| {
            if se > 0.0 {
                diff.abs() <= CHECK_SIGMAS * se
            } else {
                diff.abs() <= 1e-12 * target.second_moment.max(1e-300)
            }
        };
        Ok(Self {
            n,
            sample_mean: mean,
            sample_variance: variance,
            se_mean,
            se_variance,
            zero_fraction: zeros as f64 / nf,
            target_mean: target.mean,
            target_variance: target.variance,
            mean_ok: within(mean - target.mean, se_mean),
            variance_ok: within(variance - target.variance, se_variance),
        })
    }
}

/// Draws `n` variates under `seed` and checks them against the model's own
/// analytic mean and variance at [`CHECK_SIGMAS`] standard errors.
pub fn empirical_check(
    model: &GeneralizedCoxModel,
    n: usize,
    seed: u64,
) -> Result<EmpiricalReport> {
    empirical_check_against(model, &analysis::summary(model), n, seed)
}

/// As [`empirical_check`], against externally supplied targets.
pub fn empirical_check_against(
    model: &GeneralizedCoxModel,
    target: &MomentSummary,
    n: usize,
    seed: u64,
) -> Result<EmpiricalReport> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut state = SamplerState::new(seed);
    let samples = sample_n(model, &mut state, n);
    EmpiricalReport::from_samples(&samples, target)
}

/// Asymptotic one-sample Kolmogorov-Smirnov critical value for significance
/// `alpha`: `√(-ln(α/2)/2) / √n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// KS distance between the strictly positive draws and the model's
/// continuous part (cdf conditioned on `T > 0`). Returns the statistic and
/// the number of positive draws used.
pub fn ks_continuous_part(model: &GeneralizedCoxModel, samples: &[f64]) -> Result<(f64, usize)> {
    let mut positive: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    positive.sort_by(f64::total_cmp);
    let eval = TransientEvaluator::new(model.to_phase_type());
    let atom = model.atom0();
    let mass = 1.0 - atom;
    let n = positive.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in positive.iter().enumerate() {
        let f = eval.cdf(x)?.continuous() / mass;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok((d, positive.len()))
}

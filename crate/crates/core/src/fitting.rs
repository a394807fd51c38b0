//! Two-moment matching with the fewest transient states.
//!
//! For `σ² < μ²` a single chain of `N = ⌈μ²/σ²⌉` stages is used, with
//! `N - 1` equal stage means and one longer stage ("almost Erlang"). For
//! `σ² >= μ²` one exponential stage plus an instantaneous branch suffices.
//! The two-stage Sauer-Chandy hyperexponential is kept as a baseline.

use std::fmt;

use crate::analysis::{self, MomentSummary};
use crate::error::{Error, Result};
use crate::model::{Branch, GeneralizedCoxModel};

/// Slack subtracted before taking the ceiling of `μ²/σ²`, so ratios that are
/// integral up to roundoff land on the exact integer.
pub const CEIL_SLACK: f64 = 1e-12;

/// Relative distance of `p` from `p_max` below which the second hyper branch
/// is encoded as instantaneous.
const P_MAX_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Exponential,
    Erlang,
    AlmostErlang,
    SimplestHyper,
    HyperFamily,
    SauerChandy,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Exponential => "exponential",
            Family::Erlang => "erlang",
            Family::AlmostErlang => "almost-erlang",
            Family::SimplestHyper => "simplest-hyper",
            Family::HyperFamily => "hyper-family",
            Family::SauerChandy => "sauer-chandy",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: GeneralizedCoxModel,
    pub family: Family,
    /// Number of exponential stages in the model.
    pub n_transient: usize,
    pub target: MomentSummary,
    pub achieved: MomentSummary,
    /// `α_N` for chains, `α` for the hyperexponential family; absent for the
    /// exponential and Sauer-Chandy fits.
    pub alpha: Option<f64>,
}

impl FitResult {
    fn new(
        model: GeneralizedCoxModel,
        family: Family,
        target: MomentSummary,
        alpha: Option<f64>,
    ) -> Self {
        let achieved = analysis::summary(&model);
        Self {
            n_transient: model.n_transient(),
            model,
            family,
            target,
            achieved,
            alpha,
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveInput { name, value })
    }
}

fn chain_length(mu: f64, sigma2: f64) -> usize {
    ((mu * mu / sigma2) - CEIL_SLACK).ceil().max(1.0) as usize
}

/// Fewest stages able to carry the target: `⌈μ²/σ²⌉` below `Cv = 1`, one
/// otherwise.
pub fn minimal_states(mu: f64, sigma2: f64) -> Result<usize> {
    check_positive("mean", mu)?;
    check_positive("variance", sigma2)?;
    if sigma2 >= mu * mu {
        Ok(1)
    } else {
        Ok(chain_length(mu, sigma2))
    }
}

fn stage_rates(means: impl IntoIterator<Item = f64>) -> Vec<f64> {
    means.into_iter().map(|x| 1.0 / x).collect()
}

/// Hypoexponential chain of `N = ⌈μ²/σ²⌉` stages: `N - 1` stages of mean
/// `μ/N - α_N/√(N-1)` and a last stage of mean `μ/N + √(N-1) α_N`, with
/// `α_N = √(Nσ² - μ²)/N`. Reduces to Erlang-N when `μ²/σ² = N`.
pub fn almost_erlang(mu: f64, sigma2: f64) -> Result<FitResult> {
    check_positive("mean", mu)?;
    check_positive("variance", sigma2)?;
    if sigma2 >= mu * mu {
        return Err(Error::DomainError(format!(
            "almost-Erlang needs variance < mean² (got variance {sigma2}, mean² {})",
            mu * mu
        )));
    }
    let n = chain_length(mu, sigma2);
    if n < 2 {
        return Err(Error::DomainError(format!(
            "variance {sigma2} is within roundoff of mean² {}; use the exponential",
            mu * mu
        )));
    }
    let nf = n as f64;
    let alpha_n = (nf * sigma2 - mu * mu).max(0.0).sqrt() / nf;
    let root = (nf - 1.0).sqrt();
    let short = mu / nf - alpha_n / root;
    let long = mu / nf + root * alpha_n;
    let mut means = vec![short; n - 1];
    means.push(long);
    let family = if alpha_n == 0.0 {
        Family::Erlang
    } else {
        Family::AlmostErlang
    };
    let model = GeneralizedCoxModel::new(vec![Branch::new(1.0, stage_rates(means))])?;
    Ok(FitResult::new(
        model,
        family,
        MomentSummary::from_mean_variance(mu, sigma2)?,
        Some(alpha_n),
    ))
}

/// One exponential stage of mean `μ(Cv²+1)/2` taken with probability
/// `2/(1+Cv²)`, otherwise zero delay.
pub fn simplest_hyper(mu: f64, sigma2: f64) -> Result<FitResult> {
    check_positive("mean", mu)?;
    check_positive("variance", sigma2)?;
    if sigma2 < mu * mu {
        return Err(Error::DomainError(format!(
            "simplest hyperexponential needs variance >= mean² (got variance {sigma2}, mean² {})",
            mu * mu
        )));
    }
    let cv2 = sigma2 / (mu * mu);
    let p = 2.0 / (1.0 + cv2);
    let x1 = mu * (cv2 + 1.0) / 2.0;
    let alpha = (p * (1.0 - p) * (cv2 - 1.0) / 2.0).sqrt();
    let model = GeneralizedCoxModel::new(vec![
        Branch::new(p, vec![1.0 / x1]),
        Branch::instantaneous(1.0 - p),
    ])?;
    Ok(FitResult::new(
        model,
        Family::SimplestHyper,
        MomentSummary::from_mean_variance(mu, sigma2)?,
        Some(alpha),
    ))
}

/// Two single-stage branches with stage means `μ(1 + α/p)` and
/// `μ(1 - α/(1-p))`, `α = √(p(1-p)(Cv²-1)/2)`, for any `0 < p <= 2/(1+Cv²)`.
/// At `p = p_max` the second stage mean vanishes and the result is
/// [`simplest_hyper`].
pub fn hyper_family(mu: f64, sigma2: f64, p: f64) -> Result<FitResult> {
    check_positive("mean", mu)?;
    check_positive("variance", sigma2)?;
    if sigma2 <= mu * mu {
        return Err(Error::DomainError(format!(
            "hyperexponential family needs variance > mean² (got variance {sigma2}, mean² {})",
            mu * mu
        )));
    }
    let cv2 = sigma2 / (mu * mu);
    let p_max = 2.0 / (1.0 + cv2);
    if !(p > 0.0 && p <= p_max * (1.0 + P_MAX_SNAP)) {
        return Err(Error::POutOfRange { p, p_max });
    }
    if (p - p_max).abs() <= P_MAX_SNAP * p_max {
        return simplest_hyper(mu, sigma2);
    }
    let alpha = (p * (1.0 - p) * (cv2 - 1.0) / 2.0).sqrt();
    let x1 = mu * (1.0 + alpha / p);
    let x2 = mu * (1.0 - alpha / (1.0 - p));
    let second = if x2 > 0.0 {
        Branch::new(1.0 - p, vec![1.0 / x2])
    } else {
        Branch::instantaneous(1.0 - p)
    };
    let model = GeneralizedCoxModel::new(vec![Branch::new(p, vec![1.0 / x1]), second])?;
    Ok(FitResult::new(
        model,
        Family::HyperFamily,
        MomentSummary::from_mean_variance(mu, sigma2)?,
        Some(alpha),
    ))
}

/// Minimal-state fit: exponential at `σ² = μ²`, almost-Erlang below,
/// simplest hyperexponential above. Zero variance is rejected.
pub fn fit_two_moments(mu: f64, sigma2: f64) -> Result<FitResult> {
    check_positive("mean", mu)?;
    if sigma2 == 0.0 {
        return Err(Error::DeterministicUnrepresentable);
    }
    check_positive("variance", sigma2)?;
    let mu2 = mu * mu;
    if sigma2 > mu2 {
        simplest_hyper(mu, sigma2)
    } else if sigma2 == mu2 || chain_length(mu, sigma2) == 1 {
        let model = GeneralizedCoxModel::exponential(1.0 / mu)?;
        Ok(FitResult::new(
            model,
            Family::Exponential,
            MomentSummary::from_mean_variance(mu, sigma2)?,
            None,
        ))
    } else {
        almost_erlang(mu, sigma2)
    }
}

/// Erlang-`stages` with the given mean; an explicit approximation for
/// deterministic delays.
pub fn approximate_deterministic(mu: f64, stages: usize) -> Result<FitResult> {
    check_positive("mean", mu)?;
    if stages == 0 {
        return Err(Error::DomainError("stage count must be >= 1".into()));
    }
    let model = GeneralizedCoxModel::erlang(stages, stages as f64 / mu)?;
    let target = MomentSummary::from_mean_variance(mu, 0.0)?;
    Ok(FitResult::new(model, Family::Erlang, target, Some(0.0)))
}

/// Sauer-Chandy hyperexponential: stage means `μ/(2p)` and `μ/(2(1-p))`
/// with `p = (Cv²+1 - √(Cv⁴-1)) / (2(Cv²+1))`. Uses two stages where one
/// would do.
pub fn sauer_chandy(mu: f64, sigma2: f64) -> Result<FitResult> {
    check_positive("mean", mu)?;
    check_positive("variance", sigma2)?;
    if sigma2 <= mu * mu {
        return Err(Error::DomainError(format!(
            "Sauer-Chandy hyperexponential needs variance > mean² (got variance {sigma2}, mean² {})",
            mu * mu
        )));
    }
    let cv2 = sigma2 / (mu * mu);
    let p = (cv2 + 1.0 - (cv2 * cv2 - 1.0).sqrt()) / (2.0 * (cv2 + 1.0));
    let x1 = mu / (2.0 * p);
    let x2 = mu / (2.0 * (1.0 - p));
    let model = GeneralizedCoxModel::new(vec![
        Branch::new(p, vec![1.0 / x1]),
        Branch::new(1.0 - p, vec![1.0 / x2]),
    ])?;
    Ok(FitResult::new(
        model,
        Family::SauerChandy,
        MomentSummary::from_mean_variance(mu, sigma2)?,
        None,
    ))
}

/// Sample mean and unbiased sample variance.
pub fn sample_stats(data: &[f64]) -> Result<MomentSummary> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if let Some(&x) = data.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::NegativeObservation(x));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss: f64 = data.iter().map(|x| (x - mean) * (x - mean)).sum();
    MomentSummary::from_mean_variance(mean, ss / (n - 1.0))
}

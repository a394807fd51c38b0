//! Exact analytic quantities of a generalized Cox model: transform, moments,
//! density and distribution function, and the minimum attainable second
//! moment for a given routing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{GeneralizedCoxModel, PhaseTypeRep, INPUT_PROB_TOLERANCE};

/// Minimum allowed `|s + λ|` when evaluating the transform.
pub const POLE_TOLERANCE: f64 = 1e-14;

/// Relative Poisson tail at which the uniformization series is truncated.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

/// First two moments plus derived quantities, optionally with higher raw
/// moments (`higher[0]` is the third moment).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
    /// Squared coefficient of variation; NaN when the mean is zero.
    pub cv2: f64,
    pub higher: Vec<f64>,
}

impl MomentSummary {
    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::DomainError(format!("mean {mean} must be >= 0")));
        }
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::DomainError(format!(
                "variance {variance} must be >= 0"
            )));
        }
        let cv2 = if mean > 0.0 {
            variance / (mean * mean)
        } else {
            f64::NAN
        };
        Ok(Self {
            mean,
            variance,
            second_moment: mean * mean + variance,
            cv2,
            higher: Vec::new(),
        })
    }
}

/// `Σ_j p_j Π_k λ_jk / (s + λ_jk)`; instantaneous branches contribute `p_j`.
///
/// Defined everywhere except on the poles `s = -λ_jk`, so finite-difference
/// probes slightly left of the origin are allowed.
pub fn laplace(model: &GeneralizedCoxModel, s: Complex64) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for b in model.branches() {
        let mut term = Complex64::new(b.prob, 0.0);
        for &rate in &b.rates {
            let denom = s + rate;
            if denom.norm() < POLE_TOLERANCE {
                return Err(Error::PoleEvaluation(rate));
            }
            term *= rate / denom;
        }
        total += term;
    }
    Ok(total)
}

pub fn laplace_real(model: &GeneralizedCoxModel, s: f64) -> Result<f64> {
    laplace(model, Complex64::new(s, 0.0)).map(|z| z.re)
}

fn branch_sums(model: &GeneralizedCoxModel) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    model.branches().iter().map(|b| {
        let (sum, sum_sq) = b
            .stage_means()
            .fold((0.0, 0.0), |(s, q), x| (s + x, q + x * x));
        (b.prob, sum, sum_sq)
    })
}

pub fn mean(model: &GeneralizedCoxModel) -> f64 {
    branch_sums(model).map(|(p, m, _)| p * m).sum()
}

pub fn second_moment(model: &GeneralizedCoxModel) -> f64 {
    branch_sums(model).map(|(p, m, v)| p * (m * m + v)).sum()
}

/// Within-branch plus between-branch variance; avoids the cancellation in
/// `E[T²] - E[T]²` for low-variability models.
pub fn variance(model: &GeneralizedCoxModel) -> f64 {
    let mu = mean(model);
    branch_sums(model)
        .map(|(p, m, v)| p * (v + (m - mu) * (m - mu)))
        .sum()
}

pub fn summary(model: &GeneralizedCoxModel) -> MomentSummary {
    let mean = mean(model);
    let variance = variance(model);
    MomentSummary {
        mean,
        variance,
        second_moment: second_moment(model),
        cv2: if mean > 0.0 {
            variance / (mean * mean)
        } else {
            f64::NAN
        },
        higher: Vec::new(),
    }
}

/// [`summary`] with raw moments `3..=max_k` filled into `higher`.
pub fn summary_with_higher(model: &GeneralizedCoxModel, max_k: u32) -> Result<MomentSummary> {
    let mut s = summary(model);
    let rep = model.to_phase_type();
    for k in 3..=max_k {
        s.higher.push(phase_type_moment(&rep, k)?);
    }
    Ok(s)
}

/// `k`-th raw moment `k! α (-S)^{-k} 1`.
pub fn moment_k(model: &GeneralizedCoxModel, k: u32) -> Result<f64> {
    phase_type_moment(&model.to_phase_type(), k)
}

pub fn phase_type_moment(rep: &PhaseTypeRep, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::DomainError("moment order must be >= 1".into()));
    }
    if !rep.diag().iter().all(|d| *d < 0.0) {
        return Err(Error::SingularSubgenerator);
    }
    let mut v = vec![1.0; rep.dim()];
    let mut factorial = 1.0;
    for i in 1..=k {
        v = rep.solve_neg_subgen(&v);
        factorial *= f64::from(i);
    }
    let dot: f64 = rep.alpha().iter().zip(&v).map(|(a, x)| a * x).sum();
    Ok(factorial * dot)
}

/// Distribution function at `t`, split so the jump at zero stays visible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    /// `P[T <= t]`, including the atom.
    pub total: f64,
    /// Mass of the atom at zero.
    pub atom0: f64,
}

impl CdfValue {
    /// Probability accumulated by the continuous part up to `t`.
    pub fn continuous(&self) -> f64 {
        self.total - self.atom0
    }
}

/// Density of the continuous part, `α exp(S t) s`.
pub fn pdf(model: &GeneralizedCoxModel, t: f64) -> Result<f64> {
    Ok(TransientEvaluator::new(model.to_phase_type()).eval(t)?.0)
}

pub fn cdf(model: &GeneralizedCoxModel, t: f64) -> Result<CdfValue> {
    TransientEvaluator::new(model.to_phase_type()).cdf(t)
}

/// Evaluates `α exp(S t)` against the exit vector and the all-ones vector by
/// uniformization. Build once and reuse for many time points.
#[derive(Debug, Clone)]
pub struct TransientEvaluator {
    rep: PhaseTypeRep,
    exit: Vec<f64>,
    q: f64,
}

impl TransientEvaluator {
    pub fn new(rep: PhaseTypeRep) -> Self {
        let exit = rep.exit_rates();
        let q = rep.diag().iter().fold(0.0_f64, |acc, d| acc.max(-d));
        Self { rep, exit, q }
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0)
    }

    pub fn cdf(&self, t: f64) -> Result<CdfValue> {
        let (_, survival) = self.eval(t)?;
        Ok(CdfValue {
            total: (1.0 - survival).clamp(0.0, 1.0),
            atom0: self.rep.atom0(),
        })
    }

    /// Returns `(density, survival)` of the continuous part.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let n = self.rep.dim();
        if n == 0 {
            return Ok((0.0, 0.0));
        }
        let qt = self.q * t;
        let mut row = self.rep.alpha().to_vec();
        let mut next = vec![0.0; n];
        let mut density = 0.0;
        let mut survival = 0.0;
        let mut log_w = -qt;
        let ln_qt = qt.ln();
        let mut k = 0usize;
        loop {
            let w = log_w.exp();
            if w > 0.0 {
                density += w * dot(&row, &self.exit);
                survival += w * row.iter().sum::<f64>();
            }
            // Poisson tail beyond k is bounded by a geometric series with
            // ratio qt/(k+2) once k+2 > qt.
            let ratio = qt / (k as f64 + 2.0);
            if ratio < 1.0 && w * ratio / (1.0 - ratio) <= UNIFORMIZATION_TAIL {
                break;
            }
            if qt == 0.0 {
                break;
            }
            self.rep.uniformized_step(self.q, &row, &mut next);
            std::mem::swap(&mut row, &mut next);
            k += 1;
            log_w += ln_qt - (k as f64).ln();
        }
        Ok((density, survival))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum of `E[T²]` over stage means for fixed routing probabilities and
/// branch lengths, at fixed mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MinSecondMomentReport {
    /// `E[T²]_min / μ²`.
    pub ratio_min: f64,
    /// Optimal stage means per branch; equal within a branch.
    pub optimal_x: Vec<Vec<f64>>,
    /// `1 + 1/L_{j*}`.
    pub lower_bound: f64,
    /// Index of the longest branch (lowest index on ties).
    pub jstar: usize,
    /// Lagrange multiplier of the mean constraint.
    pub gamma: f64,
}

/// Closed-form minimum second moment.
///
/// The Lagrange conditions give `x_jk = γ / (2(1 + L_j))` with
/// `γ = 2μ / Σ_j p_j L_j/(1+L_j)`, so `E[T²]_min/μ² = 1 / Σ_j p_j L_j/(1+L_j)`.
/// Branches of length zero (instantaneous) are accepted and contribute
/// nothing to the sum.
pub fn min_second_moment(
    probs: &[f64],
    lengths: &[usize],
    mu: f64,
) -> Result<MinSecondMomentReport> {
    if probs.is_empty() {
        return Err(Error::EmptyModel);
    }
    if probs.len() != lengths.len() {
        return Err(Error::UnsupportedShape(format!(
            "{} probabilities for {} branches",
            probs.len(),
            lengths.len()
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::NonPositiveInput {
            name: "mu",
            value: mu,
        });
    }
    if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidProbability(p));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > INPUT_PROB_TOLERANCE {
        return Err(Error::ProbSumInvalid { sum });
    }
    let frac = |l: usize| l as f64 / (1.0 + l as f64);
    let weight: f64 = probs.iter().zip(lengths).map(|(p, &l)| p * frac(l)).sum();
    if weight <= 0.0 {
        return Err(Error::DegenerateProbs);
    }
    let gamma = 2.0 * mu / weight;
    let optimal_x = lengths
        .iter()
        .map(|&l| vec![gamma / (2.0 * (1.0 + l as f64)); l])
        .collect();
    let mut jstar = 0;
    for (j, &l) in lengths.iter().enumerate() {
        if l > lengths[jstar] {
            jstar = j;
        }
    }
    Ok(MinSecondMomentReport {
        ratio_min: 1.0 / weight,
        optimal_x,
        lower_bound: 1.0 + 1.0 / lengths[jstar] as f64,
        jstar,
        gamma,
    })
}

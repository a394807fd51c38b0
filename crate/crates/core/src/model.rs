//! Generalized Cox distributions: parallel branches chosen at random, each a
//! series of exponential stages.
//!
//! A [`GeneralizedCoxModel`] is the canonical description. It converts to the
//! matrix form [`PhaseTypeRep`] for analytic work, and classical Cox
//! specifications (serial stages with abandonment) are rewritten into it via
//! [`GeneralizedCoxModel::from_classical_cox`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of the input probability sum from 1.
pub const INPUT_PROB_TOLERANCE: f64 = 1e-9;

/// Stored invariant on the probability sum after normalization.
pub const STORED_PROB_TOLERANCE: f64 = 1e-12;

/// One routing branch: selected with probability `prob`, then traverses its
/// stages in order. An empty `rates` list is an instantaneous branch (a point
/// mass at zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub prob: f64,
    pub rates: Vec<f64>,
}

impl Branch {
    pub fn new(prob: f64, rates: Vec<f64>) -> Self {
        Self { prob, rates }
    }

    pub fn instantaneous(prob: f64) -> Self {
        Self {
            prob,
            rates: Vec::new(),
        }
    }

    pub fn is_instantaneous(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Stage means `1/λ`, in stage order.
    pub fn stage_means(&self) -> impl Iterator<Item = f64> + '_ {
        self.rates.iter().map(|r| 1.0 / r)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::InvalidProbability(self.prob));
        }
        for &r in &self.rates {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::NonPositiveRate(r));
            }
        }
        Ok(())
    }
}

/// A validated generalized Cox distribution.
///
/// Branch order is preserved and equality is structural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct GeneralizedCoxModel {
    branches: Vec<Branch>,
}

#[derive(Deserialize)]
struct RawModel {
    branches: Vec<Branch>,
}

impl TryFrom<RawModel> for GeneralizedCoxModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        Self::new(raw.branches)
    }
}

impl GeneralizedCoxModel {
    /// Validates the branches. Probabilities within `1e-9` of summing to one
    /// are renormalized; anything further off is rejected.
    pub fn new(mut branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::EmptyModel);
        }
        for b in &branches {
            b.validate()?;
        }
        let sum: f64 = branches.iter().map(|b| b.prob).sum();
        if (sum - 1.0).abs() > INPUT_PROB_TOLERANCE {
            return Err(Error::ProbSumInvalid { sum });
        }
        if sum != 1.0 {
            for b in &mut branches {
                b.prob /= sum;
            }
        }
        Ok(Self { branches })
    }

    /// Single exponential stage with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![Branch::new(1.0, vec![rate])])
    }

    /// Single branch of `stages` equal rates.
    pub fn erlang(stages: usize, rate: f64) -> Result<Self> {
        if stages == 0 {
            return Err(Error::UnsupportedShape("Erlang with zero stages".into()));
        }
        Self::new(vec![Branch::new(1.0, vec![rate; stages])])
    }

    /// Rewrites a classical Cox distribution as routed branches: branch `j`
    /// runs stages `1..=j` and is chosen with probability
    /// `q_j = p_j Π_{k<j} (1 - p_k)`, with `p_N = 1`.
    pub fn from_classical_cox(spec: &ClassicalCoxSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.rates.len();
        let mut branches = Vec::with_capacity(n + 1);
        let mut remaining = 1.0;
        for j in 0..n {
            let p = spec.abandon_probs[j];
            branches.push(Branch::new(p * remaining, spec.rates[..j].to_vec()));
            remaining *= 1.0 - p;
        }
        branches.push(Branch::new(remaining, spec.rates.clone()));
        Self::new(branches)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Probability mass at zero (sum over instantaneous branches).
    pub fn atom0(&self) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.is_instantaneous())
            .map(|b| b.prob)
            .fold(0.0, |acc, p| acc + p)
    }

    /// Total number of exponential stages across all branches.
    pub fn n_transient(&self) -> usize {
        self.branches.iter().map(Branch::len).sum()
    }

    pub fn max_rate(&self) -> Option<f64> {
        self.branches
            .iter()
            .flat_map(|b| b.rates.iter().copied())
            .reduce(f64::max)
    }

    /// Same topology with every stage mean multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .map(|b| Branch::new(b.prob, b.rates.iter().map(|r| r / factor).collect()))
            .collect();
        Self::new(branches)
    }

    /// Exact phase-type form: routing is folded into the initial vector and
    /// instantaneous branches into the atom at zero.
    pub fn to_phase_type(&self) -> PhaseTypeRep {
        let n = self.n_transient();
        let mut alpha = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut superdiag = vec![0.0; n];
        let mut atom0 = 0.0;
        let mut idx = 0;
        for b in &self.branches {
            if b.is_instantaneous() {
                atom0 += b.prob;
                continue;
            }
            alpha[idx] = b.prob;
            for (k, &rate) in b.rates.iter().enumerate() {
                diag[idx + k] = -rate;
                if k + 1 < b.rates.len() {
                    superdiag[idx + k] = rate;
                }
            }
            idx += b.rates.len();
        }
        PhaseTypeRep {
            atom0,
            alpha,
            diag,
            superdiag,
        }
    }

    /// Decides whether this two-state hyperexponential is reproduced by a
    /// two-stage classical Cox distribution whose stage rates follow branch
    /// order (first branch rate is the first Cox stage).
    ///
    /// Matching the transforms requires `q_1 λ_1 = p_1 λ_1 + p_2 λ_2`, so the
    /// model is Cox-representable in this layout iff
    /// `p_1 + p_2 λ_2 / λ_1 <= 1`.
    pub fn cox_routing_feasible(&self) -> Result<RoutingFeasibility> {
        let [b1, b2] = self.branches.as_slice() else {
            return Err(Error::UnsupportedShape(format!(
                "routing feasibility needs exactly 2 branches, got {}",
                self.branches.len()
            )));
        };
        if b1.len() != 1 || b2.len() != 1 {
            return Err(Error::UnsupportedShape(
                "routing feasibility needs single-stage branches".into(),
            ));
        }
        let (l1, l2) = (b1.rates[0], b2.rates[0]);
        let q1 = b1.prob + b2.prob * l2 / l1;
        if q1 <= 1.0 + STORED_PROB_TOLERANCE {
            let q1 = q1.min(1.0);
            Ok(RoutingFeasibility::Feasible {
                q1,
                q2: 1.0 - q1,
                classical: ClassicalCoxSpec::new(vec![0.0, q1], vec![l1, l2])?,
            })
        } else {
            Ok(RoutingFeasibility::Infeasible { required_q1: q1 })
        }
    }

    /// Canonical JSON: `{"branches":[{"prob":..,"rates":[..]},..]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Outcome of [`GeneralizedCoxModel::cox_routing_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub enum RoutingFeasibility {
    /// `classical` is the equivalent two-stage Cox specification.
    Feasible {
        q1: f64,
        q2: f64,
        classical: ClassicalCoxSpec,
    },
    /// The routing probability that would be needed exceeds one.
    Infeasible { required_q1: f64 },
}

impl RoutingFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }
}

/// Classical Cox distribution: before stage `i+1` the process abandons with
/// probability `abandon_probs[i]`. After the last stage it always leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCoxSpec {
    pub abandon_probs: Vec<f64>,
    pub rates: Vec<f64>,
}

impl ClassicalCoxSpec {
    pub fn new(abandon_probs: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let spec = Self {
            abandon_probs,
            rates,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::EmptyModel);
        }
        if self.abandon_probs.len() != self.rates.len() {
            return Err(Error::UnsupportedShape(format!(
                "{} abandonment probabilities for {} stages",
                self.abandon_probs.len(),
                self.rates.len()
            )));
        }
        if let Some(&p) = self
            .abandon_probs
            .iter()
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidProbability(p));
        }
        if let Some(&r) = self.rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::NonPositiveRate(r));
        }
        Ok(())
    }
}

/// Phase-type representation `(atom0, alpha, S)` of a generalized Cox model.
///
/// The subgenerator is block-bidiagonal: each branch is a chain whose only
/// off-diagonal entries sit on the superdiagonal. Only the diagonal and
/// superdiagonal are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeRep {
    atom0: f64,
    alpha: Vec<f64>,
    diag: Vec<f64>,
    superdiag: Vec<f64>,
}

impl PhaseTypeRep {
    pub fn atom0(&self) -> f64 {
        self.atom0
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Diagonal of the subgenerator (negated total outflow rates).
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `superdiag[i]` is the rate from state `i` to `i + 1` (zero at branch ends).
    pub fn superdiag(&self) -> &[f64] {
        &self.superdiag
    }

    /// Dense subgenerator matrix.
    pub fn subgen(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.superdiag[i]
            } else {
                0.0
            }
        })
    }

    /// Exit rates to absorption, `-S 1`.
    pub fn exit_rates(&self) -> Vec<f64> {
        self.diag
            .iter()
            .zip(&self.superdiag)
            .map(|(d, s)| -d - s)
            .collect()
    }

    /// Solves `(-S) x = b` by back substitution along each chain.
    pub(crate) fn solve_neg_subgen(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let next = if i + 1 < n {
                self.superdiag[i] * x[i + 1]
            } else {
                0.0
            };
            x[i] = (b[i] + next) / -self.diag[i];
        }
        x
    }

    /// Row vector times the uniformized transition matrix `I + S/q`.
    pub(crate) fn uniformized_step(&self, q: f64, row: &[f64], out: &mut [f64]) {
        for i in 0..row.len() {
            let mut v = row[i] * (1.0 + self.diag[i] / q);
            if i > 0 {
                v += row[i - 1] * self.superdiag[i - 1] / q;
            }
            out[i] = v;
        }
    }
}

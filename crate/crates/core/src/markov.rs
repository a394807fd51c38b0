//! Absorbing continuous-time Markov chains built from generalized Cox models.
//!
//! The exact export folds routing into the initial distribution. The
//! approximate export adds an activation state `I` that routes to each branch
//! at rate `p_j Λ` for a large `Λ`; its absorption time is the exact one plus
//! an independent `Exp(Λ)` sojourn, so the mean is biased by exactly `1/Λ`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GeneralizedCoxModel;

/// Default routing rate multiplier applied to the largest stage rate.
pub const DEFAULT_BIG_LAMBDA_FACTOR: f64 = 1e4;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCtmc")]
pub struct CtmcExport {
    pub labels: Vec<String>,
    pub generator: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    #[serde(rename = "absorbing")]
    pub absorbing_index: usize,
}

#[derive(Deserialize)]
struct RawCtmc {
    labels: Vec<String>,
    generator: Vec<Vec<f64>>,
    initial: Vec<f64>,
    absorbing: usize,
}

impl TryFrom<RawCtmc> for CtmcExport {
    type Error = Error;

    fn try_from(raw: RawCtmc) -> Result<Self> {
        let c = CtmcExport {
            labels: raw.labels,
            generator: raw.generator,
            initial: raw.initial,
            absorbing_index: raw.absorbing,
        };
        c.validate()?;
        Ok(c)
    }
}

fn stage_label(branch: usize, stage: usize) -> String {
    format!("B{}.S{}", branch + 1, stage + 1)
}

/// States in order `[I?], B1.S1, .., Bm.SLm, E`; returns labels, the index of
/// each branch's first state (None for instantaneous branches) and a filled
/// generator over stage transitions.
fn chain_skeleton(
    model: &GeneralizedCoxModel,
    offset: usize,
) -> (Vec<String>, Vec<Option<usize>>, Vec<Vec<f64>>) {
    let n = offset + model.n_transient() + 1;
    let absorbing = n - 1;
    let mut labels = Vec::with_capacity(n);
    if offset == 1 {
        labels.push("I".to_string());
    }
    let mut generator = vec![vec![0.0; n]; n];
    let mut first = Vec::with_capacity(model.branches().len());
    let mut idx = offset;
    for (j, b) in model.branches().iter().enumerate() {
        if b.is_instantaneous() {
            first.push(None);
            continue;
        }
        first.push(Some(idx));
        for (k, &rate) in b.rates.iter().enumerate() {
            labels.push(stage_label(j, k));
            let target = if k + 1 < b.rates.len() {
                idx + 1
            } else {
                absorbing
            };
            generator[idx][target] = rate;
            generator[idx][idx] = -rate;
            idx += 1;
        }
    }
    labels.push("E".to_string());
    (labels, first, generator)
}

/// Exact chain: branch `j`'s first stage starts with mass `p_j`, the atom at
/// zero starts on `E`.
pub fn exact_absorbing_ctmc(model: &GeneralizedCoxModel) -> CtmcExport {
    let (labels, first, generator) = chain_skeleton(model, 0);
    let n = labels.len();
    let mut initial = vec![0.0; n];
    for (b, start) in model.branches().iter().zip(&first) {
        match start {
            Some(i) => initial[*i] += b.prob,
            None => initial[n - 1] += b.prob,
        }
    }
    CtmcExport {
        labels,
        generator,
        initial,
        absorbing_index: n - 1,
    }
}

/// `DEFAULT_BIG_LAMBDA_FACTOR` times the largest stage rate (or times 1 when
/// the model has no stages).
pub fn default_big_lambda(model: &GeneralizedCoxModel) -> f64 {
    DEFAULT_BIG_LAMBDA_FACTOR * model.max_rate().unwrap_or(1.0)
}

/// Chain with an explicit activation state `I` routing at rate `p_j Λ`.
pub fn approx_ctmc(model: &GeneralizedCoxModel, big_lambda: f64) -> Result<CtmcExport> {
    if !(big_lambda > 0.0 && big_lambda.is_finite()) {
        return Err(Error::NonPositiveRate(big_lambda));
    }
    let (labels, first, mut generator) = chain_skeleton(model, 1);
    let n = labels.len();
    let mut out = 0.0;
    for (b, start) in model.branches().iter().zip(&first) {
        let rate = b.prob * big_lambda;
        let target = start.unwrap_or(n - 1);
        generator[0][target] += rate;
        out += rate;
    }
    generator[0][0] = -out;
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    Ok(CtmcExport {
        labels,
        generator,
        initial,
        absorbing_index: n - 1,
    })
}

impl CtmcExport {
    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    /// Checks shape, sign pattern, zero row sums, a single absorbing state and
    /// that the initial vector is a distribution.
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::InvalidCtmc("no states".into()));
        }
        if self.generator.len() != n || self.generator.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCtmc(format!("generator is not {n}x{n}")));
        }
        if self.initial.len() != n {
            return Err(Error::InvalidCtmc("initial vector length mismatch".into()));
        }
        if self.absorbing_index >= n {
            return Err(Error::InvalidCtmc("absorbing index out of range".into()));
        }
        for (i, row) in self.generator.iter().enumerate() {
            let mut scale = 0.0_f64;
            let mut sum = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() || (i != j && q < 0.0) {
                    return Err(Error::InvalidCtmc(format!("bad rate {q} at ({i},{j})")));
                }
                scale = scale.max(q.abs());
                sum += q;
            }
            if sum.abs() > ROW_SUM_TOLERANCE * scale.max(1.0) {
                return Err(Error::InvalidCtmc(format!("row {i} sums to {sum}")));
            }
            let is_zero = scale == 0.0;
            if is_zero != (i == self.absorbing_index) {
                return Err(Error::InvalidCtmc(format!(
                    "state {} must be the only absorbing state",
                    self.labels[self.absorbing_index]
                )));
            }
        }
        if self.initial.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (self.initial.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidCtmc(
                "initial vector is not a distribution".into(),
            ));
        }
        Ok(())
    }

    /// First state from which the absorbing state cannot be reached.
    fn unreachable_state(&self) -> Option<usize> {
        let n = self.n_states();
        let mut reaches = vec![false; n];
        reaches[self.absorbing_index] = true;
        let mut queue = VecDeque::from([self.absorbing_index]);
        while let Some(j) = queue.pop_front() {
            for (i, (row, r)) in self.generator.iter().zip(reaches.iter_mut()).enumerate() {
                if !*r && i != j && row[j] > 0.0 {
                    *r = true;
                    queue.push_back(i);
                }
            }
        }
        reaches.iter().position(|r| !r)
    }

    fn transient_indices(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&i| i != self.absorbing_index)
            .collect()
    }

    /// `k`-th raw moment of the absorption time, `k! β (-T)^{-k} 1` on the
    /// transient block `T`.
    pub fn absorption_time_moment(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::DomainError("moment order must be >= 1".into()));
        }
        self.validate()?;
        if let Some(i) = self.unreachable_state() {
            return Err(Error::ReducibleChain(self.labels[i].clone()));
        }
        let idx = self.transient_indices();
        let m = idx.len();
        let neg_t = DMatrix::from_fn(m, m, |a, b| -self.generator[idx[a]][idx[b]]);
        let beta: Vec<f64> = idx.iter().map(|&i| self.initial[i]).collect();
        let mut v = DVector::from_element(m, 1.0);
        let upper = (0..m).all(|a| (0..a).all(|b| neg_t[(a, b)] == 0.0));
        let lu = if upper {
            None
        } else {
            Some(neg_t.clone().lu())
        };
        let mut factorial = 1.0;
        for i in 1..=k {
            v = match &lu {
                None => back_substitute(&neg_t, &v)?,
                Some(lu) => lu.solve(&v).ok_or(Error::SingularSubgenerator)?,
            };
            factorial *= f64::from(i);
        }
        Ok(factorial * beta.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("CTMC serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Graphviz digraph; edges carry their rates and the absorbing state is
    /// drawn as a double circle.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ctmc {\n  rankdir=LR;\n");
        for (i, label) in self.labels.iter().enumerate() {
            let shape = if i == self.absorbing_index {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = write!(out, "  s{i} [label=\"{label}\", shape={shape}");
            if self.initial[i] > 0.0 {
                let _ = write!(out, ", xlabel=\"{}\"", self.initial[i]);
            }
            out.push_str("];\n");
        }
        for (i, row) in self.generator.iter().enumerate() {
            for (j, &q) in row.iter().enumerate() {
                if i != j && q > 0.0 {
                    let _ = writeln!(out, "  s{i} -> s{j} [label=\"{q}\"];");
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn back_substitute(upper: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let diag = upper[(i, i)];
        if diag == 0.0 {
            return Err(Error::SingularSubgenerator);
        }
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= upper[(i, j)] * x[j];
        }
        x[i] = acc / diag;
    }
    Ok(x)
}

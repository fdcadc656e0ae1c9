use serde::{Deserialize, Serialize};

use crate::error::{BoundError, Result};
use crate::witness::{ExcessLossDistribution, LossAtom, MASS_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: String,
    pub prob: f64,
}

/// A finite learning problem: a law over outcomes `z = (x, y)`, a finite
/// class of hypotheses, and the loss of every hypothesis on every outcome.
///
/// The learner is empirical risk minimization with lowest-index
/// tie-breaking; the best-in-class hypothesis is chosen the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct DiscreteLearningProblem {
    outcomes: Vec<Outcome>,
    hypotheses: Vec<String>,
    loss: Vec<Vec<f64>>,
    risks: Vec<f64>,
    best: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    outcomes: Vec<Outcome>,
    hypotheses: Vec<String>,
    loss: Vec<Vec<f64>>,
}

impl TryFrom<RawProblem> for DiscreteLearningProblem {
    type Error = BoundError;

    fn try_from(raw: RawProblem) -> Result<Self> {
        DiscreteLearningProblem::new(raw.outcomes, raw.hypotheses, raw.loss)
    }
}

impl From<DiscreteLearningProblem> for RawProblem {
    fn from(p: DiscreteLearningProblem) -> Self {
        RawProblem {
            outcomes: p.outcomes,
            hypotheses: p.hypotheses,
            loss: p.loss,
        }
    }
}

impl DiscreteLearningProblem {
    pub fn new(
        outcomes: Vec<Outcome>,
        hypotheses: Vec<String>,
        loss: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let bad = |m: String| Err(BoundError::InvalidProblem(m));
        if outcomes.is_empty() {
            return bad("no outcomes".into());
        }
        if hypotheses.is_empty() {
            return bad("empty hypothesis class".into());
        }
        if let Some(o) = outcomes.iter().find(|o| !(0.0..=1.0).contains(&o.prob)) {
            return bad(format!("outcome `{}` has probability {}", o.label, o.prob));
        }
        let mass: f64 = outcomes.iter().map(|o| o.prob).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return bad(format!("outcome probabilities sum to {mass}"));
        }
        if loss.len() != hypotheses.len() {
            return bad(format!(
                "loss table has {} rows for {} hypotheses",
                loss.len(),
                hypotheses.len()
            ));
        }
        for (h, row) in loss.iter().enumerate() {
            if row.len() != outcomes.len() {
                return bad(format!(
                    "loss row {h} has {} entries, expected {}",
                    row.len(),
                    outcomes.len()
                ));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return bad(format!("loss row {h} contains non-finite value {v}"));
            }
        }

        let risks: Vec<f64> = loss
            .iter()
            .map(|row| row.iter().zip(&outcomes).map(|(l, o)| l * o.prob).sum())
            .collect();
        let best = argmin_first(&risks);
        Ok(DiscreteLearningProblem {
            outcomes,
            hypotheses,
            loss,
            risks,
            best,
        })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn hypotheses(&self) -> &[String] {
        &self.hypotheses
    }

    pub fn loss(&self) -> &[Vec<f64>] {
        &self.loss
    }

    /// `R(h)` for every hypothesis.
    pub fn risks(&self) -> &[f64] {
        &self.risks
    }

    /// Index of the risk minimizer.
    pub fn best(&self) -> usize {
        self.best
    }

    /// `R(h) - R(f*)`.
    pub fn excess_risk(&self, h: usize) -> f64 {
        let x = self.risks[h] - self.risks[self.best];
        assert!(x >= -1e-12, "negative excess risk {x} for hypothesis {h}");
        x
    }

    /// ERM on a sample summarized by per-outcome counts.
    pub fn erm(&self, counts: &[u64]) -> usize {
        let empirical: Vec<f64> = self
            .loss
            .iter()
            .map(|row| row.iter().zip(counts).map(|(l, &c)| l * c as f64).sum())
            .collect();
        argmin_first(&empirical)
    }

    /// Pointwise excess loss of `h`: `loss[h][z] - loss[f*][z]` per outcome.
    pub fn excess_losses(&self, h: usize) -> Vec<f64> {
        self.loss[h]
            .iter()
            .zip(&self.loss[self.best])
            .map(|(a, b)| a - b)
            .collect()
    }

    /// The law of the pointwise excess loss of every hypothesis.
    pub fn excess_loss_distributions(&self) -> Vec<ExcessLossDistribution> {
        (0..self.hypotheses.len())
            .map(|h| {
                let mut atoms: Vec<LossAtom> = Vec::new();
                for (value, o) in self.excess_losses(h).into_iter().zip(&self.outcomes) {
                    match atoms.iter_mut().find(|a| (a.value - value).abs() <= 1e-12) {
                        Some(a) => a.prob += o.prob,
                        None => atoms.push(LossAtom {
                            value,
                            prob: o.prob,
                        }),
                    }
                }
                ExcessLossDistribution::new(atoms).expect("excess loss of a valid problem")
            })
            .collect()
    }
}

/// Index of the smallest value, lowest index on exact ties.
fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

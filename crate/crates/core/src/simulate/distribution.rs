use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{check_delta, check_n, BoundError, Result};
use crate::parallel::{self, Execution};

use super::problem::DiscreteLearningProblem;
use super::rng::replication_stream;

/// Largest number of count vectors the exact enumeration will visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;
/// Excess-risk values closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingMode {
    Exact,
    MonteCarlo { replications: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAtom {
    pub value: f64,
    pub prob: f64,
}

/// Law of the excess risk `X_{f_n}` of the ERM predictor over the draw of
/// the `n`-sample, exact or estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessRiskDistribution {
    pub n: u64,
    pub mode: SamplingMode,
    /// Sorted by value, zero-probability values dropped.
    pub atoms: Vec<RiskAtom>,
    /// Probability that ERM returns each hypothesis.
    pub selection: Vec<f64>,
}

impl ExcessRiskDistribution {
    pub fn expectation(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    /// `P(X > eps)`.
    pub fn tail(&self, eps: f64) -> f64 {
        self.atoms
            .iter()
            .rev()
            .take_while(|a| a.value > eps)
            .fold(0.0, |s, a| s + a.prob)
    }

    /// Smallest `eps` with `P(X > eps) <= delta`, i.e. the left-continuous
    /// `(1 - delta)`-quantile. Always one of the atom values.
    pub fn epsilon_hat(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        // tail beyond atom j, accumulated from the top
        let mut tail = 0.0;
        let mut answer = self.atoms.last().map(|a| a.value).unwrap_or(0.0);
        for j in (1..self.atoms.len()).rev() {
            tail += self.atoms[j].prob;
            if tail <= delta {
                answer = self.atoms[j - 1].value;
            } else {
                break;
            }
        }
        Ok(answer)
    }
}

/// One point of the empirical high-probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpPoint {
    pub delta: f64,
    pub epsilon: f64,
}

/// `eps_hat(delta)` for every grid point.
pub fn empirical_hp_curve(d: &ExcessRiskDistribution, delta_grid: &[f64]) -> Result<Vec<HpPoint>> {
    if delta_grid.is_empty() {
        return Err(BoundError::Empty("delta grid"));
    }
    delta_grid
        .iter()
        .map(|&delta| {
            Ok(HpPoint {
                delta,
                epsilon: d.epsilon_hat(delta)?,
            })
        })
        .collect()
}

/// Number of count vectors of `n` draws over `k` outcomes, `C(n+k-1, k-1)`,
/// saturating once it passes `cap`.
pub fn composition_count(n: u64, k: usize, cap: u128) -> u128 {
    let n = n as u128;
    let r = (k as u128).saturating_sub(1);
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc = C(n + i, i), exact at every step
        acc = acc * (n + i) / i;
        if acc > cap {
            return cap + 1;
        }
    }
    acc
}

/// Exact law of `X_{f_n}` by enumerating multinomial count vectors.
pub fn exact_excess_risk_distribution(
    p: &DiscreteLearningProblem,
    n: u64,
) -> Result<ExcessRiskDistribution> {
    exact_excess_risk_distribution_with(p, n, Execution::default())
}

pub fn exact_excess_risk_distribution_with(
    p: &DiscreteLearningProblem,
    n: u64,
    exec: Execution,
) -> Result<ExcessRiskDistribution> {
    check_n(n)?;
    let k = p.outcomes().len();
    let compositions = composition_count(n, k, ENUMERATION_BUDGET);
    if compositions > ENUMERATION_BUDGET {
        return Err(BoundError::EnumerationBudget {
            compositions,
            budget: ENUMERATION_BUDGET,
        });
    }

    let ln_probs: Vec<f64> = p.outcomes().iter().map(|o| o.prob.ln()).collect();
    let ln_fact: Vec<f64> = (0..=n).map(ln_factorial).collect();
    let hypotheses = p.hypotheses().len();

    // split on the count of the first outcome; each slice is summed in a
    // fixed order and the slices are combined in index order
    let slices = parallel::map_range(exec, 0..n + 1, |first| {
        let mut selection = vec![0.0; hypotheses];
        if k == 1 && first != n {
            return selection;
        }
        let mut counts = vec![0u64; k];
        counts[0] = first;
        for_each_composition(&mut counts, 1, n - first, &mut |counts| {
            let mut ln_w = ln_fact[n as usize];
            for (z, &c) in counts.iter().enumerate() {
                if c > 0 {
                    ln_w += c as f64 * ln_probs[z] - ln_fact[c as usize];
                }
            }
            if ln_w > f64::NEG_INFINITY {
                selection[p.erm(counts)] += ln_w.exp();
            }
        });
        selection
    });
    let mut selection = vec![0.0; hypotheses];
    for slice in slices {
        selection.iter_mut().zip(slice).for_each(|(s, v)| *s += v);
    }

    Ok(ExcessRiskDistribution {
        n,
        mode: SamplingMode::Exact,
        atoms: merge_atoms(p, &selection),
        selection,
    })
}

fn for_each_composition<F: FnMut(&[u64])>(
    counts: &mut [u64],
    bin: usize,
    remaining: u64,
    f: &mut F,
) {
    if bin >= counts.len() {
        if remaining == 0 {
            f(counts);
        }
        return;
    }
    if bin == counts.len() - 1 {
        counts[bin] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[bin] = c;
        for_each_composition(counts, bin + 1, remaining - c, f);
    }
    counts[bin] = 0;
}

/// Groups per-hypothesis weights by excess risk; zero weights are dropped.
fn merge_atoms(p: &DiscreteLearningProblem, weights: &[f64]) -> Vec<RiskAtom> {
    let mut entries: Vec<(f64, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(h, &w)| (p.excess_risk(h), w))
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<RiskAtom> = Vec::new();
    for (value, prob) in entries {
        match atoms.last_mut() {
            Some(last) if value - last.value <= MERGE_TOL => last.prob += prob,
            _ => atoms.push(RiskAtom { value, prob }),
        }
    }
    atoms
}

/// Monte Carlo estimate of the law of `X_{f_n}` from `replications`
/// independent training samples. Replication `i` draws from its own stream
/// derived from `(seed, i)`, so the result is independent of scheduling.
pub fn mc_excess_risk_distribution(
    p: &DiscreteLearningProblem,
    n: u64,
    replications: u64,
    seed: u64,
) -> Result<ExcessRiskDistribution> {
    mc_excess_risk_distribution_with(p, n, replications, seed, Execution::default())
}

pub fn mc_excess_risk_distribution_with(
    p: &DiscreteLearningProblem,
    n: u64,
    replications: u64,
    seed: u64,
    exec: Execution,
) -> Result<ExcessRiskDistribution> {
    check_n(n)?;
    if replications == 0 {
        return Err(BoundError::InvalidParameter {
            name: "replications",
            value: 0.0,
            reason: "at least one replication is required",
        });
    }
    let k = p.outcomes().len();
    let index = WeightedIndex::new(p.outcomes().iter().map(|o| o.prob))
        .map_err(|e| BoundError::InvalidProblem(e.to_string()))?;

    let picks = parallel::tally(
        exec,
        0..replications,
        p.hypotheses().len(),
        || vec![0u64; k],
        |counts, i| {
            counts.fill(0);
            let mut rng = replication_stream(seed, i);
            for _ in 0..n {
                counts[index.sample(&mut rng)] += 1;
            }
            p.erm(counts)
        },
    );

    let m = replications as f64;
    let selection: Vec<f64> = picks.iter().map(|&c| c as f64 / m).collect();
    // merge on integer counts, then divide once
    let totals: Vec<f64> = picks.iter().map(|&c| c as f64).collect();
    let mut atoms = merge_atoms(p, &totals);
    for a in &mut atoms {
        a.prob /= m;
    }
    Ok(ExcessRiskDistribution {
        n,
        mode: SamplingMode::MonteCarlo { replications, seed },
        atoms,
        selection,
    })
}

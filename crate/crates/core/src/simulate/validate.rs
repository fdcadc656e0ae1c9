//! End-to-end checks of the analytic transforms on discrete problems.

use serde::{Deserialize, Serialize};

use crate::error::{BoundError, Result};
use crate::guarantee::WitnessParams;
use crate::markov::{check_tail, PhiTransform, TailCheck};
use crate::parallel::Execution;
use crate::transform::witness_bound;
use crate::witness::{min_c_over_class, ClassWitness};

use super::distribution::{
    empirical_hp_curve, exact_excess_risk_distribution_with, mc_excess_risk_distribution_with,
    ExcessRiskDistribution, HpPoint, SamplingMode, MERGE_TOL,
};
use super::problem::DiscreteLearningProblem;

/// Absolute slack for comparisons that hold exactly in real arithmetic.
pub const CHAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The witness premise failed, nothing was asserted.
    Skipped,
}

/// Whether the class satisfies the witness condition at the requested `(u, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    pub holds: bool,
    pub class: ClassWitness,
}

/// The six intermediate expressions bounding `E[X_{f_n}]`, evaluated on
/// the joint law of the training sample and a fresh outcome. `u` is the
/// enlarged threshold `max(u, eps)` and `W_h = E_z[L_h 1(L_h <= u)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainValues {
    /// `E_n[E_z L_{f_n}]`
    pub mean_excess_loss: f64,
    /// `(1/c) E_n[W_{f_n}]`
    pub witnessed: f64,
    /// `(1/c) E_n[W_{f_n} (1(X > eps) + 1(X <= eps))]`
    pub witnessed_split: f64,
    /// `(1/c) (E_n[W 1(X > eps)] + E_n[W 1(X <= eps)])`
    pub witnessed_split_sum: f64,
    /// `(1/c) (E_n[u 1(X > eps)] + E_n[X 1(X <= eps)])`
    pub capped: f64,
    /// `(1/c) (u P(X > eps) + eps (1 - P(X > eps)))`
    pub tail_mixture: f64,
}

impl ChainValues {
    /// Checks every link, from `E[X]` down to the final bound.
    pub fn is_ordered(&self, expectation: f64, closing: f64, bound: f64) -> bool {
        let eq = |a: f64, b: f64| (a - b).abs() <= CHAIN_SLACK;
        let le = |a: f64, b: f64| a <= b + CHAIN_SLACK;
        eq(expectation, self.mean_excess_loss)
            && le(self.mean_excess_loss, self.witnessed)
            && eq(self.witnessed, self.witnessed_split)
            && eq(self.witnessed_split, self.witnessed_split_sum)
            && le(self.witnessed_split_sum, self.capped)
            && le(self.capped, self.tail_mixture)
            && eq(self.tail_mixture, closing)
            && le(closing, bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub delta: f64,
    pub epsilon_hat: f64,
    /// `P(X > eps_hat)`, never above `delta`.
    pub tail_probability: f64,
    pub effective_u: f64,
    pub bound: f64,
    pub expectation: f64,
    pub verdict: Verdict,
    pub chain: ChainValues,
    pub chain_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: u64,
    pub mode: SamplingMode,
    pub witness: WitnessParams,
    pub premise: Premise,
    pub empirical_expectation: f64,
    pub hp_curve: Vec<HpPoint>,
    pub bound_checks: Vec<BoundCheck>,
    /// Premise holds and every bound and chain check passed.
    pub all_pass: bool,
}

/// Computes the excess-risk law in the requested mode.
pub fn excess_risk_distribution(
    p: &DiscreteLearningProblem,
    n: u64,
    mode: SamplingMode,
    exec: Execution,
) -> Result<ExcessRiskDistribution> {
    match mode {
        SamplingMode::Exact => exact_excess_risk_distribution_with(p, n, exec),
        SamplingMode::MonteCarlo { replications, seed } => {
            mc_excess_risk_distribution_with(p, n, replications, seed, exec)
        }
    }
}

/// Checks the witness-based expectation bound on the law of `X_{f_n}`.
///
/// For every `delta` the high-probability level `eps_hat(delta)` is read
/// off the law itself, the bound `(1/c)[eps + (u' - eps) delta]` is
/// evaluated, and `E[X_{f_n}]` is compared against it together with every
/// intermediate step of the derivation.
pub fn validate_expectation_bound(
    p: &DiscreteLearningProblem,
    n: u64,
    w: &WitnessParams,
    delta_grid: &[f64],
    mode: SamplingMode,
) -> Result<SimulationReport> {
    validate_expectation_bound_with(p, n, w, delta_grid, mode, Execution::default())
}

pub fn validate_expectation_bound_with(
    p: &DiscreteLearningProblem,
    n: u64,
    w: &WitnessParams,
    delta_grid: &[f64],
    mode: SamplingMode,
    exec: Execution,
) -> Result<SimulationReport> {
    let class = min_c_over_class(&p.excess_loss_distributions(), w.u)?;
    let premise = Premise {
        holds: class.c().is_some_and(|c| c >= w.c),
        class,
    };

    let dist = excess_risk_distribution(p, n, mode, exec)?;
    let hp_curve = empirical_hp_curve(&dist, delta_grid)?;
    let expectation = dist.expectation();

    let bound_checks: Vec<BoundCheck> = hp_curve
        .iter()
        .map(|point| check_at(p, &dist, w, point, expectation, premise.holds))
        .collect();
    let all_pass = premise.holds
        && bound_checks
            .iter()
            .all(|c| c.verdict == Verdict::Pass && c.chain_ok && c.tail_probability <= c.delta);

    Ok(SimulationReport {
        n,
        mode,
        witness: *w,
        premise,
        empirical_expectation: expectation,
        hp_curve,
        bound_checks,
        all_pass,
    })
}

fn check_at(
    p: &DiscreteLearningProblem,
    dist: &ExcessRiskDistribution,
    w: &WitnessParams,
    point: &HpPoint,
    expectation: f64,
    premise: bool,
) -> BoundCheck {
    let eps = point.epsilon;
    let delta = point.delta;
    let u = w.u.max(eps);
    let bound = witness_bound(eps, w, delta);
    let tail_probability = dist.tail(eps);

    let chain = chain_values(p, dist, w.c, u, eps);
    let closing = ((u - eps) * tail_probability + eps) / w.c;
    let chain_ok = chain.is_ordered(expectation, closing, bound);

    let verdict = if !premise {
        Verdict::Skipped
    } else if expectation <= bound + CHAIN_SLACK {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    BoundCheck {
        delta,
        epsilon_hat: eps,
        tail_probability,
        effective_u: u,
        bound,
        expectation,
        verdict,
        chain,
        chain_ok,
    }
}

fn chain_values(
    p: &DiscreteLearningProblem,
    dist: &ExcessRiskDistribution,
    c: f64,
    u: f64,
    eps: f64,
) -> ChainValues {
    let probs: Vec<f64> = p.outcomes().iter().map(|o| o.prob).collect();
    let mut mean_loss = 0.0;
    let mut witnessed = 0.0;
    let mut split = 0.0;
    let mut w_above = 0.0;
    let mut w_below = 0.0;
    let mut cap_above = 0.0;
    let mut x_below = 0.0;
    let mut p_above = 0.0;

    for (h, &pi) in dist.selection.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let losses = p.excess_losses(h);
        let el: f64 = losses.iter().zip(&probs).map(|(l, q)| l * q).sum();
        let wh: f64 = losses
            .iter()
            .zip(&probs)
            .filter(|(l, _)| **l <= u)
            .fold(0.0, |s, (l, q)| s + l * q);
        let x = p.excess_risk(h);
        let above = x > eps + MERGE_TOL;
        let (ind_above, ind_below) = if above { (1.0, 0.0) } else { (0.0, 1.0) };

        mean_loss += pi * el;
        witnessed += pi * wh;
        split += pi * wh * (ind_above + ind_below);
        w_above += pi * wh * ind_above;
        w_below += pi * wh * ind_below;
        cap_above += pi * u * ind_above;
        x_below += pi * x * ind_below;
        p_above += pi * ind_above;
    }

    ChainValues {
        mean_excess_loss: mean_loss,
        witnessed: witnessed / c,
        witnessed_split: split / c,
        witnessed_split_sum: (w_above + w_below) / c,
        capped: (cap_above + x_below) / c,
        tail_mixture: (u * p_above + eps * (1.0 - p_above)) / c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovRow {
    pub phi: PhiTransform,
    #[serde(flatten)]
    pub check: TailCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub rows: Vec<MarkovRow>,
    pub violations: usize,
}

/// Checks `P(X > eps) <= E[phi(X)] / phi(eps)` on the atoms of `d` for every
/// transform and threshold.
pub fn validate_markov(
    d: &ExcessRiskDistribution,
    phis: &[PhiTransform],
    eps_grid: &[f64],
) -> Result<MarkovReport> {
    if eps_grid.is_empty() {
        return Err(BoundError::Empty("epsilon grid"));
    }
    if phis.is_empty() {
        return Err(BoundError::Empty("phi transform list"));
    }
    if let Some(&eps) = eps_grid.iter().find(|e| e.is_nan() || **e <= 0.0) {
        return Err(BoundError::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "thresholds must be positive",
        });
    }
    let mut rows = Vec::with_capacity(phis.len() * eps_grid.len());
    for phi in phis {
        for &eps in eps_grid {
            let check = check_tail(d.atoms.iter().map(|a| (a.value, a.prob)), phi, eps);
            rows.push(MarkovRow { phi: *phi, check });
        }
    }
    let violations = rows.iter().filter(|r| !r.check.holds).count();
    Ok(MarkovReport { rows, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::PhiTransform;
    use crate::simulate::problem::Outcome;
    use crate::simulate::zoo::{bundled_problem, bundled_problems};

    fn grid() -> Vec<f64> {
        (1..=20).map(|i| i as f64 / 20.0).collect()
    }

    #[test]
    fn single_hypothesis_is_trivial() {
        let p = DiscreteLearningProblem::new(
            vec![Outcome {
                label: "z".into(),
                prob: 1.0,
            }],
            vec!["h".into()],
            vec![vec![0.3]],
        )
        .unwrap();
        let w = WitnessParams::new(1.0, 1.0).unwrap();
        let r = validate_expectation_bound(&p, 4, &w, &grid(), SamplingMode::Exact).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.empirical_expectation, 0.0);
        assert!(r.hp_curve.iter().all(|pt| pt.epsilon == 0.0));
        assert!(r
            .bound_checks
            .iter()
            .all(|c| c.chain.mean_excess_loss == 0.0));
    }

    #[test]
    fn coin_single_draw_by_hand() {
        // n = 1: the sample is z1 w.p. .8 (ERM picks h1, X = 0) or z2 (h2, X = .6).
        let b = bundled_problem("coin_flip").unwrap();
        let w = WitnessParams::new(1.0, 1.0).unwrap();
        let r =
            validate_expectation_bound(&b.problem, 1, &w, &[0.1, 0.2, 0.5], SamplingMode::Exact)
                .unwrap();
        assert!(r.premise.holds);
        assert!((r.empirical_expectation - 0.12).abs() < 1e-15);
        let eps: Vec<f64> = r.hp_curve.iter().map(|p| p.epsilon).collect();
        assert!((eps[0] - 0.6).abs() < 1e-15);
        assert_eq!(eps[1], 0.0);
        assert_eq!(eps[2], 0.0);
        // delta = .2, eps = 0: bound = 0 + (1 - 0) * .2
        assert!((r.bound_checks[1].bound - 0.2).abs() < 1e-15);
        assert!(r.all_pass);
    }

    #[test]
    fn bundled_problems_behave_as_labelled() {
        for b in bundled_problems() {
            let w = WitnessParams::new(b.u, 1.0).unwrap();
            let class = min_c_over_class(&b.problem.excess_loss_distributions(), b.u).unwrap();
            let r = validate_expectation_bound(&b.problem, b.n, &w, &grid(), SamplingMode::Exact)
                .unwrap();
            if b.name == "unwitnessed_spike" {
                assert!(!r.premise.holds);
                assert!(matches!(class, ClassWitness::Fails { .. }));
                assert!(r.bound_checks.iter().all(|c| c.verdict == Verdict::Skipped));
                assert!(!r.all_pass);
            } else {
                let c = class.c().unwrap();
                let w = WitnessParams::new(b.u, c.min(1.0)).unwrap();
                let r =
                    validate_expectation_bound(&b.problem, b.n, &w, &grid(), SamplingMode::Exact)
                        .unwrap();
                assert!(r.all_pass, "{}: {:?}", b.name, r.bound_checks);
            }
        }
    }

    #[test]
    fn markov_on_two_atoms() {
        let b = bundled_problem("coin_flip").unwrap();
        let d = excess_risk_distribution(&b.problem, 1, SamplingMode::Exact, Execution::Sequential)
            .unwrap();
        let r = validate_markov(&d, &[PhiTransform::Identity], &[0.3]).unwrap();
        assert_eq!(r.violations, 0);
        let row = &r.rows[0].check;
        assert!((row.tail - 0.2).abs() < 1e-15);
        assert!((row.bound - 0.4).abs() < 1e-15);
        assert!(validate_markov(&d, &[PhiTransform::Identity], &[]).is_err());
        assert!(validate_markov(&d, &[PhiTransform::Identity], &[0.0]).is_err());
    }
}

//! Discrete learning problems whose excess-risk law is computable, and the
//! end-to-end checks built on them.

mod distribution;
mod problem;
mod rng;
mod validate;
pub mod zoo;

pub use distribution::{
    composition_count, empirical_hp_curve, exact_excess_risk_distribution,
    exact_excess_risk_distribution_with, mc_excess_risk_distribution,
    mc_excess_risk_distribution_with, ExcessRiskDistribution, HpPoint, RiskAtom, SamplingMode,
    ENUMERATION_BUDGET, MERGE_TOL,
};
pub use problem::{DiscreteLearningProblem, Outcome};
pub use rng::replication_stream;
pub use validate::{
    excess_risk_distribution, validate_expectation_bound, validate_expectation_bound_with,
    validate_markov, BoundCheck, ChainValues, MarkovReport, MarkovRow, Premise, SimulationReport,
    Verdict, CHAIN_SLACK,
};

/// Excess-loss law of every hypothesis of `p`, relative to the best one.
pub fn excess_loss_distributions(
    p: &DiscreteLearningProblem,
) -> Vec<crate::witness::ExcessLossDistribution> {
    p.excess_loss_distributions()
}

//! Small bundled problems, all within the exact-enumeration budget.

use super::problem::DiscreteLearningProblem;

/// A bundled problem with the witness threshold and sample size it is
/// meant to be run at.
#[derive(Debug, Clone)]
pub struct BundledProblem {
    pub name: &'static str,
    pub problem: DiscreteLearningProblem,
    pub u: f64,
    pub n: u64,
}

const SOURCES: [(&str, &str, f64, u64); 7] = [
    (
        "coin_flip",
        include_str!("../../problems/coin_flip.json"),
        1.0,
        5,
    ),
    (
        "three_class_zero_one",
        include_str!("../../problems/three_class_zero_one.json"),
        1.0,
        6,
    ),
    (
        "squared_loss_constants",
        include_str!("../../problems/squared_loss_constants.json"),
        3.0,
        8,
    ),
    (
        "rare_large_loss",
        include_str!("../../problems/rare_large_loss.json"),
        1.0,
        6,
    ),
    (
        "absolute_loss_tie",
        include_str!("../../problems/absolute_loss_tie.json"),
        2.0,
        7,
    ),
    (
        "fair_coin",
        include_str!("../../problems/fair_coin.json"),
        1.0,
        4,
    ),
    (
        "unwitnessed_spike",
        include_str!("../../problems/unwitnessed_spike.json"),
        1.0,
        3,
    ),
];

pub fn bundled_problems() -> Vec<BundledProblem> {
    SOURCES
        .iter()
        .map(|&(name, text, u, n)| BundledProblem {
            name,
            problem: serde_json::from_str(text).expect("bundled problem parses"),
            u,
            n,
        })
        .collect()
}

pub fn bundled_problem(name: &str) -> Option<BundledProblem> {
    bundled_problems().into_iter().find(|b| b.name == name)
}

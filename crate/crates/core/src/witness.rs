//! The `(u, c)` witness condition `E[L 1(L <= u)] >= c E[L]` for pointwise
//! excess losses, checked exactly on finite laws and estimated from samples.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BoundError, Result};
use crate::guarantee::WitnessParams;

/// Tolerance on the total probability mass.
pub const MASS_TOL: f64 = 1e-12;
/// Means within this distance of zero count as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossAtom {
    pub value: f64,
    pub prob: f64,
}

/// A finite law of a pointwise excess loss `L_f = l(f) - l(f*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct ExcessLossDistribution {
    atoms: Vec<LossAtom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    atoms: Vec<LossAtom>,
}

impl TryFrom<RawDistribution> for ExcessLossDistribution {
    type Error = BoundError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        ExcessLossDistribution::new(raw.atoms)
    }
}

impl ExcessLossDistribution {
    pub fn new(atoms: Vec<LossAtom>) -> Result<Self> {
        let bad = |m: String| Err(BoundError::InvalidDistribution(m));
        if atoms.is_empty() {
            return bad("no atoms".into());
        }
        for a in &atoms {
            if !a.value.is_finite() {
                return bad(format!("atom value {} is not finite", a.value));
            }
            if !(0.0..=1.0).contains(&a.prob) {
                return bad(format!("atom probability {} outside [0, 1]", a.prob));
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.prob).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return bad(format!("probabilities sum to {mass}, not 1"));
        }
        let d = ExcessLossDistribution { atoms };
        let mean = d.mean();
        if mean < -ZERO_MEAN_TOL {
            return bad(format!("mean excess loss {mean} is negative"));
        }
        Ok(d)
    }

    /// Builds from `(value, prob)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(value, prob)| LossAtom { value, prob })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[LossAtom] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    /// `E[L 1(L <= u)]`, indicator inclusive.
    pub fn witnessed_mean(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value <= u)
            .fold(0.0, |s, a| s + a.value * a.prob)
    }

    /// `m` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let index =
            WeightedIndex::new(self.atoms.iter().map(|a| a.prob)).expect("validated probabilities");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| self.atoms[index.sample(&mut rng)].value)
            .collect()
    }
}

/// Exact evaluation of the witness inequality at one threshold `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub u: f64,
    /// `E[L 1(L <= u)]`
    pub witnessed_mean: f64,
    /// `E[L]`
    pub mean: f64,
    /// `witnessed_mean / mean`; `None` when the mean is zero.
    pub ratio: Option<f64>,
    /// Set when `E[L] = 0`: the condition reads `witnessed_mean >= 0`.
    pub zero_mean: bool,
    /// Largest `c in (0, 1]` for which the condition holds, if any.
    pub holds_for_c: Option<f64>,
}

impl WitnessCertificate {
    fn from_moments(u: f64, witnessed_mean: f64, mean: f64) -> Self {
        if mean.abs() <= ZERO_MEAN_TOL {
            return WitnessCertificate {
                u,
                witnessed_mean,
                mean,
                ratio: None,
                zero_mean: true,
                holds_for_c: (witnessed_mean >= 0.0).then_some(1.0),
            };
        }
        let ratio = witnessed_mean / mean;
        WitnessCertificate {
            u,
            witnessed_mean,
            mean,
            ratio: Some(ratio),
            zero_mean: false,
            holds_for_c: (ratio > 0.0).then(|| ratio.min(1.0)),
        }
    }

    /// `E[L 1(L <= u)] >= c E[L]`, literally.
    pub fn holds(&self, c: f64) -> bool {
        self.witnessed_mean >= c * self.mean
    }
}

fn check_u(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(BoundError::InvalidParameter {
            name: "u",
            value: u,
            reason: "witness threshold must be positive",
        })
    }
}

pub fn witness_exact(d: &ExcessLossDistribution, u: f64) -> Result<WitnessCertificate> {
    check_u(u)?;
    Ok(WitnessCertificate::from_moments(
        u,
        d.witnessed_mean(u),
        d.mean(),
    ))
}

/// Plug-in estimate of the witness inequality on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalWitness {
    pub holds: bool,
    /// `None` when the sample mean is zero.
    pub ratio_estimate: Option<f64>,
}

pub fn witness_empirical(samples: &[f64], u: f64, c: f64) -> Result<EmpiricalWitness> {
    if samples.is_empty() {
        return Err(BoundError::Empty("samples"));
    }
    check_u(u)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(BoundError::InvalidParameter {
            name: "c",
            value: c,
            reason: "must lie in (0, 1]",
        });
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let witnessed = samples.iter().filter(|&&x| x <= u).fold(0.0, |s, x| s + x) / m;
    Ok(EmpiricalWitness {
        holds: witnessed >= c * mean,
        ratio_estimate: (mean != 0.0).then(|| witnessed / mean),
    })
}

/// Class-level verdict for a common threshold `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClassWitness {
    /// Every member satisfies the condition with this `c`.
    Holds { c: f64 },
    /// Member `index` has nonpositive witnessed mass.
    Fails { index: usize, ratio: Option<f64> },
}

impl ClassWitness {
    pub fn c(&self) -> Option<f64> {
        match *self {
            ClassWitness::Holds { c } => Some(c),
            ClassWitness::Fails { .. } => None,
        }
    }
}

/// Infimum of the witness ratio over a class, clamped to `(0, 1]`.
/// Zero-mean members with nonnegative witnessed mass impose nothing.
pub fn min_c_over_class(dists: &[ExcessLossDistribution], u: f64) -> Result<ClassWitness> {
    if dists.is_empty() {
        return Err(BoundError::Empty("hypothesis class"));
    }
    let mut c: f64 = 1.0;
    for (index, d) in dists.iter().enumerate() {
        let cert = witness_exact(d, u)?;
        match cert.holds_for_c {
            Some(ci) => c = c.min(ci),
            None => {
                return Ok(ClassWitness::Fails {
                    index,
                    ratio: cert.ratio,
                })
            }
        }
    }
    Ok(ClassWitness::Holds { c })
}

/// Bounded losses: `(u, c) = (B, 1)`.
pub fn effective_witness_for_bounded(bound: f64) -> Result<WitnessParams> {
    crate::transform::bounded_loss_witness(bound)
}

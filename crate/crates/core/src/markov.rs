//! In-expectation to high-probability conversions via Markov's inequality
//! and its monotone-transform generalization
//! `P(X > eps) <= E[phi(X)] / phi(eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, BoundError, Result};
use crate::guarantee::ExpGuarantee;

/// Monotonically increasing, nonnegative transforms on `[0, inf)` with
/// exact inverses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawPhi")]
pub enum PhiTransform {
    Identity,
    /// `exp(lambda x)`
    Exponential {
        lambda: f64,
    },
    /// `x^r`
    Power {
        r: f64,
    },
    Sqrt,
    /// `ln(1 + x)`
    Log1p,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPhi {
    Identity,
    Exponential { lambda: f64 },
    Power { r: f64 },
    Sqrt,
    Log1p,
}

impl TryFrom<RawPhi> for PhiTransform {
    type Error = BoundError;

    fn try_from(raw: RawPhi) -> Result<Self> {
        match raw {
            RawPhi::Identity => Ok(PhiTransform::Identity),
            RawPhi::Exponential { lambda } => PhiTransform::exponential(lambda),
            RawPhi::Power { r } => PhiTransform::power(r),
            RawPhi::Sqrt => Ok(PhiTransform::Sqrt),
            RawPhi::Log1p => Ok(PhiTransform::Log1p),
        }
    }
}

impl PhiTransform {
    pub fn exponential(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(PhiTransform::Exponential { lambda })
        } else {
            Err(BoundError::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "exponential scale must be positive",
            })
        }
    }

    pub fn power(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 {
            Ok(PhiTransform::Power { r })
        } else {
            Err(BoundError::InvalidParameter {
                name: "r",
                value: r,
                reason: "power exponent must be positive",
            })
        }
    }

    /// One representative of every kind; `Power` uses `r = 2`.
    pub fn zoo() -> [PhiTransform; 5] {
        [
            PhiTransform::Identity,
            PhiTransform::Exponential { lambda: 1.0 },
            PhiTransform::Power { r: 2.0 },
            PhiTransform::Sqrt,
            PhiTransform::Log1p,
        ]
    }

    pub fn name(&self) -> String {
        match *self {
            PhiTransform::Identity => "identity".into(),
            PhiTransform::Exponential { lambda } => format!("exponential(lambda={lambda})"),
            PhiTransform::Power { r } => format!("power(r={r})"),
            PhiTransform::Sqrt => "sqrt".into(),
            PhiTransform::Log1p => "log1p".into(),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            PhiTransform::Identity => x,
            PhiTransform::Exponential { lambda } => (lambda * x).exp(),
            PhiTransform::Power { r } => x.powf(r),
            PhiTransform::Sqrt => x.sqrt(),
            PhiTransform::Log1p => x.ln_1p(),
        }
    }

    /// Inverse on the range `[phi(0), inf)`; `None` below `phi(0)`.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        if y < self.at_zero() || y.is_nan() {
            return None;
        }
        Some(match *self {
            PhiTransform::Identity => y,
            PhiTransform::Exponential { lambda } => y.ln() / lambda,
            PhiTransform::Power { r } => y.powf(1.0 / r),
            PhiTransform::Sqrt => y * y,
            PhiTransform::Log1p => y.exp_m1(),
        })
    }

    pub fn at_zero(&self) -> f64 {
        self.apply(0.0)
    }

    pub fn is_concave(&self) -> bool {
        match *self {
            PhiTransform::Identity | PhiTransform::Sqrt | PhiTransform::Log1p => true,
            PhiTransform::Power { r } => r <= 1.0,
            PhiTransform::Exponential { .. } => false,
        }
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            PhiTransform::Identity | PhiTransform::Exponential { .. } => true,
            PhiTransform::Power { r } => r >= 1.0,
            PhiTransform::Sqrt | PhiTransform::Log1p => false,
        }
    }
}

/// A bound `E[phi(X)] <= beta(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiExpectationBound {
    pub beta: ExpGuarantee,
    pub phi: PhiTransform,
}

impl PhiExpectationBound {
    /// `beta(n) >= phi(0)`: some nonnegative variable can satisfy the bound.
    pub fn is_feasible_at(&self, n: u64) -> Result<bool> {
        Ok(self.beta.eval(n)? >= self.phi.at_zero())
    }
}

/// A tail probability bound, clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub probability: f64,
    pub vacuous: bool,
}

/// An `eps` solving a tail statement; `vacuous` when the statement holds
/// trivially and `eps` was set to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailThreshold {
    pub epsilon: f64,
    pub vacuous: bool,
}

/// Plain Markov: with probability at least `1 - delta`, `X <= gamma(n) / delta`.
pub fn exp_to_hp(g: &ExpGuarantee, delta: f64, n: u64) -> Result<f64> {
    check_delta(delta)?;
    Ok(g.eval(n)? / delta)
}

/// `min(1, E[phi(X)] / phi(eps))`.
pub fn generalized_markov_tail(phi: &PhiTransform, phi_mean: f64, eps: f64) -> Result<TailBound> {
    if phi_mean.is_nan() || phi_mean < 0.0 {
        return Err(BoundError::InvalidParameter {
            name: "phi_mean",
            value: phi_mean,
            reason: "expectation of a nonnegative transform must be >= 0",
        });
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(BoundError::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "threshold must be positive",
        });
    }
    let denom = phi.apply(eps);
    if denom <= 0.0 {
        return Err(BoundError::PhiVanishes { eps });
    }
    let raw = phi_mean / denom;
    Ok(if raw >= 1.0 {
        TailBound {
            probability: 1.0,
            vacuous: true,
        }
    } else {
        TailBound {
            probability: raw,
            vacuous: false,
        }
    })
}

/// Solves `delta = beta(n) / phi(eps)` for `eps`: `eps = phi^{-1}(beta(n) / delta)`.
pub fn invert_phi_bound(b: &PhiExpectationBound, delta: f64, n: u64) -> Result<TailThreshold> {
    check_delta(delta)?;
    let target = b.beta.eval(n)? / delta;
    Ok(match b.phi.inverse(target) {
        Some(epsilon) => TailThreshold {
            epsilon,
            vacuous: false,
        },
        None => TailThreshold {
            epsilon: 0.0,
            vacuous: true,
        },
    })
}

/// Jensen for concave `phi`: `E[phi(X)] <= phi(gamma(n))`.
pub fn jensen_upper(phi: &PhiTransform, g: &ExpGuarantee, n: u64) -> Result<f64> {
    if !phi.is_concave() {
        return Err(BoundError::NotConcave(phi.name()));
    }
    Ok(phi.apply(g.eval(n)?))
}

/// Result of comparing an empirical tail with its generalized Markov bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub eps: f64,
    pub tail: f64,
    pub phi_mean: f64,
    /// `E[phi(X)] / phi(eps)`, unclamped.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `P(X > eps) <= E[phi(X)] / phi(eps)` on a weighted atom law.
///
/// Weights must be nonnegative and sum to one. The comparison is done as
/// `tail * phi(eps) <= E[phi(X)]` with a relative slack of a few ulps.
pub fn check_tail<I>(atoms: I, phi: &PhiTransform, eps: f64) -> TailCheck
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut tail = 0.0;
    let mut phi_mean = 0.0;
    for (value, weight) in atoms {
        phi_mean += weight * phi.apply(value);
        if value > eps {
            tail += weight;
        }
    }
    let denom = phi.apply(eps);
    // an empty tail holds even when phi(eps) overflows
    let holds = tail == 0.0 || tail * denom <= phi_mean * (1.0 + 1e-14);
    TailCheck {
        eps,
        tail,
        phi_mean,
        bound: phi_mean / denom,
        holds,
    }
}

/// [`check_tail`] on the empirical measure of `samples`; the tail is
/// counted exactly as `#{x > eps} / M`.
pub fn empirical_tail_check(samples: &[f64], phi: &PhiTransform, eps: f64) -> TailCheck {
    let m = samples.len() as f64;
    let above = samples.iter().filter(|&&x| x > eps).count();
    let phi_mean = samples.iter().map(|&x| phi.apply(x)).sum::<f64>() / m;
    let tail = above as f64 / m;
    let denom = phi.apply(eps);
    TailCheck {
        eps,
        tail,
        phi_mean,
        bound: phi_mean / denom,
        holds: above == 0 || tail * denom <= phi_mean * (1.0 + 1e-14),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_markov_examples() {
        let g = ExpGuarantee::constant(0.01).unwrap();
        assert!((exp_to_hp(&g, 0.1, 7).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(exp_to_hp(&g, 1.0, 7).unwrap(), 0.01);
        assert_eq!(exp_to_hp(&ExpGuarantee::zero(), 0.3, 7).unwrap(), 0.0);
        assert!(exp_to_hp(&g, 0.0, 7).is_err());
    }

    #[test]
    fn empty_tail_survives_overflow() {
        let e = PhiTransform::exponential(1.0).unwrap();
        let samples = [1000.0, 0.5];
        let check = empirical_tail_check(&samples, &e, 1000.0);
        assert!(check.phi_mean.is_infinite() && check.tail == 0.0 && check.holds);
        assert!(check_tail([(1000.0, 0.5), (0.5, 0.5)], &e, 1000.0).holds);
    }

    #[test]
    fn generalized_tail_examples() {
        let t = generalized_markov_tail(&PhiTransform::Identity, 0.01, 0.1).unwrap();
        assert!((t.probability - 0.1).abs() < 1e-16 && !t.vacuous);
        let e = PhiTransform::exponential(1.0).unwrap();
        let t = generalized_markov_tail(&e, 0.5f64.exp(), 1.0).unwrap();
        assert!((t.probability - (-0.5f64).exp()).abs() < 1e-15);
        assert!((t.probability - 0.6065).abs() < 1e-4);
        let t = generalized_markov_tail(&PhiTransform::Identity, 3.0, 2.0).unwrap();
        assert_eq!(
            t,
            TailBound {
                probability: 1.0,
                vacuous: true
            }
        );
        assert!(generalized_markov_tail(&PhiTransform::Identity, 1.0, 0.0).is_err());
    }

    #[test]
    fn inversion_examples() {
        let e = PhiTransform::exponential(1.0).unwrap();
        let b = PhiExpectationBound {
            beta: ExpGuarantee::constant(std::f64::consts::E).unwrap(),
            phi: e,
        };
        let t = invert_phi_bound(&b, 0.1, 5).unwrap();
        assert!((t.epsilon - (1.0 + 10f64.ln())).abs() < 1e-14);
        assert!((t.epsilon - 3.3026).abs() < 1e-4);

        let b2 = PhiExpectationBound {
            beta: ExpGuarantee::constant(2f64.exp()).unwrap(),
            phi: e,
        };
        assert!((invert_phi_bound(&b2, 1.0, 5).unwrap().epsilon - 2.0).abs() < 1e-15);

        // beta < phi(0) = 1: vacuous
        let b3 = PhiExpectationBound {
            beta: ExpGuarantee::constant(0.5).unwrap(),
            phi: e,
        };
        assert_eq!(
            invert_phi_bound(&b3, 1.0, 5).unwrap(),
            TailThreshold {
                epsilon: 0.0,
                vacuous: true
            }
        );
        assert!(!b3.is_feasible_at(5).unwrap());
    }

    #[test]
    fn identity_inversion_is_plain_markov() {
        let gamma = ExpGuarantee::power_law(1.0, 1.0).unwrap();
        let b = PhiExpectationBound {
            beta: gamma.clone(),
            phi: PhiTransform::Identity,
        };
        for &d in &[1.0, 0.37, 0.1, 1e-3] {
            let via_phi = invert_phi_bound(&b, d, 100).unwrap().epsilon;
            assert_eq!(
                via_phi.to_bits(),
                exp_to_hp(&gamma, d, 100).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn jensen_examples() {
        let g = ExpGuarantee::constant(0.25).unwrap();
        assert_eq!(jensen_upper(&PhiTransform::Sqrt, &g, 3).unwrap(), 0.5);
        assert_eq!(jensen_upper(&PhiTransform::Identity, &g, 3).unwrap(), 0.25);
        assert!(matches!(
            jensen_upper(&PhiTransform::exponential(1.0).unwrap(), &g, 3),
            Err(BoundError::NotConcave(_))
        ));
        assert!(jensen_upper(&PhiTransform::Power { r: 3.0 }, &g, 3).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let zoo = [
            PhiTransform::Identity,
            PhiTransform::Exponential { lambda: 0.7 },
            PhiTransform::Power { r: 2.5 },
            PhiTransform::Power { r: 0.3 },
            PhiTransform::Sqrt,
            PhiTransform::Log1p,
        ];
        for phi in zoo {
            for i in 0..200 {
                let x = 0.05 * i as f64;
                let back = phi.inverse(phi.apply(x)).unwrap();
                assert!(
                    (back - x).abs() <= 1e-12 * x.max(1e-300) + 1e-15,
                    "{phi:?} at {x}: {back}"
                );
            }
        }
    }

    #[test]
    fn phi_json() {
        let p: PhiTransform =
            serde_json::from_str(r#"{"kind":"exponential","lambda":1.0}"#).unwrap();
        assert_eq!(p, PhiTransform::Exponential { lambda: 1.0 });
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"kind":"exponential","lambda":1.0}"#
        );
        let p: PhiTransform = serde_json::from_str(r#"{"kind":"sqrt"}"#).unwrap();
        assert_eq!(p, PhiTransform::Sqrt);
        assert!(serde_json::from_str::<PhiTransform>(r#"{"kind":"power","r":-1.0}"#).is_err());
        assert!(serde_json::from_str::<PhiTransform>(r#"{"kind":"cube"}"#).is_err());
    }

    proptest! {
        #[test]
        fn empirical_markov_never_violated(
            samples in prop::collection::vec(0.0f64..20.0, 1..200),
            eps in 1e-3f64..25.0,
        ) {
            for phi in PhiTransform::zoo() {
                let check = empirical_tail_check(&samples, &phi, eps);
                prop_assert!(check.holds, "{:?}: {:?}", phi, check);
            }
        }

        #[test]
        fn concave_transforms_never_beat_identity(gamma in 1e-6f64..10.0, delta in 1e-6f64..=1.0) {
            for phi in [PhiTransform::Sqrt, PhiTransform::Log1p, PhiTransform::Identity, PhiTransform::Power { r: 0.5 }] {
                let eps = phi.inverse(phi.apply(gamma) / delta).unwrap();
                prop_assert!(eps >= gamma / delta * (1.0 - 1e-12));
            }
        }
    }
}

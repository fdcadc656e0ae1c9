//! Closed parametric families for the two guarantee forms.
//!
//! A high-probability guarantee is a function `eps(delta, n)` such that the
//! excess risk of the trained predictor exceeds `eps(delta, n)` with
//! probability at most `delta`. An in-expectation guarantee is a function
//! `gamma(n)` bounding the expected excess risk. Both are sums of
//! [`GuaranteeTerm`]s, so values and `delta`-derivatives are exact.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, check_n, BoundError, Result};

/// One additive term of a guarantee family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuaranteeTerm {
    /// `a * delta^(-p) * n^(-q)`
    PowerLaw {
        a: f64,
        #[serde(default)]
        p: f64,
        q: f64,
    },
    /// `a * ln(1/delta) * n^(-q)`
    LogInverse { a: f64, q: f64 },
    /// `a`
    Constant { a: f64 },
}

impl GuaranteeTerm {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BoundError::InvalidGuarantee(msg));
        match *self {
            GuaranteeTerm::PowerLaw { a, p, q } => {
                if !(a.is_finite() && a > 0.0) {
                    return bad(format!("power_law coefficient a = {a} must be positive"));
                }
                if !(p.is_finite() && p >= 0.0) || !(q.is_finite() && q >= 0.0) {
                    return bad(format!("power_law exponents p = {p}, q = {q} must be >= 0"));
                }
            }
            GuaranteeTerm::LogInverse { a, q } => {
                if !(a.is_finite() && a > 0.0) {
                    return bad(format!("log_inverse coefficient a = {a} must be positive"));
                }
                if !(q.is_finite() && q >= 0.0) {
                    return bad(format!("log_inverse exponent q = {q} must be >= 0"));
                }
            }
            GuaranteeTerm::Constant { a } => {
                if !(a.is_finite() && a >= 0.0) {
                    return bad(format!("constant a = {a} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// True when the term does not depend on `delta`.
    pub fn is_delta_free(&self) -> bool {
        match *self {
            GuaranteeTerm::PowerLaw { p, .. } => p == 0.0,
            GuaranteeTerm::LogInverse { .. } => false,
            GuaranteeTerm::Constant { .. } => true,
        }
    }

    fn value(&self, delta: f64, n: f64) -> f64 {
        match *self {
            GuaranteeTerm::PowerLaw { a, p, q } => a / (delta.powf(p) * n.powf(q)),
            GuaranteeTerm::LogInverse { a, q } => a * (1.0 / delta).ln() / n.powf(q),
            GuaranteeTerm::Constant { a } => a,
        }
    }

    fn ddelta(&self, delta: f64, n: f64) -> f64 {
        match *self {
            GuaranteeTerm::PowerLaw { p: 0.0, .. } => 0.0,
            GuaranteeTerm::PowerLaw { a, p, q } => -p * a / (delta.powf(p + 1.0) * n.powf(q)),
            GuaranteeTerm::LogInverse { a, q } => -a / (delta * n.powf(q)),
            GuaranteeTerm::Constant { .. } => 0.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerms {
    terms: Vec<GuaranteeTerm>,
}

/// High-probability guarantee `eps(delta, n)`: with probability at least
/// `1 - delta` the excess risk is at most `eps(delta, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTerms")]
pub struct HpGuarantee {
    terms: Vec<GuaranteeTerm>,
}

impl TryFrom<RawTerms> for HpGuarantee {
    type Error = BoundError;

    fn try_from(raw: RawTerms) -> Result<Self> {
        HpGuarantee::new(raw.terms)
    }
}

impl HpGuarantee {
    pub fn new(terms: Vec<GuaranteeTerm>) -> Result<Self> {
        for term in &terms {
            term.validate()?;
        }
        Ok(HpGuarantee { terms })
    }

    /// `a / (delta^p n^q)`
    pub fn power_law(a: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(vec![GuaranteeTerm::PowerLaw { a, p, q }])
    }

    /// `a ln(1/delta) / n^q`
    pub fn log_inverse(a: f64, q: f64) -> Result<Self> {
        Self::new(vec![GuaranteeTerm::LogInverse { a, q }])
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(vec![GuaranteeTerm::Constant { a }])
    }

    pub fn terms(&self) -> &[GuaranteeTerm] {
        &self.terms
    }

    pub fn is_delta_free(&self) -> bool {
        self.terms.iter().all(GuaranteeTerm::is_delta_free)
    }

    /// Evaluates `eps(delta, n)`.
    pub fn eval(&self, delta: f64, n: u64) -> Result<f64> {
        check_delta(delta)?;
        check_n(n)?;
        Ok(self.eval_unchecked(delta, n as f64))
    }

    /// Exact partial derivative of `eps` with respect to `delta`.
    pub fn ddelta(&self, delta: f64, n: u64) -> Result<f64> {
        check_delta(delta)?;
        check_n(n)?;
        Ok(self.ddelta_unchecked(delta, n as f64))
    }

    pub(crate) fn eval_unchecked(&self, delta: f64, n: f64) -> f64 {
        self.terms.iter().map(|t| t.value(delta, n)).sum()
    }

    pub(crate) fn ddelta_unchecked(&self, delta: f64, n: f64) -> f64 {
        self.terms.iter().map(|t| t.ddelta(delta, n)).sum()
    }
}

/// In-expectation guarantee `gamma(n)`: the expected excess risk is below
/// `gamma(n)`. Terms must not depend on `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTerms")]
pub struct ExpGuarantee {
    terms: Vec<GuaranteeTerm>,
}

impl TryFrom<RawTerms> for ExpGuarantee {
    type Error = BoundError;

    fn try_from(raw: RawTerms) -> Result<Self> {
        ExpGuarantee::new(raw.terms)
    }
}

impl ExpGuarantee {
    pub fn new(terms: Vec<GuaranteeTerm>) -> Result<Self> {
        for term in &terms {
            term.validate()?;
            if !term.is_delta_free() {
                return Err(BoundError::InvalidGuarantee(
                    "in-expectation guarantees cannot depend on delta".into(),
                ));
            }
        }
        Ok(ExpGuarantee { terms })
    }

    /// `a / n^q`
    pub fn power_law(a: f64, q: f64) -> Result<Self> {
        Self::new(vec![GuaranteeTerm::PowerLaw { a, p: 0.0, q }])
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(vec![GuaranteeTerm::Constant { a }])
    }

    pub fn zero() -> Self {
        ExpGuarantee { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[GuaranteeTerm] {
        &self.terms
    }

    /// Evaluates `gamma(n)`.
    pub fn eval(&self, n: u64) -> Result<f64> {
        check_n(n)?;
        Ok(self.terms.iter().map(|t| t.value(1.0, n as f64)).sum())
    }

    /// The high-probability family `gamma(n) / delta` given by Markov's
    /// inequality: every term gains one power of `1/delta`.
    pub fn to_hp_guarantee(&self) -> HpGuarantee {
        let terms = self
            .terms
            .iter()
            .filter_map(|t| match *t {
                GuaranteeTerm::PowerLaw { a, q, .. } => {
                    Some(GuaranteeTerm::PowerLaw { a, p: 1.0, q })
                }
                GuaranteeTerm::Constant { a } if a > 0.0 => {
                    Some(GuaranteeTerm::PowerLaw { a, p: 1.0, q: 0.0 })
                }
                _ => None,
            })
            .collect();
        HpGuarantee { terms }
    }
}

/// Parameters `(u, c)` of the witness condition
/// `E[L 1(L <= u)] >= c E[L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWitness")]
pub struct WitnessParams {
    pub u: f64,
    pub c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWitness {
    u: f64,
    c: f64,
}

impl TryFrom<RawWitness> for WitnessParams {
    type Error = BoundError;

    fn try_from(raw: RawWitness) -> Result<Self> {
        WitnessParams::new(raw.u, raw.c)
    }
}

impl WitnessParams {
    pub fn new(u: f64, c: f64) -> Result<Self> {
        if !(u.is_finite() && u > 0.0) {
            return Err(BoundError::InvalidParameter {
                name: "u",
                value: u,
                reason: "must be positive and finite",
            });
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(BoundError::InvalidParameter {
                name: "c",
                value: c,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(WitnessParams { u, c })
    }
}

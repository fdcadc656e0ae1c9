//! Conversions between high-probability and in-expectation excess-risk
//! guarantees, with exact and Monte Carlo checks on small learning problems.
//!
//! * [`guarantee`]: the parametric guarantee families.
//! * [`transform`]: high-probability to in-expectation under the witness
//!   condition, with the bound minimized over `delta`.
//! * [`markov`]: in-expectation to high-probability via (generalized) Markov.
//! * [`witness`]: exact and empirical witness-condition checks.
//! * [`simulate`]: discrete problems, excess-risk laws, end-to-end validation.
//! * [`cli`]: the batch front-end behind the `bound-bridge` binary.

pub mod cli;
pub mod error;
pub mod guarantee;
pub mod markov;
pub mod parallel;
pub mod scalar;
pub mod simulate;
pub mod transform;
pub mod witness;

pub use error::{BoundError, Result};
pub use guarantee::{ExpGuarantee, GuaranteeTerm, HpGuarantee, WitnessParams};

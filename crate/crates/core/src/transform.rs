//! High-probability to in-expectation conversion under the witness
//! condition, and minimization of the resulting bound over `delta`.
//!
//! For a guarantee `eps(delta, n)` and witness parameters `(u, c)` the
//! expected excess risk is at most
//!
//! ```text
//! rhs(delta) = (1/c) [ eps + (u' - eps) delta ],   u' = max(u, eps)
//! ```
//!
//! for every `delta` in `(0, 1]`. With `u' = max(u, eps)` the objective is
//! `eps/c` wherever `eps >= u` and `(1/c)[eps (1 - delta) + u delta]`
//! elsewhere. Both pieces are handled separately: `eps` is nonincreasing
//! and convex in `delta` for every representable family, so the second
//! piece is convex and its derivative is monotone.

use serde::{Deserialize, Serialize};

use crate::error::{check_n, BoundError, Result};
use crate::guarantee::{GuaranteeTerm, HpGuarantee, WitnessParams};
use crate::parallel::{self, Execution};
use crate::scalar::{bisect_root, brent_minimize};

/// Lower end of the `delta` search range.
pub const DELTA_FLOOR: f64 = 1e-12;
/// Iteration cap per smooth piece.
pub const MAX_ITERATIONS: usize = 200;
const LOG_XTOL: f64 = 1e-12;

/// Marker for bounds that are only approached as `delta -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroLimit {
    #[serde(rename = "infimum-at-zero")]
    InfimumAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaStar {
    At(f64),
    Limit(ZeroLimit),
}

impl DeltaStar {
    pub fn value(&self) -> Option<f64> {
        match *self {
            DeltaStar::At(d) => Some(d),
            DeltaStar::Limit(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Numeric,
    /// The bound evaluated at a caller-chosen `delta`, no optimization.
    Evaluated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub delta_star: DeltaStar,
    pub bound: f64,
    pub attained: bool,
    pub method: Method,
    /// `c * d rhs / d delta` at `delta_star` on the smooth piece. Zero at an
    /// interior optimum, nonzero at the kink or at `delta = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity_residual: Option<f64>,
}

/// `max(u, eps(delta, n))`, the witness threshold after enlarging it to
/// cover the guarantee value.
pub fn effective_u(w: &WitnessParams, g: &HpGuarantee, delta: f64, n: u64) -> Result<f64> {
    Ok(w.u.max(g.eval(delta, n)?))
}

/// The in-expectation bound `(1/c)[eps + (u' - eps) delta]` at a fixed `delta`.
pub fn hp_to_exp_at(g: &HpGuarantee, w: &WitnessParams, delta: f64, n: u64) -> Result<f64> {
    let eps = g.eval(delta, n)?;
    Ok(witness_bound(eps, w, delta))
}

/// `(1/c)[eps + (max(u, eps) - eps) delta]` for a known guarantee value `eps`.
pub fn witness_bound(eps: f64, w: &WitnessParams, delta: f64) -> f64 {
    let u = w.u.max(eps);
    (eps + (u - eps) * delta) / w.c
}

/// Bounded losses `X_f <= B` satisfy the witness condition with `u = B`, `c = 1`.
pub fn bounded_loss_witness(bound: f64) -> Result<WitnessParams> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(BoundError::InvalidParameter {
            name: "B",
            value: bound,
            reason: "loss bound must be positive and finite",
        });
    }
    WitnessParams::new(bound, 1.0)
}

/// Evaluates the bound at a given `delta` and packages it as a result row.
pub fn evaluate_at(
    g: &HpGuarantee,
    w: &WitnessParams,
    delta: f64,
    n: u64,
) -> Result<TransformResult> {
    let bound = hp_to_exp_at(g, w, delta, n)?;
    Ok(TransformResult {
        delta_star: DeltaStar::At(delta),
        bound,
        attained: true,
        method: Method::Evaluated,
        stationarity_residual: None,
    })
}

/// Minimizes the in-expectation bound over `delta in (0, 1]`.
///
/// A single `a / (delta n^q)` term uses the closed form
/// `delta* = sqrt(a / (u n^q))`; everything else goes through
/// [`optimize_delta_numeric`].
pub fn optimize_delta(g: &HpGuarantee, w: &WitnessParams, n: u64) -> Result<TransformResult> {
    check_n(n)?;
    match g.terms() {
        [GuaranteeTerm::PowerLaw { a, p, q }] if *p == 1.0 => Ok(closed_form(*a, *q, w, n)),
        _ => optimize_delta_numeric(g, w, n),
    }
}

fn closed_form(a: f64, q: f64, w: &WitnessParams, n: u64) -> TransformResult {
    let scaled = a / (n as f64).powf(q);
    let delta = (scaled / w.u).sqrt();
    if delta <= 1.0 {
        TransformResult {
            delta_star: DeltaStar::At(delta),
            bound: (2.0 * (scaled * w.u).sqrt() - scaled) / w.c,
            attained: true,
            method: Method::ClosedForm,
            stationarity_residual: Some(w.u - scaled / (delta * delta)),
        }
    } else {
        // eps(1) = scaled > u: objective is eps/c everywhere, smallest at 1
        TransformResult {
            delta_star: DeltaStar::At(1.0),
            bound: scaled / w.c,
            attained: true,
            method: Method::ClosedForm,
            stationarity_residual: None,
        }
    }
}

/// Numeric minimization over `log delta in [ln DELTA_FLOOR, 0]`.
///
/// Locates the kink `eps(delta0) = u` by bisection, minimizes the smooth
/// piece `[delta0, 1]` with Brent's method, polishes with a bisection on the
/// piece's monotone derivative, then takes the best of the interior
/// candidates, the kink and `delta = 1`.
pub fn optimize_delta_numeric(
    g: &HpGuarantee,
    w: &WitnessParams,
    n: u64,
) -> Result<TransformResult> {
    check_n(n)?;
    let nf = n as f64;
    let eps = |d: f64| g.eval_unchecked(d, nf);
    let objective = |d: f64| witness_bound(eps(d), w, d);
    // c * derivative of the smooth piece eps (1 - d) + u d
    let slope = |d: f64| g.ddelta_unchecked(d, nf) * (1.0 - d) - eps(d) + w.u;

    let numeric = |delta_star, bound, attained, residual| TransformResult {
        delta_star,
        bound,
        attained,
        method: Method::Numeric,
        stationarity_residual: residual,
    };

    let eps_one = eps(1.0);
    if g.is_delta_free() {
        return Ok(if eps_one < w.u {
            // objective (1/c)[eps + (u - eps) delta] grows linearly in delta
            numeric(
                DeltaStar::Limit(ZeroLimit::InfimumAtZero),
                eps_one / w.c,
                false,
                None,
            )
        } else {
            numeric(DeltaStar::At(1.0), eps_one / w.c, true, None)
        });
    }
    if eps_one >= w.u {
        return Ok(numeric(DeltaStar::At(1.0), eps_one / w.c, true, None));
    }

    let t_floor = DELTA_FLOOR.ln();
    let mut candidates: Vec<f64> = Vec::with_capacity(5);
    let (t_lo, has_kink) = if eps(DELTA_FLOOR) > w.u {
        let t0 = bisect_root(|t| eps(t.exp()) - w.u, t_floor, 0.0, MAX_ITERATIONS)
            .expect("eps - u changes sign on the search range");
        (t0, true)
    } else {
        (t_floor, false)
    };
    let delta_lo = t_lo.exp();

    if slope(delta_lo) < 0.0 && slope(1.0) > 0.0 {
        if let Some(t) = bisect_root(|t| slope(t.exp()), t_lo, 0.0, MAX_ITERATIONS) {
            candidates.push(t.exp());
        }
    }
    let brent = brent_minimize(|t| objective(t.exp()), t_lo, 0.0, LOG_XTOL, MAX_ITERATIONS);
    candidates.push(brent.x.exp());
    candidates.push(delta_lo);
    candidates.push(1.0);

    let mut best = candidates[0];
    let mut best_value = objective(best);
    for &d in &candidates[1..] {
        let value = objective(d);
        if value < best_value {
            best = d;
            best_value = value;
        }
    }

    if !has_kink && best == delta_lo && slope(delta_lo) > 0.0 {
        // still decreasing toward zero below the floor; rhs(floor) stays a valid bound
        return Ok(numeric(
            DeltaStar::Limit(ZeroLimit::InfimumAtZero),
            best_value,
            false,
            None,
        ));
    }
    Ok(numeric(
        DeltaStar::At(best),
        best_value,
        true,
        Some(slope(best)),
    ))
}

/// One row of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    #[serde(flatten)]
    pub result: TransformResult,
}

/// Runs [`optimize_delta`] for every sample size.
pub fn rate_table(g: &HpGuarantee, w: &WitnessParams, ns: &[u64]) -> Result<Vec<RateRow>> {
    rate_table_with(g, w, ns, Execution::default())
}

pub fn rate_table_with(
    g: &HpGuarantee,
    w: &WitnessParams,
    ns: &[u64],
    exec: Execution,
) -> Result<Vec<RateRow>> {
    if ns.is_empty() {
        return Err(BoundError::Empty("sample size list"));
    }
    parallel::map_ordered(exec, ns, |&n| {
        optimize_delta(g, w, n).map(|result| RateRow { n, result })
    })
    .into_iter()
    .collect()
}

/// Least-squares slope of `ln y` against `ln x`. `None` for fewer than two
/// points or nonpositive coordinates.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope of the optimized bound against `n` for a finished sweep.
pub fn rate_slope(rows: &[RateRow]) -> Option<f64> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.result.bound)).collect();
    loglog_slope(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simple() -> HpGuarantee {
        HpGuarantee::power_law(1.0, 1.0, 1.0).unwrap()
    }

    fn w(u: f64, c: f64) -> WitnessParams {
        WitnessParams::new(u, c).unwrap()
    }

    // Independent oracle: dense log-spaced plus linear grid.
    fn grid_min(g: &HpGuarantee, wp: &WitnessParams, n: u64, points: usize) -> f64 {
        let mut best = f64::INFINITY;
        let lo = DELTA_FLOOR.ln();
        for i in 0..points {
            let t = lo + (0.0 - lo) * i as f64 / (points - 1) as f64;
            let d = t.exp().min(1.0);
            best = best.min(hp_to_exp_at(g, wp, d, n).unwrap());
            let d = (i + 1) as f64 / points as f64;
            best = best.min(hp_to_exp_at(g, wp, d, n).unwrap());
        }
        best
    }

    #[test]
    fn effective_u_examples() {
        let wp = w(1.0, 1.0);
        let g = HpGuarantee::constant(0.1).unwrap();
        assert_eq!(effective_u(&wp, &g, 0.5, 10).unwrap(), 1.0);
        assert_eq!(effective_u(&w(0.05, 1.0), &g, 0.5, 10).unwrap(), 0.1);
        let u = effective_u(&wp, &simple(), 0.001, 10).unwrap();
        assert!((u - 100.0).abs() < 1e-9);
        assert!(effective_u(&wp, &simple(), 0.0, 10).is_err());
    }

    #[test]
    fn bound_at_fixed_delta() {
        let v = hp_to_exp_at(&simple(), &w(1.0, 1.0), 0.1, 100).unwrap();
        assert!((v - 0.19).abs() < 1e-15);
        // delta = 1 collapses to u
        let g = HpGuarantee::constant(0.3).unwrap();
        assert_eq!(hp_to_exp_at(&g, &w(2.0, 1.0), 1.0, 5).unwrap(), 2.0);
        // u = eps: the gap term vanishes
        assert_eq!(hp_to_exp_at(&g, &w(0.3, 1.0), 0.42, 5).unwrap(), 0.3);
    }

    #[test]
    fn bounded_witness() {
        assert_eq!(bounded_loss_witness(1.0).unwrap(), w(1.0, 1.0));
        assert_eq!(bounded_loss_witness(0.5).unwrap(), w(0.5, 1.0));
        assert!(bounded_loss_witness(0.0).is_err());
        assert!(bounded_loss_witness(-2.0).is_err());
    }

    #[test]
    fn simple_example_closed_form() {
        let r = optimize_delta(&simple(), &w(1.0, 1.0), 100).unwrap();
        assert_eq!(r.method, Method::ClosedForm);
        assert!(r.attained);
        assert!((r.delta_star.value().unwrap() - 0.1).abs() < 1e-15);
        assert!((r.bound - 0.19).abs() < 1e-15);
        let oracle = grid_min(&simple(), &w(1.0, 1.0), 100, 200_000);
        assert!(r.bound <= oracle + 1e-12);
    }

    #[test]
    fn closed_form_clamps_at_one() {
        // a/n = 4 > u: every delta has eps > u
        let g = HpGuarantee::power_law(40.0, 1.0, 1.0).unwrap();
        let r = optimize_delta(&g, &w(1.0, 0.5), 10).unwrap();
        assert_eq!(r.delta_star, DeltaStar::At(1.0));
        assert!((r.bound - 8.0).abs() < 1e-12);
        let num = optimize_delta_numeric(&g, &w(1.0, 0.5), 10).unwrap();
        assert!((num.bound - r.bound).abs() < 1e-12);
    }

    #[test]
    fn closed_and_numeric_agree() {
        for &(u, c, n) in &[
            (1.0, 1.0, 10u64),
            (1.0, 1.0, 100),
            (2.5, 0.3, 1_000),
            (0.7, 0.9, 1_000_000),
        ] {
            let wp = w(u, c);
            let closed = optimize_delta(&simple(), &wp, n).unwrap();
            let num = optimize_delta_numeric(&simple(), &wp, n).unwrap();
            let dc = closed.delta_star.value().unwrap();
            let dn = num.delta_star.value().unwrap();
            assert!((dn - dc).abs() / dc < 1e-6, "delta {dn} vs {dc}");
            assert!((num.bound - closed.bound).abs() / closed.bound < 1e-6);
        }
    }

    #[test]
    fn difficult_example_is_stationary() {
        let g = HpGuarantee::log_inverse(1.0, 1.0).unwrap();
        let r = optimize_delta(&g, &w(1.0, 1.0), 100).unwrap();
        assert_eq!(r.method, Method::Numeric);
        let d = r.delta_star.value().unwrap();
        let residual = -(1.0 - d) / d + 100.0 - (1.0 / d).ln();
        assert!(residual.abs() < 1e-6, "residual {residual}");
        assert!(r.bound <= grid_min(&g, &w(1.0, 1.0), 100, 200_000) + 1e-12);
    }

    #[test]
    fn constant_family_infimum_at_zero() {
        let g = HpGuarantee::constant(0.2).unwrap();
        let r = optimize_delta(&g, &w(1.0, 0.5), 50).unwrap();
        assert_eq!(r.delta_star, DeltaStar::Limit(ZeroLimit::InfimumAtZero));
        assert!(!r.attained);
        assert!((r.bound - 0.4).abs() < 1e-15);

        // eps >= u: constant objective, attained
        let r = optimize_delta(&HpGuarantee::constant(3.0).unwrap(), &w(1.0, 1.0), 50).unwrap();
        assert_eq!(r.delta_star, DeltaStar::At(1.0));
        assert!(r.attained);
        assert_eq!(r.bound, 3.0);
    }

    #[test]
    fn kink_minimum_is_found() {
        // steep tail plus a large constant: objective minimum sits on the kink
        let g = HpGuarantee::new(vec![
            GuaranteeTerm::PowerLaw {
                a: 1e-3,
                p: 2.0,
                q: 0.0,
            },
            GuaranteeTerm::Constant { a: 0.9 },
        ])
        .unwrap();
        let wp = w(1.0, 1.0);
        let r = optimize_delta(&g, &wp, 1).unwrap();
        let oracle = grid_min(&g, &wp, 1, 200_000);
        assert!(r.bound <= oracle + 1e-9, "{} vs {}", r.bound, oracle);
    }

    #[test]
    fn rate_table_shapes() {
        assert!(rate_table(&simple(), &w(1.0, 1.0), &[]).is_err());
        let rows = rate_table(&simple(), &w(1.0, 1.0), &[100, 10_000, 1_000_000]).unwrap();
        let slope = rate_slope(&rows).unwrap();
        assert!((slope + 0.5).abs() < 0.02, "slope {slope}");

        let rows = rate_table(
            &HpGuarantee::constant(2.0).unwrap(),
            &w(1.0, 1.0),
            &[10, 1000],
        )
        .unwrap();
        assert_eq!(rows[0].result.bound, rows[1].result.bound);
        assert!(rate_slope(&rows).unwrap().abs() < 1e-12);
        let single = rate_table(&simple(), &w(1.0, 1.0), &[10]).unwrap();
        assert_eq!(rate_slope(&single), None);
    }

    #[test]
    fn result_json() {
        let r = optimize_delta(&simple(), &w(1.0, 1.0), 100).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"method\":\"closed_form\""));
        assert_eq!(serde_json::from_str::<TransformResult>(&text).unwrap(), r);
        let r = optimize_delta(&HpGuarantee::constant(0.1).unwrap(), &w(1.0, 1.0), 5).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"delta_star\":\"infimum-at-zero\""));
        assert_eq!(serde_json::from_str::<TransformResult>(&text).unwrap(), r);
    }

    fn family() -> impl Strategy<Value = HpGuarantee> {
        let term = prop_oneof![
            (0.01f64..5.0, 0.1f64..2.5, 0.0f64..1.5)
                .prop_map(|(a, p, q)| GuaranteeTerm::PowerLaw { a, p, q }),
            (0.01f64..5.0, 0.0f64..1.5).prop_map(|(a, q)| GuaranteeTerm::LogInverse { a, q }),
            (0.0f64..2.0).prop_map(|a| GuaranteeTerm::Constant { a }),
        ];
        prop::collection::vec(term, 1..4).prop_map(|t| HpGuarantee::new(t).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn witness_gap_nonnegative(g in family(), u in 0.01f64..10.0, delta in 1e-9f64..1.0, n in 1u64..10_000) {
            let wp = w(u, 1.0);
            prop_assert!(effective_u(&wp, &g, delta, n).unwrap() - g.eval(delta, n).unwrap() >= 0.0);
        }

        #[test]
        fn optimum_dominates_random_probes(g in family(), u in 0.05f64..10.0, c in 0.05f64..1.0, n in 1u64..100_000, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let wp = w(u, c);
            let r = optimize_delta(&g, &wp, n).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let d: f64 = 1.0 - rng.random::<f64>();
                let v = hp_to_exp_at(&g, &wp, d, n).unwrap();
                prop_assert!(r.bound <= v + 1e-9, "bound {} beaten by {} at {}", r.bound, v, d);
            }
            if g.eval(1.0, n).unwrap() <= u {
                prop_assert!(r.bound <= hp_to_exp_at(&g, &wp, 1.0, n).unwrap() + 1e-12);
            }
        }

        #[test]
        fn monotone_in_c_and_u(g in family(), u in 0.05f64..5.0, du in 0.0f64..5.0, c1 in 0.05f64..1.0, c2 in 0.05f64..1.0, n in 1u64..10_000) {
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let b_lo = optimize_delta(&g, &w(u, lo), n).unwrap().bound;
            let b_hi = optimize_delta(&g, &w(u, hi), n).unwrap().bound;
            prop_assert!(b_hi <= b_lo * (1.0 + 1e-9) + 1e-12);
            let b_u = optimize_delta(&g, &w(u, hi), n).unwrap().bound;
            let b_big = optimize_delta(&g, &w(u + du, hi), n).unwrap().bound;
            prop_assert!(b_big >= b_u * (1.0 - 1e-9) - 1e-12);
        }
    }
}

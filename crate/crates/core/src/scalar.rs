//! One-dimensional minimization and root bracketing.

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Outcome of a bracketed scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method (golden section with parabolic steps) on `[a, b]`.
///
/// Stops when the bracket shrinks below `xtol`-relative width or after
/// `max_iter` iterations. Finds the global minimum for unimodal `f`.
pub fn brent_minimize<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> ScalarMin
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mid = 0.5 * (a + b);
        let tol1 = xtol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut golden_step = true;
        if e.abs() > tol1 {
            // parabolic fit through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let trial = x + d;
                if trial - a < tol2 || b - trial < tol2 {
                    d = tol1.copysign(mid - x);
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let step = if d.abs() >= tol1 { d } else { tol1.copysign(d) };
        let trial = x + step;
        let f_trial = f(trial);

        if f_trial <= fx {
            if trial >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = trial;
            fx = f_trial;
        } else {
            if trial < x {
                a = trial;
            } else {
                b = trial;
            }
            if f_trial <= fw || w == x {
                v = w;
                fv = fw;
                w = trial;
                fw = f_trial;
            } else if f_trial <= fv || v == x || v == w {
                v = trial;
                fv = f_trial;
            }
        }
    }

    ScalarMin { x, fx, iterations }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (zero counts as
/// either). Runs until the midpoint is no longer representable strictly
/// inside the bracket, or `max_iter` halvings.
pub fn bisect_root<F>(mut f: F, mut lo: f64, mut hi: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

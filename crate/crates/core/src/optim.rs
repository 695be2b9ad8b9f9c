//! Derivative-free scalar minimization on a closed interval.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Bounded Brent minimization (golden section with parabolic interpolation).
///
/// Converges when the bracket around the current best point shrinks below
/// `xatol` (plus a relative term at machine precision). Fails with
/// [`Error::NotConverged`] carrying the best iterate after `max_evals`.
pub fn minimize_bounded<F: FnMut(f64) -> f64>(
    mut f: F,
    lower: f64,
    upper: f64,
    xatol: f64,
    max_evals: usize,
) -> Result<ScalarMinimum> {
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!("empty interval [{lower}, {upper}]")));
    }
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (lower, upper);

    let mut fulc = a + golden * (b - a);
    let mut nfc = fulc;
    let mut xf = fulc;
    let mut rat: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut fx = f(xf);
    let mut evals = 1;
    let mut ffulc = fx;
    let mut fnfc = fx;
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
    let mut tol2 = 2.0 * tol1;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        let mut use_golden = true;
        if e.abs() > tol1 {
            use_golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            } else {
                use_golden = true;
            }
        }
        if use_golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden * e;
        }
        let step = if rat >= 0.0 { 1.0 } else { -1.0 } * rat.abs().max(tol1);
        let x = xf + step;
        let fu = f(x);
        evals += 1;

        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
        tol2 = 2.0 * tol1;
        if evals >= max_evals {
            return Err(Error::NotConverged { best: xf, iterations: evals });
        }
    }
    Ok(ScalarMinimum { x: xf, fx, evaluations: evals })
}

/// Minimizes a unimodal `f` on `[lower, upper]` starting from `init`: a short
/// downhill walk brackets the minimum, then [`minimize_bounded`] polishes it.
pub fn minimize_from<F: FnMut(f64) -> f64>(
    mut f: F,
    init: f64,
    lower: f64,
    upper: f64,
    xatol: f64,
    max_evals: usize,
) -> Result<ScalarMinimum> {
    let init = init.clamp(lower, upper);
    let step = 0.05;
    let mut evals = 0;
    let mut eval = |x: f64, evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let f0 = eval(init, &mut evals);
    let right = (init + step).min(upper);
    let fr = eval(right, &mut evals);
    let (lo, hi) = if fr < f0 {
        walk(&mut |x| eval(x, &mut evals), init, right, fr, step, upper)
    } else {
        let left = (init - step).max(lower);
        let fl = eval(left, &mut evals);
        if fl < f0 {
            walk(&mut |x| eval(x, &mut evals), init, left, fl, -step, lower)
        } else {
            (left, right)
        }
    };
    let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
    if hi - lo <= xatol {
        return Ok(ScalarMinimum { x: 0.5 * (lo + hi), fx: f(0.5 * (lo + hi)), evaluations: evals + 1 });
    }
    let mut m = minimize_bounded(&mut f, lo, hi, xatol, max_evals.saturating_sub(evals).max(1))?;
    m.evaluations += evals;
    Ok(m)
}

// Keeps stepping downhill with doubling steps until the value rises or the
// bound is reached; returns the bracket [previous point, last point].
fn walk(
    f: &mut dyn FnMut(f64) -> f64,
    start: f64,
    mut cur: f64,
    mut fcur: f64,
    mut step: f64,
    bound: f64,
) -> (f64, f64) {
    let mut prev = start;
    loop {
        if cur == bound {
            return (prev, cur);
        }
        step *= 2.0;
        let next = if step > 0.0 { (cur + step).min(bound) } else { (cur + step).max(bound) };
        let fnext = f(next);
        if fnext >= fcur {
            return (prev, next);
        }
        prev = cur;
        cur = next;
        fcur = fnext;
    }
}

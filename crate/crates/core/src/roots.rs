//! Bracketed root finding for monotone scalar functions.
//!
//! All interval estimates in this crate reduce to solving `f(mu) = target`
//! for a monotone `f`. The solver first grows a bracket until the target is
//! enclosed, then runs Brent's bisection/secant/inverse-quadratic hybrid.

use crate::error::{Error, Result};

/// Absolute tolerance on the root location used throughout the crate.
pub const DEFAULT_XTOL: f64 = 1e-12;

/// Number of bracket doublings attempted before giving up.
pub const MAX_DOUBLINGS: usize = 60;

const MAX_ITER: usize = 200;

/// Brent's method on `[a, b]`. `f(a)` and `f(b)` must differ in sign
/// (or one of them must be zero).
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut xpre, mut xcur) = (a, b);
    let (mut fpre, mut fcur) = (f(xpre), f(xcur));
    if fpre.is_nan() || fcur.is_nan() {
        return Err(Error::NoConvergence("function returned NaN at bracket end"));
    }
    if fpre == 0.0 {
        return Ok(xpre);
    }
    if fcur == 0.0 {
        return Ok(xcur);
    }
    if fpre.signum() == fcur.signum() {
        return Err(Error::NoConvergence("root not bracketed"));
    }

    let (mut xblk, mut fblk) = (0.0, 0.0);
    let (mut spre, mut scur) = (0.0, 0.0);
    for _ in 0..MAX_ITER {
        if fpre != 0.0 && fcur != 0.0 && fpre.signum() != fcur.signum() {
            xblk = xpre;
            fblk = fpre;
            spre = xcur - xpre;
            scur = spre;
        }
        if fblk.abs() < fcur.abs() {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }

        let delta = (xtol + 4.0 * f64::EPSILON * xcur.abs()) / 2.0;
        let sbis = (xblk - xcur) / 2.0;
        if fcur == 0.0 || sbis.abs() < delta {
            return Ok(xcur);
        }

        if spre.abs() > delta && fcur.abs() < fpre.abs() {
            let stry = if xpre == xblk {
                // secant
                -fcur * (xcur - xpre) / (fcur - fpre)
            } else {
                // inverse quadratic interpolation
                let dpre = (fpre - fcur) / (xpre - xcur);
                let dblk = (fblk - fcur) / (xblk - xcur);
                -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            };
            if 2.0 * stry.abs() < spre.abs().min(3.0 * sbis.abs() - delta) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }

        xpre = xcur;
        fpre = fcur;
        if scur.abs() > delta {
            xcur += scur;
        } else {
            xcur += if sbis > 0.0 { delta } else { -delta };
        }
        fcur = f(xcur);
        if fcur.is_nan() {
            return Err(Error::NoConvergence("function returned NaN"));
        }
    }
    Err(Error::NoConvergence("iteration limit reached"))
}

/// Solve `f(x) = target` for a monotone (either direction) `f`, starting from
/// the bracket `[lo, hi]` and doubling its width up to [`MAX_DOUBLINGS`] times
/// until the target is enclosed.
pub fn solve_monotone<F>(f: F, target: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64| f(x) - target;
    let (lo, hi) = expand_bracket(&g, lo, hi)?;
    brent(g, lo, hi, DEFAULT_XTOL)
}

/// Grow `[lo, hi]` about its centre until `g` changes sign across it.
pub fn expand_bracket<G>(g: &G, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::NoConvergence("invalid initial bracket"));
    }
    let centre = 0.5 * (lo + hi);
    let mut half = 0.5 * (hi - lo);
    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (g(a), g(b));
    for _ in 0..=MAX_DOUBLINGS {
        if ga.is_nan() || gb.is_nan() {
            return Err(Error::NoConvergence(
                "function returned NaN during bracketing",
            ));
        }
        if ga == 0.0 || gb == 0.0 || ga.signum() != gb.signum() {
            return Ok((a, b));
        }
        half *= 2.0;
        a = centre - half;
        b = centre + half;
        ga = g(a);
        gb = g(b);
    }
    Err(Error::NoConvergence(
        "target not bracketed after bracket expansion",
    ))
}

//! Sign-change bracketing on a geometric grid and bisection.

use crate::error::{Error, Result};

/// A bracket `[lo, hi]` with `f(lo) < 0 < f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Scans `start, start·growth, …` up to `limit` for the first point where `f`
/// turns positive after being negative. `f_before` is the value (or limit)
/// of `f` just below `start`.
pub fn bracket_upcrossing<F>(f: F, f_before: f64, start: f64, growth: f64, limit: f64) -> Result<Bracket>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(growth > 1.0 && start > 0.0 && limit >= start) {
        return Err(Error::InvalidParameter(format!(
            "bracketing needs growth > 1 and 0 < start <= limit (growth {growth}, start {start}, limit {limit})"
        )));
    }
    let (mut lo, mut f_lo) = (0.0, f_before);
    let mut x = start;
    loop {
        let fx = f(x)?;
        if f_lo < 0.0 && fx > 0.0 {
            return Ok(Bracket { lo, hi: x, f_lo, f_hi: fx });
        }
        if fx == 0.0 && f_lo < 0.0 {
            return Ok(Bracket { lo: x, hi: x, f_lo: fx, f_hi: fx });
        }
        if x >= limit {
            return Err(Error::NoBracket { a_max: limit, last_value: fx });
        }
        lo = x;
        f_lo = fx;
        x = (x * growth).min(limit);
    }
}

/// Bisects `bracket` until its width is at most `tol` and returns the
/// midpoint of the final bracket.
pub fn bisect<F>(f: F, bracket: Bracket, tol: f64, max_iters: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let Bracket { mut lo, mut hi, .. } = bracket;
    for _ in 0..max_iters {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::InvalidParameter(format!(
            "bisection did not reach width {tol} within {max_iters} iterations (bracket [{lo}, {hi}])"
        )))
    }
}

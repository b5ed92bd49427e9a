//! Bracketed Newton iteration for monotone scalar equations.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on function evaluations for one root solve.
pub const MAX_ITERATIONS: usize = 200;

/// Solves `g(x) = target` for a strictly increasing `g` on `[lo, ∞)`.
///
/// `eval` returns `(g(x), g'(x))`. The caller guarantees `g(lo) <= target`.
/// `guess` seeds both the bracket search and the first Newton step. Newton
/// steps that leave the current bracket fall back to bisection, so the
/// iteration always terminates.
pub fn increasing_root<S, F>(
    mut eval: F,
    target: S,
    lo: S,
    guess: S,
    abs_tol: S,
    what: &'static str,
) -> Result<S>
where
    S: Real,
    F: FnMut(S) -> (S, S),
{
    let two = S::lit(2.0);
    let mut lo = lo;
    let mut hi = if guess > lo { guess } else { lo + S::one() };
    let mut evals = 0;

    // Grow the upper end until it brackets the root. `lo` moves up with it.
    let (mut v_hi, mut d_hi) = eval(hi);
    evals += 1;
    while v_hi - target < S::zero() {
        if evals >= MAX_ITERATIONS || !hi.is_finite() {
            return Err(Error::NoConvergence { what, iterations: evals });
        }
        lo = hi;
        hi = hi * two;
        let (v, d) = eval(hi);
        v_hi = v;
        d_hi = d;
        evals += 1;
    }
    if (v_hi - target).abs() <= abs_tol {
        return Ok(hi);
    }

    // For the concave maps solved here, Newton iterates approach the root
    // from below after the first step.
    let mut x = hi;
    let (mut v, mut d) = (v_hi, d_hi);
    loop {
        let r = v - target;
        if r.abs() <= abs_tol {
            return Ok(x);
        }
        if r < S::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= S::epsilon() * hi.abs().max(S::one()) * S::lit(4.0) {
            // Bracket collapsed to machine precision.
            return Ok(x);
        }
        let newton = if d > S::zero() { x - r / d } else { S::nan() };
        x = if newton > lo && newton < hi { newton } else { lo + width / two };
        if evals >= MAX_ITERATIONS {
            return Err(Error::NoConvergence { what, iterations: evals });
        }
        let (nv, nd) = eval(x);
        v = nv;
        d = nd;
        evals += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let x = increasing_root(|x: f64| (x * x * x, 3.0 * x * x), 27.0, 0.0, 1.0, 1e-13, "cube")
            .unwrap();
        assert!((x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn saturating_map_without_root_fails() {
        let err = increasing_root(|x: f64| (1.0 - (-x).exp(), (-x).exp()), 2.0, 0.0, 1.0, 1e-12, "sat")
            .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn flat_derivative_falls_back_to_bisection() {
        // g(x) = x for x<5, clamped derivative reported as zero.
        let x = increasing_root(|x: f64| (x, 0.0), 2.5, 0.0, 1.0, 1e-12, "flat").unwrap();
        assert!((x - 2.5).abs() < 1e-11);
    }
}

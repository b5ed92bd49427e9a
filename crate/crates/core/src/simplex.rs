//! Projection onto the capped capacity simplex and projected gradient
//! ascent over it, with spectral or curvature-scaled steps.
//!
//! The feasible set is `{x : lower <= x <= upper, sum(x) = total}`. Every
//! sizing problem in the crate (partition sizes, asymptotic capacity splits)
//! lives on such a set because hit rates increase in capacity, so the
//! capacity constraint is always active at an optimum.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Euclidean projection of `v` onto `{lower <= x <= upper, sum(x) = total}`.
///
/// Requires `sum(lower) <= total <= sum(upper)`.
pub fn project<S: Real>(v: &[S], lower: &[S], upper: &[S], total: S) -> Result<Vec<S>> {
    project_weighted(v, &vec![S::one(); v.len()], lower, upper, total)
}

/// Projection of `v` onto `{lower <= x <= upper, sum(x) = total}` in the norm
/// `sum_i w_i (x_i - v_i)^2`: `x_i = clamp(v_i - theta / w_i)` for the
/// `theta` that meets the total. Weights must be positive.
pub fn project_weighted<S: Real>(v: &[S], weights: &[S], lower: &[S], upper: &[S], total: S) -> Result<Vec<S>> {
    let n = v.len();
    if lower.len() != n || upper.len() != n || weights.len() != n {
        return Err(Error::Invalid("bound and weight vectors must match the point length".into()));
    }
    if weights.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
        return Err(Error::Invalid("projection weights must be finite and > 0".into()));
    }
    let lo_sum = S::kahan_sum(lower.iter().copied());
    let hi_sum = S::kahan_sum(upper.iter().copied());
    let slack = S::lit(1e-12) * total.abs().max(S::one());
    if lo_sum > total + slack || hi_sum < total - slack {
        return Err(Error::InfeasibleSplit(format!(
            "total {total} outside [{lo_sum}, {hi_sum}]"
        )));
    }
    let clamp = |x: S, i: usize| x.max(lower[i]).min(upper[i]);
    let at = |theta: S, i: usize| clamp(v[i] - theta / weights[i], i);
    let shifted_sum = |theta: S| S::kahan_sum((0..n).map(|i| at(theta, i)));

    // sum(clamp(v - theta / w)) is non-increasing in theta.
    let mut b = (0..n).map(|i| weights[i] * (v[i] - lower[i])).fold(S::neg_infinity(), S::max);
    // Below `a` every coordinate sits at its upper bound, or, when unbounded,
    // far enough above its lower bound that the sum exceeds `total`.
    let reach = total.abs() + S::kahan_sum(lower.iter().map(|l| l.abs())) + S::one();
    let mut a = (0..n)
        .map(|i| if upper[i].is_finite() { weights[i] * (v[i] - upper[i]) } else { weights[i] * (v[i] - lower[i] - reach) })
        .fold(S::infinity(), S::min);
    for _ in 0..400 {
        let mid = a + (b - a) / S::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if shifted_sum(mid) > total {
            a = mid;
        } else {
            b = mid;
        }
    }
    let theta = a + (b - a) / S::lit(2.0);
    let mut x: Vec<S> = (0..n).map(|i| at(theta, i)).collect();

    // Push the rounding residual onto coordinates that still have room.
    let mut residual = total - S::kahan_sum(x.iter().copied());
    for i in 0..n {
        if residual == S::zero() {
            break;
        }
        let room = if residual > S::zero() { upper[i] - x[i] } else { lower[i] - x[i] };
        let moved = if residual > S::zero() { residual.min(room) } else { residual.max(room) };
        x[i] = x[i] + moved;
        residual = residual - moved;
    }
    Ok(x)
}

/// Relative KKT residual of `x` for maximizing over the capped simplex with
/// gradient `g`.
///
/// Free coordinates must share a common marginal value `nu`; coordinates at
/// the lower bound may not exceed it and those at the upper bound may not
/// fall below it. The result is scaled by `|nu|`.
pub fn kkt_residual<S: Real>(x: &[S], g: &[S], lower: &[S], upper: &[S], total: S) -> S {
    let tol = S::lit(1e-9) * total.abs().max(S::one());
    let mut free = Vec::new();
    let mut at_lo = Vec::new();
    let mut at_hi = Vec::new();
    for i in 0..x.len() {
        if upper[i] - lower[i] <= tol {
            continue;
        }
        if x[i] <= lower[i] + tol {
            at_lo.push(g[i]);
        } else if x[i] >= upper[i] - tol {
            at_hi.push(g[i]);
        } else {
            free.push(g[i]);
        }
    }
    let scale = g.iter().fold(S::zero(), |m, v| m.max(v.abs())).max(S::min_positive_value());
    if free.is_empty() {
        let lo_max = at_lo.iter().copied().fold(S::neg_infinity(), S::max);
        let hi_min = at_hi.iter().copied().fold(S::infinity(), S::min);
        if lo_max == S::neg_infinity() || hi_min == S::infinity() {
            return S::zero();
        }
        return (lo_max - hi_min).max(S::zero()) / scale;
    }
    let nu = S::kahan_sum(free.iter().copied()) / S::count(free.len());
    let mut worst = free.iter().fold(S::zero(), |m, &v| m.max((v - nu).abs()));
    for &v in &at_lo {
        worst = worst.max(v - nu);
    }
    for &v in &at_hi {
        worst = worst.max(nu - v);
    }
    worst / nu.abs().max(scale * S::lit(1e-12)).max(S::min_positive_value())
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions<S> {
    pub kkt_tol: S,
    pub max_iters: usize,
    pub record_history: bool,
}

impl<S: Real> Default for AscentOptions<S> {
    fn default() -> Self {
        Self { kkt_tol: S::lit(1e-6), max_iters: 100_000, record_history: false }
    }
}

#[derive(Debug, Clone)]
pub struct AscentOutcome<S> {
    pub x: Vec<S>,
    pub value: S,
    pub gradient: Vec<S>,
    pub kkt_residual: S,
    pub iterations: usize,
    /// `(point, value)` per accepted iterate when requested.
    pub history: Vec<(Vec<S>, S)>,
}

/// Maximizes a smooth concave function over the capped simplex.
///
/// `eval` returns the value and gradient at a point, or an error when the
/// point lies outside the function's domain (treated as a rejected step).
/// Steps are spectral (Barzilai-Borwein) lengths with backtracking; a trial
/// point is accepted on the Armijo condition, or when the directional
/// derivative at the trial point is still non-negative, which for a concave
/// objective certifies an increase even below floating-point resolution of
/// the value.
pub fn maximize<S, F>(
    mut eval: F,
    x0: &[S],
    lower: &[S],
    upper: &[S],
    total: S,
    opts: &AscentOptions<S>,
) -> Result<AscentOutcome<S>>
where
    S: Real,
    F: FnMut(&[S]) -> Result<(S, Vec<S>)>,
{
    let mut x = project(x0, lower, upper, total)?;
    let (mut f, mut g) = eval(&x)?;
    let mut history = Vec::new();
    if opts.record_history {
        history.push((x.clone(), f));
    }
    let dot = |a: &[S], b: &[S]| S::kahan_sum(a.iter().zip(b).map(|(&p, &q)| p * q));

    let spread = |g: &[S]| {
        let mean = S::kahan_sum(g.iter().copied()) / S::count(g.len().max(1));
        g.iter().fold(S::zero(), |m, &v| m.max((v - mean).abs()))
    };
    // Steps moving further than the feasible set is wide only lose precision
    // in the projection.
    let diameter = (0..x.len())
        .map(|i| upper[i] - lower[i])
        .filter(|r| r.is_finite())
        .fold(total.abs(), S::max)
        .max(S::min_positive_value());
    let step_cap = |g: &[S]| {
        let s = spread(g);
        if s > S::zero() { S::lit(4.0) * diameter / s } else { S::lit(1e30) }
    };
    let mut step = if spread(&g) > S::zero() {
        S::lit(0.01) * total.abs().max(S::one()) / spread(&g)
    } else {
        S::one()
    };

    for iteration in 0..opts.max_iters {
        let res = kkt_residual(&x, &g, lower, upper, total);
        if res <= opts.kkt_tol {
            return Ok(AscentOutcome { x, value: f, gradient: g, kkt_residual: res, iterations: iteration, history });
        }
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<S> = x.iter().zip(&g).map(|(&xi, &gi)| xi + step * gi).collect();
            let y = project(&trial, lower, upper, total)?;
            let d: Vec<S> = y.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            if d.iter().all(|v| *v == S::zero()) {
                step = step * S::lit(4.0);
                continue;
            }
            match eval(&y) {
                Ok((_, gy)) if gy.iter().any(|v| !v.is_finite()) => {}
                Ok((fy, gy)) => {
                    let gd = dot(&g, &d);
                    let armijo = fy >= f + S::lit(1e-4) * gd;
                    let forward = dot(&gy, &d) >= S::zero() && fy >= f - S::epsilon() * f.abs() * S::lit(16.0);
                    if armijo || forward {
                        accepted = Some((y, fy, gy, d));
                        break;
                    }
                }
                Err(Error::Domain(_)) | Err(Error::CapacityExceedsCatalog { .. }) => {}
                Err(e) => return Err(e),
            }
            step = step * S::lit(0.5);
        }
        let Some((y, fy, gy, d)) = accepted else {
            // No ascent possible at working precision.
            let res = kkt_residual(&x, &g, lower, upper, total);
            if res <= opts.kkt_tol * S::lit(100.0) {
                return Ok(AscentOutcome { x, value: f, gradient: g, kkt_residual: res, iterations: iteration, history });
            }
            return Err(Error::NoConvergence { what: "projected gradient line search", iterations: iteration });
        };
        let dg: Vec<S> = gy.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let curvature = -dot(&d, &dg);
        step = if curvature > S::zero() { dot(&d, &d) / curvature } else { step * S::lit(2.0) };
        step = step.max(S::lit(1e-30)).min(step_cap(&gy));
        x = y;
        f = fy;
        g = gy;
        if opts.record_history {
            history.push((x.clone(), f));
        }
    }
    Err(Error::NoConvergence { what: "projected gradient ascent", iterations: opts.max_iters })
}

/// Maximizes a smooth concave function over the capped simplex with
/// diagonally scaled steps.
///
/// `eval` returns the value, the gradient and the curvature `-d^2f/dx_i^2`
/// of every coordinate. Each step projects `x + s g / c` in the `c`-weighted
/// norm, which is a projected Newton step when the Hessian is diagonal, and
/// backtracks on `s` from 1. Curvatures are floored at a small fraction of
/// the largest one; acceptance rules are those of [`maximize`].
pub fn maximize_scaled<S, F>(
    mut eval: F,
    x0: &[S],
    lower: &[S],
    upper: &[S],
    total: S,
    opts: &AscentOptions<S>,
) -> Result<AscentOutcome<S>>
where
    S: Real,
    F: FnMut(&[S]) -> Result<(S, Vec<S>, Vec<S>)>,
{
    let mut x = project(x0, lower, upper, total)?;
    let (mut f, mut g, mut c) = eval(&x)?;
    let mut history = Vec::new();
    if opts.record_history {
        history.push((x.clone(), f));
    }
    let dot = |a: &[S], b: &[S]| S::kahan_sum(a.iter().zip(b).map(|(&p, &q)| p * q));
    let diameter = (0..x.len())
        .map(|i| upper[i] - lower[i])
        .filter(|r| r.is_finite())
        .fold(total.abs(), S::max)
        .max(S::min_positive_value());
    let weights = |c: &[S], g: &[S]| -> Vec<S> {
        let top = c.iter().copied().filter(|v| v.is_finite()).fold(S::zero(), S::max);
        // Without curvature, fall back to a step crossing the feasible set.
        let spread = g.iter().fold(S::zero(), |m, &v| m.max(v.abs())).max(S::min_positive_value());
        let floor = (top * S::lit(1e-9)).max(spread / diameter * S::lit(1e-3)).max(S::min_positive_value());
        c.iter().map(|&v| if v.is_finite() { v.max(floor) } else { floor }).collect()
    };

    for iteration in 0..opts.max_iters {
        let res = kkt_residual(&x, &g, lower, upper, total);
        if res <= opts.kkt_tol {
            return Ok(AscentOutcome { x, value: f, gradient: g, kkt_residual: res, iterations: iteration, history });
        }
        let w = weights(&c, &g);
        let mut s = S::one();
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<S> = (0..x.len()).map(|i| x[i] + s * g[i] / w[i]).collect();
            let y = project_weighted(&trial, &w, lower, upper, total)?;
            let d: Vec<S> = y.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            if d.iter().all(|v| *v == S::zero()) {
                break;
            }
            match eval(&y) {
                // An infinite marginal points back into the interior.
                Ok((_, gy, _)) if gy.iter().any(|v| !v.is_finite()) => {}
                Ok((fy, gy, cy)) => {
                    let gd = dot(&g, &d);
                    let armijo = fy >= f + S::lit(1e-4) * gd;
                    let forward = dot(&gy, &d) >= S::zero() && fy >= f - S::epsilon() * f.abs() * S::lit(16.0);
                    if armijo || forward {
                        accepted = Some((y, fy, gy, cy));
                        break;
                    }
                }
                Err(Error::Domain(_)) | Err(Error::CapacityExceedsCatalog { .. }) => {}
                Err(e) => return Err(e),
            }
            s = s * S::lit(0.5);
        }
        let Some((y, fy, gy, cy)) = accepted else {
            // No ascent possible at working precision.
            if res <= opts.kkt_tol * S::lit(100.0) {
                return Ok(AscentOutcome { x, value: f, gradient: g, kkt_residual: res, iterations: iteration, history });
            }
            return Err(Error::NoConvergence { what: "scaled projected gradient line search", iterations: iteration });
        };
        x = y;
        f = fy;
        g = gy;
        c = cy;
        if opts.record_history {
            history.push((x.clone(), f));
        }
    }
    Err(Error::NoConvergence { what: "scaled projected gradient ascent", iterations: opts.max_iters })
}

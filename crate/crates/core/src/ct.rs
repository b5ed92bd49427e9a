//! Characteristic-time approximation of LRU partitions.
//!
//! A partition of capacity `C` serving files with Poisson request rates `r_i`
//! has characteristic time `T`, the unique root of
//! `sum_i (1 - exp(-r_i T)) = C`. File `i` is then found in the cache with
//! probability `1 - exp(-r_i T)` and the partition's hit rate is
//! `h = sum_i r_i (1 - exp(-r_i T))`.

use crate::error::{Error, Result};
use crate::roots::increasing_root;
use crate::scalar::Real;

#[inline]
fn one_minus_exp_neg<S: Real>(x: S) -> S {
    -(-x).exp_m1()
}

/// Per-file request rates and a (real-valued) partition capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct CtProblem<S> {
    rates: Vec<S>,
    capacity: S,
}

impl<S: Real> CtProblem<S> {
    pub fn new(rates: Vec<S>, capacity: S) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Invalid("empty catalog".into()));
        }
        if rates.iter().any(|r| !(*r > S::zero()) || !r.is_finite()) {
            return Err(Error::Invalid("request rates must be finite and > 0".into()));
        }
        if !(capacity >= S::zero()) || !capacity.is_finite() {
            return Err(Error::Invalid(format!("capacity {capacity} must be >= 0")));
        }
        Ok(Self { rates, capacity })
    }

    pub fn rates(&self) -> &[S] {
        &self.rates
    }

    pub fn capacity(&self) -> S {
        self.capacity
    }

    pub fn with_capacity(&self, capacity: S) -> Result<Self> {
        Self::new(self.rates.clone(), capacity)
    }

    pub fn total_rate(&self) -> S {
        S::kahan_sum(self.rates.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtSolution<S> {
    pub time: S,
    pub hit_probs: Vec<S>,
    pub hit_rate: S,
}

/// `(sum_i (1 - e^{-r_i T}), sum_i r_i e^{-r_i T})`: expected occupancy and
/// its derivative in `T`.
pub fn occupancy<S: Real>(rates: &[S], time: S) -> (S, S) {
    let occ = S::kahan_sum(rates.iter().map(|&r| one_minus_exp_neg(r * time)));
    let slope = S::kahan_sum(rates.iter().map(|&r| r * (-r * time).exp()));
    (occ, slope)
}

/// Characteristic time for `rates` at `capacity`, Newton-refined from
/// `seed` (or the uniform-popularity closed form).
pub fn characteristic_time<S: Real>(rates: &[S], capacity: S, rel_tol: S, seed: Option<S>) -> Result<S> {
    let n = rates.len();
    if capacity >= S::count(n) {
        return Err(Error::CapacityExceedsCatalog { capacity: capacity.as_f64(), catalog: n });
    }
    if capacity <= S::zero() {
        return Ok(S::zero());
    }
    let nn = S::count(n);
    let total = S::kahan_sum(rates.iter().copied());
    let uniform = -(nn / total) * (-(capacity / nn)).ln_1p();
    let guess = match seed {
        Some(t) if t > S::zero() && t.is_finite() => t,
        _ => uniform,
    };
    let tol = rel_tol * capacity.max(S::one());
    increasing_root(|t| occupancy(rates, t), capacity, S::zero(), guess, tol, "characteristic time")
}

fn check_tol<S: Real>(rel_tol: S) -> Result<()> {
    if !(rel_tol > S::zero()) || rel_tol > S::lit(1e-3) {
        return Err(Error::Invalid(format!("rel_tol {rel_tol} outside (0, 1e-3]")));
    }
    Ok(())
}

/// Solves the characteristic-time equation.
///
/// The returned `T` satisfies `|sum(1 - e^{-r_i T}) - C| <= rel_tol * max(C, 1)`.
pub fn solve_ct<S: Real>(problem: &CtProblem<S>, rel_tol: S) -> Result<CtSolution<S>> {
    solve_ct_seeded(problem, rel_tol, None)
}

pub fn solve_ct_seeded<S: Real>(problem: &CtProblem<S>, rel_tol: S, seed: Option<S>) -> Result<CtSolution<S>> {
    check_tol(rel_tol)?;
    let time = characteristic_time(&problem.rates, problem.capacity, rel_tol, seed)?;
    let hit_probs: Vec<S> = problem.rates.iter().map(|&r| one_minus_exp_neg(r * time)).collect();
    let hit_rate = S::kahan_sum(problem.rates.iter().zip(&hit_probs).map(|(&r, &q)| r * q));
    Ok(CtSolution { time, hit_probs, hit_rate })
}

/// `h = sum_i r_i (1 - e^{-r_i T})`.
pub fn hit_rate<S: Real>(problem: &CtProblem<S>, solution: &CtSolution<S>) -> S {
    S::kahan_sum(problem.rates.iter().map(|&r| r * one_minus_exp_neg(r * solution.time)))
}

/// Hit rate of a partition of size `capacity`; `capacity >= n` saturates at
/// the total request rate.
pub fn saturating_hit_rate<S: Real>(rates: &[S], capacity: S, rel_tol: S) -> Result<S> {
    if capacity >= S::count(rates.len()) {
        return Ok(S::kahan_sum(rates.iter().copied()));
    }
    let p = CtProblem::new(rates.to_vec(), capacity)?;
    Ok(solve_ct(&p, rel_tol)?.hit_rate)
}

/// `dT/dC = 1 / sum_i r_i e^{-r_i T}`.
pub fn d_time_dc<S: Real>(rates: &[S], time: S) -> S {
    S::one() / occupancy(rates, time).1
}

/// Marginal hit rate `dh/dC = sum r_i^2 e^{-r_i T} / sum r_i e^{-r_i T}`.
///
/// At `C = 0` this is the analytic limit `sum r_i^2 / sum r_i`.
#[allow(non_snake_case)]
pub fn d_hit_rate_dC<S: Real>(problem: &CtProblem<S>, solution: &CtSolution<S>) -> Result<S> {
    if problem.capacity >= S::count(problem.rates.len()) {
        return Err(Error::CapacityExceedsCatalog { capacity: problem.capacity.as_f64(), catalog: problem.rates.len() });
    }
    Ok(marginal_hit_rate(&problem.rates, solution.time))
}

pub fn marginal_hit_rate<S: Real>(rates: &[S], time: S) -> S {
    let num = S::kahan_sum(rates.iter().map(|&r| r * r * (-r * time).exp()));
    let den = S::kahan_sum(rates.iter().map(|&r| r * (-r * time).exp()));
    num / den
}

/// Demand on one partition from several providers: provider `k` requests
/// file `i` at rate `lambda_{k,i}`; the partition sees `lambda_i = sum_k
/// lambda_{k,i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionDemand<S> {
    per_provider: Vec<(usize, Vec<S>)>,
    aggregate: Vec<S>,
}

impl<S: Real> PartitionDemand<S> {
    pub fn new(per_provider: Vec<(usize, Vec<S>)>) -> Result<Self> {
        let n = per_provider.first().map(|p| p.1.len()).ok_or_else(|| Error::Invalid("partition with no provider".into()))?;
        if per_provider.iter().any(|p| p.1.len() != n) {
            return Err(Error::Invalid("per-provider rate vectors must share one length".into()));
        }
        let mut ids: Vec<usize> = per_provider.iter().map(|p| p.0).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != per_provider.len() {
            return Err(Error::Invalid("provider listed twice in one partition".into()));
        }
        let aggregate: Vec<S> = (0..n).map(|i| S::kahan_sum(per_provider.iter().map(|p| p.1[i]))).collect();
        if per_provider.iter().flat_map(|p| p.1.iter()).any(|r| !(*r >= S::zero()) || !r.is_finite()) {
            return Err(Error::Invalid("per-provider rates must be finite and >= 0".into()));
        }
        if aggregate.iter().any(|r| !(*r > S::zero())) {
            return Err(Error::Invalid("every file in a partition needs a positive aggregate rate".into()));
        }
        Ok(Self { per_provider, aggregate })
    }

    /// Single-provider partition.
    pub fn single(provider: usize, rates: Vec<S>) -> Result<Self> {
        Self::new(vec![(provider, rates)])
    }

    pub fn per_provider(&self) -> &[(usize, Vec<S>)] {
        &self.per_provider
    }

    pub fn aggregate(&self) -> &[S] {
        &self.aggregate
    }

    pub fn files(&self) -> usize {
        self.aggregate.len()
    }

    pub fn rates_of(&self, provider: usize) -> Option<&[S]> {
        self.per_provider.iter().find(|p| p.0 == provider).map(|p| p.1.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRateSolution<S> {
    pub time: S,
    /// `(provider, h_k)` in the partition's provider order.
    pub hits: Vec<(usize, S)>,
    /// `(provider, dh_k/dC)`.
    pub marginals: Vec<(usize, S)>,
    /// `(provider, d^2 h_k/dC^2)`.
    pub curvatures: Vec<(usize, S)>,
}

impl<S: Real> MultiRateSolution<S> {
    pub fn total(&self) -> S {
        S::kahan_sum(self.hits.iter().map(|h| h.1))
    }
}

/// Per-provider hit rates of a shared partition: one characteristic time
/// for the aggregate rates, provider `k` collecting
/// `sum_i lambda_{k,i} (1 - e^{-lambda_i T})`.
pub fn multi_rate_hit_rates<S: Real>(demand: &PartitionDemand<S>, capacity: S, rel_tol: S) -> Result<MultiRateSolution<S>> {
    multi_rate_seeded(demand, capacity, rel_tol, None)
}

pub fn multi_rate_seeded<S: Real>(demand: &PartitionDemand<S>, capacity: S, rel_tol: S, seed: Option<S>) -> Result<MultiRateSolution<S>> {
    check_tol(rel_tol)?;
    if !(capacity >= S::zero()) {
        return Err(Error::Invalid(format!("capacity {capacity} must be >= 0")));
    }
    let agg = &demand.aggregate;
    let time = characteristic_time(agg, capacity, rel_tol, seed)?;
    let decay: Vec<S> = agg.iter().map(|&l| (-l * time).exp()).collect();
    // dC/dT = m1 and d^2C/dT^2 = -m2.
    let m1 = S::kahan_sum(agg.iter().zip(&decay).map(|(&l, &e)| l * e));
    let m2 = S::kahan_sum(agg.iter().zip(&decay).map(|(&l, &e)| l * l * e));
    let mut hits = Vec::with_capacity(demand.per_provider.len());
    let mut marginals = Vec::with_capacity(demand.per_provider.len());
    let mut curvatures = Vec::with_capacity(demand.per_provider.len());
    for (k, rates) in &demand.per_provider {
        let h = S::kahan_sum(rates.iter().zip(agg).map(|(&r, &l)| r * one_minus_exp_neg(l * time)));
        let a = S::kahan_sum(rates.iter().zip(agg).zip(&decay).map(|((&r, &l), &e)| r * l * e));
        let b = S::kahan_sum(rates.iter().zip(agg).zip(&decay).map(|((&r, &l), &e)| r * l * l * e));
        hits.push((*k, h));
        marginals.push((*k, a / m1));
        curvatures.push((*k, (a * m2 - b * m1) / (m1 * m1 * m1)));
    }
    Ok(MultiRateSolution { time, hits, marginals, curvatures })
}

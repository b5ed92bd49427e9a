//! Large-catalog limits of LRU caches with piecewise-linear popularity.
//!
//! Every quantity is expressed through a [`RateProfile`]: a list of atoms,
//! each a block of files of mass `m` (in units of the scale `n`) whose
//! files are all requested at the same normalized rate. Occupancy, hit
//! rates and their capacity derivatives are then finite sums of
//! exponentials, evaluated in closed form.

use std::fmt;

use crate::catalog::PiecewiseCdf;
use crate::error::{Error, Result};
use crate::roots::increasing_root;
use crate::scalar::Real;
use crate::simplex::{self, AscentOptions};
use crate::utility::UtilitySpec;

fn one_minus_exp_neg<S: Real>(x: S) -> S {
    -(-x).exp_m1()
}

fn solve_tol<S: Real>() -> S {
    S::lit(1e-13).max(S::epsilon() * S::lit(64.0))
}

/// Block of `mass` files, each requested by provider `k` at `rates[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<S> {
    pub mass: S,
    pub rates: Vec<S>,
    pub rate: S,
}

/// Asymptotic request profile of one cache partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile<S> {
    providers: usize,
    atoms: Vec<Atom<S>>,
}

/// Asymptotic state of a partition at a given capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileState<S> {
    /// Normalized characteristic time; `None` when the capacity holds every
    /// requested file.
    pub time: Option<S>,
    /// Hit rate per provider.
    pub hits: Vec<S>,
    /// `d hits_k / d capacity` per provider.
    pub marginals: Vec<S>,
}

impl<S: Real> ProfileState<S> {
    pub fn total_hits(&self) -> S {
        S::kahan_sum(self.hits.iter().copied())
    }

    pub fn total_marginal(&self) -> S {
        S::kahan_sum(self.marginals.iter().copied())
    }
}

impl<S: Real> RateProfile<S> {
    pub fn empty(providers: usize) -> Self {
        Self { providers, atoms: Vec::new() }
    }

    /// A single CDF with unit mass and unit total rate: atom rates are the
    /// segment slopes.
    pub fn from_cdf(cdf: &PiecewiseCdf<S>) -> Self {
        let mut p = Self::empty(1);
        p.add_set(S::one(), &[(0, S::one(), cdf)]);
        p
    }

    /// Adds a content set of `mass` whose files are requested by several
    /// providers, each `(provider, total rate, cdf over the set)`. The CDFs
    /// share the file ordering, so breakpoints are merged.
    pub fn add_set(&mut self, mass: S, demands: &[(usize, S, &PiecewiseCdf<S>)]) -> &mut Self {
        let mut xs: Vec<S> = demands.iter().flat_map(|(_, _, c)| c.points().iter().map(|p| p.0)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        xs.dedup();
        for w in xs.windows(2) {
            let width = w[1] - w[0];
            if width <= S::zero() {
                continue;
            }
            let mut rates = vec![S::zero(); self.providers];
            for &(k, rate, cdf) in demands {
                let slope = (cdf.eval(w[1]) - cdf.eval(w[0])) / width;
                rates[k] = rates[k] + rate * slope / mass;
            }
            let rate = S::kahan_sum(rates.iter().copied());
            self.atoms.push(Atom { mass: mass * width, rates, rate });
        }
        self
    }

    pub fn atoms(&self) -> &[Atom<S>] {
        &self.atoms
    }

    pub fn providers(&self) -> usize {
        self.providers
    }

    pub fn mass(&self) -> S {
        S::kahan_sum(self.atoms.iter().map(|a| a.mass))
    }

    /// Mass of files with a positive request rate: the largest capacity
    /// that can ever be filled.
    pub fn support(&self) -> S {
        S::kahan_sum(self.atoms.iter().filter(|a| a.rate > S::zero()).map(|a| a.mass))
    }

    pub fn total_rates(&self) -> Vec<S> {
        (0..self.providers).map(|k| S::kahan_sum(self.atoms.iter().map(|a| a.mass * a.rates[k]))).collect()
    }

    /// `(sum m (1 - e^{-r t}), sum m r e^{-r t})`.
    pub fn occupancy(&self, time: S) -> (S, S) {
        let occ = S::kahan_sum(self.atoms.iter().map(|a| a.mass * one_minus_exp_neg(a.rate * time)));
        let slope = S::kahan_sum(self.atoms.iter().map(|a| a.mass * a.rate * (-a.rate * time).exp()));
        (occ, slope)
    }

    /// Normalized miss rate `sum m r e^{-r t}` over all providers.
    pub fn miss_rate(&self, time: S) -> S {
        self.occupancy(time).1
    }

    /// Characteristic time at `capacity`, `None` when everything fits.
    pub fn solve_time(&self, capacity: S) -> Result<Option<S>> {
        if !(capacity >= S::zero()) {
            return Err(Error::Invalid(format!("capacity {capacity} must be >= 0")));
        }
        let support = self.support();
        if capacity >= support {
            return Ok(None);
        }
        if capacity == S::zero() {
            return Ok(Some(S::zero()));
        }
        let total = S::kahan_sum(self.atoms.iter().map(|a| a.mass * a.rate));
        let guess = -(support / total) * (-(capacity / support)).ln_1p();
        let tol = solve_tol::<S>() * capacity.max(S::one());
        increasing_root(|t| self.occupancy(t), capacity, S::zero(), guess, tol, "asymptotic characteristic time").map(Some)
    }

    pub fn state(&self, capacity: S) -> Result<ProfileState<S>> {
        let Some(t) = self.solve_time(capacity)? else {
            return Ok(ProfileState { time: None, hits: self.total_rates(), marginals: vec![S::zero(); self.providers] });
        };
        let den = self.occupancy(t).1;
        let per = |f: &dyn Fn(&Atom<S>, S) -> S| -> Vec<S> {
            (0..self.providers).map(|k| S::kahan_sum(self.atoms.iter().map(|a| f(a, a.rates[k])))).collect()
        };
        let hits = per(&|a, r| a.mass * r * one_minus_exp_neg(a.rate * t));
        let marginals = per(&|a, r| a.mass * r * a.rate * (-a.rate * t).exp() / den);
        Ok(ProfileState { time: Some(t), hits, marginals })
    }
}

/// `beta(tau) = int (1 - e^{-F'(x) tau}) dx`.
pub fn beta_of_tau<S: Real>(cdf: &PiecewiseCdf<S>, tau: S) -> S {
    S::kahan_sum(cdf.segments().map(|s| s.width * one_minus_exp_neg(s.slope * tau)))
}

/// `mu(tau) = int F'(x) e^{-F'(x) tau} dx`, the limiting miss probability.
pub fn mu_of_tau<S: Real>(cdf: &PiecewiseCdf<S>, tau: S) -> S {
    S::kahan_sum(cdf.segments().map(|s| s.width * s.slope * (-s.slope * tau).exp()))
}

/// Window size `tau` with `beta(tau) = beta`.
pub fn solve_tau<S: Real>(cdf: &PiecewiseCdf<S>, beta: S) -> Result<S> {
    solve_profile_tau(&RateProfile::from_cdf(cdf), beta)
}

/// As [`solve_tau`] for a general profile with normalized capacity `beta`
/// of its mass.
pub fn solve_profile_tau<S: Real>(profile: &RateProfile<S>, beta: S) -> Result<S> {
    if !(beta >= S::zero() && beta < S::one()) {
        return Err(Error::Invalid(format!("beta {beta} outside [0, 1)")));
    }
    profile.solve_time(beta * profile.mass())?.ok_or_else(|| {
        Error::Invalid(format!("beta {beta} exceeds the fraction of requested files"))
    })
}

/// One content class of a shared cache: popularity `cdf`, `mass` files per
/// unit scale and a `share` of the total request rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticClass<S> {
    pub cdf: PiecewiseCdf<S>,
    pub mass: u32,
    pub share: S,
}

/// Several classes sharing one cache of normalized size `beta` (fraction of
/// all content).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticWorkload<S> {
    classes: Vec<AsymptoticClass<S>>,
    beta: S,
}

/// Shared-cache limit: window size and miss probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedLimit<S> {
    pub tau: S,
    /// Aggregate miss probability.
    pub miss: S,
    /// Miss probability of each class's own requests.
    pub class_miss: Vec<S>,
}

/// Per-class partitions reproducing the shared cache.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit<S> {
    /// Window size of each class's own partition.
    pub tau: Vec<S>,
    /// Fraction of each class's content held.
    pub beta: Vec<S>,
    /// Partition sizes `b_k beta_k`, summing to `beta * B`.
    pub capacity: Vec<S>,
    /// Hit probability of each class's requests.
    pub hit: Vec<S>,
}

impl<S: Real> AsymptoticWorkload<S> {
    pub fn new(classes: Vec<AsymptoticClass<S>>, beta: S) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Invalid("at least one class required".into()));
        }
        if classes.iter().any(|c| c.mass == 0) {
            return Err(Error::Invalid("class masses must be >= 1".into()));
        }
        if classes.iter().any(|c| !(c.share >= S::zero())) {
            return Err(Error::Invalid("rate shares must be >= 0".into()));
        }
        let total = S::kahan_sum(classes.iter().map(|c| c.share));
        if (total - S::one()).abs() > S::lit(1e-12).max(S::epsilon() * S::lit(16.0)) {
            return Err(Error::NormalizationFailure { sum: total.as_f64() });
        }
        if !(beta >= S::zero() && beta < S::one()) {
            return Err(Error::Invalid(format!("beta {beta} outside [0, 1)")));
        }
        Ok(Self { classes, beta })
    }

    pub fn classes(&self) -> &[AsymptoticClass<S>] {
        &self.classes
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn total_mass(&self) -> S {
        S::count(self.classes.iter().map(|c| c.mass as usize).sum())
    }

    /// Profile of the shared cache, one provider per class, unit total rate.
    pub fn profile(&self) -> RateProfile<S> {
        let mut p = RateProfile::empty(self.classes.len());
        for (k, c) in self.classes.iter().enumerate() {
            p.add_set(S::count(c.mass as usize), &[(k, c.share, &c.cdf)]);
        }
        p
    }

    /// The classes laid end to end on `[0, 1]`: class `k` occupies a
    /// sub-interval of length `b_k / B` and carries probability `a_k`.
    pub fn merged_cdf(&self) -> Result<PiecewiseCdf<S>> {
        let total = self.total_mass();
        let mut points = vec![(S::zero(), S::zero())];
        let (mut start, mut below) = (S::zero(), S::zero());
        for c in &self.classes {
            let b = S::count(c.mass as usize);
            for &(x, f) in &c.cdf.points()[1..] {
                points.push(((start + b * x) / total, below + c.share * f));
            }
            start = start + b;
            below = below + c.share;
        }
        let last = points.len() - 1;
        points[last] = (S::one(), S::one());
        PiecewiseCdf::new(points)
    }

    /// Window size and miss probabilities of the shared cache.
    pub fn shared_limit(&self) -> Result<SharedLimit<S>> {
        let profile = self.profile();
        let total = self.total_mass();
        let time = solve_profile_tau(&profile, self.beta)?;
        let state = profile.state(self.beta * total)?;
        let class_miss = self
            .classes
            .iter()
            .zip(&state.hits)
            .map(|(c, &h)| if c.share > S::zero() { S::one() - h / c.share } else { S::zero() })
            .collect();
        Ok(SharedLimit { tau: time / total, miss: profile.miss_rate(time), class_miss })
    }

    /// Dedicated per-class partitions with windows `tau_k = a_k B tau / b_k`,
    /// which reproduce every class's shared-cache hit probability.
    pub fn sharing_equivalent_split(&self) -> Result<ClassSplit<S>> {
        let shared = self.shared_limit()?;
        let total = self.total_mass();
        let mut split = ClassSplit { tau: vec![], beta: vec![], capacity: vec![], hit: vec![] };
        for c in &self.classes {
            let b = S::count(c.mass as usize);
            let tau = c.share * total * shared.tau / b;
            let beta = beta_of_tau(&c.cdf, tau);
            split.tau.push(tau);
            split.beta.push(beta);
            split.capacity.push(b * beta);
            split.hit.push(S::one() - mu_of_tau(&c.cdf, tau));
        }
        Ok(split)
    }

    /// Hit probability of each class when class `k` owns a partition of
    /// `capacity[k]` (in units of the scale).
    pub fn partitioned_hits(&self, capacity: &[S]) -> Result<Vec<S>> {
        if capacity.len() != self.classes.len() {
            return Err(Error::InfeasibleSplit(format!("{} sizes for {} classes", capacity.len(), self.classes.len())));
        }
        self.classes
            .iter()
            .zip(capacity)
            .map(|(c, &cap)| {
                let b = S::count(c.mass as usize);
                let state = RateProfile::from_cdf(&c.cdf).state(cap / b)?;
                Ok(state.hits[0])
            })
            .collect()
    }

    /// Maximizes `sum_k U_k(rate * a_k * hit_k)` over per-class partition
    /// sizes, starting from the sharing-equivalent split. Returns the sizes
    /// and the objective.
    pub fn optimize_class_split(&self, utilities: &[UtilitySpec<S>], rate: S, kkt_tol: S) -> Result<(Vec<S>, S)> {
        if utilities.len() != self.classes.len() {
            return Err(Error::Invalid(format!("{} utilities for {} classes", utilities.len(), self.classes.len())));
        }
        let start = self.sharing_equivalent_split()?.capacity;
        let profiles: Vec<RateProfile<S>> = self.classes.iter().map(|c| RateProfile::from_cdf(&c.cdf)).collect();
        let masses: Vec<S> = self.classes.iter().map(|c| S::count(c.mass as usize)).collect();
        let lower = vec![S::zero(); start.len()];
        let upper: Vec<S> =
            profiles.iter().zip(&masses).map(|(p, &b)| b * p.support() * (S::one() - S::lit(1e-9))).collect();
        let eval = |x: &[S]| -> Result<(S, Vec<S>)> {
            let mut value = S::zero();
            let mut grad = Vec::with_capacity(x.len());
            for k in 0..x.len() {
                let state = profiles[k].state(x[k] / masses[k])?;
                let h = rate * self.classes[k].share * state.hits[0];
                value = value + utilities[k].value(h)?;
                let dh = rate * self.classes[k].share * state.marginals[0] / masses[k];
                grad.push(utilities[k].derivative(h)? * dh);
            }
            Ok((value, grad))
        };
        let opts = AscentOptions { kkt_tol, ..AscentOptions::default() };
        let out = simplex::maximize(eval, &start, &lower, &upper, self.beta * self.total_mass(), &opts)?;
        Ok((out.x, out.value))
    }
}

/// Ways of running one cache for providers that share some content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// One cache for everything.
    ShareAll,
    /// One partition per provider; shared content is duplicated.
    PerProvider,
    /// One partition for the shared content plus one per provider.
    SharedSlice,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ShareAll, Strategy::PerProvider, Strategy::SharedSlice];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::ShareAll => "S1",
            Strategy::PerProvider => "S2",
            Strategy::SharedSlice => "S3",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Demand of one provider on a content set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetRequests<S> {
    pub rate: S,
    pub cdf: PiecewiseCdf<S>,
}

/// Providers with one commonly served content set and one private set each.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedContentWorkload<S> {
    pub shared_mass: S,
    /// Requests of provider `k` into the shared set.
    pub shared: Vec<SetRequests<S>>,
    /// `(mass, requests)` of each provider's private set.
    pub private: Vec<(S, SetRequests<S>)>,
    /// Cache size as a fraction of all distinct content.
    pub beta: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult<S> {
    pub strategy: Strategy,
    /// Partition sizes in units of the scale.
    pub split: Vec<S>,
    /// Normalized characteristic time per partition (`None` if saturated).
    pub times: Vec<Option<S>>,
    /// Miss probability of each provider's requests.
    pub provider_miss: Vec<S>,
    pub hit_probability: S,
}

impl<S: Real> SharedContentWorkload<S> {
    pub fn validate(&self) -> Result<()> {
        let k = self.shared.len();
        if k == 0 || self.private.len() != k {
            return Err(Error::Invalid("need matching shared and private demands per provider".into()));
        }
        if !(self.shared_mass > S::zero()) || self.private.iter().any(|(m, _)| !(*m > S::zero())) {
            return Err(Error::Invalid("set masses must be > 0".into()));
        }
        let rates = self.shared.iter().chain(self.private.iter().map(|(_, r)| r));
        if rates.clone().any(|r| !(r.rate >= S::zero())) {
            return Err(Error::Invalid("request rates must be >= 0".into()));
        }
        if !(self.beta >= S::zero() && self.beta < S::one()) {
            return Err(Error::Invalid(format!("beta {} outside [0, 1)", self.beta)));
        }
        Ok(())
    }

    pub fn providers(&self) -> usize {
        self.shared.len()
    }

    /// Distinct content mass.
    pub fn total_mass(&self) -> S {
        self.shared_mass + S::kahan_sum(self.private.iter().map(|p| p.0))
    }

    pub fn capacity(&self) -> S {
        self.beta * self.total_mass()
    }

    pub fn provider_rates(&self) -> Vec<S> {
        self.shared.iter().zip(&self.private).map(|(s, (_, p))| s.rate + p.rate).collect()
    }

    fn shared_demands(&self) -> Vec<(usize, S, &PiecewiseCdf<S>)> {
        self.shared.iter().enumerate().map(|(k, r)| (k, r.rate, &r.cdf)).collect()
    }

    /// Partition profiles of a strategy.
    pub fn partitions(&self, strategy: Strategy) -> Vec<RateProfile<S>> {
        let k = self.providers();
        let private = |p: &mut RateProfile<S>, j: usize| {
            let (mass, req) = &self.private[j];
            p.add_set(*mass, &[(j, req.rate, &req.cdf)]);
        };
        match strategy {
            Strategy::ShareAll => {
                let mut p = RateProfile::empty(k);
                p.add_set(self.shared_mass, &self.shared_demands());
                (0..k).for_each(|j| private(&mut p, j));
                vec![p]
            }
            Strategy::PerProvider => (0..k)
                .map(|j| {
                    let mut p = RateProfile::empty(k);
                    p.add_set(self.shared_mass, &[(j, self.shared[j].rate, &self.shared[j].cdf)]);
                    private(&mut p, j);
                    p
                })
                .collect(),
            Strategy::SharedSlice => {
                let mut shared = RateProfile::empty(k);
                shared.add_set(self.shared_mass, &self.shared_demands());
                let mut parts = vec![shared];
                for j in 0..k {
                    let mut p = RateProfile::empty(k);
                    private(&mut p, j);
                    parts.push(p);
                }
                parts
            }
        }
    }

    /// Evaluates a strategy at the given partition sizes.
    pub fn evaluate(&self, strategy: Strategy, split: &[S]) -> Result<StrategyResult<S>> {
        self.validate()?;
        let parts = self.partitions(strategy);
        self.evaluate_parts(strategy, &parts, split)
    }

    fn evaluate_parts(&self, strategy: Strategy, parts: &[RateProfile<S>], split: &[S]) -> Result<StrategyResult<S>> {
        if split.len() != parts.len() {
            return Err(Error::InfeasibleSplit(format!("{strategy} needs {} sizes, got {}", parts.len(), split.len())));
        }
        let cap = self.capacity();
        let used = S::kahan_sum(split.iter().copied());
        if split.iter().any(|c| !(*c >= S::zero())) || used > cap + S::lit(1e-9) * cap.max(S::one()) {
            return Err(Error::InfeasibleSplit(format!("sizes sum to {used}, capacity is {cap}")));
        }
        let k = self.providers();
        let mut hits = vec![S::zero(); k];
        let mut times = Vec::with_capacity(parts.len());
        for (p, &c) in parts.iter().zip(split) {
            let state = p.state(c)?;
            for j in 0..k {
                hits[j] = hits[j] + state.hits[j];
            }
            times.push(state.time);
        }
        let rates = self.provider_rates();
        let total = S::kahan_sum(rates.iter().copied());
        let provider_miss =
            rates.iter().zip(&hits).map(|(&r, &h)| if r > S::zero() { S::one() - h / r } else { S::zero() }).collect();
        Ok(StrategyResult {
            strategy,
            split: split.to_vec(),
            times,
            provider_miss,
            hit_probability: S::kahan_sum(hits.iter().copied()) / total,
        })
    }

    /// Best aggregate hit probability of a strategy over its partition
    /// sizes, from 8 deterministic starts.
    pub fn optimize(&self, strategy: Strategy) -> Result<StrategyResult<S>> {
        self.validate()?;
        let parts = self.partitions(strategy);
        let cap = self.capacity();
        if parts.len() == 1 {
            return self.evaluate_parts(strategy, &parts, &[cap]);
        }
        let full: Vec<S> = parts.iter().map(|p| p.support()).collect();
        if S::kahan_sum(full.iter().copied()) <= cap {
            return self.evaluate_parts(strategy, &parts, &full);
        }
        // Stop short of saturation, where the right derivative drops to zero.
        let shrink = S::one() - S::lit(1e-10).max(S::epsilon() * S::lit(16.0));
        let upper: Vec<S> = full.iter().map(|&u| u * shrink).collect();
        let lower = vec![S::zero(); parts.len()];
        let eval = |x: &[S]| -> Result<(S, Vec<S>)> {
            let mut value = S::zero();
            let mut grad = Vec::with_capacity(x.len());
            for (p, &c) in parts.iter().zip(x) {
                let s = p.state(c)?;
                value = value + s.total_hits();
                grad.push(s.total_marginal());
            }
            Ok((value, grad))
        };
        let opts = AscentOptions { kkt_tol: S::lit(1e-10).max(S::epsilon() * S::lit(256.0)), ..AscentOptions::default() };
        let mut best: Option<Vec<S>> = None;
        let mut best_value = S::neg_infinity();
        for start in multistart(&upper, cap) {
            let out = simplex::maximize(eval, &start, &lower, &upper, cap, &opts)?;
            if out.value > best_value {
                best_value = out.value;
                best = Some(out.x);
            }
        }
        let split = best.expect("at least one start");
        self.evaluate_parts(strategy, &parts, &split)
    }
}

/// 8 deterministic feasible starting points: mass-proportional, then
/// low-discrepancy weightings of the partitions.
fn multistart<S: Real>(upper: &[S], total: S) -> Vec<Vec<S>> {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let lower = vec![S::zero(); upper.len()];
    (0..8)
        .map(|j| {
            let weights: Vec<S> = if j == 0 {
                upper.to_vec()
            } else {
                (0..upper.len())
                    .map(|i| {
                        let v = radical_inverse(j, PRIMES[i % PRIMES.len()]);
                        S::lit(0.05 + v) * upper[i]
                    })
                    .collect()
            };
            let sum = S::kahan_sum(weights.iter().copied());
            let guess: Vec<S> = weights.iter().map(|&w| w * total / sum).collect();
            simplex::project(&guess, &lower, upper, total).expect("total within bounds")
        })
        .collect()
}

fn radical_inverse(mut index: usize, base: f64) -> f64 {
    let b = base as usize;
    let (mut value, mut scale) = (0.0, 1.0 / base);
    while index > 0 {
        value += (index % b) as f64 * scale;
        index /= b;
        scale /= base;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use proptest::strategy::Strategy as Strategy_;

    fn two_piece(a: f64, b: f64) -> PiecewiseCdf<f64> {
        PiecewiseCdf::from_segments(&[(0.5, a), (0.5, b)]).unwrap()
    }

    /// Adaptive Simpson on `f` over `[a, b]`.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    /// Density by central difference of the CDF.
    fn density(cdf: &PiecewiseCdf<f64>, x: f64) -> f64 {
        let h = 1e-7;
        (cdf.eval(x + h) - cdf.eval(x - h)) / (2.0 * h)
    }

    #[test]
    fn uniform_window() {
        let u = PiecewiseCdf::<f64>::uniform();
        assert_relative_eq!(beta_of_tau(&u, 2f64.ln()), 0.5, epsilon = 1e-15);
        assert_eq!(mu_of_tau(&u, 0.0), 1.0);
        assert_relative_eq!(solve_tau(&u, 0.5).unwrap(), 2f64.ln(), max_relative = 1e-12);
        assert_eq!(solve_tau(&u, 0.0).unwrap(), 0.0);
        assert!(solve_tau(&u, 1.0).is_err());
    }

    #[test]
    fn two_segment_beta_matches_closed_form_and_quadrature() {
        let f = two_piece(2.0 / 11.0, 20.0 / 11.0);
        let exact = 0.5 * (1.0 - (-2.0f64 / 11.0).exp()) + 0.5 * (1.0 - (-20.0f64 / 11.0).exp());
        assert_relative_eq!(beta_of_tau(&f, 1.0), exact, epsilon = 1e-15);
        let beta_q = simpson(&|x| 1.0 - (-density(&f, x)).exp(), 0.0, 1.0, 1e-12);
        let mu_q = simpson(&|x| density(&f, x) * (-density(&f, x)).exp(), 0.0, 1.0, 1e-12);
        assert!((beta_q - exact).abs() < 1e-6);
        assert!((mu_q - mu_of_tau(&f, 1.0)).abs() < 1e-6);
    }

    #[test]
    fn flat_segments_cap_the_fillable_mass() {
        let f = PiecewiseCdf::from_segments(&[(0.5, 2.0), (0.5, 0.0)]).unwrap();
        let p = RateProfile::from_cdf(&f);
        assert_eq!(p.support(), 0.5);
        assert_eq!(p.solve_time(0.5).unwrap(), None);
        assert!(solve_tau(&f, 0.6).is_err());
        let t = solve_tau(&f, 0.25).unwrap();
        assert_relative_eq!(t, 2f64.ln() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn marginals_match_central_differences() {
        let mut p = RateProfile::empty(2);
        let (a, b) = (two_piece(0.4, 1.6), two_piece(1.9, 0.1));
        p.add_set(1.0, &[(0, 3.0, &a), (1, 5.0, &b)]);
        p.add_set(2.0, &[(1, 7.0, &PiecewiseCdf::uniform())]);
        let c = 1.3;
        let s = p.state(c).unwrap();
        let d = 1e-5;
        let (up, dn) = (p.state(c + d).unwrap(), p.state(c - d).unwrap());
        for k in 0..2 {
            let fd = (up.hits[k] - dn.hits[k]) / (2.0 * d);
            assert_relative_eq!(s.marginals[k], fd, max_relative = 1e-6);
        }
        assert_relative_eq!(p.total_rates()[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(p.total_rates()[1], 12.0, epsilon = 1e-14);
    }

    fn counterexample() -> SharedContentWorkload<f64> {
        let u = PiecewiseCdf::uniform();
        SharedContentWorkload {
            shared_mass: 1.0,
            shared: vec![
                SetRequests { rate: 1.1, cdf: two_piece(2.0 / 11.0, 20.0 / 11.0) },
                SetRequests { rate: 15.1, cdf: two_piece(300.0 / 151.0, 2.0 / 151.0) },
            ],
            private: vec![
                (1.0, SetRequests { rate: 20.0, cdf: u.clone() }),
                (1.0, SetRequests { rate: 30.0, cdf: u }),
            ],
            beta: 2.0 / 3.0,
        }
    }

    #[test]
    fn counterexample_strategies() {
        let w = counterexample();
        let s2 = w.optimize(Strategy::PerProvider).unwrap();
        let s3 = w.optimize(Strategy::SharedSlice).unwrap();
        let s1 = w.optimize(Strategy::ShareAll).unwrap();
        assert!((s2.hit_probability - 0.816).abs() < 0.005, "{}", s2.hit_probability);
        assert!((s3.hit_probability - 0.804).abs() < 0.005, "{}", s3.hit_probability);
        assert!(s3.hit_probability >= s1.hit_probability - 1e-9);
        assert_relative_eq!(s3.split.iter().sum::<f64>(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_capacity_misses_everything() {
        let mut w = counterexample();
        w.beta = 0.0;
        for s in Strategy::ALL {
            assert_eq!(w.optimize(s).unwrap().hit_probability, 0.0);
        }
    }

    #[test]
    fn infeasible_split_rejected() {
        let w = counterexample();
        assert!(matches!(w.evaluate(Strategy::SharedSlice, &[1.0, 1.0, 1.0]), Err(Error::InfeasibleSplit(_))));
        assert!(matches!(w.evaluate(Strategy::PerProvider, &[1.0]), Err(Error::InfeasibleSplit(_))));
    }

    fn class(cdf: PiecewiseCdf<f64>, mass: u32, share: f64) -> AsymptoticClass<f64> {
        AsymptoticClass { cdf, mass, share }
    }

    #[test]
    fn single_class_reduces_to_window() {
        let f = two_piece(0.3, 1.7);
        let w = AsymptoticWorkload::new(vec![class(f.clone(), 1, 1.0)], 0.4).unwrap();
        let lim = w.shared_limit().unwrap();
        let tau = solve_tau(&f, 0.4).unwrap();
        assert_relative_eq!(lim.tau, tau, max_relative = 1e-12);
        assert_relative_eq!(lim.miss, mu_of_tau(&f, tau), max_relative = 1e-12);
    }

    #[test]
    fn identical_classes_collapse() {
        let f = two_piece(0.3, 1.7);
        let w = AsymptoticWorkload::new(vec![class(f.clone(), 2, 0.5), class(f.clone(), 2, 0.5)], 0.4).unwrap();
        let single = AsymptoticWorkload::new(vec![class(f, 1, 1.0)], 0.4).unwrap();
        assert_relative_eq!(w.shared_limit().unwrap().miss, single.shared_limit().unwrap().miss, max_relative = 1e-12);
    }

    #[test]
    fn merged_cdf_agrees_with_class_sum() {
        let w = AsymptoticWorkload::new(
            vec![class(two_piece(0.3, 1.7), 1, 0.2), class(PiecewiseCdf::uniform(), 3, 0.5), class(two_piece(1.5, 0.5), 2, 0.3)],
            0.35,
        )
        .unwrap();
        let lim = w.shared_limit().unwrap();
        let merged = w.merged_cdf().unwrap();
        assert!((beta_of_tau(&merged, lim.tau) - 0.35).abs() < 1e-10);
        assert!((mu_of_tau(&merged, lim.tau) - lim.miss).abs() < 1e-10);
    }

    #[test]
    fn sharing_equivalent_split_reproduces_shared_cache() {
        let w = AsymptoticWorkload::new(vec![class(two_piece(0.3, 1.7), 1, 0.7), class(PiecewiseCdf::uniform(), 2, 0.3)], 0.5)
            .unwrap();
        let lim = w.shared_limit().unwrap();
        let split = w.sharing_equivalent_split().unwrap();
        assert_relative_eq!(split.capacity.iter().sum::<f64>(), 0.5 * 3.0, max_relative = 1e-10);
        for k in 0..2 {
            assert!((split.hit[k] - (1.0 - lim.class_miss[k])).abs() < 1e-9);
        }
        let hits = w.partitioned_hits(&split.capacity).unwrap();
        for k in 0..2 {
            assert!((hits[k] - split.hit[k]).abs() < 1e-9);
        }
        let utils = [UtilitySpec::log(), UtilitySpec::log()];
        let shared_value: f64 = (0..2).map(|k| (10.0 * w.classes()[k].share * split.hit[k]).ln()).sum();
        let (_, best) = w.optimize_class_split(&utils, 10.0, 1e-9).unwrap();
        assert!(best >= shared_value - 1e-12);
    }

    fn cdf_strategy() -> impl Strategy_<Value = PiecewiseCdf<f64>> {
        proptest::collection::vec((0.05f64..1.0, 0.0f64..3.0), 1..4).prop_map(|segs| {
            let wsum: f64 = segs.iter().map(|s| s.0).sum();
            let widths: Vec<f64> = segs.iter().map(|s| s.0 / wsum).collect();
            let mass: f64 = segs.iter().zip(&widths).map(|(s, w)| (s.1 + 0.01) * w).sum();
            let pairs: Vec<(f64, f64)> = segs.iter().zip(&widths).map(|(s, &w)| (w, (s.1 + 0.01) / mass)).collect();
            PiecewiseCdf::from_segments(&pairs).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn beta_increasing_mu_decreasing(f in cdf_strategy(), t in 0.0f64..20.0) {
            prop_assert!(beta_of_tau(&f, t + 0.01) > beta_of_tau(&f, t));
            prop_assert!(mu_of_tau(&f, t + 0.01) < mu_of_tau(&f, t));
            prop_assert!(beta_of_tau(&f, 0.0) == 0.0);
            prop_assert!((mu_of_tau(&f, 0.0) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn shared_slice_dominates_share_all(f0 in cdf_strategy(), g0 in cdf_strategy(), f1 in cdf_strategy(),
                                            rates in proptest::array::uniform4(0.1f64..20.0), beta in 0.05f64..0.9) {
            let w = SharedContentWorkload {
                shared_mass: 1.0,
                shared: vec![SetRequests { rate: rates[0], cdf: f0 }, SetRequests { rate: rates[1], cdf: g0 }],
                private: vec![(1.0, SetRequests { rate: rates[2], cdf: f1.clone() }), (2.0, SetRequests { rate: rates[3], cdf: f1 })],
                beta,
            };
            let s1 = w.optimize(Strategy::ShareAll).unwrap();
            let s3 = w.optimize(Strategy::SharedSlice).unwrap();
            prop_assert!(s3.hit_probability >= s1.hit_probability - 1e-9);
        }

        #[test]
        fn shared_slice_dominates_per_provider_for_equal_shared_popularity(
            f0 in cdf_strategy(), f1 in cdf_strategy(), f2 in cdf_strategy(),
            rates in proptest::array::uniform4(0.1f64..20.0), masses in proptest::array::uniform3(1u32..4), beta in 0.05f64..0.9) {
            let w = SharedContentWorkload {
                shared_mass: masses[0] as f64,
                shared: vec![SetRequests { rate: rates[0], cdf: f0.clone() }, SetRequests { rate: rates[1], cdf: f0 }],
                private: vec![(masses[1] as f64, SetRequests { rate: rates[2], cdf: f1 }), (masses[2] as f64, SetRequests { rate: rates[3], cdf: f2 })],
                beta,
            };
            let s2 = w.optimize(Strategy::PerProvider).unwrap();
            let s3 = w.optimize(Strategy::SharedSlice).unwrap();
            prop_assert!(s3.hit_probability >= s2.hit_probability - 1e-6, "{} < {}", s3.hit_probability, s2.hit_probability);
        }
    }
}

//! Offline partition sizing: utility maximization over partition sizes,
//! the sharing-equivalent plan, simple baselines and a price-based
//! decomposition.

use crate::catalog::{ContentGroup, Provider, ProviderSet};
use crate::fagin::Strategy;
use crate::ct::{self, PartitionDemand};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simplex::{self, AscentOptions};
use crate::utility::UtilitySpec;

/// Sizes of the partitions, in files, and the capacity they share.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan<S> {
    /// Providers served by each partition.
    pub members: Vec<ProviderSet>,
    pub sizes: Vec<S>,
    pub capacity: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumReport<S> {
    pub plan: PartitionPlan<S>,
    /// Hit rate of each provider.
    pub hit_rates: Vec<S>,
    pub objective: S,
    /// Relative spread of the marginal utilities of the free partitions.
    pub kkt_residual: S,
    pub iterations: usize,
    /// `(sizes, objective)` per accepted iterate when requested.
    pub history: Vec<(Vec<S>, S)>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions<S> {
    pub kkt_tol: S,
    pub max_iters: usize,
    /// Relative tolerance of every characteristic-time solve.
    pub ct_tol: S,
    /// Starting sizes; the sharing-equivalent plan when absent.
    pub start: Option<Vec<S>>,
    pub record_history: bool,
}

impl<S: Real> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            kkt_tol: S::lit(1e-6),
            max_iters: 100_000,
            ct_tol: S::lit(1e-11).max(S::epsilon() * S::lit(64.0)),
            start: None,
            record_history: false,
        }
    }
}

/// Hit rates, objective and size gradient of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvaluation<S> {
    pub hit_rates: Vec<S>,
    /// `hits[p][j]`: hit rate of the `j`-th provider of partition `p`.
    pub partition_hits: Vec<Vec<(usize, S)>>,
    pub objective: S,
    /// `dW/dC_p = sum_k U_k'(h_k) dh_{k,p}/dC_p`.
    pub gradient: Vec<S>,
    /// `-d^2W/dC_p^2`, non-negative for concave utilities.
    pub curvature: Vec<S>,
    /// Characteristic time per partition (`None` when it holds its whole
    /// catalog).
    pub times: Vec<Option<S>>,
}

fn provider_count<S: Real>(demands: &[PartitionDemand<S>]) -> usize {
    demands.iter().flat_map(|d| d.per_provider().iter().map(|p| p.0 + 1)).max().unwrap_or(0)
}

fn members_of<S: Real>(demand: &PartitionDemand<S>) -> ProviderSet {
    demand.per_provider().iter().fold(ProviderSet::empty(), |s, p| s.with(p.0))
}

/// Evaluates sizes `sizes[p]` for partitions `demands[p]`. `seeds` warm-starts
/// the characteristic-time solves and is updated in place.
pub fn evaluate_plan<S: Real>(
    demands: &[PartitionDemand<S>],
    utilities: &[UtilitySpec<S>],
    sizes: &[S],
    ct_tol: S,
    seeds: Option<&mut Vec<Option<S>>>,
) -> Result<PlanEvaluation<S>> {
    if sizes.len() != demands.len() {
        return Err(Error::Invalid(format!("{} sizes for {} partitions", sizes.len(), demands.len())));
    }
    let k = provider_count(demands);
    if utilities.len() < k {
        return Err(Error::Invalid(format!("{} utilities for {k} providers", utilities.len())));
    }
    let mut local = vec![None; demands.len()];
    let seeds = match seeds {
        Some(s) => {
            s.resize(demands.len(), None);
            s
        }
        None => &mut local,
    };
    let mut hit_rates = vec![S::zero(); utilities.len()];
    let mut partition_hits = Vec::with_capacity(demands.len());
    let mut marginals = Vec::with_capacity(demands.len());
    let mut second = Vec::with_capacity(demands.len());
    let mut times = Vec::with_capacity(demands.len());
    for (p, (d, &c)) in demands.iter().zip(sizes).enumerate() {
        if !(c >= S::zero()) {
            return Err(Error::Domain(format!("partition {p} size {c} is negative")));
        }
        if c >= S::count(d.files()) {
            let hits: Vec<(usize, S)> =
                d.per_provider().iter().map(|(k, r)| (*k, S::kahan_sum(r.iter().copied()))).collect();
            marginals.push(d.per_provider().iter().map(|(k, _)| (*k, S::zero())).collect::<Vec<_>>());
            second.push(d.per_provider().iter().map(|(k, _)| (*k, S::zero())).collect::<Vec<_>>());
            partition_hits.push(hits);
            times.push(None);
            continue;
        }
        let sol = ct::multi_rate_seeded(d, c, ct_tol, seeds[p])?;
        seeds[p] = Some(sol.time);
        times.push(Some(sol.time));
        partition_hits.push(sol.hits);
        marginals.push(sol.marginals);
        second.push(sol.curvatures);
    }
    for hits in &partition_hits {
        for &(k, h) in hits {
            hit_rates[k] = hit_rates[k] + h;
        }
    }
    let mut objective = S::zero();
    let mut slopes = Vec::with_capacity(utilities.len());
    let mut bends = Vec::with_capacity(utilities.len());
    for (u, &h) in utilities.iter().zip(&hit_rates) {
        objective = objective + u.value(h)?;
        slopes.push(u.derivative(h)?);
        bends.push(u.second_derivative(h)?);
    }
    let gradient = marginals.iter().map(|m| S::kahan_sum(m.iter().map(|&(k, d)| slopes[k] * d))).collect();
    let curvature = marginals
        .iter()
        .zip(&second)
        .map(|(m, c)| -S::kahan_sum(m.iter().zip(c).map(|(&(k, d), &(_, dd))| bends[k] * d * d + slopes[k] * dd)))
        .collect();
    Ok(PlanEvaluation { hit_rates, partition_hits, objective, gradient, curvature, times })
}

/// Maximizes `sum_k w_k U_k(h_k)` over partition sizes summing to
/// `capacity`, where partition `p` serves `demands[p]`.
pub fn optimize_grouped<S: Real>(
    demands: &[PartitionDemand<S>],
    utilities: &[UtilitySpec<S>],
    capacity: S,
    opts: &SolverOptions<S>,
) -> Result<OptimumReport<S>> {
    if !(capacity > S::zero()) {
        return Err(Error::Invalid(format!("capacity {capacity} must be > 0")));
    }
    let kept: Vec<usize> = (0..demands.len()).filter(|&p| demands[p].files() > 0).collect();
    let active: Vec<PartitionDemand<S>> = kept.iter().map(|&p| demands[p].clone()).collect();
    let files: Vec<S> = active.iter().map(|d| S::count(d.files())).collect();
    let catalog = S::kahan_sum(files.iter().copied());
    let members: Vec<ProviderSet> = demands.iter().map(members_of).collect();
    let expand = |x: &[S]| {
        let mut sizes = vec![S::zero(); demands.len()];
        for (i, &p) in kept.iter().enumerate() {
            sizes[p] = x[i];
        }
        sizes
    };

    if capacity >= catalog {
        let eval = evaluate_plan(&active, utilities, &files, opts.ct_tol, None)?;
        return Ok(OptimumReport {
            plan: PartitionPlan { members, sizes: expand(&files), capacity },
            hit_rates: eval.hit_rates,
            objective: eval.objective,
            kkt_residual: S::zero(),
            iterations: 0,
            history: Vec::new(),
        });
    }

    let lower = vec![S::zero(); active.len()];
    let upper: Vec<S> = files.iter().map(|&n| n * (S::one() - S::lit(1e-9))).collect();
    let start = match &opts.start {
        Some(s) => {
            if s.len() != demands.len() {
                return Err(Error::Invalid(format!("start has {} sizes for {} partitions", s.len(), demands.len())));
            }
            kept.iter().map(|&p| s[p]).collect()
        }
        None => sharing_equivalent_sizes(&active, capacity, opts.ct_tol)?,
    };
    let mut seeds = vec![None; active.len()];
    let eval = |x: &[S]| -> Result<(S, Vec<S>, Vec<S>)> {
        let e = evaluate_plan(&active, utilities, x, opts.ct_tol, Some(&mut seeds))?;
        Ok((e.objective, e.gradient, e.curvature))
    };
    let ascent = AscentOptions { kkt_tol: opts.kkt_tol, max_iters: opts.max_iters, record_history: opts.record_history };
    let out = simplex::maximize_scaled(eval, &start, &lower, &upper, capacity, &ascent)?;
    let final_eval = evaluate_plan(&active, utilities, &out.x, opts.ct_tol, None)?;
    Ok(OptimumReport {
        plan: PartitionPlan { members, sizes: expand(&out.x), capacity },
        hit_rates: final_eval.hit_rates,
        objective: final_eval.objective,
        kkt_residual: out.kkt_residual,
        iterations: out.iterations,
        history: out.history.into_iter().map(|(x, v)| (expand(&x), v)).collect(),
    })
}

/// One partition per provider.
pub fn distinct_demands<S: Real>(providers: &[Provider<S>]) -> Result<Vec<PartitionDemand<S>>> {
    providers.iter().enumerate().map(|(k, p)| PartitionDemand::single(k, p.file_rates()?)).collect()
}

/// [`optimize_grouped`] for providers serving disjoint content.
pub fn optimize_distinct<S: Real>(providers: &[Provider<S>], capacity: S, opts: &SolverOptions<S>) -> Result<OptimumReport<S>> {
    let demands = distinct_demands(providers)?;
    let utilities: Vec<UtilitySpec<S>> = providers.iter().map(|p| p.utility).collect();
    optimize_grouped(&demands, &utilities, capacity, opts)
}

/// Partition demands for content groups under a strategy: one cache for
/// everything, one partition per provider (shared files duplicated), or one
/// partition per group.
pub fn strategy_demands<S: Real>(groups: &[ContentGroup<S>], strategy: Strategy) -> Result<Vec<PartitionDemand<S>>> {
    let providers = groups.iter().flat_map(|g| g.members.iter()).max().map_or(0, |k| k + 1);
    let stacked = |keep: &dyn Fn(&ContentGroup<S>) -> bool, only: Option<usize>| -> Result<PartitionDemand<S>> {
        let chosen: Vec<&ContentGroup<S>> = groups.iter().filter(|g| keep(g)).collect();
        let per_provider = (0..providers)
            .filter(|&k| only.is_none_or(|o| o == k) && chosen.iter().any(|g| g.members.contains(k)))
            .map(|k| {
                let rates = chosen
                    .iter()
                    .flat_map(|g| match g.demand.rates_of(k) {
                        Some(r) => r.to_vec(),
                        None => vec![S::zero(); g.file_count()],
                    })
                    .collect();
                (k, rates)
            })
            .collect();
        PartitionDemand::new(per_provider)
    };
    match strategy {
        Strategy::ShareAll => Ok(vec![stacked(&|_| true, None)?]),
        Strategy::PerProvider => (0..providers).map(|k| stacked(&|g| g.members.contains(k), Some(k))).collect(),
        Strategy::SharedSlice => Ok(groups.iter().map(|g| g.demand.clone()).collect()),
    }
}

/// Characteristic time of one cache shared by every partition's content.
fn shared_time<S: Real>(demands: &[PartitionDemand<S>], capacity: S, ct_tol: S) -> Result<S> {
    let rates: Vec<S> = demands.iter().flat_map(|d| d.aggregate().iter().copied()).collect();
    ct::characteristic_time(&rates, capacity, ct_tol, None)
}

fn sharing_equivalent_sizes<S: Real>(demands: &[PartitionDemand<S>], capacity: S, ct_tol: S) -> Result<Vec<S>> {
    let t = shared_time(demands, capacity, ct_tol)?;
    let mut sizes: Vec<S> = demands.iter().map(|d| ct::occupancy(d.aggregate(), t).0).collect();
    // Absorb the solver residual so the sizes sum to the capacity exactly.
    let residual = capacity - S::kahan_sum(sizes.iter().copied());
    if let Some(big) = (0..sizes.len()).max_by(|&a, &b| sizes[a].partial_cmp(&sizes[b]).expect("finite sizes")) {
        sizes[big] = sizes[big] + residual;
    }
    Ok(sizes)
}

/// Partition sizes under which every provider sees exactly its hit rate in
/// one cache of size `capacity` shared by all content.
pub fn sharing_equivalent_plan<S: Real>(demands: &[PartitionDemand<S>], capacity: S, ct_tol: S) -> Result<PartitionPlan<S>> {
    Ok(PartitionPlan {
        members: demands.iter().map(members_of).collect(),
        sizes: sharing_equivalent_sizes(demands, capacity, ct_tol)?,
        capacity,
    })
}

/// Hit rate of each provider in one cache of size `capacity` holding all
/// content.
pub fn shared_hit_rates<S: Real>(demands: &[PartitionDemand<S>], capacity: S, ct_tol: S) -> Result<Vec<S>> {
    let t = shared_time(demands, capacity, ct_tol)?;
    let mut hits = vec![S::zero(); provider_count(demands)];
    for d in demands {
        for (k, rates) in d.per_provider() {
            let agg = d.aggregate();
            hits[*k] = hits[*k] + S::kahan_sum(rates.iter().zip(agg).map(|(&r, &a)| r * -(-a * t).exp_m1()));
        }
    }
    Ok(hits)
}

/// Hit rate of a cache pinned to the `capacity` most requested files.
pub fn static_caching_baseline<S: Real>(rates: &[S], capacity: usize) -> S {
    let mut sorted = rates.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite rates"));
    S::kahan_sum(sorted.into_iter().take(capacity))
}

/// Hit rate when each request independently goes to partition one with
/// probability `p` and to partition two otherwise, the partitions holding
/// `split.0` and `split.1` files of the same catalog.
pub fn probabilistic_routing_value<S: Real>(rates: &[S], split: (S, S), p: S, ct_tol: S) -> Result<S> {
    if !(S::zero()..=S::one()).contains(&p) {
        return Err(Error::Invalid(format!("routing probability {p} outside [0, 1]")));
    }
    let thinned = |q: S, c: S| -> Result<S> {
        if q == S::zero() {
            return Ok(S::zero());
        }
        let r: Vec<S> = rates.iter().map(|&x| q * x).collect();
        ct::saturating_hit_rate(&r, c, ct_tol)
    };
    Ok(thinned(p, split.0)? + thinned(S::one() - p, split.1)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketOutcome<S> {
    /// Payment of each provider.
    pub weights: Vec<S>,
    /// Unit price `w_k / h_k` each provider faces.
    pub prices: Vec<S>,
    pub report: OptimumReport<S>,
    /// Largest relative change of a payment in the final round.
    pub residual: S,
    pub rounds: usize,
}

/// Alternates provider best responses and the network's weighted-log
/// allocation until payments settle.
///
/// Provider `k` facing unit price `r_k` pays `w_k = argmax U_k(w / r_k) - w`;
/// the network then maximizes `sum w_k log h_k`, and prices are updated
/// (geometrically damped) to `w_k / h_k`. `price` is the initial price.
pub fn market_iteration<S: Real>(
    demands: &[PartitionDemand<S>],
    utilities: &[UtilitySpec<S>],
    capacity: S,
    price: S,
    rounds: usize,
    tol: S,
    opts: &SolverOptions<S>,
) -> Result<MarketOutcome<S>> {
    if !(price > S::zero()) {
        return Err(Error::Invalid(format!("price {price} must be > 0")));
    }
    if let Some(u) = utilities.iter().find(|u| !u.is_strictly_concave()) {
        return Err(Error::Invalid(format!("market needs strictly concave utilities, got {:?}", u.kind)));
    }
    let best_response = |u: &UtilitySpec<S>, r: S| -> Result<S> { Ok(r * u.inverse_derivative(r)?) };
    let mut prices = vec![price; utilities.len()];
    let mut weights: Vec<S> = utilities.iter().zip(&prices).map(|(u, &r)| best_response(u, r)).collect::<Result<_>>()?;
    let mut solver = opts.clone();
    for round in 1..=rounds {
        let logs: Vec<UtilitySpec<S>> = weights.iter().map(|&w| UtilitySpec::log().weighted(w)).collect();
        let report = optimize_grouped(demands, &logs, capacity, &solver)?;
        solver.start = Some(report.plan.sizes.clone());
        let half = S::lit(0.5);
        for k in 0..prices.len() {
            let target = weights[k] / report.hit_rates[k];
            prices[k] = (prices[k].ln() * half + target.ln() * half).exp();
        }
        let next: Vec<S> = utilities.iter().zip(&prices).map(|(u, &r)| best_response(u, r)).collect::<Result<_>>()?;
        let residual = next.iter().zip(&weights).fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs() / b));
        weights = next;
        if residual <= tol {
            let logs: Vec<UtilitySpec<S>> = weights.iter().map(|&w| UtilitySpec::log().weighted(w)).collect();
            let report = optimize_grouped(demands, &logs, capacity, &solver)?;
            return Ok(MarketOutcome { weights, prices, report, residual, rounds: round });
        }
    }
    Err(Error::NoConvergence { what: "market iteration", iterations: rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zipf_rates(n: usize, z: f64, rate: f64) -> Vec<f64> {
        let w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-z)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| rate * x / s).collect()
    }

    #[test]
    fn strategy_demands_shapes() {
        use crate::catalog::strided_overlap;
        let a = Provider::zipf(0, 3.0, 0.7, 30, UtilitySpec::log()).unwrap();
        let b = Provider::zipf(1, 2.0, 0.9, 40, UtilitySpec::log()).unwrap();
        let groups = strided_overlap(&a, &b, 3, 30, false).unwrap();
        let files = |d: &[PartitionDemand<f64>]| d.iter().map(|x| x.files()).collect::<Vec<_>>();
        let all = strategy_demands(&groups, Strategy::ShareAll).unwrap();
        assert_eq!(files(&all), vec![60]);
        assert_relative_eq!(all[0].aggregate().iter().sum::<f64>(), 5.0, epsilon = 1e-12);
        let per = strategy_demands(&groups, Strategy::PerProvider).unwrap();
        assert_eq!(files(&per), vec![30, 40]);
        assert_relative_eq!(per[1].aggregate().iter().sum::<f64>(), 2.0, epsilon = 1e-12);
        assert_eq!(files(&strategy_demands(&groups, Strategy::SharedSlice).unwrap()), vec![20, 30, 10]);
        // One cache for everything is the sharing-equivalent plan's hit rate.
        let shared = shared_hit_rates(&groups.iter().map(|g| g.demand.clone()).collect::<Vec<_>>(), 25.0, 1e-12).unwrap();
        let one = shared_hit_rates(&all, 25.0, 1e-12).unwrap();
        for k in 0..2 {
            assert_relative_eq!(shared[k], one[k], max_relative = 1e-10);
        }
    }

    #[test]
    fn identical_providers_split_evenly() {
        let d = vec![
            PartitionDemand::single(0, zipf_rates(200, 0.8, 5.0)).unwrap(),
            PartitionDemand::single(1, zipf_rates(200, 0.8, 5.0)).unwrap(),
        ];
        let u = [UtilitySpec::log(), UtilitySpec::log()];
        let r = optimize_grouped(&d, &u, 100.0, &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.plan.sizes[0], 50.0, max_relative = 1e-6);
        assert!(r.kkt_residual <= 1e-6);
        let share = sharing_equivalent_plan(&d, 100.0, 1e-11).unwrap();
        assert_relative_eq!(share.sizes[0], 50.0, max_relative = 1e-9);
    }

    #[test]
    fn whole_catalog_fits() {
        let d = vec![PartitionDemand::single(0, vec![1.0, 2.0]).unwrap(), PartitionDemand::single(1, vec![3.0]).unwrap()];
        let u = [UtilitySpec::linear(), UtilitySpec::linear()];
        let r = optimize_grouped(&d, &u, 5.0, &SolverOptions::default()).unwrap();
        assert_eq!(r.plan.sizes, vec![2.0, 1.0]);
        assert_eq!(r.objective, 6.0);
    }

    #[test]
    fn sharing_equivalent_reproduces_shared_hits() {
        let d = vec![
            PartitionDemand::single(0, zipf_rates(300, 0.6, 15.0)).unwrap(),
            PartitionDemand::single(1, zipf_rates(500, 0.9, 10.0)).unwrap(),
        ];
        let plan = sharing_equivalent_plan(&d, 250.0, 1e-12).unwrap();
        assert_relative_eq!(plan.sizes.iter().sum::<f64>(), 250.0, epsilon = 1e-9);
        let u = [UtilitySpec::linear(), UtilitySpec::linear()];
        let e = evaluate_plan(&d, &u, &plan.sizes, 1e-12, None).unwrap();
        let shared = shared_hit_rates(&d, 250.0, 1e-12).unwrap();
        for k in 0..2 {
            assert_relative_eq!(e.hit_rates[k], shared[k], max_relative = 1e-8);
        }
    }

    #[test]
    fn static_baseline() {
        assert_eq!(static_caching_baseline(&[2.0, 5.0, 3.0], 1), 5.0);
        assert_eq!(static_caching_baseline(&[2.0, 5.0, 3.0], 3), 10.0);
    }

    #[test]
    fn routing_edge_cases() {
        let r = zipf_rates(100, 0.8, 3.0);
        let h = ct::saturating_hit_rate(&r, 40.0, 1e-12).unwrap();
        assert_relative_eq!(probabilistic_routing_value(&r, (40.0, 0.0), 1.0, 1e-12).unwrap(), h, max_relative = 1e-12);
        // Uniform popularity: each partition hits with probability C_j / n.
        let u = vec![0.02; 100];
        let full = ct::saturating_hit_rate(&u, 40.0, 1e-12).unwrap();
        assert_relative_eq!(full, 2.0 * 40.0 / 100.0, max_relative = 1e-9);
        for (p, c1) in [(0.5, 20.0), (0.3, 10.0), (0.9, 35.0)] {
            let v = probabilistic_routing_value(&u, (c1, 40.0 - c1), p, 1e-12).unwrap();
            assert_relative_eq!(v, 2.0 * (p * c1 + (1.0 - p) * (40.0 - c1)) / 100.0, max_relative = 1e-9);
        }
        assert!(probabilistic_routing_value(&r, (20.0, 20.0), 0.5, 1e-12).unwrap() <= h + 1e-9);
    }

    #[test]
    fn single_log_provider_pays_one() {
        let d = vec![PartitionDemand::single(0, zipf_rates(50, 0.7, 2.0)).unwrap()];
        for price in [0.1, 1.0, 7.0] {
            let out = market_iteration(&d, &[UtilitySpec::log()], 10.0, price, 50, 1e-10, &SolverOptions::default()).unwrap();
            assert_relative_eq!(out.weights[0], 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn symmetric_market() {
        let d = vec![
            PartitionDemand::single(0, zipf_rates(100, 0.8, 4.0)).unwrap(),
            PartitionDemand::single(1, zipf_rates(100, 0.8, 4.0)).unwrap(),
        ];
        let u = [UtilitySpec::neg_inverse(), UtilitySpec::neg_inverse()];
        let out = market_iteration(&d, &u, 60.0, 1.0, 200, 1e-10, &SolverOptions::default()).unwrap();
        assert_relative_eq!(out.weights[0], out.weights[1], max_relative = 1e-9);
        assert_relative_eq!(out.report.hit_rates[0], out.report.hit_rates[1], max_relative = 1e-6);
    }

    #[test]
    fn linear_utility_rejected_by_market() {
        let d = vec![PartitionDemand::single(0, vec![1.0, 1.0]).unwrap()];
        assert!(market_iteration(&d, &[UtilitySpec::linear()], 1.0, 1.0, 5, 1e-9, &SolverOptions::default()).is_err());
    }
}

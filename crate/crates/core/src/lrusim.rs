//! Request-level simulation of partitioned LRU caches under the independent
//! reference model, and an exact oracle for small catalogs.
//!
//! With Poisson arrivals only the order of requests matters to LRU, so the
//! simulator draws i.i.d. requests from the aggregate request distribution
//! and reports time as `requests / total rate`.

use itertools::Itertools;
use rand::SeedableRng;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::ct::{self, PartitionDemand};
use crate::error::{Error, Result};
use crate::scalar::Real;

const NIL: u32 = u32::MAX;

/// LRU list over the dense file indices `0..files` with O(1) access,
/// insertion, eviction and resize.
#[derive(Debug, Clone)]
pub struct LruList {
    prev: Vec<u32>,
    next: Vec<u32>,
    present: Vec<bool>,
    head: u32,
    tail: u32,
    len: usize,
    capacity: usize,
}

impl LruList {
    pub fn new(files: usize, capacity: usize) -> Self {
        assert!(files < NIL as usize, "too many files for one partition");
        Self {
            prev: vec![NIL; files],
            next: vec![NIL; files],
            present: vec![false; files],
            head: NIL,
            tail: NIL,
            len: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn files(&self) -> usize {
        self.present.len()
    }

    pub fn contains(&self, file: u32) -> bool {
        self.present[file as usize]
    }

    fn unlink(&mut self, f: u32) {
        let (p, n) = (self.prev[f as usize], self.next[f as usize]);
        if p == NIL { self.head = n } else { self.next[p as usize] = n }
        if n == NIL { self.tail = p } else { self.prev[n as usize] = p }
    }

    fn push_front(&mut self, f: u32) {
        self.prev[f as usize] = NIL;
        self.next[f as usize] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = f;
        }
        self.head = f;
        if self.tail == NIL {
            self.tail = f;
        }
    }

    fn evict_tail(&mut self) {
        let t = self.tail;
        self.unlink(t);
        self.present[t as usize] = false;
        self.len -= 1;
    }

    /// Requests `file`; returns whether it was a hit.
    pub fn access(&mut self, file: u32) -> bool {
        if self.present[file as usize] {
            if self.head != file {
                self.unlink(file);
                self.push_front(file);
            }
            return true;
        }
        if self.capacity == 0 {
            return false;
        }
        if self.len == self.capacity {
            self.evict_tail();
        }
        self.push_front(file);
        self.present[file as usize] = true;
        self.len += 1;
        false
    }

    /// Changes the capacity, evicting from the tail as needed.
    pub fn resize(&mut self, capacity: usize) {
        self.capacity = capacity;
        while self.len > capacity {
            self.evict_tail();
        }
    }

    /// Cached files, most recently used first.
    pub fn order(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.len);
        let mut f = self.head;
        while f != NIL {
            out.push(f);
            f = self.next[f as usize];
        }
        out
    }
}

/// Requests of one provider for files `offset..offset + rates.len()` of one
/// partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream<S> {
    pub provider: usize,
    pub partition: usize,
    pub offset: usize,
    pub rates: Vec<S>,
}

/// Streams of a set of partitions: every provider of partition `p` requests
/// its files from offset zero.
pub fn streams_from_demands<S: Real>(demands: &[PartitionDemand<S>]) -> Vec<Stream<S>> {
    demands
        .iter()
        .enumerate()
        .flat_map(|(p, d)| {
            d.per_provider().iter().map(move |(k, r)| Stream { provider: *k, partition: p, offset: 0, rates: r.clone() })
        })
        .collect()
}

/// `(hits, requests)` per provider and partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HitCounters {
    providers: usize,
    partitions: usize,
    hits: Vec<u64>,
    requests: Vec<u64>,
}

impl HitCounters {
    pub fn new(providers: usize, partitions: usize) -> Self {
        Self { providers, partitions, hits: vec![0; providers * partitions], requests: vec![0; providers * partitions] }
    }

    pub fn providers(&self) -> usize {
        self.providers
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    fn record(&mut self, provider: usize, partition: usize, hit: bool) {
        let i = provider * self.partitions + partition;
        self.requests[i] += 1;
        self.hits[i] += hit as u64;
    }

    pub fn hits(&self, provider: usize, partition: usize) -> u64 {
        self.hits[provider * self.partitions + partition]
    }

    pub fn requests(&self, provider: usize, partition: usize) -> u64 {
        self.requests[provider * self.partitions + partition]
    }

    pub fn provider_hits(&self, provider: usize) -> u64 {
        (0..self.partitions).map(|p| self.hits(provider, p)).sum()
    }

    pub fn total_hits(&self) -> u64 {
        self.hits.iter().sum()
    }

    pub fn total_requests(&self) -> u64 {
        self.requests.iter().sum()
    }

    pub fn hit_probability(&self) -> f64 {
        self.total_hits() as f64 / self.total_requests().max(1) as f64
    }

    pub fn merge(&mut self, other: &HitCounters) {
        assert_eq!((self.providers, self.partitions), (other.providers, other.partitions));
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.requests.iter_mut().zip(&other.requests) {
            *a += b;
        }
    }
}

/// One simulated request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub provider: usize,
    pub partition: usize,
    pub file: u32,
    pub hit: bool,
}

/// Partitioned LRU caches fed by i.i.d. requests; keeps its cache contents
/// across runs and resizes.
#[derive(Debug, Clone)]
pub struct Simulator {
    caches: Vec<LruList>,
    sampler: WeightedAliasIndex<f64>,
    /// `(provider, partition, file)` of each sampler outcome.
    targets: Vec<(u32, u32, u32)>,
    providers: usize,
    total_rate: f64,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new<S: Real>(streams: &[Stream<S>], partition_files: &[usize], sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() != partition_files.len() {
            return Err(Error::Invalid(format!("{} sizes for {} partitions", sizes.len(), partition_files.len())));
        }
        let mut weights = Vec::new();
        let mut targets = Vec::new();
        let mut providers = 0;
        for s in streams {
            let files = *partition_files
                .get(s.partition)
                .ok_or_else(|| Error::Invalid(format!("stream routes to unknown partition {}", s.partition)))?;
            if s.offset + s.rates.len() > files {
                return Err(Error::Invalid(format!("stream overruns partition {} ({files} files)", s.partition)));
            }
            providers = providers.max(s.provider + 1);
            for (i, r) in s.rates.iter().enumerate() {
                let r = r.as_f64();
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::Invalid(format!("request rate {r} must be finite and >= 0")));
                }
                if r > 0.0 {
                    weights.push(r);
                    targets.push((s.provider as u32, s.partition as u32, (s.offset + i) as u32));
                }
            }
        }
        let total_rate: f64 = weights.iter().sum();
        let sampler = WeightedAliasIndex::new(weights).map_err(|e| Error::Invalid(format!("request rates: {e}")))?;
        let caches = partition_files.iter().zip(sizes).map(|(&n, &c)| LruList::new(n, c)).collect();
        Ok(Self { caches, sampler, targets, providers, total_rate, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Simulator for the partitions of `demands` at the given sizes.
    pub fn from_demands<S: Real>(demands: &[PartitionDemand<S>], sizes: &[usize], seed: u64) -> Result<Self> {
        let files: Vec<usize> = demands.iter().map(|d| d.files()).collect();
        Self::new(&streams_from_demands(demands), &files, sizes, seed)
    }

    pub fn partitions(&self) -> usize {
        self.caches.len()
    }

    pub fn providers(&self) -> usize {
        self.providers
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// Time spanned by `requests` requests.
    pub fn elapsed(&self, requests: u64) -> f64 {
        requests as f64 / self.total_rate
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.caches.iter().map(|c| c.capacity()).collect()
    }

    pub fn cache(&self, partition: usize) -> &LruList {
        &self.caches[partition]
    }

    pub fn resize(&mut self, sizes: &[usize]) {
        assert_eq!(sizes.len(), self.caches.len());
        for (c, &s) in self.caches.iter_mut().zip(sizes) {
            c.resize(s);
        }
    }

    /// Runs `requests` requests, reporting each to `observe`.
    pub fn run_observed(&mut self, requests: u64, mut observe: impl FnMut(Request)) {
        for _ in 0..requests {
            let (provider, partition, file) = self.targets[self.sampler.sample(&mut self.rng)];
            let hit = self.caches[partition as usize].access(file);
            observe(Request { provider: provider as usize, partition: partition as usize, file, hit });
        }
    }

    pub fn run(&mut self, requests: u64) -> HitCounters {
        let mut counters = HitCounters::new(self.providers, self.caches.len());
        self.run_observed(requests, |r| counters.record(r.provider, r.partition, r.hit));
        counters
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<S> {
    pub streams: Vec<Stream<S>>,
    pub partition_files: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Requests discarded before counting; see [`default_warmup`].
    pub warmup: u64,
    pub requests: u64,
    pub seed: u64,
}

/// Five times the total cache size, at least `10^5` requests.
pub fn default_warmup(sizes: &[usize]) -> u64 {
    (5 * sizes.iter().sum::<usize>() as u64).max(100_000)
}

/// Runs a fresh simulator: `warmup` requests, then `requests` counted ones.
pub fn simulate<S: Real>(config: &SimConfig<S>) -> Result<HitCounters> {
    if config.requests == 0 {
        return Err(Error::Invalid("measurement window must be > 0 requests".into()));
    }
    let mut sim = Simulator::new(&config.streams, &config.partition_files, &config.sizes, config.seed)?;
    sim.run(config.warmup);
    Ok(sim.run(config.requests))
}

/// Like [`simulate`], with the measurement split into `batches` equal
/// windows.
pub fn simulate_batches<S: Real>(config: &SimConfig<S>, batches: usize) -> Result<Vec<HitCounters>> {
    if batches == 0 || config.requests < batches as u64 {
        return Err(Error::Invalid("need at least one request per batch".into()));
    }
    let mut sim = Simulator::new(&config.streams, &config.partition_files, &config.sizes, config.seed)?;
    sim.run(config.warmup);
    let per = config.requests / batches as u64;
    Ok((0..batches).map(|_| sim.run(per)).collect())
}

/// Mean and standard error of the mean from batch means.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Rounds real sizes half-to-even; the rounding residual goes to the largest
/// partition so that the rounded total equals the rounded real total.
pub fn round_sizes<S: Real>(sizes: &[S]) -> Vec<usize> {
    let reals: Vec<f64> = sizes.iter().map(|s| s.as_f64().max(0.0)).collect();
    let mut out: Vec<i64> = reals.iter().map(|r| r.round_ties_even() as i64).collect();
    let target = reals.iter().sum::<f64>().round_ties_even() as i64;
    let diff = target - out.iter().sum::<i64>();
    if let Some(big) = (0..out.len()).max_by_key(|&i| (out[i], std::cmp::Reverse(i))) {
        out[big] = (out[big] + diff).max(0);
    }
    out.into_iter().map(|v| v as usize).collect()
}

/// Largest catalog accepted by [`exact_small_lru`].
pub const EXACT_MAX_FILES: usize = 8;

/// Exact LRU hit probability under the independent reference model, by
/// enumerating the stationary law of the recency order (move-to-front):
/// `P(i_1..i_n) = prod_j p_{i_j} / (1 - sum_{l<j} p_{i_l})`.
pub fn exact_small_lru<S: Real>(probs: &[S], capacity: usize) -> Result<S> {
    let n = probs.len();
    if n > EXACT_MAX_FILES {
        return Err(Error::TooLarge { n, max: EXACT_MAX_FILES });
    }
    let total = S::kahan_sum(probs.iter().copied());
    if (total - S::one()).abs() > S::lit(1e-9) || probs.iter().any(|p| !(*p >= S::zero())) {
        return Err(Error::NormalizationFailure { sum: total.as_f64() });
    }
    if capacity == 0 {
        return Ok(S::zero());
    }
    if capacity >= n {
        return Ok(total);
    }
    let mut terms = Vec::new();
    for order in (0..n).permutations(n) {
        let mut weight = S::one();
        let mut used = S::zero();
        for &i in &order[..capacity] {
            let rest = S::one() - used;
            if rest <= S::zero() {
                weight = S::zero();
                break;
            }
            weight = weight * probs[i] / rest;
            used = used + probs[i];
        }
        // Orders sharing the top `capacity` entries are counted once each;
        // the tail permutations sum to one, so divide by their count.
        terms.push(weight * used);
    }
    let tail = S::count((1..=n - capacity).product());
    Ok(S::kahan_sum(terms.into_iter()) / tail)
}

/// One row of a characteristic-time versus simulation comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub scale: usize,
    pub ct_hit_probability: f64,
    pub simulated_hit_probability: f64,
    pub gap: f64,
}

/// Compares predicted and simulated aggregate hit probability for the
/// workload `build(n)` (partition demands and real sizes) at each scale.
pub fn ct_vs_sim_report<S, F>(build: F, scales: &[usize], requests: u64, seed: u64) -> Result<Vec<GapRow>>
where
    S: Real,
    F: Fn(usize) -> Result<(Vec<PartitionDemand<S>>, Vec<S>)>,
{
    scales
        .iter()
        .map(|&n| {
            let (demands, sizes) = build(n)?;
            let tol = S::lit(1e-10).max(S::epsilon() * S::lit(64.0));
            let mut hits = S::zero();
            let mut rate = S::zero();
            for (d, &c) in demands.iter().zip(&sizes) {
                rate = rate + S::kahan_sum(d.aggregate().iter().copied());
                hits = hits
                    + if c >= S::count(d.files()) {
                        S::kahan_sum(d.aggregate().iter().copied())
                    } else {
                        ct::multi_rate_hit_rates(d, c, tol)?.total()
                    };
            }
            let rounded = round_sizes(&sizes);
            let files: Vec<usize> = demands.iter().map(|d| d.files()).collect();
            let config = SimConfig {
                streams: streams_from_demands(&demands),
                partition_files: files,
                warmup: default_warmup(&rounded),
                sizes: rounded,
                requests,
                seed,
            };
            let sim = simulate(&config)?.hit_probability();
            let predicted = (hits / rate).as_f64();
            Ok(GapRow { scale: n, ct_hit_probability: predicted, simulated_hit_probability: sim, gap: (predicted - sim).abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single(rates: Vec<f64>, size: usize, requests: u64, seed: u64) -> SimConfig<f64> {
        let n = rates.len();
        SimConfig {
            streams: vec![Stream { provider: 0, partition: 0, offset: 0, rates }],
            partition_files: vec![n],
            sizes: vec![size],
            warmup: 10_000,
            requests,
            seed,
        }
    }

    #[test]
    fn lru_basics() {
        let mut l = LruList::new(5, 2);
        assert!(!l.access(1));
        assert!(!l.access(2));
        assert!(l.access(1));
        assert!(!l.access(3));
        assert_eq!(l.order(), vec![3, 1]);
        assert!(!l.contains(2));
        l.resize(1);
        assert_eq!(l.order(), vec![3]);
        l.resize(3);
        l.access(4);
        l.access(0);
        assert_eq!(l.order(), vec![0, 4, 3]);
        let mut z = LruList::new(3, 0);
        assert!(!z.access(0) && !z.access(0));
        assert!(z.is_empty());
    }

    #[test]
    fn everything_fits() {
        let c = simulate(&single(vec![0.5, 0.3, 0.2], 3, 10_000, 1)).unwrap();
        assert_eq!(c.total_hits(), c.total_requests());
    }

    #[test]
    fn size_one_cache_hits_on_repeats() {
        let c = simulate(&single(vec![0.5, 0.3, 0.2], 1, 1_000_000, 7)).unwrap();
        assert!((c.hit_probability() - 0.38).abs() < 0.005, "{}", c.hit_probability());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let cfg = single(vec![0.4, 0.3, 0.2, 0.1], 2, 50_000, 42);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = SimConfig { seed: 43, ..cfg.clone() };
        assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn exact_oracle_closed_forms() {
        let p = [0.4, 0.3, 0.2, 0.1];
        assert_relative_eq!(exact_small_lru(&p, 1).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(exact_small_lru(&p, 4).unwrap(), 1.0);
        assert_eq!(exact_small_lru(&p, 0).unwrap(), 0.0);
        assert!(matches!(exact_small_lru(&[0.1; 10], 2), Err(Error::TooLarge { .. })));
    }

    /// Direct oracle: sum over ordered top-`c` prefixes of the move-to-front law.
    fn prefix_oracle(p: &[f64], c: usize) -> f64 {
        fn rec(p: &[f64], c: usize, used: &mut Vec<usize>, mass: f64, weight: f64) -> f64 {
            if used.len() == c {
                return weight * mass;
            }
            let mut total = 0.0;
            for i in 0..p.len() {
                if used.contains(&i) {
                    continue;
                }
                used.push(i);
                total += rec(p, c, used, mass + p[i], weight * p[i] / (1.0 - mass));
                used.pop();
            }
            total
        }
        rec(p, c, &mut Vec::new(), 0.0, 1.0)
    }

    #[test]
    fn exact_oracle_matches_prefix_enumeration() {
        let p = [0.35, 0.25, 0.2, 0.1, 0.06, 0.04];
        for c in 1..6 {
            assert_relative_eq!(exact_small_lru(&p, c).unwrap(), prefix_oracle(&p, c), max_relative = 1e-12);
        }
    }

    #[test]
    fn simulation_matches_exact_oracle() {
        let cfg = single(vec![0.4, 0.3, 0.2, 0.1], 2, 2_000_000, 3);
        let batches = simulate_batches(&cfg, 20).unwrap();
        let (mean, se) = batch_means(&batches.iter().map(HitCounters::hit_probability).collect::<Vec<_>>());
        let exact = exact_small_lru(&[0.4, 0.3, 0.2, 0.1], 2).unwrap();
        assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn request_frequencies_follow_rates() {
        let rates = vec![5.0, 3.0, 1.5, 0.5];
        let mut sim = Simulator::new(&[Stream { provider: 0, partition: 0, offset: 0, rates: rates.clone() }], &[4], &[2], 9)
            .unwrap();
        let n = 400_000u64;
        let mut counts = [0u64; 4];
        sim.run_observed(n, |r| counts[r.file as usize] += 1);
        for (i, &c) in counts.iter().enumerate() {
            let p = rates[i] / 10.0;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() <= 4.0 * se);
        }
        assert_relative_eq!(sim.elapsed(n), 40_000.0);
    }

    #[test]
    fn recency_order_is_last_distinct_requests() {
        let rates: Vec<f64> = (1..=12).map(|i| 1.0 / i as f64).collect();
        let mut sim = Simulator::new(&[Stream { provider: 0, partition: 0, offset: 0, rates }], &[12], &[5], 11).unwrap();
        let mut seen: Vec<u32> = Vec::new();
        for _ in 0..200 {
            sim.run_observed(1, |r| seen.push(r.file));
            let mut expect = Vec::new();
            for &f in seen.iter().rev() {
                if !expect.contains(&f) {
                    expect.push(f);
                }
                if expect.len() == 5 {
                    break;
                }
            }
            assert_eq!(sim.cache(0).order(), expect);
        }
        assert_eq!(sim.cache(0).len(), 5);
    }

    #[test]
    fn shared_partition_counts_each_provider() {
        let streams = vec![
            Stream { provider: 0, partition: 0, offset: 0, rates: vec![1.0, 1.0] },
            Stream { provider: 1, partition: 0, offset: 0, rates: vec![1.0, 1.0] },
            Stream { provider: 1, partition: 1, offset: 0, rates: vec![2.0] },
        ];
        let mut sim = Simulator::new(&streams, &[2, 1], &[2, 1], 5).unwrap();
        sim.run(1000);
        let c = sim.run(10_000);
        assert_eq!(c.total_hits(), 10_000);
        assert!(c.requests(0, 1) == 0 && c.requests(1, 1) > 0 && c.requests(0, 0) > 0);
    }

    #[test]
    fn rounding_conserves_total() {
        assert_eq!(round_sizes(&[2.5, 3.5, 4.0]), vec![2, 4, 4]);
        assert_eq!(round_sizes(&[1.4, 1.4, 1.2]), vec![2, 1, 1]);
        assert_eq!(round_sizes(&[0.5, 0.5]), vec![1, 0]);
    }

    proptest! {
        #[test]
        fn rounded_total_matches(sizes in proptest::collection::vec(0.0f64..1e4, 1..6)) {
            let r = round_sizes(&sizes);
            prop_assert_eq!(r.iter().sum::<usize>() as f64, sizes.iter().sum::<f64>().round_ties_even());
        }
    }
}

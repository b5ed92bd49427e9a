//! Providers, content sets and popularity models.
//!
//! A provider's popularity is either a Zipf law, an explicit probability
//! vector, or a piecewise-linear asymptotic CDF `F` on `[0, 1]` that is
//! discretized at scale `n` as `p_i = F(i/n) - F((i-1)/n)`.
//!
//! Files served by several providers are described by an [`OverlapWorkload`]:
//! one entry per provider subset, holding the subset's file count and every
//! member's request rate and popularity over those files. [`group_files`] and
//! [`group_contents`] turn file-level membership into [`ContentGroup`]s, one
//! per distinct serving subset; each group later becomes one cache partition.

use std::collections::HashMap;
use std::fmt;

use crate::ct::PartitionDemand;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::utility::UtilitySpec;

/// Tolerance on `sum(p) = 1` for a scalar type.
pub fn normalization_tol<S: Real>() -> S {
    S::lit(1e-12).max(S::epsilon() * S::lit(256.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<S> {
    pub start: S,
    pub width: S,
    pub slope: S,
}

/// Piecewise-linear CDF on `[0, 1]`, given by its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf<S> {
    points: Vec<(S, S)>,
}

impl<S: Real> PiecewiseCdf<S> {
    /// Breakpoints `(x, F(x))` must start at `(0, 0)`, end at `(1, 1)`, and be
    /// strictly increasing in `x` and non-decreasing in `F`.
    pub fn new(points: Vec<(S, S)>) -> Result<Self> {
        let tol = normalization_tol::<S>();
        if points.len() < 2 {
            return Err(Error::InvalidCdf("need at least two breakpoints".into()));
        }
        let (x0, f0) = points[0];
        let (x1, f1) = points[points.len() - 1];
        if x0 != S::zero() || x1 != S::one() {
            return Err(Error::InvalidCdf("breakpoints must span [0, 1]".into()));
        }
        if f0.abs() > tol || (f1 - S::one()).abs() > tol {
            return Err(Error::InvalidCdf(format!("F(0) = {f0}, F(1) = {f1}")));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidCdf("breakpoints must be strictly increasing in x".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidCdf(format!("F decreases between x = {} and x = {}", w[0].0, w[1].0)));
            }
        }
        if points.iter().any(|(x, f)| !x.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidCdf("non-finite breakpoint".into()));
        }
        let mut points = points;
        let last = points.len() - 1;
        points[0].1 = S::zero();
        points[last].1 = S::one();
        Ok(Self { points })
    }

    /// `F(x) = x`.
    pub fn uniform() -> Self {
        Self { points: vec![(S::zero(), S::zero()), (S::one(), S::one())] }
    }

    /// Builds a CDF from consecutive `(width, slope)` segments.
    pub fn from_segments(segments: &[(S, S)]) -> Result<Self> {
        let mut points = vec![(S::zero(), S::zero())];
        let (mut x, mut f) = (S::zero(), S::zero());
        for &(w, s) in segments {
            if !(w > S::zero()) || s < S::zero() {
                return Err(Error::InvalidCdf(format!("bad segment (width {w}, slope {s})")));
            }
            x = x + w;
            f = f + w * s;
            points.push((x, f));
        }
        let tol = normalization_tol::<S>();
        if (x - S::one()).abs() > tol {
            return Err(Error::InvalidCdf(format!("segment widths sum to {x}")));
        }
        let last = points.len() - 1;
        points[last].0 = S::one();
        Self::new(points)
    }

    pub fn points(&self) -> &[(S, S)] {
        &self.points
    }

    pub fn eval(&self, x: S) -> S {
        if x <= S::zero() {
            return S::zero();
        }
        if x >= S::one() {
            return S::one();
        }
        let idx = self.points.partition_point(|p| p.0 <= x);
        let (xa, fa) = self.points[idx - 1];
        let (xb, fb) = self.points[idx];
        fa + (fb - fa) * (x - xa) / (xb - xa)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment<S>> + '_ {
        self.points.windows(2).map(|w| {
            let width = w[1].0 - w[0].0;
            Segment { start: w[0].0, width, slope: (w[1].1 - w[0].1) / width }
        })
    }

    pub fn max_slope(&self) -> S {
        self.segments().fold(S::zero(), |m, s| m.max(s.slope))
    }

    /// Convex combination `sum_j w_j F_j`; weights must sum to one.
    pub fn mix(parts: &[(S, &PiecewiseCdf<S>)]) -> Result<Self> {
        let total = S::kahan_sum(parts.iter().map(|p| p.0));
        if parts.is_empty() || (total - S::one()).abs() > normalization_tol::<S>() * S::lit(16.0) {
            return Err(Error::NormalizationFailure { sum: total.as_f64() });
        }
        let mut xs: Vec<S> = parts.iter().flat_map(|(_, c)| c.points.iter().map(|p| p.0)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        xs.dedup();
        let points = xs
            .into_iter()
            .map(|x| (x, S::kahan_sum(parts.iter().map(|(w, c)| *w * c.eval(x))) / total))
            .collect();
        Self::new(points)
    }

    /// The CDF of the same popularity profile listed in reverse rank order:
    /// `G(x) = 1 - F(1 - x)`.
    pub fn reversed(&self) -> Self {
        let points = self.points.iter().rev().map(|&(x, f)| (S::one() - x, S::one() - f)).collect();
        Self::new(points).expect("reversal preserves validity")
    }
}

/// Request-probability law over a provider's files.
#[derive(Debug, Clone, PartialEq)]
pub enum PopularityModel<S> {
    Zipf { exponent: S, count: usize },
    PiecewiseCdf(PiecewiseCdf<S>),
    Explicit(Vec<S>),
}

impl<S: Real> PopularityModel<S> {
    pub fn validate(&self) -> Result<()> {
        match self {
            PopularityModel::Zipf { exponent, count } => {
                if !(*exponent >= S::zero()) || !exponent.is_finite() {
                    return Err(Error::Invalid(format!("Zipf exponent {exponent} must be >= 0")));
                }
                if *count == 0 {
                    return Err(Error::Invalid("Zipf catalog must hold at least one file".into()));
                }
                Ok(())
            }
            PopularityModel::PiecewiseCdf(_) => Ok(()),
            PopularityModel::Explicit(p) => {
                if p.is_empty() {
                    return Err(Error::Invalid("empty probability vector".into()));
                }
                if p.iter().any(|x| !(*x >= S::zero()) || !x.is_finite()) {
                    return Err(Error::Invalid("probabilities must be finite and non-negative".into()));
                }
                let sum = S::kahan_sum(p.iter().copied());
                if (sum - S::one()).abs() > normalization_tol::<S>() {
                    return Err(Error::NormalizationFailure { sum: sum.as_f64() });
                }
                Ok(())
            }
        }
    }

    /// Catalog length fixed by the model itself, if any.
    pub fn intrinsic_len(&self) -> Option<usize> {
        match self {
            PopularityModel::Zipf { count, .. } => Some(*count),
            PopularityModel::Explicit(p) => Some(p.len()),
            PopularityModel::PiecewiseCdf(_) => None,
        }
    }

    /// Request probabilities for a catalog of `n` files.
    pub fn materialize(&self, n: usize) -> Result<Vec<S>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Invalid("catalog size must be >= 1".into()));
        }
        if let Some(len) = self.intrinsic_len() {
            if len != n {
                return Err(Error::Invalid(format!("model defines {len} files, asked for {n}")));
            }
        }
        let p = match self {
            PopularityModel::Zipf { exponent, .. } => {
                let w: Vec<S> = (1..=n).map(|i| S::count(i).powf(-*exponent)).collect();
                let total = S::kahan_sum(w.iter().copied());
                w.into_iter().map(|x| x / total).collect()
            }
            PopularityModel::PiecewiseCdf(cdf) => FaginDiscretization::new(cdf, n).probabilities,
            PopularityModel::Explicit(p) => p.clone(),
        };
        let sum = S::kahan_sum(p.iter().copied());
        if (sum - S::one()).abs() > normalization_tol::<S>() {
            return Err(Error::NormalizationFailure { sum: sum.as_f64() });
        }
        Ok(p)
    }
}

/// `p_i = F(i/n) - F((i-1)/n)` for `i = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaginDiscretization<S> {
    pub scale: usize,
    pub probabilities: Vec<S>,
}

impl<S: Real> FaginDiscretization<S> {
    pub fn new(cdf: &PiecewiseCdf<S>, n: usize) -> Self {
        let nn = S::count(n);
        let grid: Vec<S> = (0..=n).map(|i| cdf.eval(S::count(i) / nn)).collect();
        let probabilities = grid.windows(2).map(|w| (w[1] - w[0]).max(S::zero())).collect();
        Self { scale: n, probabilities }
    }
}

/// A content provider: its demand and the utility the cache operator assigns
/// to its hit rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Provider<S> {
    pub id: usize,
    pub arrival_rate: S,
    pub popularity: PopularityModel<S>,
    pub files: usize,
    pub utility: UtilitySpec<S>,
}

impl<S: Real> Provider<S> {
    pub fn new(id: usize, arrival_rate: S, popularity: PopularityModel<S>, files: usize, utility: UtilitySpec<S>) -> Result<Self> {
        if !(arrival_rate > S::zero()) || !arrival_rate.is_finite() {
            return Err(Error::Invalid(format!("provider {id}: arrival rate must be > 0")));
        }
        popularity.validate()?;
        utility.validate()?;
        if let Some(len) = popularity.intrinsic_len() {
            if len != files {
                return Err(Error::Invalid(format!("provider {id}: popularity has {len} files, declared {files}")));
            }
        }
        if files == 0 {
            return Err(Error::Invalid(format!("provider {id}: empty catalog")));
        }
        Ok(Self { id, arrival_rate, popularity, files, utility })
    }

    /// Zipf provider: the base-case building block.
    pub fn zipf(id: usize, arrival_rate: S, exponent: S, files: usize, utility: UtilitySpec<S>) -> Result<Self> {
        Self::new(id, arrival_rate, PopularityModel::Zipf { exponent, count: files }, files, utility)
    }

    pub fn weight(&self) -> S {
        self.utility.weight
    }

    pub fn probabilities(&self) -> Result<Vec<S>> {
        self.popularity.materialize(self.files)
    }

    /// Per-file request rates `lambda_k p_{k,i}`.
    pub fn file_rates(&self) -> Result<Vec<S>> {
        Ok(self.probabilities()?.into_iter().map(|p| p * self.arrival_rate).collect())
    }
}

/// A subset of providers, stored as a bitmask (provider ids `< 32`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProviderSet(u32);

impl ProviderSet {
    pub const MAX_PROVIDERS: usize = 32;

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn singleton(k: usize) -> Self {
        assert!(k < Self::MAX_PROVIDERS);
        Self(1 << k)
    }

    pub fn from_members(members: &[usize]) -> Self {
        members.iter().fold(Self::empty(), |s, &k| s.with(k))
    }

    pub fn with(self, k: usize) -> Self {
        assert!(k < Self::MAX_PROVIDERS);
        Self(self.0 | (1 << k))
    }

    pub fn contains(self, k: usize) -> bool {
        k < Self::MAX_PROVIDERS && self.0 & (1 << k) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..Self::MAX_PROVIDERS).filter(move |&k| self.contains(k))
    }
}

impl fmt::Display for ProviderSet {
    /// Providers are printed 1-based, e.g. `{1,2}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.iter().map(|k| (k + 1).to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileId(pub u64);

/// One provider's demand into a shared set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetDemand<S> {
    pub provider: usize,
    /// Aggregate request rate of the provider into this set.
    pub rate: S,
    /// Probability over the set's files, given a request into the set.
    pub popularity: Vec<S>,
}

impl<S: Real> SetDemand<S> {
    pub fn file_rates(&self) -> impl Iterator<Item = S> + '_ {
        self.popularity.iter().map(move |&p| p * self.rate)
    }
}

/// Files served by exactly the providers in `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSet<S> {
    pub members: ProviderSet,
    pub count: usize,
    pub demands: Vec<SetDemand<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapWorkload<S> {
    providers: usize,
    totals: Vec<S>,
    sets: Vec<SharedSet<S>>,
}

impl<S: Real> OverlapWorkload<S> {
    /// `totals[k]` is provider `k`'s aggregate request rate, which must equal
    /// the sum of its per-set rates.
    pub fn new(totals: Vec<S>, sets: Vec<SharedSet<S>>) -> Result<Self> {
        let providers = totals.len();
        if providers == 0 || providers > ProviderSet::MAX_PROVIDERS {
            return Err(Error::Invalid(format!("unsupported provider count {providers}")));
        }
        let mut seen = std::collections::HashSet::new();
        let mut sums = vec![S::zero(); providers];
        for set in &sets {
            if set.members.is_empty() {
                return Err(Error::Invalid("shared set with no serving provider".into()));
            }
            if set.members.iter().any(|k| k >= providers) {
                return Err(Error::Invalid(format!("set {} names an unknown provider", set.members)));
            }
            if !seen.insert(set.members) {
                return Err(Error::Invalid(format!("duplicate set {}", set.members)));
            }
            let mut members = ProviderSet::empty();
            for d in &set.demands {
                if !set.members.contains(d.provider) || members.contains(d.provider) {
                    return Err(Error::Invalid(format!("set {}: bad demand entry for provider {}", set.members, d.provider + 1)));
                }
                members = members.with(d.provider);
                if d.popularity.len() != set.count {
                    return Err(Error::Invalid(format!("set {}: popularity length {} != count {}", set.members, d.popularity.len(), set.count)));
                }
                if !(d.rate >= S::zero()) {
                    return Err(Error::Invalid(format!("set {}: negative rate", set.members)));
                }
                if set.count > 0 {
                    PopularityModel::Explicit(d.popularity.clone()).validate()?;
                }
                sums[d.provider] = sums[d.provider] + d.rate;
            }
            if members != set.members {
                return Err(Error::Invalid(format!("set {}: every member needs a demand entry", set.members)));
            }
        }
        for k in 0..providers {
            if (sums[k] - totals[k]).abs() > S::lit(1e-9) * totals[k].abs().max(S::one()) {
                return Err(Error::Invalid(format!("provider {}: set rates sum to {} but total is {}", k + 1, sums[k], totals[k])));
            }
        }
        Ok(Self { providers, totals, sets })
    }

    /// Providers with disjoint catalogs, each given as `(rate, probabilities)`.
    pub fn distinct(providers: &[(S, Vec<S>)]) -> Result<Self> {
        let totals = providers.iter().map(|p| p.0).collect();
        let sets = providers
            .iter()
            .enumerate()
            .map(|(k, (rate, p))| SharedSet {
                members: ProviderSet::singleton(k),
                count: p.len(),
                demands: vec![SetDemand { provider: k, rate: *rate, popularity: p.clone() }],
            })
            .collect();
        Self::new(totals, sets)
    }

    /// Builds the workload from per-provider catalogs of `(file, rate)`
    /// pairs, grouping files by the set of providers that serve them.
    pub fn from_catalogs(catalogs: &[Vec<(FileId, S)>]) -> Result<Self> {
        let providers = catalogs.len();
        let mut serving: HashMap<FileId, ProviderSet> = HashMap::new();
        let mut rate_of: HashMap<(FileId, usize), S> = HashMap::new();
        let mut order = Vec::new();
        for (k, catalog) in catalogs.iter().enumerate() {
            for &(f, r) in catalog {
                if !(r >= S::zero()) {
                    return Err(Error::Invalid(format!("provider {}: negative rate for file {}", k + 1, f.0)));
                }
                let entry = serving.entry(f).or_insert_with(|| {
                    order.push(f);
                    ProviderSet::empty()
                });
                if entry.contains(k) {
                    return Err(Error::Invalid(format!("provider {} lists file {} twice", k + 1, f.0)));
                }
                *entry = entry.with(k);
                rate_of.insert((f, k), r);
            }
        }
        let groups = assign_groups(order.iter().map(|f| (*f, serving[f])));
        let mut totals = vec![S::zero(); providers];
        let mut sets = Vec::with_capacity(groups.len());
        for (members, files) in groups {
            let mut demands = Vec::new();
            for k in members.iter() {
                let rates: Vec<S> = files.iter().map(|f| rate_of[&(*f, k)]).collect();
                let rate = S::kahan_sum(rates.iter().copied());
                totals[k] = totals[k] + rate;
                let popularity = if rate > S::zero() {
                    rates.iter().map(|&r| r / rate).collect()
                } else {
                    return Err(Error::Invalid(format!("provider {} requests none of set {}", k + 1, members)));
                };
                demands.push(SetDemand { provider: k, rate, popularity });
            }
            sets.push(SharedSet { members, count: files.len(), demands });
        }
        Self::new(totals, sets)
    }

    pub fn providers(&self) -> usize {
        self.providers
    }

    pub fn totals(&self) -> &[S] {
        &self.totals
    }

    pub fn sets(&self) -> &[SharedSet<S>] {
        &self.sets
    }

    pub fn total_files(&self) -> usize {
        self.sets.iter().map(|s| s.count).sum()
    }
}

/// Files served by the same provider subset, together with each member's
/// per-file request rates over them.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentGroup<S> {
    pub id: usize,
    pub members: ProviderSet,
    pub files: Vec<FileId>,
    pub demand: PartitionDemand<S>,
}

impl<S: Real> ContentGroup<S> {
    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    /// Aggregate per-file rates `lambda_i = sum_k lambda_{k,i}`.
    pub fn aggregate_rates(&self) -> &[S] {
        self.demand.aggregate()
    }
}

/// Groups files by serving subset, in order of first appearance.
///
/// Each file joins the group whose subset equals its own, or opens a new
/// group. The lookup is hashed, so the pass is linear in the number of files.
pub fn assign_groups<I>(files: I) -> Vec<(ProviderSet, Vec<FileId>)>
where
    I: IntoIterator<Item = (FileId, ProviderSet)>,
{
    let mut index: HashMap<ProviderSet, usize> = HashMap::new();
    let mut groups: Vec<(ProviderSet, Vec<FileId>)> = Vec::new();
    for (f, members) in files {
        match index.get(&members) {
            Some(&g) => groups[g].1.push(f),
            None => {
                index.insert(members, groups.len());
                groups.push((members, vec![f]));
            }
        }
    }
    groups
}

/// Content groups of a workload. File `i` of set `j` has id `(j << 32) | i`.
/// Sets with no files produce no group.
pub fn group_contents<S: Real>(workload: &OverlapWorkload<S>) -> Result<Vec<ContentGroup<S>>> {
    let files = workload.sets.iter().enumerate().flat_map(|(j, set)| {
        (0..set.count).map(move |i| (FileId(((j as u64) << 32) | i as u64), set.members))
    });
    let by_members: HashMap<ProviderSet, &SharedSet<S>> = workload.sets.iter().map(|s| (s.members, s)).collect();
    assign_groups(files)
        .into_iter()
        .enumerate()
        .map(|(id, (members, files))| {
            let set = by_members[&members];
            let per_provider = set.demands.iter().map(|d| (d.provider, d.file_rates().collect())).collect();
            Ok(ContentGroup { id, members, files, demand: PartitionDemand::new(per_provider)? })
        })
        .collect()
}

/// Content groups straight from per-provider `(file, rate)` catalogs.
pub fn group_files<S: Real>(catalogs: &[Vec<(FileId, S)>]) -> Result<Vec<ContentGroup<S>>> {
    let mut serving: HashMap<FileId, ProviderSet> = HashMap::new();
    let mut order = Vec::new();
    let mut rate_of: HashMap<(FileId, usize), S> = HashMap::new();
    for (k, catalog) in catalogs.iter().enumerate() {
        for &(f, r) in catalog {
            let e = serving.entry(f).or_insert_with(|| {
                order.push(f);
                ProviderSet::empty()
            });
            *e = e.with(k);
            rate_of.insert((f, k), r);
        }
    }
    assign_groups(order.iter().map(|f| (*f, serving[f])))
        .into_iter()
        .enumerate()
        .map(|(id, (members, files))| {
            let per_provider = members.iter().map(|k| (k, files.iter().map(|f| rate_of[&(*f, k)]).collect())).collect();
            Ok(ContentGroup { id, members, files, demand: PartitionDemand::new(per_provider)? })
        })
        .collect()
}

/// Two providers whose catalogs overlap on every `stride`-th popularity
/// rank among the first `span` (ranks 0, stride, 2*stride, ...). With
/// `reversed`, the second provider ranks the shared files in the opposite
/// order. Groups are returned as [first only, second only, shared].
pub fn strided_overlap<S: Real>(
    first: &Provider<S>,
    second: &Provider<S>,
    stride: usize,
    span: usize,
    reversed: bool,
) -> Result<Vec<ContentGroup<S>>> {
    if stride == 0 {
        return Err(Error::Invalid("stride must be >= 1".into()));
    }
    let (r1, r2) = (first.file_rates()?, second.file_rates()?);
    let limit = span.min(r1.len()).min(r2.len());
    let shared: Vec<usize> = (0..limit).step_by(stride).collect();
    let offset = r1.len().max(r2.len()) as u64;
    let a: Vec<(FileId, S)> = r1.iter().enumerate().map(|(i, &r)| (FileId(i as u64), r)).collect();
    let mut b = Vec::with_capacity(r2.len());
    let mut j = 0;
    for (i, &r) in r2.iter().enumerate() {
        if j < shared.len() && shared[j] == i {
            let slot = if reversed { shared.len() - 1 - j } else { j };
            b.push((FileId(shared[slot] as u64), r));
            j += 1;
        } else {
            b.push((FileId(offset + i as u64), r));
        }
    }
    let mut groups = group_files(&[a, b])?;
    let rank = |g: &ContentGroup<S>| match g.members.bits() {
        0b01 => 0,
        0b10 => 1,
        _ => 2,
    };
    groups.sort_by_key(rank);
    for (id, g) in groups.iter_mut().enumerate() {
        g.id = id;
    }
    Ok(groups)
}

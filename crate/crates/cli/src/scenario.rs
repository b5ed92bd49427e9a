//! Scenario files: TOML documents describing a workload and the pipeline to
//! run on it.

use std::path::Path;

use cachepart::catalog::{self, ContentGroup, PiecewiseCdf, PopularityModel, Provider};
use cachepart::ct::PartitionDemand;
use cachepart::fagin::{SetRequests, SharedContentWorkload};
use cachepart::onlinectl::StepSchedule;
use cachepart::optimizer::{self, SolverOptions};
use cachepart::utility::{UtilityKind, UtilitySpec};
use cachepart::Strategy;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    OfflineDistinct,
    OfflineGrouped,
    OnlineDistinct,
    OnlineGrouped,
    FaginStrategy,
    CtValidate,
    Market,
}

impl Mode {
    fn grouped(self) -> bool {
        matches!(self, Mode::OfflineGrouped | Mode::OnlineGrouped)
    }

    fn distinct(self) -> bool {
        matches!(self, Mode::OfflineDistinct | Mode::OnlineDistinct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub mode: Mode,
    /// Cache size in files; in content-mass units for `FAGIN_STRATEGY`.
    pub capacity: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; the command line `--out-dir` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub providers: Vec<ProviderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fagin: Option<FaginSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSpec>,
}

fn default_seed() -> u64 {
    1
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    /// Aggregate request rate.
    pub rate: f64,
    pub files: usize,
    pub popularity: PopularitySpec,
    pub utility: UtilityDef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopularitySpec {
    Zipf { exponent: f64 },
    /// Consecutive `[width, slope]` segments of a CDF on `[0, 1]`.
    Piecewise { segments: Vec<[f64; 2]> },
    Explicit { probabilities: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityName {
    Linear,
    Log,
    NegInverse,
    AlphaFair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityDef {
    pub kind: UtilityName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub weight: f64,
}

impl UtilityDef {
    pub fn new(kind: UtilityName) -> Self {
        Self { kind, alpha: None, weight: 1.0 }
    }

    pub fn alpha_fair(alpha: f64) -> Self {
        Self { kind: UtilityName::AlphaFair, alpha: Some(alpha), weight: 1.0 }
    }

    pub fn to_spec(&self) -> cachepart::Result<UtilitySpec<f64>> {
        let kind = match self.kind {
            UtilityName::Linear => UtilityKind::Linear,
            UtilityName::Log => UtilityKind::Log,
            UtilityName::NegInverse => UtilityKind::NegInverse,
            UtilityName::AlphaFair => UtilityKind::AlphaFair(self.alpha.unwrap_or(f64::NAN)),
        };
        UtilitySpec::new(kind, self.weight)
    }
}

/// Order of provider two's popularity over the shared files relative to
/// provider one's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SharedOrdering {
    Aligned,
    Reversed,
}

/// Every `stride`-th of provider one's first `span` files is also served by
/// provider two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapSpec {
    pub stride: usize,
    pub span: usize,
    pub ordering: SharedOrdering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kkt_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverOptions::<f64>::default();
        Self { kkt_tol: d.kkt_tol, max_iters: d.max_iters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Constant,
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleName {
    /// Characteristic-time hit rates.
    Exact,
    /// Hits counted by the LRU simulator.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub iterations: usize,
    pub step: f64,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleName,
    /// Iterations over which a diminishing step halves.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Starting sizes; an even split when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub start: Vec<f64>,
    pub oracle: OracleName,
    /// Requests per measurement for the simulated oracle.
    #[serde(default = "default_window")]
    pub window: u64,
    /// Smallest move per iteration as a fraction of the capacity.
    #[serde(default)]
    pub probe: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fail with a non-convergence status unless the stop rule fires.
    #[serde(default)]
    pub require_convergence: bool,
}

fn default_schedule() -> ScheduleName {
    ScheduleName::Constant
}

fn default_horizon() -> f64 {
    10.0
}

fn default_window() -> u64 {
    cachepart::onlinectl::SimulatedOracle::DEFAULT_WINDOW
}

fn default_epsilon() -> f64 {
    1e-9
}

impl ControllerSpec {
    pub fn schedule(&self) -> StepSchedule<f64> {
        match self.schedule {
            ScheduleName::Constant => StepSchedule::Constant(self.step),
            ScheduleName::Diminishing => StepSchedule::Diminishing { initial: self.step, horizon: self.horizon },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyName {
    S1,
    S2,
    S3,
}

impl StrategyName {
    pub fn strategy(self) -> Strategy {
        match self {
            StrategyName::S1 => Strategy::ShareAll,
            StrategyName::S2 => Strategy::PerProvider,
            StrategyName::S3 => Strategy::SharedSlice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub rate: f64,
    pub segments: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateSetSpec {
    pub mass: f64,
    pub rate: f64,
    pub segments: Vec<[f64; 2]>,
}

/// Large-catalog workload: one commonly served content set plus a private
/// set per provider, each described by a piecewise-linear CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaginSpec {
    pub shared_mass: f64,
    pub shared: Vec<SetSpec>,
    pub private: Vec<PrivateSetSpec>,
    pub strategies: Vec<StrategyName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub price: f64,
    pub rounds: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    pub requests: u64,
    /// Partition sizes to check; the offline optimum when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<f64>,
}

fn cdf(segments: &[[f64; 2]]) -> cachepart::Result<PiecewiseCdf<f64>> {
    let pairs: Vec<(f64, f64)> = segments.iter().map(|s| (s[0], s[1])).collect();
    PiecewiseCdf::from_segments(&pairs)
}

fn at<T>(path: impl Into<String>, r: cachepart::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::validation(path, e.to_string()))
}

fn positive(path: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(path, format!("must be a finite number > 0, got {x}")))
    }
}

impl Scenario {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are TOML-representable")
    }

    /// Checks every field the mode needs; errors name the offending field.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        positive("capacity", self.capacity)?;
        positive("solver.kkt_tol", self.solver.kkt_tol)?;
        if self.solver.max_iters == 0 {
            return Err(CliError::validation("solver.max_iters", "must be >= 1"));
        }
        if self.mode == Mode::FaginStrategy {
            return self.validate_fagin();
        }
        if self.providers.is_empty() {
            return Err(CliError::validation("providers", "at least one provider is required"));
        }
        for (k, _) in self.providers.iter().enumerate() {
            self.provider(k)?;
        }
        let catalog: usize = self.providers.iter().map(|p| p.files).sum();
        if self.mode.grouped() {
            let o = self.overlap.as_ref().ok_or_else(|| CliError::validation("overlap", "required by grouped modes"))?;
            if self.providers.len() != 2 {
                return Err(CliError::validation("providers", "overlap scenarios need exactly two providers"));
            }
            if o.stride == 0 {
                return Err(CliError::validation("overlap.stride", "must be >= 1"));
            }
            if o.span == 0 {
                return Err(CliError::validation("overlap.span", "must be >= 1"));
            }
        } else if self.mode.distinct() && self.overlap.is_some() {
            return Err(CliError::validation("overlap", "not allowed for providers serving distinct content"));
        }
        if self.capacity >= catalog as f64 {
            return Err(CliError::validation("capacity", format!("must be below the {catalog} files in all catalogs")));
        }
        match self.mode {
            Mode::OnlineDistinct | Mode::OnlineGrouped => self.validate_controller(),
            Mode::Market => {
                let m = self.market.as_ref().ok_or_else(|| CliError::validation("market", "required by MARKET"))?;
                positive("market.price", m.price)?;
                positive("market.tol", m.tol)?;
                if m.rounds == 0 {
                    return Err(CliError::validation("market.rounds", "must be >= 1"));
                }
                for (k, p) in self.providers.iter().enumerate() {
                    if !at(format!("providers[{k}].utility"), p.utility.to_spec())?.is_strictly_concave() {
                        return Err(CliError::validation(format!("providers[{k}].utility"), "MARKET needs strictly concave utilities"));
                    }
                }
                Ok(())
            }
            Mode::CtValidate => {
                let v = self.validation.as_ref().ok_or_else(|| CliError::validation("validation", "required by CT_VALIDATE"))?;
                if v.requests == 0 {
                    return Err(CliError::validation("validation.requests", "must be >= 1"));
                }
                if !v.sizes.is_empty() {
                    let parts = self.partition_count();
                    if v.sizes.len() != parts {
                        return Err(CliError::validation("validation.sizes", format!("need {parts} sizes")));
                    }
                    if v.sizes.iter().any(|c| !(*c >= 1.0)) {
                        return Err(CliError::validation("validation.sizes", "sizes must be >= 1"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn validate_controller(&self) -> CliResult<()> {
        let c = self.controller.as_ref().ok_or_else(|| CliError::validation("controller", "required by online modes"))?;
        positive("controller.step", c.step)?;
        positive("controller.horizon", c.horizon)?;
        positive("controller.epsilon", c.epsilon)?;
        if c.iterations == 0 {
            return Err(CliError::validation("controller.iterations", "must be >= 1"));
        }
        if c.oracle == OracleName::Simulated && c.window == 0 {
            return Err(CliError::validation("controller.window", "must be >= 1"));
        }
        if !(0.0..0.5).contains(&c.probe) {
            return Err(CliError::validation("controller.probe", "must lie in [0, 0.5)"));
        }
        if !c.start.is_empty() {
            let parts = self.partition_count();
            if c.start.len() != parts {
                return Err(CliError::validation("controller.start", format!("need {parts} sizes")));
            }
            if c.start.iter().any(|x| !(*x >= 1.0)) {
                return Err(CliError::validation("controller.start", "sizes must be >= 1"));
            }
            let total: f64 = c.start.iter().sum();
            if (total - self.capacity).abs() > 1e-9 * self.capacity {
                return Err(CliError::validation("controller.start", format!("sizes sum to {total}, capacity is {}", self.capacity)));
            }
        }
        Ok(())
    }

    fn validate_fagin(&self) -> CliResult<()> {
        let f = self.fagin.as_ref().ok_or_else(|| CliError::validation("fagin", "required by FAGIN_STRATEGY"))?;
        if f.strategies.is_empty() {
            return Err(CliError::validation("fagin.strategies", "list at least one strategy"));
        }
        let w = self.fagin_workload()?;
        at("fagin", w.validate())?;
        if w.beta > 1.0 {
            return Err(CliError::validation("capacity", "exceeds the total content mass"));
        }
        Ok(())
    }

    /// Provider `k` as a core value.
    pub fn provider(&self, k: usize) -> CliResult<Provider<f64>> {
        let p = &self.providers[k];
        let path = format!("providers[{k}]");
        positive(&format!("{path}.rate"), p.rate)?;
        if p.files == 0 {
            return Err(CliError::validation(format!("{path}.files"), "must be >= 1"));
        }
        if p.utility.kind == UtilityName::AlphaFair && p.utility.alpha.is_none() {
            return Err(CliError::validation(format!("{path}.utility.alpha"), "required by alpha_fair"));
        }
        if p.utility.kind != UtilityName::AlphaFair && p.utility.alpha.is_some() {
            return Err(CliError::validation(format!("{path}.utility.alpha"), "only alpha_fair takes alpha"));
        }
        let utility = at(format!("{path}.utility"), p.utility.to_spec())?;
        let popularity = match &p.popularity {
            PopularitySpec::Zipf { exponent } => PopularityModel::Zipf { exponent: *exponent, count: p.files },
            PopularitySpec::Piecewise { segments } => PopularityModel::PiecewiseCdf(at(format!("{path}.popularity.segments"), cdf(segments))?),
            PopularitySpec::Explicit { probabilities } => PopularityModel::Explicit(probabilities.clone()),
        };
        let provider = at(format!("{path}.popularity"), Provider::new(k, p.rate, popularity, p.files, utility))?;
        at(format!("{path}.popularity"), provider.probabilities())?;
        Ok(provider)
    }

    pub fn providers(&self) -> CliResult<Vec<Provider<f64>>> {
        (0..self.providers.len()).map(|k| self.provider(k)).collect()
    }

    pub fn utilities(&self) -> CliResult<Vec<UtilitySpec<f64>>> {
        Ok(self.providers()?.iter().map(|p| p.utility).collect())
    }

    /// Content groups of the overlap scenario: provider one only, provider
    /// two only, shared.
    pub fn groups(&self) -> CliResult<Vec<ContentGroup<f64>>> {
        let o = self.overlap.as_ref().ok_or_else(|| CliError::validation("overlap", "required"))?;
        let p = self.providers()?;
        Ok(catalog::strided_overlap(&p[0], &p[1], o.stride, o.span, o.ordering == SharedOrdering::Reversed)?)
    }

    /// Partition demands: the content groups when an overlap is given, one
    /// partition per provider otherwise.
    pub fn demands(&self) -> CliResult<Vec<PartitionDemand<f64>>> {
        if self.overlap.is_some() {
            Ok(self.groups()?.into_iter().map(|g| g.demand).collect())
        } else {
            Ok(optimizer::distinct_demands(&self.providers()?)?)
        }
    }

    /// Number of partitions the scenario's demands define.
    pub fn partition_count(&self) -> usize {
        if self.overlap.is_some() {
            3
        } else {
            self.providers.len()
        }
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        SolverOptions { kkt_tol: self.solver.kkt_tol, max_iters: self.solver.max_iters, ..SolverOptions::default() }
    }

    pub fn fagin_workload(&self) -> CliResult<SharedContentWorkload<f64>> {
        let f = self.fagin.as_ref().ok_or_else(|| CliError::validation("fagin", "required"))?;
        if f.shared.is_empty() || f.shared.len() != f.private.len() {
            return Err(CliError::validation("fagin.private", "need one shared and one private demand per provider"));
        }
        positive("fagin.shared_mass", f.shared_mass)?;
        let shared = f
            .shared
            .iter()
            .enumerate()
            .map(|(k, s)| Ok(SetRequests { rate: s.rate, cdf: at(format!("fagin.shared[{k}].segments"), cdf(&s.segments))? }))
            .collect::<CliResult<Vec<_>>>()?;
        let private = f
            .private
            .iter()
            .enumerate()
            .map(|(k, s)| {
                positive(&format!("fagin.private[{k}].mass"), s.mass)?;
                Ok((s.mass, SetRequests { rate: s.rate, cdf: at(format!("fagin.private[{k}].segments"), cdf(&s.segments))? }))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let total = f.shared_mass + f.private.iter().map(|p| p.mass).sum::<f64>();
        Ok(SharedContentWorkload { shared_mass: f.shared_mass, shared, private, beta: self.capacity / total })
    }
}

//! Utility-driven partitioning of a shared LRU cache among content providers.
//!
//! The crate is generic over the scalar type (`f32` or `f64`, see [`Real`]);
//! the aliases at the crate root fix it to `f64`.

pub mod catalog;
pub mod ct;
pub mod error;
pub mod fagin;
pub mod lrusim;
pub mod onlinectl;
pub mod optimizer;
pub mod roots;
pub mod scalar;
pub mod simplex;
pub mod utility;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Provider = catalog::Provider<f64>;
pub type PopularityModel = catalog::PopularityModel<f64>;
pub type PiecewiseCdf = catalog::PiecewiseCdf<f64>;
pub type OverlapWorkload = catalog::OverlapWorkload<f64>;
pub type ContentGroup = catalog::ContentGroup<f64>;
pub type CtProblem = ct::CtProblem<f64>;
pub type CtSolution = ct::CtSolution<f64>;
pub type PartitionDemand = ct::PartitionDemand<f64>;
pub type UtilitySpec = utility::UtilitySpec<f64>;
pub type UtilityKind = utility::UtilityKind<f64>;
pub type PenaltySpec = utility::PenaltySpec<f64>;
pub type RateProfile = fagin::RateProfile<f64>;
pub type AsymptoticWorkload = fagin::AsymptoticWorkload<f64>;
pub type SharedContentWorkload = fagin::SharedContentWorkload<f64>;
pub type StrategyResult = fagin::StrategyResult<f64>;
pub type PartitionPlan = optimizer::PartitionPlan<f64>;
pub type OptimumReport = optimizer::OptimumReport<f64>;
pub type SolverOptions = optimizer::SolverOptions<f64>;
pub type MarketOutcome = optimizer::MarketOutcome<f64>;
pub type Controller = onlinectl::Controller<f64>;
pub type ControllerConfig = onlinectl::ControllerConfig<f64>;
pub type StepSchedule = onlinectl::StepSchedule<f64>;
pub type RunTrace = onlinectl::RunTrace<f64>;
pub type Stream = lrusim::Stream<f64>;
pub type SimConfig = lrusim::SimConfig<f64>;
pub use fagin::Strategy;
pub use lrusim::{HitCounters, LruList, Simulator};

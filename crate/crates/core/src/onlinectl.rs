//! Online partition sizing from measured hit rates.
//!
//! Each iteration the controller observes hit rates at the current sizes,
//! estimates every partition's marginal utility by a difference quotient
//! against the previous iteration, and moves capacity from partitions with
//! below-average marginal utility to those above it. The mean-centred update
//! keeps the total size fixed.

use crate::ct::{self, PartitionDemand};
use crate::error::{Error, Result};
use crate::lrusim::{round_sizes, Simulator};
use crate::optimizer::evaluate_plan;
use crate::scalar::Real;
use crate::simplex;
use crate::utility::{PenaltySpec, UtilitySpec};

/// Step-size schedule `gamma_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<S> {
    Constant(S),
    /// `gamma_0 / (1 + t / horizon)`.
    Diminishing { initial: S, horizon: S },
}

impl<S: Real> StepSchedule<S> {
    pub fn at(&self, t: usize) -> S {
        match *self {
            StepSchedule::Constant(g) => g,
            StepSchedule::Diminishing { initial, horizon } => initial / (S::one() + S::count(t) / horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig<S> {
    pub schedule: StepSchedule<S>,
    /// Stop threshold on `max_p (delta_p - eta)`.
    pub epsilon: S,
    /// Smallest size of any partition.
    pub min_size: S,
    /// Optional per-partition size ceilings.
    pub max_sizes: Option<Vec<S>>,
    /// Size of the first perturbation as a fraction of the capacity.
    pub bootstrap: S,
    /// Smallest move per iteration as a fraction of the capacity. When the
    /// gradient step is smaller, an alternating antisymmetric dither of this
    /// size is added so the difference quotients keep a usable denominator
    /// under measurement noise. Zero disables it.
    pub probe: S,
}

impl<S: Real> ControllerConfig<S> {
    pub fn new(schedule: StepSchedule<S>) -> Self {
        Self { schedule, epsilon: S::lit(1e-9), min_size: S::one(), max_sizes: None, bootstrap: S::lit(0.01), probe: S::zero() }
    }
}

/// Per-iteration outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub delta: Vec<S>,
    pub eta: S,
    pub converged: bool,
}

/// Controller state between measurements.
#[derive(Debug, Clone)]
pub struct Controller<S> {
    config: ControllerConfig<S>,
    utilities: Vec<UtilitySpec<S>>,
    capacity: S,
    iteration: usize,
    sizes: Vec<S>,
    /// Sizes at which the previous measurement was taken.
    measured_at: Option<Vec<S>>,
    /// Previous per-provider, per-partition hit matrix.
    previous: Option<Vec<Vec<S>>>,
    previous_delta: Option<Vec<S>>,
}

impl<S: Real> Controller<S> {
    pub fn new(config: ControllerConfig<S>, utilities: Vec<UtilitySpec<S>>, start: Vec<S>) -> Result<Self> {
        if start.len() < 2 {
            return Err(Error::Invalid("controller needs at least two partitions".into()));
        }
        if let Some(m) = &config.max_sizes {
            if m.len() != start.len() {
                return Err(Error::Invalid(format!("{} ceilings for {} partitions", m.len(), start.len())));
            }
        }
        if start.iter().any(|&c| c < config.min_size) {
            return Err(Error::Invalid(format!("start sizes must be >= {}", config.min_size)));
        }
        let capacity = S::kahan_sum(start.iter().copied());
        Ok(Self {
            config,
            utilities,
            capacity,
            iteration: 0,
            sizes: start,
            measured_at: None,
            previous: None,
            previous_delta: None,
        })
    }

    pub fn sizes(&self) -> &[S] {
        &self.sizes
    }

    pub fn capacity(&self) -> S {
        self.capacity
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn utilities(&self) -> &[UtilitySpec<S>] {
        &self.utilities
    }

    fn bounds(&self) -> (Vec<S>, Vec<S>) {
        let n = self.sizes.len();
        let lower = vec![self.config.min_size; n];
        let upper = self.config.max_sizes.clone().unwrap_or_else(|| vec![S::infinity(); n]);
        (lower, upper)
    }

    fn apply(&mut self, change: &[S]) -> Result<()> {
        let moved: Vec<S> = self.sizes.iter().zip(change).map(|(&c, &d)| c + d).collect();
        let (lower, upper) = self.bounds();
        self.sizes = simplex::project(&moved, &lower, &upper, self.capacity)?;
        Ok(())
    }

    /// Distinct content: partition `k` serves only provider `k`, and
    /// `hits[k]` is its measured hit rate at `realized` sizes.
    pub fn step_distinct(&mut self, hits: &[S], realized: &[S]) -> Result<StepOutcome<S>> {
        let n = self.sizes.len();
        if hits.len() != n || self.utilities.len() != n {
            return Err(Error::Invalid(format!("{} hit rates and {} utilities for {n} partitions", hits.len(), self.utilities.len())));
        }
        let matrix: Vec<Vec<S>> =
            (0..n).map(|k| (0..n).map(|p| if p == k { hits[k] } else { S::zero() }).collect()).collect();
        self.step(&matrix, realized, |prev, cur, k_utils, p| {
            let u = &k_utils[p];
            Ok(u.value(cur[p][p])? - u.value(prev[p][p])?)
        })
    }

    /// Shared content: `hits[k][p]` is provider `k`'s hit rate in partition
    /// `p`. Utility changes are linearized with `U_k'` at the previous
    /// per-provider totals.
    pub fn step_grouped(&mut self, hits: &[Vec<S>], realized: &[S]) -> Result<StepOutcome<S>> {
        let n = self.sizes.len();
        if hits.len() != self.utilities.len() || hits.iter().any(|row| row.len() != n) {
            return Err(Error::Invalid("hit matrix must be providers x partitions".into()));
        }
        self.step(hits, realized, |prev, cur, utils, p| {
            let mut change = S::zero();
            for (k, u) in utils.iter().enumerate() {
                let total = S::kahan_sum(prev[k].iter().copied());
                change = change + u.derivative(total)? * (cur[k][p] - prev[k][p]);
            }
            Ok(change)
        })
    }

    fn step<F>(&mut self, hits: &[Vec<S>], realized: &[S], utility_change: F) -> Result<StepOutcome<S>>
    where
        F: Fn(&[Vec<S>], &[Vec<S>], &[UtilitySpec<S>], usize) -> Result<S>,
    {
        let n = self.sizes.len();
        if realized.len() != n {
            return Err(Error::Invalid(format!("{} realized sizes for {n} partitions", realized.len())));
        }
        let (Some(prev), Some(prev_sizes)) = (self.previous.take(), self.measured_at.take()) else {
            // First measurement: perturb antisymmetrically to get a baseline.
            self.previous = Some(hits.to_vec());
            self.measured_at = Some(realized.to_vec());
            let push = self.config.bootstrap * self.capacity;
            let mut change = vec![-push / S::count(n - 1); n];
            change[0] = push;
            self.apply(&change)?;
            self.iteration += 1;
            return Ok(StepOutcome { delta: vec![S::zero(); n], eta: S::zero(), converged: false });
        };

        let probe = self.config.probe * self.capacity;
        // With dithering on, a much smaller move is rounding, not signal.
        let guard = (S::lit(1e-6) * self.capacity).max(probe / S::lit(4.0));
        let mut delta = vec![S::zero(); n];
        let mut guarded = vec![false; n];
        for p in 0..n {
            let dc = realized[p] - prev_sizes[p];
            if dc.abs() < guard {
                guarded[p] = true;
            } else {
                delta[p] = utility_change(&prev, hits, &self.utilities, p)? / dc;
            }
        }
        let free: Vec<S> = (0..n).filter(|&p| !guarded[p]).map(|p| delta[p]).collect();
        let fallback = if free.is_empty() { S::zero() } else { S::kahan_sum(free.iter().copied()) / S::count(free.len()) };
        for p in 0..n {
            if guarded[p] {
                delta[p] = self.previous_delta.as_ref().map_or(fallback, |d| d[p]);
            }
        }
        let eta = S::kahan_sum(delta.iter().copied()) / S::count(n);
        let gap = delta.iter().fold(S::neg_infinity(), |m, &d| m.max(d - eta));
        let converged = gap <= self.config.epsilon;

        let gamma = self.config.schedule.at(self.iteration);
        let mut change: Vec<S> = delta.iter().map(|&d| gamma * (d - eta)).collect();
        // Partitions pinned at a bound would absorb the dither, and the
        // step is judged after projection for the same reason.
        let (lower, upper) = self.bounds();
        let movable: Vec<usize> =
            (0..n).filter(|&p| self.sizes[p] - lower[p] >= probe && upper[p] - self.sizes[p] >= probe).collect();
        let small = || -> Result<bool> {
            let moved: Vec<S> = self.sizes.iter().zip(&change).map(|(&c, &d)| c + d).collect();
            let target = simplex::project(&moved, &lower, &upper, self.capacity)?;
            Ok(movable.iter().all(|&p| (target[p] - self.sizes[p]).abs() < probe))
        };
        if probe > S::zero() && movable.len() >= 2 && small()? {
            // Pairs of iterations share a pattern with opposite signs.
            let m = movable.len();
            let lead = movable[(self.iteration / 2) % m];
            let sign = if self.iteration % 2 == 0 { S::one() } else { -S::one() };
            for &p in &movable {
                let d = if p == lead { probe } else { -probe / S::count(m - 1) };
                change[p] = change[p] + sign * d;
            }
        }
        let before = self.sizes.clone();
        if !converged {
            self.apply(&change)?;
            if self.sizes == before && guarded.iter().all(|&g| g) {
                return Err(Error::Stalled { iteration: self.iteration });
            }
        }
        self.previous = Some(hits.to_vec());
        self.measured_at = Some(realized.to_vec());
        self.previous_delta = Some(delta.clone());
        self.iteration += 1;
        Ok(StepOutcome { delta, eta, converged })
    }
}

/// Source of hit-rate measurements at given sizes.
pub trait HitOracle<S> {
    fn providers(&self) -> usize;
    fn partitions(&self) -> usize;
    /// Hit rate matrix `[provider][partition]` at `sizes`, together with the
    /// sizes actually in effect.
    fn measure(&mut self, sizes: &[S]) -> Result<(Vec<Vec<S>>, Vec<S>)>;
}

/// Characteristic-time hit rates: noise-free measurements.
#[derive(Debug, Clone)]
pub struct ExactOracle<S> {
    demands: Vec<PartitionDemand<S>>,
    providers: usize,
    ct_tol: S,
}

impl<S: Real> ExactOracle<S> {
    pub fn new(demands: Vec<PartitionDemand<S>>, ct_tol: S) -> Self {
        let providers = demands.iter().flat_map(|d| d.per_provider().iter().map(|p| p.0 + 1)).max().unwrap_or(0);
        Self { demands, providers, ct_tol }
    }
}

impl<S: Real> HitOracle<S> for ExactOracle<S> {
    fn providers(&self) -> usize {
        self.providers
    }

    fn partitions(&self) -> usize {
        self.demands.len()
    }

    fn measure(&mut self, sizes: &[S]) -> Result<(Vec<Vec<S>>, Vec<S>)> {
        let mut hits = vec![vec![S::zero(); self.demands.len()]; self.providers];
        for (p, (d, &c)) in self.demands.iter().zip(sizes).enumerate() {
            if c >= S::count(d.files()) {
                for (k, r) in d.per_provider() {
                    hits[*k][p] = S::kahan_sum(r.iter().copied());
                }
                continue;
            }
            for (k, h) in ct::multi_rate_hit_rates(d, c, self.ct_tol)?.hits {
                hits[k][p] = h;
            }
        }
        Ok((hits, sizes.to_vec()))
    }
}

/// Hit rates counted by the simulator over a window of requests; the
/// caches persist between windows.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    simulator: Simulator,
    window: u64,
}

impl SimulatedOracle {
    /// Default window of requests per measurement.
    pub const DEFAULT_WINDOW: u64 = 200_000;

    pub fn new(simulator: Simulator, window: u64) -> Self {
        Self { simulator, window }
    }

    pub fn simulator(&self) -> &Simulator {
        &self.simulator
    }
}

impl<S: Real> HitOracle<S> for SimulatedOracle {
    fn providers(&self) -> usize {
        self.simulator.providers()
    }

    fn partitions(&self) -> usize {
        self.simulator.partitions()
    }

    fn measure(&mut self, sizes: &[S]) -> Result<(Vec<Vec<S>>, Vec<S>)> {
        let rounded = round_sizes(sizes);
        self.simulator.resize(&rounded);
        let counts = self.simulator.run(self.window);
        let elapsed = S::lit(self.simulator.elapsed(self.window));
        let hits = (0..counts.providers())
            .map(|k| (0..counts.partitions()).map(|p| S::lit(counts.hits(k, p) as f64) / elapsed).collect())
            .collect();
        Ok((hits, rounded.into_iter().map(S::count).collect()))
    }
}

/// One iteration of a controller run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<S> {
    pub iteration: usize,
    pub sizes: Vec<S>,
    /// Measured hit rate per provider.
    pub hit_rates: Vec<S>,
    pub objective: S,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<S> {
    pub rows: Vec<TraceRow<S>>,
    pub converged: bool,
}

impl<S: Real> RunTrace<S> {
    /// Mean sizes over the last `count` rows.
    pub fn tail_mean(&self, count: usize) -> Vec<S> {
        let tail = &self.rows[self.rows.len().saturating_sub(count)..];
        let n = tail.first().map_or(0, |r| r.sizes.len());
        (0..n).map(|p| S::kahan_sum(tail.iter().map(|r| r.sizes[p])) / S::count(tail.len())).collect()
    }

    pub fn last(&self) -> Option<&TraceRow<S>> {
        self.rows.last()
    }
}

/// Whether partitions serve single providers (`Distinct`) or shared content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    Distinct,
    Grouped,
}

/// Drives `controller` with measurements from `oracle` for up to
/// `iterations` steps, optionally stopping at convergence.
pub fn run_controller<S: Real, O: HitOracle<S>>(
    controller: &mut Controller<S>,
    oracle: &mut O,
    mode: ControlMode,
    iterations: usize,
    stop_on_convergence: bool,
) -> Result<RunTrace<S>> {
    let mut rows = Vec::with_capacity(iterations);
    let mut converged = false;
    for _ in 0..iterations {
        let sizes = controller.sizes().to_vec();
        let (matrix, realized) = oracle.measure(&sizes)?;
        let per_provider: Vec<S> = matrix.iter().map(|row| S::kahan_sum(row.iter().copied())).collect();
        let mut objective = S::zero();
        for (u, &h) in controller.utilities().iter().zip(&per_provider) {
            objective = objective + u.value(h)?;
        }
        let outcome = match mode {
            ControlMode::Distinct => {
                let diag: Vec<S> = (0..matrix.len()).map(|k| matrix[k][k]).collect();
                controller.step_distinct(&diag, &realized)?
            }
            ControlMode::Grouped => controller.step_grouped(&matrix, &realized)?,
        };
        rows.push(TraceRow {
            iteration: rows.len(),
            sizes,
            hit_rates: per_provider,
            objective,
            converged: outcome.converged,
        });
        converged = outcome.converged;
        if converged && stop_on_convergence {
            break;
        }
    }
    Ok(RunTrace { rows, converged })
}

/// One exact gradient-ascent step on `W(C) = sum U_k(h_k) - P(sum C - C_base)`:
/// `C_p <- max(0, C_p + gamma (dW/dC_p))`, with sizes capped below each
/// partition's catalog.
pub fn gradient_step_analytic<S: Real>(
    sizes: &[S],
    demands: &[PartitionDemand<S>],
    utilities: &[UtilitySpec<S>],
    penalty: &PenaltySpec<S>,
    gamma: S,
    ct_tol: S,
) -> Result<Vec<S>> {
    let eval = evaluate_plan(demands, utilities, sizes, ct_tol, None)?;
    let used = S::kahan_sum(sizes.iter().copied());
    let cost = penalty.derivative(used - penalty.base_capacity);
    Ok(sizes
        .iter()
        .zip(&eval.gradient)
        .zip(demands)
        .map(|((&c, &g), d)| {
            let cap = S::count(d.files()) * (S::one() - S::lit(1e-9));
            (c + gamma * (g - cost)).max(S::zero()).min(cap)
        })
        .collect())
}

/// `W(C)` with a capacity penalty.
pub fn penalized_objective<S: Real>(
    sizes: &[S],
    demands: &[PartitionDemand<S>],
    utilities: &[UtilitySpec<S>],
    penalty: &PenaltySpec<S>,
    ct_tol: S,
) -> Result<S> {
    let eval = evaluate_plan(demands, utilities, sizes, ct_tol, None)?;
    let used = S::kahan_sum(sizes.iter().copied());
    Ok(eval.objective - penalty.value(used - penalty.base_capacity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_linear() -> Controller<f64> {
        let cfg = ControllerConfig::new(StepSchedule::Constant(10.0));
        Controller::new(cfg, vec![UtilitySpec::linear(), UtilitySpec::linear()], vec![500.0, 500.0]).unwrap()
    }

    #[test]
    fn mean_centred_update() {
        let mut c = two_linear();
        c.step_distinct(&[100.0, 100.0], &[500.0, 500.0]).unwrap();
        assert_eq!(c.sizes(), &[510.0, 490.0]);
        // Utility changes 30 and -10 over size changes 10 and -10.
        let out = c.step_distinct(&[130.0, 90.0], &[510.0, 490.0]).unwrap();
        assert_eq!(out.delta, vec![3.0, 1.0]);
        assert_eq!(out.eta, 2.0);
        assert!(!out.converged);
        assert_relative_eq!(c.sizes()[0], 520.0);
        assert_relative_eq!(c.sizes()[1], 480.0);
    }

    #[test]
    fn equal_marginals_converge() {
        let mut c = two_linear();
        c.step_distinct(&[100.0, 100.0], &[500.0, 500.0]).unwrap();
        let out = c.step_distinct(&[120.0, 80.0], &[510.0, 490.0]).unwrap();
        assert_eq!(out.delta, vec![2.0, 2.0]);
        assert!(out.converged);
        assert_eq!(c.sizes(), &[510.0, 490.0]);
    }

    #[test]
    fn probe_keeps_moves_large() {
        let mut cfg = ControllerConfig::new(StepSchedule::Constant(10.0));
        cfg.probe = 0.03;
        let mut c = Controller::new(cfg, vec![UtilitySpec::linear(), UtilitySpec::linear()], vec![500.0, 500.0]).unwrap();
        c.step_distinct(&[100.0, 100.0], &[500.0, 500.0]).unwrap();
        // Gradient step of +0.1 on partition 0, dither of -30 at iteration 1.
        c.step_distinct(&[120.2, 80.0], &[510.0, 490.0]).unwrap();
        assert_relative_eq!(c.sizes()[0], 480.1, epsilon = 1e-9);
        assert_relative_eq!(c.sizes()[0] + c.sizes()[1], 1000.0, epsilon = 1e-9);
        // Large steps are left alone.
        let before = c.sizes().to_vec();
        let out = c.step_distinct(&[120.2 + 499.0, 80.0 + 49.9], &before).unwrap();
        assert!((10.0_f64 * (out.delta[0] - out.eta)).abs() > 30.0);
        assert_relative_eq!(c.sizes()[0] - before[0], 10.0 * (out.delta[0] - out.eta), epsilon = 1e-9);
    }

    #[test]
    fn probe_skips_pinned_partitions() {
        let mut cfg = ControllerConfig::new(StepSchedule::Constant(0.0));
        cfg.probe = 0.01;
        cfg.max_sizes = Some(vec![1000.0, 1000.0, 300.0]);
        let mut c = Controller::new(cfg, vec![UtilitySpec::linear(); 3], vec![400.0, 300.0, 300.0]).unwrap();
        c.step_distinct(&[50.0; 3], &[400.0, 300.0, 300.0]).unwrap();
        // The bootstrap leaves partition 2 within one probe of its cap.
        for i in 1..=6 {
            let before = c.sizes().to_vec();
            let t = i as f64;
            c.step_distinct(&[50.0 + t, 50.0 - t, 50.0 + 2.0 * t], &before).unwrap();
            let moved: Vec<f64> = c.sizes().iter().zip(&before).map(|(a, b)| a - b).collect();
            assert_relative_eq!(moved[0].abs(), 10.0, epsilon = 1e-9);
            assert_relative_eq!(moved[1], -moved[0], epsilon = 1e-9);
            assert_eq!(moved[2], 0.0);
        }
    }

    #[test]
    fn rounding_sized_moves_are_guarded_when_dithering() {
        let mut cfg = ControllerConfig::new(StepSchedule::Constant(0.0));
        cfg.probe = 0.1;
        let mut c = Controller::new(cfg, vec![UtilitySpec::linear(); 3], vec![400.0, 300.0, 300.0]).unwrap();
        c.step_distinct(&[50.0; 3], &[400.0, 300.0, 300.0]).unwrap();
        c.step_distinct(&[60.0, 45.0, 48.0], &[500.0, 250.0, 250.0]).unwrap();
        // Partition 2 moved one item: its delta carries over instead of 30 / 1.
        let out = c.step_distinct(&[70.0, 40.0, 78.0], &[600.0, 200.0, 251.0]).unwrap();
        assert_relative_eq!(out.delta[2], 0.04, epsilon = 1e-12);
        assert_relative_eq!(out.delta[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn floor_preserves_total() {
        let cfg = ControllerConfig::new(StepSchedule::Constant(1e6));
        let mut c = Controller::new(cfg, vec![UtilitySpec::linear(); 3], vec![10.0, 10.0, 80.0]).unwrap();
        c.step_distinct(&[50.0; 3], &[10.0, 10.0, 80.0]).unwrap();
        let realized = c.sizes().to_vec();
        c.step_distinct(&[45.0, 51.0, 59.0], &realized).unwrap();
        assert!(c.sizes().iter().all(|&s| s >= 1.0));
        assert_relative_eq!(c.sizes().iter().sum::<f64>(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn grouped_reduces_to_distinct() {
        let utils = vec![UtilitySpec::log(), UtilitySpec::neg_inverse()];
        let cfg = ControllerConfig::new(StepSchedule::Constant(50.0));
        let mut a = Controller::new(cfg.clone(), utils.clone(), vec![40.0, 60.0]).unwrap();
        let mut b = Controller::new(cfg, utils, vec![40.0, 60.0]).unwrap();
        let mut oa = ExactOracle::new(
            vec![
                PartitionDemand::single(0, (1..=200).map(|i| 3.0 / i as f64).collect()).unwrap(),
                PartitionDemand::single(1, (1..=200).map(|i| 1.0 / (i as f64).sqrt()).collect()).unwrap(),
            ],
            1e-12,
        );
        let mut ob = oa.clone();
        let ta = run_controller(&mut a, &mut oa, ControlMode::Distinct, 30, false).unwrap();
        let tb = run_controller(&mut b, &mut ob, ControlMode::Grouped, 30, false).unwrap();
        for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
            for (x, y) in ra.sizes.iter().zip(&rb.sizes) {
                // Linearized and exact utility differences agree to first order.
                assert!((x - y).abs() < 0.5, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn analytic_step_is_zero_at_optimum() {
        let d = vec![PartitionDemand::single(0, vec![1.0; 10]).unwrap(), PartitionDemand::single(1, vec![1.0; 10]).unwrap()];
        let u = [UtilitySpec::linear(), UtilitySpec::linear()];
        // Uniform rates: dh/dC = 1 per partition, so W' = 1 - P'(x) vanishes at x = 1/q.
        let pen = PenaltySpec::new(crate::utility::PenaltyKind::Quadratic { slope: 0.0, curvature: 0.5 }, 6.0).unwrap();
        let at = [4.0, 4.0];
        let next = gradient_step_analytic(&at, &d, &u, &pen, 0.7, 1e-12).unwrap();
        assert_relative_eq!(next[0], 4.0, epsilon = 1e-9);
        assert_relative_eq!(next[1], 4.0, epsilon = 1e-9);
    }
}

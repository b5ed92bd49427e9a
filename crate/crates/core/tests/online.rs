use cachepart::catalog::{strided_overlap, Provider};
use cachepart::ct::PartitionDemand;
use cachepart::lrusim::Simulator;
use cachepart::onlinectl::{
    self, run_controller, ControlMode, Controller, ControllerConfig, ExactOracle, SimulatedOracle, StepSchedule,
};
use cachepart::optimizer::{self, SolverOptions};
use cachepart::utility::{PenaltyKind, PenaltySpec, UtilitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C: f64 = 10_000.0;

fn base_case(u2: UtilitySpec<f64>) -> Vec<Provider<f64>> {
    vec![
        Provider::zipf(0, 15.0, 0.6, 10_000, UtilitySpec::log()).unwrap(),
        Provider::zipf(1, 10.0, 0.8, 20_000, u2).unwrap(),
    ]
}

fn utilities(p: &[Provider<f64>]) -> Vec<UtilitySpec<f64>> {
    p.iter().map(|x| x.utility).collect()
}

#[test]
fn noise_free_controller_reaches_the_offline_optimum() {
    for u2 in [UtilitySpec::linear(), UtilitySpec::log(), UtilitySpec::neg_inverse()] {
        let p = base_case(u2);
        let target = optimizer::optimize_distinct(&p, C, &SolverOptions::default()).unwrap().plan.sizes;
        let mut ctl = Controller::new(ControllerConfig::new(StepSchedule::Constant(5e6)), utilities(&p), vec![5000.0; 2]).unwrap();
        let mut oracle = ExactOracle::new(optimizer::distinct_demands(&p).unwrap(), 1e-12);
        let trace = run_controller(&mut ctl, &mut oracle, ControlMode::Distinct, 500, false).unwrap();
        let last = &trace.last().unwrap().sizes;
        for (a, b) in last.iter().zip(&target) {
            assert!((a - b).abs() <= 0.005 * C, "{last:?} vs {target:?}");
        }
        for row in &trace.rows {
            assert!((row.sizes.iter().sum::<f64>() - C).abs() <= 1e-9 * C);
        }
    }
}

#[test]
fn grouped_controller_settles_on_shared_scenario() {
    let p = base_case(UtilitySpec::log());
    let groups = strided_overlap(&p[0], &p[1], 3, 10_000, false).unwrap();
    let demands: Vec<PartitionDemand<f64>> = groups.iter().map(|g| g.demand.clone()).collect();
    let target = optimizer::optimize_grouped(&demands, &utilities(&p), C, &SolverOptions::default()).unwrap().plan.sizes;
    let mut cfg = ControllerConfig::new(StepSchedule::Constant(5e6));
    cfg.max_sizes = Some(demands.iter().map(|d| d.files() as f64).collect());
    let mut ctl = Controller::new(cfg, utilities(&p), vec![4000.0, 4000.0, 2000.0]).unwrap();
    let mut oracle = ExactOracle::new(demands, 1e-12);
    let trace = run_controller(&mut ctl, &mut oracle, ControlMode::Grouped, 500, false).unwrap();
    let last = &trace.last().unwrap().sizes;
    for (a, b) in last.iter().zip(&target) {
        assert!((a - b).abs() <= 0.005 * C, "{last:?} vs {target:?}");
    }
}

#[test]
fn simulated_controller_averages_near_the_optimum() {
    let p = base_case(UtilitySpec::log());
    let demands = optimizer::distinct_demands(&p).unwrap();
    let target = optimizer::optimize_distinct(&p, C, &SolverOptions::default()).unwrap().plan.sizes;
    let mut cfg = ControllerConfig::new(StepSchedule::Diminishing { initial: 5e6, horizon: 10.0 });
    cfg.probe = 0.01;
    let mut ctl = Controller::new(cfg, utilities(&p), vec![5000.0; 2]).unwrap();
    let sim = Simulator::from_demands(&demands, &[5000, 5000], 7).unwrap();
    let mut oracle = SimulatedOracle::new(sim, 500_000);
    let trace = run_controller(&mut ctl, &mut oracle, ControlMode::Distinct, 500, false).unwrap();
    let mean = trace.tail_mean(100);
    for (a, b) in mean.iter().zip(&target) {
        assert!((a - b).abs() <= 0.02 * C, "{mean:?} vs {target:?}");
    }
}

/// Ascent trajectory of the penalized objective from `start`.
fn analytic_trajectory(
    demands: &[PartitionDemand<f64>],
    u: &[UtilitySpec<f64>],
    penalty: &PenaltySpec<f64>,
    gamma: f64,
    start: Vec<f64>,
    steps: usize,
) -> Vec<(Vec<f64>, f64)> {
    let mut sizes = start;
    let mut out = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        let w = onlinectl::penalized_objective(&sizes, demands, u, penalty, 1e-12).unwrap();
        out.push((sizes.clone(), w));
        sizes = onlinectl::gradient_step_analytic(&sizes, demands, u, penalty, gamma, 1e-12).unwrap();
    }
    out
}

/// Penalty with curvature matched to the objective and a step size below
/// the inverse of the largest curvature met on the start region.
fn lyapunov_setup() -> (Vec<PartitionDemand<f64>>, Vec<UtilitySpec<f64>>, PenaltySpec<f64>, f64) {
    let p = base_case(UtilitySpec::log());
    let d = optimizer::distinct_demands(&p).unwrap();
    let u = utilities(&p);
    let mut top: f64 = 0.0;
    for c in [2000.0, 5000.0, 8000.0] {
        let e = optimizer::evaluate_plan(&d, &u, &[c, c], 1e-12, None).unwrap();
        top = top.max(e.curvature.iter().copied().fold(0.0, f64::max));
    }
    let q = top;
    let penalty = PenaltySpec::new(PenaltyKind::Quadratic { slope: 0.0, curvature: q }, C).unwrap();
    let gamma = 0.5 / (top + 2.0 * q);
    (d, u, penalty, gamma)
}

#[test]
fn penalized_ascent_is_monotone_and_start_independent() {
    let (d, u, penalty, gamma) = lyapunov_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut limits: Vec<Vec<f64>> = Vec::new();
    for _ in 0..4 {
        let start = vec![rng.random_range(2000.0..8000.0), rng.random_range(2000.0..8000.0)];
        let traj = analytic_trajectory(&d, &u, &penalty, gamma, start, 1000);
        // V = W* - W is non-increasing exactly when W is non-decreasing.
        for w in traj.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-10, "W fell from {} to {}", w[0].1, w[1].1);
        }
        limits.push(traj.last().unwrap().0.clone());
    }
    for l in &limits[1..] {
        for (a, b) in l.iter().zip(&limits[0]) {
            assert!((a - b).abs() <= 1e-4 * C, "{l:?} vs {:?}", limits[0]);
        }
    }
}

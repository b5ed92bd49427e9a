//! Per-mode pipelines from a validated scenario to trace and summary tables.

use cachepart::ct::PartitionDemand;
use cachepart::lrusim::{self, SimConfig, Simulator};
use cachepart::onlinectl::{run_controller, ControlMode, Controller, ControllerConfig, ExactOracle, RunTrace, SimulatedOracle};
use cachepart::optimizer::{self, OptimumReport, SolverOptions};
use cachepart::utility::UtilitySpec;
use cachepart::Strategy;

use crate::error::{CliError, CliResult};
use crate::scenario::{Mode, OracleName, Scenario};
use crate::table::{summary_header, summary_row, trace_header, trace_row, Cell, Table};

/// Artifacts of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Table,
    pub summary: Table,
    /// False when the scenario demanded convergence and did not get it.
    pub converged: bool,
}

/// Hit rates and objective of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanValue {
    pub hits: Vec<f64>,
    pub aggregate: f64,
    pub objective: f64,
}

pub fn evaluate(demands: &[PartitionDemand<f64>], utilities: &[UtilitySpec<f64>], sizes: &[f64], ct_tol: f64) -> CliResult<PlanValue> {
    let e = optimizer::evaluate_plan(demands, utilities, sizes, ct_tol, None)?;
    let total: f64 = demands.iter().map(|d| d.aggregate().iter().sum::<f64>()).sum();
    Ok(PlanValue { aggregate: e.hit_rates.iter().sum::<f64>() / total, hits: e.hit_rates, objective: e.objective })
}

pub fn run(s: &Scenario) -> CliResult<RunOutput> {
    s.validate()?;
    match s.mode {
        Mode::OfflineDistinct => offline_distinct(s),
        Mode::OfflineGrouped => offline_grouped(s),
        Mode::OnlineDistinct | Mode::OnlineGrouped => online(s),
        Mode::FaginStrategy => fagin_strategies(s),
        Mode::CtValidate => ct_validate(s),
        Mode::Market => market(s),
    }
}

fn ct_tol() -> f64 {
    SolverOptions::<f64>::default().ct_tol
}

/// Optimizer iterates in the trace layout.
fn history_trace(demands: &[PartitionDemand<f64>], utilities: &[UtilitySpec<f64>], report: &OptimumReport<f64>) -> CliResult<Table> {
    let mut trace = Table::new(trace_header(demands.len(), utilities.len()));
    let steps: Vec<&Vec<f64>> = report.history.iter().map(|(x, _)| x).collect();
    let steps = if steps.is_empty() { vec![&report.plan.sizes] } else { steps };
    let last = steps.len() - 1;
    for (i, sizes) in steps.into_iter().enumerate() {
        let v = evaluate(demands, utilities, sizes, ct_tol())?;
        trace.push(trace_row(i, sizes, &v.hits, v.objective, i == last));
    }
    Ok(trace)
}

fn with_history(s: &Scenario) -> SolverOptions<f64> {
    SolverOptions { record_history: true, ..s.solver_options() }
}

fn offline_distinct(s: &Scenario) -> CliResult<RunOutput> {
    let demands = s.demands()?;
    let utilities = s.utilities()?;
    let parts = demands.len();
    let shared = optimizer::sharing_equivalent_plan(&demands, s.capacity, ct_tol())?;
    let base = evaluate(&demands, &utilities, &shared.sizes, ct_tol())?;
    let best = optimizer::optimize_grouped(&demands, &utilities, s.capacity, &with_history(s))?;
    let opt = evaluate(&demands, &utilities, &best.plan.sizes, ct_tol())?;
    let mut summary = Table::new(summary_header(parts, utilities.len()));
    summary.push(summary_row("shared", &shared.sizes, parts, &base.hits, base.aggregate, base.objective, None));
    summary.push(summary_row("partitioned", &best.plan.sizes, parts, &opt.hits, opt.aggregate, opt.objective, Some(base.objective)));
    Ok(RunOutput { trace: history_trace(&demands, &utilities, &best)?, summary, converged: true })
}

/// Optimal plan of one strategy over the scenario's content groups.
pub fn strategy_optimum(s: &Scenario, strategy: Strategy, opts: &SolverOptions<f64>) -> CliResult<(Vec<PartitionDemand<f64>>, OptimumReport<f64>)> {
    let demands = optimizer::strategy_demands(&s.groups()?, strategy)?;
    let utilities = s.utilities()?;
    let report = if demands.len() == 1 {
        let v = optimizer::evaluate_plan(&demands, &utilities, &[s.capacity], ct_tol(), None)?;
        OptimumReport {
            plan: optimizer::PartitionPlan { members: vec![], sizes: vec![s.capacity], capacity: s.capacity },
            hit_rates: v.hit_rates,
            objective: v.objective,
            kkt_residual: 0.0,
            iterations: 0,
            history: Vec::new(),
        }
    } else {
        optimizer::optimize_grouped(&demands, &utilities, s.capacity, opts)?
    };
    Ok((demands, report))
}

fn offline_grouped(s: &Scenario) -> CliResult<RunOutput> {
    let utilities = s.utilities()?;
    let k = utilities.len();
    let mut summary = Table::new(summary_header(3, k));
    let mut reference = None;
    let mut trace = None;
    for strategy in Strategy::ALL {
        let (demands, report) = strategy_optimum(s, strategy, &with_history(s))?;
        let v = evaluate(&demands, &utilities, &report.plan.sizes, ct_tol())?;
        summary.push(summary_row(strategy.label(), &report.plan.sizes, 3, &v.hits, v.aggregate, v.objective, reference));
        if strategy == Strategy::ShareAll {
            reference = Some(v.objective);
        }
        if strategy == Strategy::SharedSlice {
            trace = Some(history_trace(&demands, &utilities, &report)?);
        }
    }
    Ok(RunOutput { trace: trace.expect("S3 is evaluated"), summary, converged: true })
}

/// Controller run of an online scenario, with the offline optimum it
/// should approach.
pub fn online_run(s: &Scenario) -> CliResult<(RunTrace<f64>, OptimumReport<f64>)> {
    let c = s.controller.as_ref().ok_or_else(|| CliError::validation("controller", "required"))?;
    let demands = s.demands()?;
    let utilities = s.utilities()?;
    let parts = demands.len();
    let target = optimizer::optimize_grouped(&demands, &utilities, s.capacity, &s.solver_options())?;
    let start = if c.start.is_empty() { vec![s.capacity / parts as f64; parts] } else { c.start.clone() };
    let mut cfg = ControllerConfig::new(c.schedule());
    cfg.epsilon = c.epsilon;
    cfg.probe = c.probe;
    let mode = if s.mode == Mode::OnlineGrouped {
        cfg.max_sizes = Some(demands.iter().map(|d| d.files() as f64).collect());
        ControlMode::Grouped
    } else {
        ControlMode::Distinct
    };
    let mut ctl = Controller::new(cfg, utilities, start.clone())?;
    let trace = match c.oracle {
        OracleName::Exact => {
            let mut oracle = ExactOracle::new(demands, ct_tol());
            run_controller(&mut ctl, &mut oracle, mode, c.iterations, c.require_convergence)?
        }
        OracleName::Simulated => {
            let sim = Simulator::from_demands(&demands, &lrusim::round_sizes(&start), s.seed)?;
            let mut oracle = SimulatedOracle::new(sim, c.window);
            run_controller(&mut ctl, &mut oracle, mode, c.iterations, c.require_convergence)?
        }
    };
    Ok((trace, target))
}

/// Rows averaged at the end of an online run.
pub const TAIL: usize = 100;

fn online(s: &Scenario) -> CliResult<RunOutput> {
    let (run, target) = online_run(s)?;
    let demands = s.demands()?;
    let utilities = s.utilities()?;
    let (parts, k) = (demands.len(), utilities.len());
    let rate: f64 = demands.iter().map(|d| d.aggregate().iter().sum::<f64>()).sum();
    let mut trace = Table::new(trace_header(parts, k));
    for row in &run.rows {
        trace.push(trace_row(row.iteration, &row.sizes, &row.hit_rates, row.objective, row.converged));
    }
    let mut summary = Table::new(summary_header(parts, k));
    if let Some(last) = run.last() {
        let agg = last.hit_rates.iter().sum::<f64>() / rate;
        summary.push(summary_row("final", &last.sizes, parts, &last.hit_rates, agg, last.objective, Some(target.objective)));
        let mean = run.tail_mean(TAIL);
        let v = evaluate(&demands, &utilities, &mean, ct_tol())?;
        summary.push(summary_row("tail_mean", &mean, parts, &v.hits, v.aggregate, v.objective, Some(target.objective)));
    }
    let v = evaluate(&demands, &utilities, &target.plan.sizes, ct_tol())?;
    summary.push(summary_row("optimum", &target.plan.sizes, parts, &v.hits, v.aggregate, v.objective, None));
    let required = s.controller.as_ref().is_some_and(|c| c.require_convergence);
    Ok(RunOutput { trace, summary, converged: run.converged || !required })
}

fn fagin_strategies(s: &Scenario) -> CliResult<RunOutput> {
    let w = s.fagin_workload()?;
    let f = s.fagin.as_ref().expect("validated");
    let rates = w.provider_rates();
    let k = rates.len();
    let results = f.strategies.iter().map(|name| Ok(w.optimize(name.strategy())?)).collect::<CliResult<Vec<_>>>()?;
    let parts = results.iter().map(|r| r.split.len()).max().unwrap_or(0);
    let mut trace = Table::new(trace_header(parts, k));
    let mut summary = Table::new(summary_header(parts, k));
    for (i, r) in results.iter().enumerate() {
        let hits: Vec<f64> = rates.iter().zip(&r.provider_miss).map(|(&l, &m)| l * (1.0 - m)).collect();
        let total: f64 = hits.iter().sum();
        summary.push(summary_row(r.strategy.label(), &r.split, parts, &hits, r.hit_probability, total, None));
        let mut row = vec![Cell::from(i)];
        row.extend((0..parts).map(|p| r.split.get(p).copied().into()));
        row.extend(hits.iter().map(|&h| Cell::Num(h)));
        row.extend([Cell::Num(total), Cell::Bool(true)]);
        trace.push(row);
    }
    Ok(RunOutput { trace, summary, converged: true })
}

fn ct_validate(s: &Scenario) -> CliResult<RunOutput> {
    let v = s.validation.as_ref().expect("validated");
    let demands = s.demands()?;
    let utilities = s.utilities()?;
    let (parts, k) = (demands.len(), utilities.len());
    let sizes = if v.sizes.is_empty() {
        optimizer::optimize_grouped(&demands, &utilities, s.capacity, &s.solver_options())?.plan.sizes
    } else {
        v.sizes.clone()
    };
    let rounded = lrusim::round_sizes(&sizes);
    let real: Vec<f64> = rounded.iter().map(|&c| c as f64).collect();
    let ct = evaluate(&demands, &utilities, &real, ct_tol())?;
    let config = SimConfig {
        streams: lrusim::streams_from_demands(&demands),
        partition_files: demands.iter().map(|d| d.files()).collect(),
        warmup: lrusim::default_warmup(&rounded),
        sizes: rounded,
        requests: v.requests,
        seed: s.seed,
    };
    let counts = lrusim::simulate(&config)?;
    let mut rates = vec![0.0; k];
    for d in &demands {
        for (j, r) in d.per_provider() {
            rates[*j] += r.iter().sum::<f64>();
        }
    }
    let sim_hits: Vec<f64> = (0..k)
        .map(|j| {
            let req: u64 = (0..counts.partitions()).map(|p| counts.requests(j, p)).sum();
            rates[j] * counts.provider_hits(j) as f64 / req.max(1) as f64
        })
        .collect();
    let sim_objective = cachepart::utility::objective(&utilities, &sim_hits, None, &real)?;
    let mut summary = Table::new(summary_header(parts, k));
    summary.push(summary_row("ct", &real, parts, &ct.hits, ct.aggregate, ct.objective, None));
    summary.push(summary_row("simulated", &real, parts, &sim_hits, counts.hit_probability(), sim_objective, Some(ct.objective)));
    let mut trace = Table::new(trace_header(parts, k));
    trace.push(trace_row(0, &real, &sim_hits, sim_objective, true));
    Ok(RunOutput { trace, summary, converged: true })
}

fn market(s: &Scenario) -> CliResult<RunOutput> {
    let m = s.market.as_ref().expect("validated");
    let demands = s.demands()?;
    let utilities = s.utilities()?;
    let (parts, k) = (demands.len(), utilities.len());
    let opts = s.solver_options();
    let outcome = optimizer::market_iteration(&demands, &utilities, s.capacity, m.price, m.rounds, m.tol, &opts)?;
    let best = optimizer::optimize_grouped(&demands, &utilities, s.capacity, &opts)?;
    let at_market = evaluate(&demands, &utilities, &outcome.report.plan.sizes, ct_tol())?;
    let at_best = evaluate(&demands, &utilities, &best.plan.sizes, ct_tol())?;
    let mut summary = Table::new(summary_header(parts, k));
    summary.push(summary_row("market", &outcome.report.plan.sizes, parts, &at_market.hits, at_market.aggregate, at_market.objective, Some(at_best.objective)));
    summary.push(summary_row("optimum", &best.plan.sizes, parts, &at_best.hits, at_best.aggregate, at_best.objective, None));
    let mut trace = Table::new(trace_header(parts, k));
    trace.push(trace_row(outcome.rounds, &outcome.report.plan.sizes, &at_market.hits, at_market.objective, true));
    Ok(RunOutput { trace, summary, converged: true })
}

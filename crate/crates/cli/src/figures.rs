//! Parameter sweeps and traces behind each reproduced figure.

use rayon::prelude::*;

use cachepart::optimizer::{self, SolverOptions};
use cachepart::Strategy;

use crate::builtin;
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, evaluate};
use crate::scenario::{PopularitySpec, Scenario, UtilityDef, UtilityName};
use crate::table::{indexed, summary_header, summary_row, trace_header, trace_row, Cell, Table};
use crate::Overrides;

pub const FIGURES: &[&str] = &["fig3", "fig4a", "fig4b", "fig5", "fig6", "fig7", "fig8", "fig9", "counterexample"];

/// One output file of a figure: its name and contents.
pub type Panel = (String, Table);

pub fn reproduce(id: &str, overrides: &Overrides) -> CliResult<Vec<Panel>> {
    let load = |name: &str| -> CliResult<Scenario> {
        let mut s = builtin::load(name)?;
        overrides.apply(&mut s);
        Ok(s)
    };
    match id {
        "fig3" => fig3(&load("base-distinct-offline")?, &load("shared-offline-aligned")?),
        "fig4a" => Ok(vec![("fig4a.csv".into(), pipeline::run(&load("shared-offline-aligned")?)?.summary)]),
        "fig4b" => Ok(vec![("fig4b.csv".into(), pipeline::run(&load("shared-offline-reversed")?)?.summary)]),
        "fig5" | "fig5-sweeps" => fig5(&load("base-distinct-offline")?, &load("shared-offline-aligned")?),
        "fig6" => alpha_sweep("fig6", &load("base-distinct-offline")?),
        "fig7" => alpha_sweep("fig7", &load("shared-offline-aligned")?),
        "fig8" => online_traces("fig8", "online-distinct", overrides),
        "fig9" => online_traces("fig9", "online-shared", overrides),
        "counterexample" => Ok(vec![("counterexample.csv".into(), pipeline::run(&load("counterexample-s2-vs-s3")?)?.summary)]),
        other => Err(CliError::UnknownFigure(other.to_string())),
    }
}

fn ct_tol() -> f64 {
    SolverOptions::<f64>::default().ct_tol
}

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> CliResult<f64>, mut lo: f64, mut hi: f64, tol: f64) -> CliResult<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a)?;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, f(x)?))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Partitioned objective along the capacity split against the shared cache:
/// over `C1` for distinct content, over the shared slice `C3` (with the best
/// `C1`, `C2` for each) when content overlaps.
fn fig3(distinct: &Scenario, shared: &Scenario) -> CliResult<Vec<Panel>> {
    let c = distinct.capacity;
    let demands = distinct.demands()?;
    let u = distinct.utilities()?;
    let plan = optimizer::sharing_equivalent_plan(&demands, c, ct_tol())?;
    let base = evaluate(&demands, &u, &plan.sizes, ct_tol())?.objective;
    let rows = (1..100)
        .into_par_iter()
        .map(|i| {
            let c1 = c * i as f64 / 100.0;
            let v = evaluate(&demands, &u, &[c1, c - c1], ct_tol())?;
            Ok(vec![Cell::Num(c1), Cell::Num(c - c1), Cell::Num(v.objective), Cell::Num(base)])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut a = Table::new(header(&["C1", "C2", "objective_partitioned", "objective_shared"]));
    rows.into_iter().for_each(|r| a.push(r));

    let c = shared.capacity;
    let u = shared.utilities()?;
    let (_, one) = pipeline::strategy_optimum(shared, Strategy::ShareAll, &shared.solver_options())?;
    let groups = optimizer::strategy_demands(&shared.groups()?, Strategy::SharedSlice)?;
    let files: Vec<f64> = groups.iter().map(|d| d.files() as f64).collect();
    let rows = (1..=20)
        .into_par_iter()
        .map(|i| {
            let c3 = files[2] * i as f64 / 20.0;
            let rest = c - c3;
            let lo = (rest - files[1]).max(1.0);
            let hi = files[0].min(rest - 1.0);
            let (c1, w) = golden_max(|c1| Ok(evaluate(&groups, &u, &[c1, rest - c1, c3], ct_tol())?.objective), lo, hi, 1e-3)?;
            Ok(vec![Cell::Num(c3), Cell::Num(c1), Cell::Num(rest - c1), Cell::Num(w), Cell::Num(one.objective)])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut b = Table::new(header(&["C3", "C1", "C2", "objective_partitioned", "objective_shared"]));
    rows.into_iter().for_each(|r| b.push(r));
    Ok(vec![("fig3a.csv".into(), a), ("fig3b.csv".into(), b)])
}

/// Optimal sizes, hit rates and objective of a scenario: per provider for
/// distinct content, S3 for overlapping content.
fn optimum_row(s: &Scenario) -> CliResult<(Vec<f64>, Vec<f64>, f64)> {
    let u = s.utilities()?;
    if s.overlap.is_some() {
        let (d, r) = pipeline::strategy_optimum(s, Strategy::SharedSlice, &s.solver_options())?;
        let v = evaluate(&d, &u, &r.plan.sizes, ct_tol())?;
        Ok((r.plan.sizes, v.hits, v.objective))
    } else {
        let d = s.demands()?;
        let r = optimizer::optimize_grouped(&d, &u, s.capacity, &s.solver_options())?;
        Ok((r.plan.sizes, r.hit_rates, r.objective))
    }
}

/// Sweeps `param` over `grid`, re-optimizing a modified copy of `base` at
/// each value.
fn sweep(param: &str, base: &Scenario, grid: &[f64], modify: impl Fn(&mut Scenario, f64) + Sync) -> CliResult<Table> {
    let parts = base.partition_count();
    let k = base.providers.len();
    let mut table = Table::new(
        std::iter::once(param.to_string())
            .chain(indexed("C", parts))
            .chain(indexed("h", k))
            .chain(["objective".to_string()])
            .collect(),
    );
    let rows = grid
        .par_iter()
        .map(|&x| {
            let mut s = base.clone();
            modify(&mut s, x);
            s.validate()?;
            let (sizes, hits, w) = optimum_row(&s)?;
            let mut row = vec![Cell::Num(x)];
            row.extend(sizes.into_iter().map(Cell::Num));
            row.extend(hits.into_iter().map(Cell::Num));
            row.push(Cell::Num(w));
            Ok(row)
        })
        .collect::<CliResult<Vec<_>>>()?;
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const W1_GRID: [f64; 7] = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
pub const LAMBDA1_GRID: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 30.0, 40.0];
pub const Z1_GRID: [f64; 7] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const ALPHA1_GRID: [f64; 7] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
pub const ALPHA_GRID: [f64; 9] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0];

/// Weight, rate, skew and fairness sweeps for provider one, on distinct and
/// overlapping content.
fn fig5(distinct: &Scenario, shared: &Scenario) -> CliResult<Vec<Panel>> {
    let mut out = Vec::new();
    for (tag, base) in [("distinct", distinct), ("shared", shared)] {
        out.push((format!("fig5_w1_{tag}.csv"), sweep("w1", base, &W1_GRID, |s, x| s.providers[0].utility.weight = x)?));
        out.push((format!("fig5_lambda1_{tag}.csv"), sweep("lambda1", base, &LAMBDA1_GRID, |s, x| s.providers[0].rate = x)?));
        out.push((
            format!("fig5_z1_{tag}.csv"),
            sweep("z1", base, &Z1_GRID, |s, x| s.providers[0].popularity = PopularitySpec::Zipf { exponent: x })?,
        ));
        out.push((
            format!("fig5_alpha1_{tag}.csv"),
            sweep("alpha1", base, &ALPHA1_GRID, |s, x| s.providers[0].utility = UtilityDef::alpha_fair(x))?,
        ));
    }
    Ok(out)
}

/// Both providers alpha-fair with a common alpha.
fn alpha_sweep(id: &str, base: &Scenario) -> CliResult<Vec<Panel>> {
    let table = sweep("alpha", base, &ALPHA_GRID, |s, x| {
        for p in &mut s.providers {
            p.utility = UtilityDef::alpha_fair(x);
        }
    })?;
    Ok(vec![(format!("{id}.csv"), table)])
}

pub const U2_VARIANTS: [(&str, UtilityName); 3] =
    [("linear", UtilityName::Linear), ("log", UtilityName::Log), ("neg-inverse", UtilityName::NegInverse)];

/// Controller traces for the three utilities of provider two, plus the
/// offline optimum of each.
fn online_traces(id: &str, prefix: &str, overrides: &Overrides) -> CliResult<Vec<Panel>> {
    let runs = U2_VARIANTS
        .par_iter()
        .map(|(tag, _)| {
            let mut s = builtin::load(&format!("{prefix}-{tag}"))?;
            overrides.apply(&mut s);
            let (run, target) = pipeline::online_run(&s)?;
            Ok((tag, s, run, target))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = Vec::new();
    let parts = runs[0].1.partition_count();
    let k = runs[0].1.providers.len();
    let mut optimum = Table::new(summary_header(parts, k));
    for (tag, s, run, target) in runs {
        let mut trace = Table::new(trace_header(parts, k));
        for row in &run.rows {
            trace.push(trace_row(row.iteration, &row.sizes, &row.hit_rates, row.objective, row.converged));
        }
        out.push((format!("{id}_{tag}.csv"), trace));
        let v = evaluate(&s.demands()?, &s.utilities()?, &target.plan.sizes, ct_tol())?;
        optimum.push(summary_row(tag, &target.plan.sizes, parts, &v.hits, v.aggregate, v.objective, None));
    }
    out.push((format!("{id}_optimum.csv"), optimum));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_the_peak() {
        let (x, v) = golden_max(|x| Ok(-(x - 2.5) * (x - 2.5) + 1.0), 0.0, 10.0, 1e-9).unwrap();
        assert!((x - 2.5).abs() < 1e-8);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_figure() {
        assert!(matches!(reproduce("fig42", &Overrides::default()), Err(CliError::UnknownFigure(_))));
    }
}

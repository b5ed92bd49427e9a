//! Scenario files, experiment pipelines, figure sweeps and CSV output for
//! the `cachepart` command-line tool.

pub mod builtin;
pub mod error;
pub mod figures;
pub mod pipeline;
pub mod scenario;
pub mod table;

use std::path::{Path, PathBuf};

pub use error::{CliError, CliResult};
pub use pipeline::RunOutput;
pub use scenario::Scenario;

/// Command-line settings that take precedence over scenario fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Optimizer KKT tolerance.
    pub tol: Option<f64>,
    /// Controller iterations for online scenarios, optimizer iterations
    /// otherwise.
    pub max_iters: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(tol) = self.tol {
            s.solver.kkt_tol = tol;
        }
        if let Some(n) = self.max_iters {
            match &mut s.controller {
                Some(c) => c.iterations = n,
                None => s.solver.max_iters = n,
            }
        }
    }
}

/// A scenario file, or a built-in scenario when no such file exists.
pub fn resolve_scenario(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = builtin::text(arg) {
            return Scenario::parse(text);
        }
    }
    Scenario::load(path)
}

/// Runs a scenario and writes `trace.csv` and `summary.csv` into `out_dir`.
pub fn run_to_dir(s: &Scenario, out_dir: &Path) -> CliResult<(RunOutput, Vec<PathBuf>)> {
    let out = pipeline::run(s)?;
    let trace = out_dir.join("trace.csv");
    let summary = out_dir.join("summary.csv");
    out.trace.write_atomic(&trace)?;
    out.summary.write_atomic(&summary)?;
    Ok((out, vec![trace, summary]))
}

/// Reproduces a figure and writes one CSV per panel into `out_dir/<id>`.
pub fn reproduce_to_dir(id: &str, overrides: &Overrides, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let panels = figures::reproduce(id, overrides)?;
    let dir = out_dir.join(id);
    panels
        .iter()
        .map(|(name, table)| {
            let path = dir.join(name);
            table.write_atomic(&path)?;
            Ok(path)
        })
        .collect()
}

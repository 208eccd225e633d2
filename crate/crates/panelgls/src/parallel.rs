//! Thread-pool runner for Monte Carlo replications.

use panelgls_core::dgp::DgpSpec;
use panelgls_core::mc::{run_mc_with, McEstimator, McSummary};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Runs the replications on a pool of `threads` workers (all cores when
/// `None`). The result does not depend on the thread count.
pub fn run_mc_parallel(
    spec: &DgpSpec,
    reps: usize,
    estimators: &[McEstimator],
    steps: usize,
    threads: Option<usize>,
) -> CliResult<McSummary> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    let summary = run_mc_with(spec, reps, estimators, steps, |f, m| {
        pool.install(|| (0..m).into_par_iter().map(f).collect())
    })?;
    Ok(summary)
}

//! Monte Carlo replications of the simulated design.
//!
//! For a cell with `MM` kept replications the reported statistics are
//! averages over the units of a parameter group:
//!
//! ```text
//! mean = N_g⁻¹ Σ_i MM⁻¹ Σ_r θ̂_ir
//! rmse = N_g⁻¹ Σ_i √(MM⁻¹ Σ_r (θ̂_ir − θ_i)²)
//! ```
//!
//! Groups are the intercept over all units, the slope over the first half of
//! the units and the slope over the second half.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dgp::{simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::{alpha_two_step, fgls, iterated_fgls, joint_ols, ugls_joint, EstimateSet};
use crate::linalg::Matrix;
use crate::panel::transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum McEstimator {
    Ols,
    /// Oracle GLS with the true weight.
    Ugls,
    /// Feasible GLS; intercepts by projection on the common regressors.
    Fgls,
    /// Iterated feasible GLS with the configured number of steps.
    Iterated,
}

impl McEstimator {
    pub const ALL: [McEstimator; 4] = [
        McEstimator::Ols,
        McEstimator::Ugls,
        McEstimator::Fgls,
        McEstimator::Iterated,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            McEstimator::Ols => "ols",
            McEstimator::Ugls => "ugls",
            McEstimator::Fgls => "fgls",
            McEstimator::Iterated => "iter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        McEstimator::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Alpha,
    BetaLow,
    BetaHigh,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Alpha, Group::BetaLow, Group::BetaHigh];

    pub fn name(&self) -> &'static str {
        match self {
            Group::Alpha => "alpha",
            Group::BetaLow => "beta_low",
            Group::BetaHigh => "beta_high",
        }
    }
}

/// Intercepts and slopes of every requested estimator in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: u64,
    /// `(estimator, α (S×N), β (K×N))`.
    pub estimates: Vec<(McEstimator, Matrix, Matrix)>,
    pub truth_alpha: Matrix,
    pub truth_beta: Matrix,
}

fn split(est: EstimateSet) -> Result<(Matrix, Matrix)> {
    let alpha = est
        .alpha
        .ok_or_else(|| Error::InvalidSpec("estimator returned no intercepts".into()))?;
    Ok((alpha, est.beta))
}

/// Simulates replication `r` and runs the requested estimators on it.
pub fn replicate(spec: &DgpSpec, r: u64, estimators: &[McEstimator], steps: usize) -> Result<Replication> {
    let (panel, structure, truth) = simulate(&spec.replication(r))?;
    let needs_transform = estimators
        .iter()
        .any(|e| matches!(e, McEstimator::Fgls | McEstimator::Iterated));
    let tp = if needs_transform { Some(transform(&panel)?) } else { None };
    let mut estimates = Vec::with_capacity(estimators.len());
    for &e in estimators {
        let (alpha, beta) = match e {
            McEstimator::Ols => split(joint_ols(&panel)?)?,
            McEstimator::Ugls => split(ugls_joint(&panel, &structure)?)?,
            McEstimator::Fgls => split(alpha_two_step(&panel, &fgls(tp.as_ref().unwrap())?)?)?,
            McEstimator::Iterated => {
                split(alpha_two_step(&panel, &iterated_fgls(tp.as_ref().unwrap(), steps)?)?)?
            }
        };
        estimates.push((e, alpha, beta));
    }
    Ok(Replication {
        index: r,
        estimates,
        truth_alpha: truth.alpha,
        truth_beta: truth.beta,
    })
}

#[derive(Debug, Clone)]
struct UnitMoments {
    sum: Vec<f64>,
    sq_err: Vec<f64>,
}

impl UnitMoments {
    fn new(n: usize) -> Self {
        UnitMoments {
            sum: alloc::vec![0.0; n],
            sq_err: alloc::vec![0.0; n],
        }
    }

    fn add(&mut self, est: &[f64], truth: &[f64]) {
        for i in 0..self.sum.len() {
            self.sum[i] += est[i];
            let e = est[i] - truth[i];
            self.sq_err[i] += e * e;
        }
    }
}

/// Running per-unit sums, fed in replication order.
#[derive(Debug, Clone)]
pub struct McAccumulator {
    estimators: Vec<McEstimator>,
    n: usize,
    alpha: Vec<UnitMoments>,
    beta: Vec<UnitMoments>,
    truth_alpha: Vec<f64>,
    truth_beta: Vec<f64>,
    kept: usize,
    dropped: usize,
}

impl McAccumulator {
    pub fn new(estimators: &[McEstimator], n: usize) -> Self {
        McAccumulator {
            estimators: estimators.to_vec(),
            n,
            alpha: estimators.iter().map(|_| UnitMoments::new(n)).collect(),
            beta: estimators.iter().map(|_| UnitMoments::new(n)).collect(),
            truth_alpha: alloc::vec![0.0; n],
            truth_beta: alloc::vec![0.0; n],
            kept: 0,
            dropped: 0,
        }
    }

    pub fn push(&mut self, outcome: Result<Replication>) {
        match outcome {
            Ok(rep) => {
                let ta: Vec<f64> = rep.truth_alpha.row(0).iter().copied().collect();
                let tb: Vec<f64> = rep.truth_beta.row(0).iter().copied().collect();
                for (slot, (_, a, b)) in rep.estimates.iter().enumerate() {
                    let a: Vec<f64> = a.row(0).iter().copied().collect();
                    let b: Vec<f64> = b.row(0).iter().copied().collect();
                    self.alpha[slot].add(&a, &ta);
                    self.beta[slot].add(&b, &tb);
                }
                self.truth_alpha = ta;
                self.truth_beta = tb;
                self.kept += 1;
            }
            Err(_) => self.dropped += 1,
        }
    }

    pub fn finish(self, spec: &DgpSpec) -> Result<McSummary> {
        let total = self.kept + self.dropped;
        if self.kept == 0 || self.dropped * 100 > total {
            return Err(Error::TooManyFailures {
                failed: self.dropped,
                total,
            });
        }
        let reps = self.kept as f64;
        let half = self.n / 2;
        let mut cells = Vec::new();
        for (slot, &est) in self.estimators.iter().enumerate() {
            for group in Group::ALL {
                let (moments, truth, range) = match group {
                    Group::Alpha => (&self.alpha[slot], &self.truth_alpha, 0..self.n),
                    Group::BetaLow => (&self.beta[slot], &self.truth_beta, 0..half),
                    Group::BetaHigh => (&self.beta[slot], &self.truth_beta, half..self.n),
                };
                let units = range.len() as f64;
                let mut mean = 0.0;
                let mut rmse = 0.0;
                let mut truth_mean = 0.0;
                for i in range {
                    mean += moments.sum[i] / reps;
                    rmse += libm::sqrt(moments.sq_err[i] / reps);
                    truth_mean += truth[i];
                }
                cells.push(McCell {
                    estimator: est,
                    group,
                    truth: truth_mean / units,
                    mean: mean / units,
                    rmse: rmse / units,
                });
            }
        }
        Ok(McSummary {
            n: spec.n,
            t: spec.t,
            reps: self.kept,
            dropped: self.dropped,
            cells,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McCell {
    pub estimator: McEstimator,
    pub group: Group,
    pub truth: f64,
    pub mean: f64,
    pub rmse: f64,
}

impl McCell {
    pub fn bias(&self) -> f64 {
        self.mean - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub t: usize,
    /// Replications kept.
    pub reps: usize,
    pub dropped: usize,
    pub cells: Vec<McCell>,
}

impl McSummary {
    pub fn cell(&self, estimator: McEstimator, group: Group) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.group == group)
    }

    /// One line per cell, `estimator group truth mean rmse`.
    pub fn table(&self) -> String {
        let mut out = alloc::format!("N={} T={} reps={} dropped={}\n", self.n, self.t, self.reps, self.dropped);
        for c in &self.cells {
            out += &alloc::format!(
                "{:<5} {:<9} truth={:.3} mean={:.4} rmse={:.4}\n",
                c.estimator.name(),
                c.group.name(),
                c.truth,
                c.mean,
                c.rmse
            );
        }
        out
    }
}

fn check_request(spec: &DgpSpec, reps: usize, estimators: &[McEstimator], steps: usize) -> Result<()> {
    spec.validate()?;
    if reps == 0 {
        return Err(Error::InvalidSpec("need at least one replication".into()));
    }
    if estimators.is_empty() {
        return Err(Error::InvalidSpec("no estimators requested".into()));
    }
    if estimators.contains(&McEstimator::Iterated) && steps == 0 {
        return Err(Error::InvalidSpec("iterated GLS needs at least one step".into()));
    }
    Ok(())
}

/// Runs `reps` replications with the given per-replication runner and
/// reduces them in replication order.
pub fn run_mc_with<F>(
    spec: &DgpSpec,
    reps: usize,
    estimators: &[McEstimator],
    steps: usize,
    map: F,
) -> Result<McSummary>
where
    F: FnOnce(&(dyn Fn(u64) -> Result<Replication> + Sync), u64) -> Vec<Result<Replication>>,
{
    check_request(spec, reps, estimators, steps)?;
    let one = |r: u64| replicate(spec, r, estimators, steps);
    let outcomes = map(&one, reps as u64);
    let mut acc = McAccumulator::new(estimators, spec.n);
    for outcome in outcomes {
        acc.push(outcome);
    }
    acc.finish(spec)
}

/// Sequential Monte Carlo run.
pub fn run_mc(spec: &DgpSpec, reps: usize, estimators: &[McEstimator], steps: usize) -> Result<McSummary> {
    run_mc_with(spec, reps, estimators, steps, |f, m| (0..m).map(f).collect())
}

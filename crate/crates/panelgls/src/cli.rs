//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use panelgls_core::dgp::simulate;
use panelgls_core::estimators::{
    alpha_two_step, cross_sectional_fgls, fgls, iterated_fgls, joint_breve, ols, project_alpha,
};
use panelgls_core::inference::{
    hac_cov_breve, hac_cov_fgls, wald_tests, HacMode, HacSpec, InferenceSet, WaldBlocks,
};
use panelgls_core::panel::transform;
use panelgls_core::{EstimateSet, Matrix, Method, PanelData};

use crate::config::{Command, EstimateMethod, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    load_panel_csv, write_estimates_csv, write_panel_csv, write_summary_csv, write_truth_csv, Inference,
    LoadOptions, PanelIds,
};
use crate::parallel::run_mc_parallel;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CommandArg {
    Estimate,
    Simulate,
    Mc,
}

/// Panel regressions with common and unit-specific regressors under a
/// latent factor error structure.
#[derive(Debug, Parser)]
#[command(name = "panelgls", version)]
pub struct Args {
    /// What to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<CommandArg>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Panel CSV for `estimate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// ols, ugls, fgls, iter, breve, alpha2 or xsec.
    #[arg(long)]
    pub method: Option<String>,
    /// GLS solves for `iter`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// HAC bandwidth.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Truth CSV for `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Worker threads for `mc`.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Args {
    /// Config file first, then flags.
    pub fn into_config(self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let mut overrides: Vec<(&str, String)> = Vec::new();
        if let Some(c) = self.command {
            let name = match c {
                CommandArg::Estimate => "estimate",
                CommandArg::Simulate => "simulate",
                CommandArg::Mc => "mc",
            };
            overrides.push(("command", name.into()));
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let opts = [
            ("input", path(&self.input)),
            ("method", self.method.clone()),
            ("steps", self.steps.map(|v| v.to_string())),
            ("bandwidth", self.bandwidth.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("t", self.t.map(|v| v.to_string())),
            ("reps", self.reps.map(|v| v.to_string())),
            ("output", path(&self.out)),
            ("truth", path(&self.truth)),
            ("threads", self.threads.map(|v| v.to_string())),
        ];
        overrides.extend(opts.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        for (key, value) in overrides {
            config
                .set(key, &value)
                .map_err(|m| CliError::Config(format!("--{key}: {m}")))?;
        }
        Ok(config)
    }
}

/// Runs one configured command; all output goes to files.
pub fn run_cli(config: &RunConfig) -> CliResult<()> {
    let command = config.validate()?;
    let out = config.output.as_deref().expect("validated");
    match command {
        Command::Estimate => estimate(config, out),
        Command::Simulate => {
            let spec = config.dgp.as_ref().expect("validated");
            let (panel, _, truth) = simulate(spec)?;
            let ids = PanelIds::sequential(panel.n(), panel.t());
            write_panel_csv(out, &panel, &ids)?;
            let truth_path = config.truth_output.clone().unwrap_or_else(|| truth_path_for(out));
            write_truth_csv(truth_path, &truth, &ids.units)
        }
        Command::Mc => {
            let spec = config.dgp.as_ref().expect("validated");
            let reps = config.reps.expect("validated");
            let summary = run_mc_parallel(spec, reps, &config.estimators, config.steps, config.threads)?;
            write_summary_csv(out, &summary)
        }
    }
}

/// `panel.csv` → `panel.truth.csv`.
pub fn truth_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "panel".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.truth.csv"))
}

struct Fitted {
    est: EstimateSet,
    inference: Option<(InferenceSet, Option<usize>)>,
}

fn hac(config: &RunConfig, rows: usize, mode: HacMode) -> HacSpec {
    HacSpec::new(config.bandwidth.unwrap_or_else(|| HacSpec::default_bandwidth(rows)), mode)
}

fn fit(config: &RunConfig, panel: &PanelData) -> CliResult<Fitted> {
    let weighted = |est: EstimateSet| -> CliResult<Fitted> {
        let tp = transform(panel)?;
        let inf = hac_cov_fgls(&tp, &est, &hac(config, tp.dim(), HacMode::WeightedRegressors))?;
        let with_alpha = alpha_two_step(panel, &est)?;
        Ok(Fitted {
            est: EstimateSet {
                method: est.method,
                ..with_alpha
            },
            inference: Some((inf, None)),
        })
    };
    match config.method {
        EstimateMethod::Ols => {
            let tp = transform(panel)?;
            let est = ols(&tp)?;
            let inf = hac_cov_fgls(&tp, &est, &hac(config, tp.dim(), HacMode::Plain))?;
            Ok(Fitted {
                est: project_alpha(panel, &est.beta, Method::Ols)?,
                inference: Some((inf, None)),
            })
        }
        EstimateMethod::Ugls => Err(CliError::Config(
            "ugls needs the true error covariance, which a data file does not carry".into(),
        )),
        EstimateMethod::Fgls => weighted(fgls(&transform(panel)?)?),
        EstimateMethod::Iter => weighted(iterated_fgls(&transform(panel)?, config.steps)?),
        EstimateMethod::Breve => {
            let est = joint_breve(panel)?;
            let inf = hac_cov_breve(panel, &est, &hac(config, panel.t(), HacMode::WeightedRegressors))?;
            Ok(Fitted {
                est,
                inference: Some((inf, panel.intercept_column())),
            })
        }
        EstimateMethod::Alpha2 => {
            let est = fgls(&transform(panel)?)?;
            Ok(Fitted {
                est: alpha_two_step(panel, &est)?,
                inference: None,
            })
        }
        EstimateMethod::Xsec => unreachable!("handled by the caller"),
    }
}

fn estimate(config: &RunConfig, out: &Path) -> CliResult<()> {
    let input = config.input.as_deref().expect("validated");
    let loaded = load_panel_csv(
        input,
        LoadOptions {
            add_intercept: config.add_intercept,
        },
    )?;
    let panel = &loaded.panel;
    if config.method == EstimateMethod::Xsec {
        let dual = panel.dual(Matrix::from_element(panel.n(), 1, 1.0))?;
        let est = cross_sectional_fgls(&dual)?;
        return write_estimates_csv(out, &est, 0, None, &loaded.ids.times);
    }
    let fitted = fit(config, panel)?;
    match &fitted.inference {
        Some((inf, intercept)) => {
            let blocks = WaldBlocks::standard(inf, *intercept);
            let wald = wald_tests(&fitted.est, inf, &blocks)?;
            write_estimates_csv(
                out,
                &fitted.est,
                panel.s(),
                Some(Inference { set: inf, wald: &wald }),
                &loaded.ids.units,
            )
        }
        None => write_estimates_csv(out, &fitted.est, panel.s(), None, &loaded.ids.units),
    }
}

//! Flat `key = value` run configuration.
//!
//! Keys are case-insensitive; `#` starts a comment. Command-line flags are
//! applied on top of a file through the same [`RunConfig::set`] entry point.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use panelgls_core::dgp::{DgpSpec, Normal};
use panelgls_core::mc::McEstimator;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Simulate,
    Mc,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "estimate" => Some(Command::Estimate),
            "simulate" => Some(Command::Simulate),
            "mc" => Some(Command::Mc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Ols,
    Ugls,
    Fgls,
    Iter,
    Breve,
    Alpha2,
    Xsec,
}

impl EstimateMethod {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ols" => EstimateMethod::Ols,
            "ugls" => EstimateMethod::Ugls,
            "fgls" => EstimateMethod::Fgls,
            "iter" => EstimateMethod::Iter,
            "breve" => EstimateMethod::Breve,
            "alpha2" => EstimateMethod::Alpha2,
            "xsec" => EstimateMethod::Xsec,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Truth file for `simulate`; defaults to `<output stem>.truth.csv`.
    pub truth_output: Option<PathBuf>,
    pub method: EstimateMethod,
    /// Number of GLS solves for the iterated estimator.
    pub steps: usize,
    pub bandwidth: Option<usize>,
    pub dgp: Option<DgpSpec>,
    pub reps: Option<usize>,
    /// Worker threads for `mc`; `None` uses all cores.
    pub threads: Option<usize>,
    pub add_intercept: bool,
    pub estimators: Vec<McEstimator>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            input: None,
            output: None,
            truth_output: None,
            method: EstimateMethod::Fgls,
            steps: 4,
            bandwidth: None,
            dgp: None,
            reps: None,
            threads: None,
            add_intercept: true,
            estimators: McEstimator::ALL.to_vec(),
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{value}` is not a valid value for `{key}`"))
}

fn boolean(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{value}` is not a boolean for `{key}`")),
    }
}

impl RunConfig {
    /// Sets one key. Keys not known here are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "command" => {
                self.command = Some(Command::parse(value).ok_or_else(|| format!("unknown command `{value}`"))?)
            }
            "input" => self.input = Some(value.into()),
            "output" | "out" => self.output = Some(value.into()),
            "truth" | "truth_output" => self.truth_output = Some(value.into()),
            "method" => {
                self.method = EstimateMethod::parse(value).ok_or_else(|| format!("unknown method `{value}`"))?
            }
            "steps" | "j" => self.steps = number(&key, value)?,
            "bandwidth" => self.bandwidth = Some(number(&key, value)?),
            "reps" | "mm" => self.reps = Some(number(&key, value)?),
            "threads" => self.threads = Some(number(&key, value)?),
            "add_intercept" => self.add_intercept = boolean(&key, value)?,
            "estimators" => {
                self.estimators = value
                    .split(',')
                    .map(|s| McEstimator::parse(s.trim()).ok_or_else(|| format!("unknown estimator `{}`", s.trim())))
                    .collect::<Result<_, _>>()?
            }
            _ => {
                let dgp = self.dgp.get_or_insert_with(DgpSpec::default);
                set_dgp(dgp, &key, value)?;
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> CliResult<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| CliError::Parse {
                path: origin.to_path_buf(),
                line: idx as u64 + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, found `{line}`")))?;
            self.set(key, value).map_err(fail)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    /// Checks that the command has what it needs.
    pub fn validate(&self) -> CliResult<Command> {
        let command = self
            .command
            .ok_or_else(|| CliError::Config("no command given (estimate, simulate or mc)".into()))?;
        let missing = |what: &str| Err(CliError::Config(format!("`{what}` is required for this command")));
        match command {
            Command::Estimate => {
                if self.input.is_none() {
                    return missing("input");
                }
            }
            Command::Simulate => {
                if self.dgp.is_none() {
                    return missing("dgp settings (N, T, seed, ...)");
                }
            }
            Command::Mc => {
                if self.dgp.is_none() {
                    return missing("dgp settings (N, T, seed, ...)");
                }
                if self.reps.is_none() {
                    return missing("reps");
                }
            }
        }
        if self.output.is_none() {
            return missing("output");
        }
        if self.steps == 0 {
            return Err(CliError::Config("`steps` must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("`threads` must be at least 1".into()));
        }
        if let Some(dgp) = &self.dgp {
            dgp.validate()?;
        }
        Ok(command)
    }
}

fn set_normal(n: &mut Normal, field: &str, key: &str, value: &str) -> Result<(), String> {
    match field {
        "mean" => n.mean = number(key, value)?,
        "var" => n.var = number(key, value)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

fn set_range(r: &mut (f64, f64), field: &str, key: &str, value: &str) -> Result<(), String> {
    match field {
        "min" => r.0 = number(key, value)?,
        "max" => r.1 = number(key, value)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

fn set_dgp(spec: &mut DgpSpec, key: &str, value: &str) -> Result<(), String> {
    match key {
        "dgp" if value == "default" => {}
        "n" => spec.n = number(key, value)?,
        "t" => spec.t = number(key, value)?,
        "seed" => spec.seed = number(key, value)?,
        "factor_ar" => spec.factor_ar = number(key, value)?,
        "factor_innov_var" => spec.factor_innov_var = number(key, value)?,
        "alpha0" => spec.alpha0 = number(key, value)?,
        "x_intercept" => spec.x_intercept = number(key, value)?,
        "beta_low" => spec.beta_low = number(key, value)?,
        "beta_high" => spec.beta_high = number(key, value)?,
        "distinct_factor_corr" => {
            spec.distinct_factor_corr = match value {
                "none" | "off" => None,
                v => Some(number(key, v)?),
            }
        }
        _ => {
            let (head, field) = key.rsplit_once('_').ok_or_else(|| format!("unknown key `{key}`"))?;
            match head {
                "b1" => set_normal(&mut spec.b1, field, key, value)?,
                "b2" => set_normal(&mut spec.b2, field, key, value)?,
                "delta1" => set_normal(&mut spec.delta1, field, key, value)?,
                "delta3" => set_normal(&mut spec.delta3, field, key, value)?,
                "rho_eps" => set_range(&mut spec.rho_eps_range, field, key, value)?,
                "rho_v" => set_range(&mut spec.rho_v_range, field, key, value)?,
                "sigma2" => set_range(&mut spec.sigma2_range, field, key, value)?,
                _ => return Err(format!("unknown key `{key}`")),
            }
        }
    }
    Ok(())
}

/// Renders every field of `spec` as config lines.
pub fn dgp_to_config(spec: &DgpSpec) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("n", spec.n.to_string());
    line("t", spec.t.to_string());
    line("seed", spec.seed.to_string());
    line("factor_ar", spec.factor_ar.to_string());
    line("factor_innov_var", spec.factor_innov_var.to_string());
    for (name, n) in [("b1", spec.b1), ("b2", spec.b2), ("delta1", spec.delta1), ("delta3", spec.delta3)] {
        line(&format!("{name}_mean"), n.mean.to_string());
        line(&format!("{name}_var"), n.var.to_string());
    }
    for (name, r) in [
        ("rho_eps", spec.rho_eps_range),
        ("rho_v", spec.rho_v_range),
        ("sigma2", spec.sigma2_range),
    ] {
        line(&format!("{name}_min"), r.0.to_string());
        line(&format!("{name}_max"), r.1.to_string());
    }
    line("alpha0", spec.alpha0.to_string());
    line("x_intercept", spec.x_intercept.to_string());
    line("beta_low", spec.beta_low.to_string());
    line("beta_high", spec.beta_high.to_string());
    line(
        "distinct_factor_corr",
        spec.distinct_factor_corr.map_or("none".into(), |c| c.to_string()),
    );
    out
}

/// Reads a spec written by [`dgp_to_config`]; unset keys keep their defaults.
pub fn dgp_from_config(text: &str) -> CliResult<DgpSpec> {
    let mut config = RunConfig::default();
    config.apply_text(text, Path::new("<dgp>"))?;
    Ok(config.dgp.unwrap_or_default())
}

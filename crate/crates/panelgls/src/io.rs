//! CSV formats.
//!
//! Panels are stored long, one row per `(unit, time)` with header
//! `unit,time,y,x1..xK,d1..dS`. Numbers are written with 17 significant
//! digits so that every file reads back bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use panelgls_core::dgp::Truth;
use panelgls_core::inference::{InferenceSet, WaldStats};
use panelgls_core::mc::McSummary;
use panelgls_core::{EstimateSet, Matrix, PanelData};

use crate::error::{CliError, CliResult};

/// External identifiers of the units and periods of a panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelIds {
    pub units: Vec<i64>,
    pub times: Vec<i64>,
}

impl PanelIds {
    /// Units and periods numbered from 1.
    pub fn sequential(n: usize, t: usize) -> Self {
        PanelIds {
            units: (1..=n as i64).collect(),
            times: (1..=t as i64).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: PanelData,
    pub ids: PanelIds,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Prepend a column of ones when `D` has no constant column.
    pub add_intercept: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { add_intercept: true }
    }
}

pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns `prefix1, prefix2, …` in numeric order; they must be contiguous.
fn numbered_columns(path: &Path, header: &csv::StringRecord, prefix: &str) -> CliResult<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(pos, name)| {
            let rest = name.strip_prefix(prefix)?;
            let k: usize = rest.parse().ok()?;
            Some((k, pos))
        })
        .collect();
    found.sort();
    for (expected, (k, _)) in (1..).zip(&found) {
        if *k != expected {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("columns {prefix}1..{prefix}{} are not contiguous", found.len()),
            });
        }
    }
    Ok(found.into_iter().map(|(_, pos)| pos).collect())
}

fn column(path: &Path, header: &csv::StringRecord, name: &str) -> CliResult<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing column `{name}`"),
    })
}

struct Row {
    line: u64,
    y: f64,
    x: Vec<f64>,
    d: Vec<f64>,
}

pub fn load_panel_csv(path: impl AsRef<Path>, options: LoadOptions) -> CliResult<LoadedPanel> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let unit_col = column(path, &header, "unit")?;
    let time_col = column(path, &header, "time")?;
    let y_col = column(path, &header, "y")?;
    let x_cols = numbered_columns(path, &header, "x")?;
    let d_cols = numbered_columns(path, &header, "d")?;
    if x_cols.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no regressor columns x1..xK".into(),
        });
    }

    let mut rows: BTreeMap<(i64, i64), Row> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |pos: usize| record.get(pos).unwrap_or("");
        let int = |pos: usize| {
            field(pos)
                .parse::<i64>()
                .map_err(|_| bad(format!("`{}` is not an integer id", field(pos))))
        };
        let num = |pos: usize| -> CliResult<f64> {
            let v: f64 = field(pos)
                .parse()
                .map_err(|_| bad(format!("`{}` is not a number", field(pos))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("non-finite value `{}`", field(pos))))
            }
        };
        let key = (int(unit_col)?, int(time_col)?);
        let row = Row {
            line,
            y: num(y_col)?,
            x: x_cols.iter().map(|&c| num(c)).collect::<CliResult<_>>()?,
            d: d_cols.iter().map(|&c| num(c)).collect::<CliResult<_>>()?,
        };
        if let Some(prev) = rows.insert(key, row) {
            return Err(bad(format!(
                "duplicate row for unit {} time {} (first at line {})",
                key.0, key.1, prev.line
            )));
        }
    }
    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        });
    }

    let units: Vec<i64> = rows.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let times: Vec<i64> = rows.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
    for &u in &units {
        for &t in &times {
            if !rows.contains_key(&(u, t)) {
                return Err(CliError::UnbalancedPanel { unit: u, time: t });
            }
        }
    }

    let (n, t, k, s) = (units.len(), times.len(), x_cols.len(), d_cols.len());
    let mut y = Matrix::zeros(t, n);
    let mut x = vec![Matrix::zeros(t, k); n];
    let mut d = Matrix::zeros(t, s);
    for (r, &time) in times.iter().enumerate() {
        let first = &rows[&(units[0], time)];
        for c in 0..s {
            d[(r, c)] = first.d[c];
        }
        for (i, &unit) in units.iter().enumerate() {
            let row = &rows[&(unit, time)];
            y[(r, i)] = row.y;
            for c in 0..k {
                x[i][(r, c)] = row.x[c];
            }
            for c in 0..s {
                if (row.d[c] - d[(r, c)]).abs() > 1e-12 * d[(r, c)].abs().max(1.0) {
                    return Err(CliError::CommonRegressorMismatch {
                        column: format!("d{}", c + 1),
                        unit,
                        time,
                    });
                }
            }
        }
    }
    if options.add_intercept && !has_constant_column(&d) {
        let mut with_ones = Matrix::from_element(t, s + 1, 1.0);
        with_ones.columns_mut(1, s).copy_from(&d);
        d = with_ones;
    }
    let panel = PanelData::new(y, x, d)?;
    Ok(LoadedPanel {
        panel,
        ids: PanelIds { units, times },
    })
}

fn has_constant_column(d: &Matrix) -> bool {
    d.column_iter().any(|c| c[0] != 0.0 && c.iter().all(|&v| v == c[0]))
}

pub fn write_panel_csv(path: impl AsRef<Path>, panel: &PanelData, ids: &PanelIds) -> CliResult<()> {
    let path = path.as_ref();
    if ids.units.len() != panel.n() || ids.times.len() != panel.t() {
        return Err(CliError::Config("identifier lists do not match the panel".into()));
    }
    let mut w = writer(path)?;
    let mut header = vec!["unit".to_string(), "time".into(), "y".into()];
    header.extend((1..=panel.k()).map(|c| format!("x{c}")));
    header.extend((1..=panel.s()).map(|c| format!("d{c}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, unit) in ids.units.iter().enumerate() {
        for (r, time) in ids.times.iter().enumerate() {
            let mut rec = vec![unit.to_string(), time.to_string(), format_number(panel.y()[(r, i)])];
            rec.extend(panel.x()[i].row(r).iter().map(|&v| format_number(v)));
            rec.extend(panel.d().row(r).iter().map(|&v| format_number(v)));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// `unit,alpha_1..alpha_S,beta_1..beta_K`.
pub fn write_truth_csv(path: impl AsRef<Path>, truth: &Truth, units: &[i64]) -> CliResult<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let (s, k) = (truth.alpha.nrows(), truth.beta.nrows());
    let mut header = vec!["unit".to_string()];
    header.extend((1..=s).map(|c| format!("alpha_{c}")));
    header.extend((1..=k).map(|c| format!("beta_{c}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, unit) in units.iter().enumerate() {
        let mut rec = vec![unit.to_string()];
        rec.extend(truth.alpha.column(i).iter().map(|&v| format_number(v)));
        rec.extend(truth.beta.column(i).iter().map(|&v| format_number(v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Per-unit covariance output together with the Wald statistics.
pub struct Inference<'a> {
    pub set: &'a InferenceSet,
    pub wald: &'a [WaldStats],
}

/// One row per unit:
/// `unit,method,alpha_1..alpha_S,beta_1..beta_K[,se_*,t_*,W_gamma,W_beta,W_joint]`.
///
/// The `se_`/`t_` columns cover the coefficients of the inference set
/// (intercepts included only when it covers them). Missing values are `NaN`.
pub fn write_estimates_csv(
    path: impl AsRef<Path>,
    est: &EstimateSet,
    s: usize,
    inference: Option<Inference<'_>>,
    units: &[i64],
) -> CliResult<()> {
    let path = path.as_ref();
    let k = est.beta.nrows();
    if units.len() != est.n() {
        return Err(CliError::Config("unit ids do not match the estimates".into()));
    }
    let mut header = vec!["unit".to_string(), "method".into()];
    header.extend((1..=s).map(|c| format!("alpha_{c}")));
    header.extend((1..=k).map(|c| format!("beta_{c}")));
    let covered: Vec<String> = inference
        .as_ref()
        .map(|inf| {
            let a = inf.set.alpha_len;
            (1..=a)
                .map(|c| format!("alpha_{c}"))
                .chain((1..=k).map(|c| format!("beta_{c}")))
                .collect()
        })
        .unwrap_or_default();
    if inference.is_some() {
        header.extend(covered.iter().map(|c| format!("se_{c}")));
        header.extend(covered.iter().map(|c| format!("t_{c}")));
        header.extend(["W_gamma".into(), "W_beta".into(), "W_joint".into()]);
    }
    let mut w = writer(path)?;
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, unit) in units.iter().enumerate() {
        let mut rec = vec![unit.to_string(), est.method.name()];
        for c in 0..s {
            let v = est.alpha.as_ref().filter(|a| a.nrows() == s).map_or(f64::NAN, |a| a[(c, i)]);
            rec.push(format_number(v));
        }
        rec.extend(est.beta.column(i).iter().map(|&v| format_number(v)));
        if let Some(inf) = &inference {
            rec.extend(inf.set.std_errors(i).iter().map(|&v| format_number(v)));
            rec.extend(inf.set.tstats.column(i).iter().map(|&v| format_number(v)));
            let ws = inf.wald.get(i).copied().unwrap_or_default();
            for block in [ws.gamma, ws.beta, ws.joint] {
                rec.push(format_number(block.map_or(f64::NAN, |b| b.stat)));
            }
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// A numeric CSV read back: header, then rows of text label columns and
/// numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` of every row as a number.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }
}

pub fn read_table(path: impl AsRef<Path>) -> CliResult<Table> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| csv_error(path, e)))
        .collect::<CliResult<_>>()?;
    Ok(Table { header, rows })
}

/// `estimator,group,mean,rmse,reps,dropped`.
pub fn write_summary_csv(path: impl AsRef<Path>, summary: &McSummary) -> CliResult<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["estimator", "group", "mean", "rmse", "reps", "dropped"])
        .map_err(|e| csv_error(path, e))?;
    for c in &summary.cells {
        w.write_record([
            c.estimator.name().to_string(),
            c.group.name().to_string(),
            format_number(c.mean),
            format_number(c.rmse),
            summary.reps.to_string(),
            summary.dropped.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

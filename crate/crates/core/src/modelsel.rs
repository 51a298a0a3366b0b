//! Hyperparameter selection by repeated k-fold cross-validation over
//! (usually logarithmic) grids. Folds partition the bags, so every
//! validation bag is predicted through its own marginal. When the selected
//! value of a parameter sits on the edge of its grid the grid is moved to
//! be centred on it, keeping its size and span, and the search repeats.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bag::Bag;
use crate::error::{Error, Result};
use crate::kernels::{BaseKernel, DistKernel, KernelSpec};
use crate::learner::{evaluate, train, TrainConfig};
use crate::seed::{child_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    SigmaX,
    SigmaXp,
    SigmaP,
    Lambda,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::SigmaX => "sigma_x",
            Param::SigmaXp => "sigma_xp",
            Param::SigmaP => "sigma_p",
            Param::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAxis {
    pub param: Param,
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub log: bool,
}

impl ParamAxis {
    pub fn log(param: Param, low: f64, high: f64, count: usize) -> Self {
        ParamAxis {
            param,
            low,
            high,
            count,
            log: true,
        }
    }

    /// A one-point axis.
    pub fn fixed(param: Param, value: f64) -> Self {
        ParamAxis {
            param,
            low: value,
            high: value,
            count: 1,
            log: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_bounds = if self.count == 1 {
            self.low == self.high
        } else {
            self.low < self.high
        };
        if !(self.low.is_finite() && self.high.is_finite()) || !ok_bounds || self.count == 0 {
            return Err(Error::invalid(format!(
                "bad grid for {}: [{}, {}] with {} points",
                self.param.name(),
                self.low,
                self.high,
                self.count
            )));
        }
        if self.log && self.low <= 0.0 {
            return Err(Error::invalid(format!(
                "log grid for {} needs positive bounds",
                self.param.name()
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.low];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k == 0 {
                    self.low
                } else if k == self.count - 1 {
                    self.high
                } else if self.log {
                    let (a, b) = (self.low.ln(), self.high.ln());
                    (a + (b - a) * k as f64 / last).exp()
                } else {
                    self.low + (self.high - self.low) * k as f64 / last
                }
            })
            .collect()
    }

    fn position(&self, v: f64) -> Option<usize> {
        self.values()
            .iter()
            .position(|&g| (g - v).abs() <= 1e-12 * g.abs().max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<ParamAxis>,
    pub folds: usize,
    pub repeats: usize,
    pub max_recenter: usize,
    pub seed: u64,
}

impl GridSpec {
    /// 13 log-spaced points on `[1e-2, 1e4]` for each bandwidth and 5 on
    /// `[1e-1, 1e1]` for `lambda`; 5 folds, 5 repeats, up to 3 recentres.
    pub fn default_for(params: &[Param]) -> Self {
        let axes = params
            .iter()
            .map(|&p| match p {
                Param::Lambda => ParamAxis::log(p, 1e-1, 1e1, 5),
                _ => ParamAxis::log(p, 1e-2, 1e4, 13),
            })
            .collect();
        GridSpec {
            axes,
            folds: 5,
            repeats: 5,
            max_recenter: 3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::invalid("grid has no parameters"));
        }
        for (i, a) in self.axes.iter().enumerate() {
            a.validate()?;
            if self.axes[..i].iter().any(|b| b.param == a.param) {
                return Err(Error::invalid(format!("parameter {} listed twice", a.param.name())));
            }
        }
        if self.folds < 2 || self.repeats == 0 {
            return Err(Error::invalid("need at least 2 folds and 1 repeat"));
        }
        Ok(())
    }

    /// All grid points in enumeration order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let vals = axis.values();
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Fold index of every bag, per repeat.
    pub fn fold_assignment(&self, n_bags: usize) -> Vec<Vec<usize>> {
        (0..self.repeats)
            .map(|r| {
                let mut order: Vec<usize> = (0..n_bags).collect();
                rand::seq::SliceRandom::shuffle(
                    order.as_mut_slice(),
                    &mut rng(child_seed(self.seed, "folds", r as u64)),
                );
                let mut fold = vec![0; n_bags];
                for (pos, &bag) in order.iter().enumerate() {
                    fold[bag] = pos % self.folds;
                }
                fold
            })
            .collect()
    }
}

/// Copy of `template` with the grid values substituted.
pub fn configure(template: &TrainConfig, axes: &[ParamAxis], values: &[f64]) -> Result<TrainConfig> {
    let spec = template.spec;
    let (mut kx, mut kxp, mut kp) = (spec.kx(), spec.kxp(), spec.kp());
    let mut cfg = template.clone();
    for (axis, &v) in axes.iter().zip(values) {
        let not_gaussian = || Error::incompatible(format!("{} needs a Gaussian kernel", axis.param.name()));
        match axis.param {
            Param::Lambda => cfg.lambda = v,
            Param::SigmaX => match kx {
                BaseKernel::Gaussian { .. } => kx = BaseKernel::Gaussian { sigma: v },
                _ => return Err(not_gaussian()),
            },
            Param::SigmaXp => match kxp {
                BaseKernel::Gaussian { .. } => kxp = BaseKernel::Gaussian { sigma: v },
                _ => return Err(not_gaussian()),
            },
            Param::SigmaP => match kp {
                DistKernel::GaussianLike { .. } => kp = DistKernel::GaussianLike { sigma: v },
                _ => return Err(not_gaussian()),
            },
        }
    }
    let mut new_spec = KernelSpec::new(kx, kxp, kp)?;
    if spec.normalize_kp() {
        new_spec = new_spec.with_normalized_kp()?;
    }
    cfg.spec = new_spec;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub point: usize,
    pub values: Vec<f64>,
    pub repeat: usize,
    pub fold: usize,
    pub risk: f64,
    pub error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: GridSpec,
    pub points: Vec<Vec<f64>>,
    /// Mean validation risk of every grid point.
    pub scores: Vec<f64>,
    pub mean_error: Vec<Option<f64>>,
    pub table: Vec<ScoreRow>,
    pub best_index: usize,
}

impl CvResult {
    pub fn best_values(&self) -> &[f64] {
        &self.points[self.best_index]
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best_index]
    }
}

/// Cross-validated risk of every grid point; ties go to the first point in
/// enumeration order.
pub fn cross_validate(bags: &[Bag], template: &TrainConfig, grid: &GridSpec) -> Result<CvResult> {
    grid.validate()?;
    if bags.len() < grid.folds {
        return Err(Error::invalid(format!(
            "{} bags cannot be split into {} folds",
            bags.len(),
            grid.folds
        )));
    }
    let folds = grid.fold_assignment(bags.len());
    let points = grid.points();
    let mut table = Vec::new();
    let mut scores = Vec::with_capacity(points.len());
    let mut mean_error = Vec::with_capacity(points.len());
    for (pi, values) in points.iter().enumerate() {
        let cfg = configure(template, &grid.axes, values)?;
        let mut risk_sum = 0.0;
        let mut err_sum = 0.0;
        let mut has_err = true;
        for (r, assign) in folds.iter().enumerate() {
            for f in 0..grid.folds {
                let mut fit = Vec::new();
                let mut valid = Vec::new();
                for (bag, &k) in bags.iter().zip(assign) {
                    if k == f {
                        valid.push(bag.clone());
                    } else {
                        fit.push(bag.clone());
                    }
                }
                let model = train(&fit, &cfg)?;
                let report = evaluate(&model, &valid)?;
                risk_sum += report.mean_risk;
                match report.error_rate {
                    Some(e) => err_sum += e,
                    None => has_err = false,
                }
                table.push(ScoreRow {
                    point: pi,
                    values: values.clone(),
                    repeat: r,
                    fold: f,
                    risk: report.mean_risk,
                    error_rate: report.error_rate,
                });
            }
        }
        let evals = (grid.repeats * grid.folds) as f64;
        scores.push(risk_sum / evals);
        mean_error.push(has_err.then(|| err_sum / evals));
        log::info!("cv point {pi}: {values:?} risk {:.6}", risk_sum / evals);
    }
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best_index] {
            best_index = i;
        }
    }
    Ok(CvResult {
        grid: grid.clone(),
        points,
        scores,
        mean_error,
        table,
        best_index,
    })
}

/// Move every axis whose selected value is at a grid edge so that it is
/// centred (geometrically for log axes) on that value.
pub fn recenter_grid(grid: &GridSpec, selected: &[f64]) -> Result<GridSpec> {
    if selected.len() != grid.axes.len() {
        return Err(Error::invalid("selected point has the wrong number of values"));
    }
    let mut out = grid.clone();
    for (axis, &v) in out.axes.iter_mut().zip(selected) {
        let pos = axis
            .position(v)
            .ok_or_else(|| Error::invalid(format!("{v} is not on the {} grid", axis.param.name())))?;
        if axis.count < 2 || (pos != 0 && pos != axis.count - 1) {
            continue;
        }
        if axis.log {
            let half = (axis.high / axis.low).sqrt();
            axis.low = v / half;
            axis.high = v * half;
        } else {
            let half = 0.5 * (axis.high - axis.low);
            axis.low = v - half;
            axis.high = v + half;
        }
    }
    Ok(out)
}

/// Cross-validation followed by up to `max_recenter` recentred rounds.
pub fn select_hyperparameters(bags: &[Bag], template: &TrainConfig, grid: &GridSpec) -> Result<Vec<CvResult>> {
    let mut rounds = vec![cross_validate(bags, template, grid)?];
    while rounds.len() <= grid.max_recenter {
        let last = rounds.last().expect("nonempty");
        let next = recenter_grid(&last.grid, last.best_values())?;
        if next == last.grid {
            break;
        }
        rounds.push(cross_validate(bags, template, &next)?);
    }
    Ok(rounds)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// One row per (grid point, repeat, fold) and one `mean` row per grid
/// point, for every round.
pub fn write_score_table<W: Write>(rounds: &[CvResult], mut out: W) -> Result<()> {
    let Some(first) = rounds.first() else {
        return Ok(());
    };
    let names: Vec<&str> = first.grid.axes.iter().map(|a| a.param.name()).collect();
    writeln!(out, "round,point,{},repeat,fold,risk,error_rate", names.join(","))?;
    for (round, res) in rounds.iter().enumerate() {
        let vals = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        for row in &res.table {
            writeln!(
                out,
                "{round},{},{},{},{},{:?},{}",
                row.point,
                vals(&row.values),
                row.repeat,
                row.fold,
                row.risk,
                fmt_opt(row.error_rate)
            )?;
        }
        for (i, p) in res.points.iter().enumerate() {
            writeln!(
                out,
                "{round},{i},{},mean,,{:?},{}",
                vals(p),
                res.scores[i],
                fmt_opt(res.mean_error[i])
            )?;
        }
    }
    Ok(())
}

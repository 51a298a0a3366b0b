//! The `N x n` synthetic sweep and the random-feature approximation report.

use std::io::Write;
use std::time::Instant;

use crate::data::gen_collection_with;
use crate::data::synth::{DEFAULT_SEMI_MAJOR, DEFAULT_SEMI_MINOR};
use crate::error::{Error, Result};
use crate::features::ApproxReport;
use crate::learner::{evaluate, train, Approach, TrainConfig, Trainer};
use crate::seed::child_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    /// Task counts `N`.
    pub tasks: Vec<usize>,
    /// Points per task `n`.
    pub points: Vec<usize>,
    pub approaches: Vec<Approach>,
    pub trainer: Trainer,
    pub repeats: usize,
    pub seed: u64,
    pub test_tasks: usize,
    pub test_points: usize,
    /// Kernel, lambda, feature counts and solver options shared by every
    /// cell; approach, trainer and seed are overridden per cell.
    pub template: TrainConfig,
    /// When false, `wall_time_s` is written as 0 so the output is
    /// byte-reproducible.
    pub record_timing: bool,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.points.is_empty() || self.approaches.is_empty() {
            return Err(Error::invalid("sweep needs at least one N, one n and one method"));
        }
        if self.tasks.contains(&0) || self.points.contains(&0) {
            return Err(Error::invalid("N and n must be >= 1"));
        }
        if self.repeats == 0 || self.test_tasks == 0 || self.test_points == 0 {
            return Err(Error::invalid("repeats and test sizes must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepeatTag {
    Index(usize),
    Mean,
    Sd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_tasks: usize,
    pub n_points: usize,
    pub approach: Approach,
    pub trainer: Trainer,
    pub repeat: RepeatTag,
    /// `None` when the cell failed.
    pub error_rate: Option<f64>,
    pub wall_time_s: f64,
}

pub const SWEEP_HEADER: &str = "N,n,method,trainer,repeat,error_rate,wall_time_s";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let repeat = match self.repeat {
            RepeatTag::Index(r) => r.to_string(),
            RepeatTag::Mean => "mean".into(),
            RepeatTag::Sd => "sd".into(),
        };
        let err = self
            .error_rate
            .map_or_else(|| "failed".to_owned(), |e| format!("{e:?}"));
        format!(
            "{},{},{},{},{},{},{:?}",
            self.n_tasks,
            self.n_points,
            self.approach.as_str(),
            self.trainer.as_str(),
            repeat,
            err,
            self.wall_time_s
        )
    }
}

/// Seeds of one `(N, n, repeat)` cell: training data, test data, model.
/// The test set depends only on the repeat, so all cells of a repeat are
/// scored on the same tasks, and both methods see the same training data.
pub fn cell_seeds(master: u64, n_tasks: usize, n_points: usize, repeat: usize) -> (u64, u64, u64) {
    let cell = child_seed(
        child_seed(master, "cell-n-tasks", n_tasks as u64),
        "cell-n",
        n_points as u64,
    );
    (
        child_seed(cell, "train", repeat as u64),
        child_seed(master, "test", repeat as u64),
        child_seed(master, "model", repeat as u64),
    )
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_cell(grid: &ExperimentGrid, approach: Approach, n_tasks: usize, n_points: usize, repeat: usize) -> Result<f64> {
    let (train_seed, test_seed, model_seed) = cell_seeds(grid.seed, n_tasks, n_points, repeat);
    let (a, b) = (DEFAULT_SEMI_MAJOR, DEFAULT_SEMI_MINOR);
    let train_set = gen_collection_with(n_tasks, n_points, train_seed, a, b, "train")?;
    let test_set = gen_collection_with(grid.test_tasks, grid.test_points, test_seed, a, b, "test")?;
    let cfg = TrainConfig {
        approach,
        trainer: grid.trainer,
        seed: model_seed,
        ..grid.template.clone()
    };
    let model = train(train_set.bags(), &cfg)?;
    let report = evaluate(&model, test_set.bags())?;
    report
        .error_rate
        .ok_or_else(|| Error::invalid("sweep needs a classification loss"))
}

/// Run every cell, writing each row to `out` as soon as it is known, then
/// a `mean` and an `sd` row per `(N, n, method)` over successful repeats.
/// Failed cells are reported as `failed` rows and do not stop the sweep.
pub fn run_sweep<W: Write>(grid: &ExperimentGrid, mut out: W) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    writeln!(out, "{SWEEP_HEADER}")?;
    out.flush()?;
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &n_tasks in &grid.tasks {
        for &n_points in &grid.points {
            for &approach in &grid.approaches {
                let mut errors = Vec::new();
                let mut times = Vec::new();
                for repeat in 0..grid.repeats {
                    let start = Instant::now();
                    let result = run_cell(grid, approach, n_tasks, n_points, repeat);
                    let elapsed = if grid.record_timing {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    };
                    let error_rate = match result {
                        Ok(e) => {
                            errors.push(e);
                            times.push(elapsed);
                            Some(e)
                        }
                        Err(e) => {
                            log::error!(
                                "cell N={n_tasks} n={n_points} {} repeat {repeat} failed: {e}",
                                approach.as_str()
                            );
                            None
                        }
                    };
                    let row = SweepRow {
                        n_tasks,
                        n_points,
                        approach,
                        trainer: grid.trainer,
                        repeat: RepeatTag::Index(repeat),
                        error_rate,
                        wall_time_s: elapsed,
                    };
                    writeln!(out, "{}", row.to_csv())?;
                    out.flush()?;
                    log::info!("{}", row.to_csv());
                    rows.push(row);
                }
                let base = SweepRow {
                    n_tasks,
                    n_points,
                    approach,
                    trainer: grid.trainer,
                    repeat: RepeatTag::Mean,
                    error_rate: None,
                    wall_time_s: 0.0,
                };
                if errors.is_empty() {
                    aggregates.push(base.clone());
                    aggregates.push(SweepRow {
                        repeat: RepeatTag::Sd,
                        ..base
                    });
                } else {
                    let (em, es) = mean_sd(&errors);
                    let (tm, ts) = mean_sd(&times);
                    aggregates.push(SweepRow {
                        error_rate: Some(em),
                        wall_time_s: tm,
                        ..base.clone()
                    });
                    aggregates.push(SweepRow {
                        repeat: RepeatTag::Sd,
                        error_rate: Some(es),
                        wall_time_s: ts,
                        ..base
                    });
                }
            }
        }
    }
    for row in &aggregates {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()?;
    rows.extend(aggregates);
    Ok(rows)
}

/// Mean error of `(N, n, approach)` from a finished sweep.
pub fn mean_error(rows: &[SweepRow], n_tasks: usize, n_points: usize, approach: Approach) -> Option<f64> {
    rows.iter()
        .find(|r| {
            r.n_tasks == n_tasks && r.n_points == n_points && r.approach == approach && r.repeat == RepeatTag::Mean
        })
        .and_then(|r| r.error_rate)
}

pub const APPROX_HEADER: &str = "repeat,max_abs_error,mean_abs_error,exceed_fraction,bound,L,Q,eps_l,eps_q,sigma_p";

/// Per-repeat rows followed by a `summary` row whose exceedance column is
/// the fraction of all pair evaluations above `eps_l + eps_q`.
pub fn write_approx_report<W: Write>(report: &ApproxReport, mut out: W) -> Result<()> {
    let c = &report.config;
    writeln!(out, "{APPROX_HEADER}")?;
    let tail = format!(
        "{:?},{},{},{:?},{:?},{:?}",
        report.bound, c.l, c.q, c.eps_l, c.eps_q, report.sigma_p
    );
    for r in &report.repeats {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{tail}",
            r.repeat, r.max_abs_error, r.mean_abs_error, r.exceed_fraction
        )?;
    }
    writeln!(
        out,
        "summary,{:?},{:?},{:?},{tail}",
        report.median_max_error, report.median_mean_error, report.empirical_exceedance
    )?;
    Ok(())
}

/// Hyperparameters used by the sweep and by `train` when none are given.
pub mod defaults {
    pub const SIGMA_X: f64 = 0.5;
    pub const SIGMA_XP: f64 = 0.5;
    pub const SIGMA_P: f64 = 0.5;
    pub const LAMBDA: f64 = 1e-5;
    pub const RFF_L: usize = 2048;
    pub const RFF_Q: usize = 2048;
    pub const NYSTROM_M: usize = 512;
    pub const TEST_TASKS: usize = 10;
    pub const TEST_POINTS: usize = 20_000;
}

/// Training template with the default hyperparameters.
pub fn default_template() -> TrainConfig {
    let spec = crate::kernels::KernelSpec::all_gaussian(defaults::SIGMA_X, defaults::SIGMA_XP, defaults::SIGMA_P)
        .expect("valid defaults");
    TrainConfig {
        rff_inner: defaults::RFF_L,
        rff_outer: defaults::RFF_Q,
        nystrom_m: defaults::NYSTROM_M,
        ..TrainConfig::new(spec, defaults::LAMBDA)
    }
}

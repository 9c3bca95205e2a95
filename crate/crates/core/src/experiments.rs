//! Seeded trial grids over one experiment axis, run on a bounded worker pool.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nspoly::Polynomial;
use crate::optimizers::{tune_hyperparameters, HyperParams, OptimizerKind};
use crate::orthogonalizer::OrthogonalizerConfig;
use crate::problems::{make_problem, run_training, ProblemSpec, RunStatus, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Newton–Schulz steps.
    Q,
    /// Polynomial degree.
    Kappa,
    /// Rank of a square-ish monitored matrix, with matched problems.
    Rank,
    /// Batch size.
    Batch,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Q => "q",
            Self::Kappa => "kappa",
            Self::Rank => "rank",
            Self::Batch => "batch",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Self::Q),
            "kappa" => Ok(Self::Kappa),
            "rank" => Ok(Self::Rank),
            "batch" => Ok(Self::Batch),
            other => Err(Error::Parse(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Step size and momentum: fixed, or tuned per trial from the problem's
/// constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed { eta: f64, beta: f64 },
    AutoTune,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Problem at the base point; the axis overrides one aspect of it.
    pub problem: ProblemSpec,
    pub kind: OptimizerKind,
    pub q: usize,
    pub kappa: usize,
    /// Replaces the Newton–Schulz polynomial; not allowed on the κ axis.
    pub poly: Option<Polynomial>,
    pub step: StepRule,
    pub t_max: usize,
    pub batch: usize,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

/// One `(trial, step)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub seed: u64,
    pub axis_value: usize,
    pub t: usize,
    pub nuclear_grad_norm: f64,
    pub loss: f64,
    pub cumulative_flops: u64,
    pub cumulative_wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub axis_value: usize,
    pub avg_nuclear_grad_norm: f64,
    pub status: RunStatus,
    pub hyper: HyperParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    /// Ordered by `(trial, t)`.
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialSummary>,
}

impl SweepOutcome {
    pub fn any_diverged(&self) -> bool {
        self.trials.iter().any(|t| t.status == RunStatus::Diverged)
    }

    /// Mean over seeds of the averaged nuclear gradient norm, per axis value.
    pub fn mean_by_value(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for t in &self.trials {
            match out.iter_mut().find(|e| e.0 == t.axis_value) {
                Some(e) => {
                    e.1 += t.avg_nuclear_grad_norm;
                    e.2 += 1;
                }
                None => out.push((t.axis_value, t.avg_nuclear_grad_norm, 1)),
            }
        }
        out.into_iter().map(|(v, s, c)| (v, s / c as f64)).collect()
    }

    /// Least-squares slope of `ln(mean metric)` against `ln(axis value)`.
    pub fn log_log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .mean_by_value()
            .into_iter()
            .map(|(v, y)| (v as f64, y))
            .collect();
        log_log_slope(&pts)
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// distinct `x`, or any non-positive coordinate.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// The problem used at rank `r` of a rank sweep whose first value is
/// `r_ref`: the shape keeps the base aspect ratio with `min(m, n) = r`, the
/// loss is scaled by `1/r` so the operator-to-nuclear smoothness stays
/// fixed, and the noise scales with `√(r_ref / r)` like the gradient's
/// Frobenius norm does.
pub fn matched_rank_spec(base: &ProblemSpec, r: usize, r_ref: usize) -> ProblemSpec {
    let (m, n) = base.shape;
    let shape = if m <= n {
        (r, (r * n).div_ceil(m))
    } else {
        ((r * m).div_ceil(n), r)
    };
    ProblemSpec {
        shape,
        loss_scale: base.loss_scale / r as f64,
        noise_sigma: base.noise_sigma * (r_ref as f64 / r as f64).sqrt(),
        ..base.clone()
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.contains(&0) {
            return Err(Error::Parameter("sweep values must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if self.axis == SweepAxis::Kappa && self.poly.is_some() {
            return Err(Error::Parameter(
                "a custom polynomial cannot be combined with a degree sweep".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("thread count must be positive".into()));
        }
        self.problem.validate()
    }

    fn trial_setup(&self, value: usize) -> Result<(ProblemSpec, OrthogonalizerConfig, usize)> {
        let (mut q, mut kappa, mut batch) = (self.q, self.kappa, self.batch);
        let mut spec = self.problem.clone();
        match self.axis {
            SweepAxis::Q => q = value,
            SweepAxis::Kappa => kappa = value,
            SweepAxis::Batch => batch = value,
            SweepAxis::Rank => spec = matched_rank_spec(&self.problem, value, self.values[0]),
        }
        let ortho = match &self.poly {
            Some(p) => OrthogonalizerConfig::new(q, p.clone())?,
            None => OrthogonalizerConfig::newton_schulz(q, kappa)?,
        };
        Ok((spec, ortho, batch))
    }
}

/// Runs every `(value, seed)` pair; trial index is `value_index · seeds + seed_index`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, u64)> = cfg
        .values
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .enumerate()
        .map(|(i, (v, s))| (i, v, s))
        .collect();
    let run = |&(trial, value, seed): &(usize, usize, u64)| -> Result<(TrialSummary, TrainLog)> {
        let (spec, ortho, batch) = cfg.trial_setup(value)?;
        let problem = make_problem(&spec.with_seed(seed))?;
        let hyper = match cfg.step {
            StepRule::Fixed { eta, beta } => HyperParams::new(eta, beta, ortho, batch)?,
            StepRule::AutoTune => {
                tune_hyperparameters(&problem.constants(batch, cfg.t_max.max(1)), cfg.kind, ortho)?
            }
        };
        let log = run_training(&problem, cfg.kind, &hyper, cfg.t_max, seed)?;
        let summary = TrialSummary {
            trial,
            seed,
            axis_value: value,
            avg_nuclear_grad_norm: log.average_nuclear_grad_norm(),
            status: log.status,
            hyper,
        };
        Ok((summary, log))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(TrialSummary, TrainLog)>> =
        pool.install(|| jobs.par_iter().map(run).collect());

    let mut rows = Vec::new();
    let mut trials = Vec::with_capacity(results.len());
    for result in results {
        let (summary, log) = result?;
        let (mut flops, mut wall) = (0u64, 0u64);
        for r in &log.records {
            flops += r.flops;
            wall += r.wall_ns;
            rows.push(SweepRow {
                trial: summary.trial,
                seed: summary.seed,
                axis_value: summary.axis_value,
                t: r.t,
                nuclear_grad_norm: r.nuclear_grad_norm,
                loss: r.loss,
                cumulative_flops: flops,
                cumulative_wall_ns: wall,
            });
        }
        trials.push(summary);
    }
    Ok(SweepOutcome {
        axis: cfg.axis,
        rows,
        trials,
    })
}

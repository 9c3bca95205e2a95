//! The `muon-ns` command line.
//!
//! Exit codes: 0 success, 1 failed `verify` checks, 2 usage or invalid
//! input, 3 I/O failure, 4 diverged run (partial output is still written).

pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{run_sweep, StepRule, SweepAxis, SweepConfig, SweepOutcome};
use crate::linalg::{parse_matrix, write_matrix};
use crate::nspoly::Polynomial;
use crate::optimizers::{tune_hyperparameters, HyperParams, OptimizerKind, ProblemConstants};
use crate::orthogonalizer::{orthogonalize, OrthogonalizerConfig};
use crate::problems::{make_problem, NoiseMode, ProblemSpec, RunStatus, TrainLog};
use crate::theory::{
    epsilon_chi_bounds, iteration_complexity, orthogonalization_flops, rate_bound, residual_power,
    FlopModel,
};
use crate::verify::{run_verify, VerifyConfig};

pub use config::{Command, Options, RunConfig};
use csv::{opt_real, real, CsvTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "muon-ns", version, about = "Muon with Newton–Schulz orthogonalization: checks, sweeps and bound calculators")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the invariant suite for all modules and print a pass/fail table
    Verify(Options),
    /// Orthogonalize one matrix file; writes the result and a residual trace
    Ortho(Options),
    /// One training run; writes the per-step log as CSV
    Train(Options),
    /// Sweep the number of Newton–Schulz steps
    SweepQ(Options),
    /// Sweep the polynomial degree
    SweepKappa(Options),
    /// Sweep the rank of the monitored matrix over matched problems
    RankSweep(Options),
    /// Sweep the batch size
    BatchSweep(Options),
    /// Print error bounds, rates, complexities and the FLOP model
    Bounds(Options),
}

/// Parses arguments (first item is the program name) and merges the JSON
/// config file, if any.
pub fn parse_config<I, T>(args: I) -> std::result::Result<RunConfig, CliFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliFailure::Clap)?;
    let (command, flags) = match cli.command {
        Sub::Verify(o) => (Command::Verify, o),
        Sub::Ortho(o) => (Command::Ortho, o),
        Sub::Train(o) => (Command::Train, o),
        Sub::SweepQ(o) => (Command::SweepQ, o),
        Sub::SweepKappa(o) => (Command::SweepKappa, o),
        Sub::RankSweep(o) => (Command::RankSweep, o),
        Sub::BatchSweep(o) => (Command::BatchSweep, o),
        Sub::Bounds(o) => (Command::Bounds, o),
    };
    let merged = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliFailure::Run(e.into()))?;
            flags.clone().or(Options::from_json(&text).map_err(CliFailure::Run)?)
        }
        None => flags,
    };
    RunConfig::from_options(command, merged).map_err(CliFailure::Run)
}

#[derive(Debug)]
pub enum CliFailure {
    Clap(clap::Error),
    Run(Error),
}

impl CliFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Clap(e) if !e.use_stderr() => EXIT_OK,
            Self::Clap(_) => EXIT_USAGE,
            Self::Run(Error::Io(_)) => EXIT_IO,
            Self::Run(_) => EXIT_USAGE,
        }
    }
}

/// Full entry point: parse, run, report errors on stderr, return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_config(args).and_then(|cfg| run_command(&cfg).map_err(CliFailure::Run));
    match result {
        Ok(code) => code,
        Err(f) => {
            match &f {
                CliFailure::Clap(e) => {
                    let _ = e.print();
                }
                CliFailure::Run(e) => eprintln!("error: {e}"),
            }
            f.exit_code()
        }
    }
}

/// Runs a validated configuration; returns the exit code on success.
pub fn run_command(cfg: &RunConfig) -> Result<i32> {
    match cfg.command {
        Command::Verify => cmd_verify(cfg),
        Command::Ortho => cmd_ortho(cfg),
        Command::Train => cmd_train(cfg),
        Command::SweepQ => cmd_sweep(cfg, SweepAxis::Q),
        Command::SweepKappa => cmd_sweep(cfg, SweepAxis::Kappa),
        Command::RankSweep => cmd_sweep(cfg, SweepAxis::Rank),
        Command::BatchSweep => cmd_sweep(cfg, SweepAxis::Batch),
        Command::Bounds => cmd_bounds(cfg),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn ortho_config(cfg: &RunConfig, q: usize) -> Result<OrthogonalizerConfig> {
    match &cfg.poly {
        Some(p) => OrthogonalizerConfig::new(q, p.clone()),
        None => OrthogonalizerConfig::newton_schulz(q, cfg.kappa_or_default()),
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let vc = VerifyConfig {
        seed: cfg.seed.unwrap_or(0),
        kappas: cfg.kappa.map(|k| vec![k]).unwrap_or_else(|| vec![1, 2]),
        q_max: cfg.q.unwrap_or(5),
        ..Default::default()
    };
    let report = run_verify(&vc)?;
    emit(cfg.out.as_deref(), &report.render())?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

/// Trace table of `ortho`: one row per iterate `j = 0..q`.
pub fn ortho_trace_table(delta: &[f64], epsilon: &[f64], kappa: Option<usize>) -> CsvTable {
    let mut t = CsvTable::new(&["j", "delta_j", "bound_delta0_pow", "epsilon_running"]);
    for (j, (&d, &e)) in delta.iter().zip(epsilon).enumerate() {
        let bound = kappa.map(|k| residual_power(delta[0], k, j));
        t.push(vec![j.to_string(), real(d), opt_real(bound), real(e)]);
    }
    t
}

fn cmd_ortho(cfg: &RunConfig) -> Result<i32> {
    let input = cfg.input.as_deref().ok_or_else(|| Error::Parameter("ortho needs --input".into()))?;
    let m = parse_matrix(&fs::read_to_string(input)?)?;
    let oc = ortho_config(cfg, cfg.q_or_default())?.traced();
    let (o, trace) = orthogonalize(&m, &oc)?;
    let mut matrix_text = Vec::new();
    write_matrix(&mut matrix_text, &o)?;
    let matrix_text = String::from_utf8(matrix_text).map_err(|e| Error::Parse(e.to_string()))?;
    let kappa = oc.poly.is_newton_schulz().then(|| oc.poly.degree());
    let table = ortho_trace_table(&trace.delta_per_step, &trace.epsilon_per_step, kappa).render();
    match cfg.out.as_deref() {
        Some(path) => {
            fs::write(path, matrix_text)?;
            let mut trace_path = path.as_os_str().to_owned();
            trace_path.push(".trace.csv");
            fs::write(trace_path, table)?;
        }
        None => print!("{matrix_text}\n{table}"),
    }
    if trace.left_spectral_ball {
        eprintln!("warning: an iterate left the unit spectral ball");
    }
    Ok(EXIT_OK)
}

/// Column layout of a training log.
pub const TRAIN_COLUMNS: [&str; 12] = [
    "t",
    "loss",
    "nuclear_grad_norm",
    "frobenius_grad_norm",
    "avg_nuclear_grad_norm",
    "delta0",
    "delta_q",
    "delta_q_bound",
    "epsilon_q",
    "epsilon_q_bound",
    "flops",
    "wall_ns",
];

/// CSV of a training log; bound columns are filled for Newton–Schulz
/// polynomials.
pub fn train_log_table(log: &TrainLog, ortho: &OrthogonalizerConfig) -> CsvTable {
    let mut t = CsvTable::new(&TRAIN_COLUMNS);
    let kappa = ortho.poly.is_newton_schulz().then(|| ortho.poly.degree());
    for r in &log.records {
        let bound = match (kappa, r.delta0) {
            (Some(k), Some(d0)) => epsilon_chi_bounds(d0, k, ortho.q).ok(),
            _ => None,
        };
        t.push(vec![
            r.t.to_string(),
            real(r.loss),
            real(r.nuclear_grad_norm),
            real(r.frobenius_grad_norm),
            real(r.avg_nuclear_grad_norm),
            opt_real(r.delta0),
            opt_real(r.delta_q),
            opt_real(bound.map(|b| b.delta_q)),
            opt_real(r.epsilon_q),
            opt_real(bound.map(|b| b.epsilon_q)),
            r.flops.to_string(),
            r.wall_ns.to_string(),
        ]);
    }
    t
}

fn base_problem(cfg: &RunConfig) -> ProblemSpec {
    ProblemSpec::new(cfg.problem, cfg.shape).with_noise(cfg.sigma, NoiseMode::AdditiveGaussian)
}

fn cmd_train(cfg: &RunConfig) -> Result<i32> {
    let seed = cfg.seed.unwrap_or(0);
    let problem = make_problem(&base_problem(cfg).with_seed(seed))?;
    let mut ortho = ortho_config(cfg, cfg.q_or_default())?;
    if cfg.optimizer == OptimizerKind::MuonNs {
        ortho = ortho.traced();
    }
    let hp = match cfg.step {
        StepRule::Fixed { eta, beta } => HyperParams::new(eta, beta, ortho.clone(), cfg.batch)?,
        StepRule::AutoTune => tune_hyperparameters(
            &problem.constants(cfg.batch, cfg.t_max.max(1)),
            cfg.optimizer,
            ortho.clone(),
        )?,
    };
    let log = crate::problems::run_training(&problem, cfg.optimizer, &hp, cfg.t_max, seed)?;
    emit(cfg.out.as_deref(), &train_log_table(&log, &ortho).render())?;
    eprintln!(
        "{}: eta={} beta={} avg nuclear grad norm={}",
        cfg.optimizer,
        hp.eta,
        hp.beta,
        log.average_nuclear_grad_norm()
    );
    Ok(if log.status == RunStatus::Diverged {
        eprintln!("run diverged after {} steps", log.records.len());
        EXIT_DIVERGED
    } else {
        EXIT_OK
    })
}

/// Axis values used when `--values` is absent.
pub fn default_values(axis: SweepAxis) -> Vec<usize> {
    match axis {
        SweepAxis::Q => vec![1, 2, 3, 4, 5],
        SweepAxis::Kappa => vec![1, 2, 3, 4],
        SweepAxis::Rank => vec![8, 16, 32, 64],
        SweepAxis::Batch => vec![1, 4, 16, 64],
    }
}

/// CSV of a sweep, one row per `(trial, step)`.
pub fn sweep_table(out: &SweepOutcome) -> CsvTable {
    let axis = out.axis.name();
    let mut t = CsvTable::new(&[
        "trial",
        "seed",
        axis,
        "t",
        "nuclear_grad_norm",
        "loss",
        "cumulative_flops",
        "cumulative_wall_ns",
    ]);
    for r in &out.rows {
        t.push(vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.axis_value.to_string(),
            r.t.to_string(),
            real(r.nuclear_grad_norm),
            real(r.loss),
            r.cumulative_flops.to_string(),
            r.cumulative_wall_ns.to_string(),
        ]);
    }
    t
}

fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis) -> Result<i32> {
    let sc = SweepConfig {
        axis,
        values: cfg.values.clone().unwrap_or_else(|| default_values(axis)),
        seeds: cfg.seeds.clone(),
        problem: base_problem(cfg),
        kind: cfg.optimizer,
        q: cfg.q_or_default(),
        kappa: cfg.kappa_or_default(),
        poly: cfg.poly.clone().map(Polynomial::from),
        step: cfg.step,
        t_max: cfg.t_max,
        batch: cfg.batch,
        threads: cfg.threads,
    };
    let outcome = run_sweep(&sc)?;
    emit(cfg.out.as_deref(), &sweep_table(&outcome).render())?;
    for (v, mean) in outcome.mean_by_value() {
        eprintln!("{axis}={v}: mean avg nuclear grad norm {mean:.6e}");
    }
    if let Some(slope) = outcome.log_log_slope() {
        eprintln!("log-log slope vs {axis}: {slope:.4}");
    }
    Ok(if outcome.any_diverged() { EXIT_DIVERGED } else { EXIT_OK })
}

/// `quantity,value` table of every closed-form quantity.
pub fn bounds_table(cfg: &RunConfig) -> Result<CsvTable> {
    let (kappa, q) = (cfg.kappa_or_default(), cfg.q_or_default());
    let b = epsilon_chi_bounds(cfg.delta0, kappa, q)?;
    let consts = ProblemConstants {
        lipschitz_l: cfg.lipschitz,
        init_gap_d: cfg.gap,
        sigma: cfg.sigma,
        batch_size: cfg.batch,
        horizon_t: cfg.t_max.max(1),
        rank_r: cfg.rank.unwrap_or(cfg.shape.0.min(cfg.shape.1)),
    };
    consts.validate()?;
    let flops = orthogonalization_flops(&FlopModel {
        m: cfg.shape.0,
        n: cfg.shape.1,
        q,
        kappa,
        efficiency_ratio: cfg.efficiency_ratio,
    })?;
    let mut t = CsvTable::new(&["quantity", "value"]);
    let mut row = |k: &str, v: f64| t.push(vec![k.to_string(), real(v)]);
    row("delta_q_bound", b.delta_q);
    row("epsilon_q_bound", b.epsilon_q);
    row("chi_q_bound", b.chi_q);
    for kind in OptimizerKind::ALL {
        row(&format!("rate_{}", kind.name().replace('-', "_")), rate_bound(kind, &consts, b.chi_q));
    }
    for kind in OptimizerKind::ALL {
        row(
            &format!("complexity_{}", kind.name().replace('-', "_")),
            iteration_complexity(kind, &consts, b.chi_q, cfg.target_eps)?,
        );
    }
    row("svd_flops", flops.svd_flops);
    row("ns_flops", flops.ns_flops);
    row("algebraic_ratio", flops.algebraic_ratio);
    row("wallclock_ratio", flops.wallclock_ratio);
    Ok(t)
}

fn cmd_bounds(cfg: &RunConfig) -> Result<i32> {
    emit(cfg.out.as_deref(), &bounds_table(cfg)?.render())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<RunConfig, CliFailure> {
        parse_config(std::iter::once("muon-ns").chain(args.iter().copied()))
    }

    #[test]
    fn verify_flags_map_directly() {
        let c = parse(&["verify", "--kappa", "2", "--q", "3", "--seed", "7"]).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!((c.kappa, c.q, c.seed), (Some(2), Some(3), Some(7)));
    }

    #[test]
    fn poly_coeffs_with_negative_entries() {
        let c = parse(&["ortho", "--input", "m.txt", "--poly-coeffs", "3.4445,-4.7750,2.0315"]).unwrap();
        assert_eq!(c.poly.unwrap().coeffs_lambda(), &[3.4445, -4.775, 2.0315]);
    }

    #[test]
    fn usage_errors_exit_2() {
        let e = parse(&["train", "--eta", "0.1", "--auto-tune"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        assert_eq!(parse(&["train", "--bogus"]).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(parse(&["train", "--q", "x"]).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(parse(&["rank-sweep"]).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(parse(&["--help"]).unwrap_err().exit_code(), EXIT_OK);
    }

    #[test]
    fn missing_config_file_is_io() {
        let e = parse(&["bounds", "--config", "/nonexistent/cfg.json"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_IO);
    }

    #[test]
    fn bounds_table_contains_chi() {
        let c = parse(&["bounds", "--delta0", "0.9", "--kappa", "2", "--q", "2"]).unwrap();
        let t = bounds_table(&c).unwrap();
        let row = t.rows.iter().find(|r| r[0] == "chi_q_bound").unwrap();
        assert!((row[1].parse::<f64>().unwrap() - 1.277671).abs() < 1e-6);
    }

    #[test]
    fn ortho_trace_for_worked_instance() {
        let t = ortho_trace_table(&[0.64, 0.372736], &[0.4, 0.208], Some(1));
        assert_eq!(t.rows[1][0], "1");
        assert!((t.rows[1][2].parse::<f64>().unwrap() - 0.4096).abs() < 1e-15);
    }
}

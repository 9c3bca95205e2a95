//! Flag and JSON-file options, merged into a validated [`RunConfig`].

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::StepRule;
use crate::nspoly::CustomPolynomial;
use crate::optimizers::OptimizerKind;
use crate::problems::ProblemFamily;

/// Options shared by every subcommand. A JSON config file uses the same
/// names as keys; flags given on the command line win.
#[derive(Args, Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// JSON file with default values for any of these options
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Seed for single runs and the verify corpora
    #[arg(long)]
    pub seed: Option<u64>,

    /// Comma-separated seeds, one trial per seed and axis value
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads for sweeps (default: available parallelism)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Newton–Schulz polynomial degree
    #[arg(long)]
    pub kappa: Option<usize>,

    /// Newton–Schulz steps
    #[arg(long)]
    pub q: Option<usize>,

    /// Custom polynomial coefficients in λ, constant first, e.g. 3.4445,-4.7750,2.0315
    #[arg(long, allow_hyphen_values = true)]
    pub poly_coeffs: Option<String>,

    /// muon-ns, muon-svd or sgdm
    #[arg(long)]
    pub optimizer: Option<String>,

    /// Tune η and β from the problem constants (default when --eta is absent)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub auto_tune: Option<bool>,

    /// Fixed learning rate
    #[arg(long)]
    pub eta: Option<f64>,

    /// Fixed momentum (with --eta; default 0.9)
    #[arg(long)]
    pub beta: Option<f64>,

    /// Iterations
    #[arg(long = "T", value_name = "T")]
    #[serde(rename = "T")]
    pub t: Option<usize>,

    /// Batch size
    #[arg(long)]
    pub batch: Option<usize>,

    /// Gradient noise level σ
    #[arg(long)]
    pub sigma: Option<f64>,

    /// quad, two-layer or tanh-mlp
    #[arg(long)]
    pub problem: Option<String>,

    /// Monitored matrix shape `m,n`
    #[arg(long)]
    pub shape: Option<String>,

    /// Φ_gemm / Φ_svd for the wall-clock prediction
    #[arg(long)]
    pub efficiency_ratio: Option<f64>,

    /// Sweep axis values, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,

    /// Matrix file for `ortho`
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Initial residual δ_0 for `bounds`
    #[arg(long)]
    pub delta0: Option<f64>,

    /// Smoothness L for `bounds`
    #[arg(long)]
    pub lipschitz: Option<f64>,

    /// Initial gap D for `bounds`
    #[arg(long)]
    pub gap: Option<f64>,

    /// Rank r for `bounds` (default min of --shape)
    #[arg(long)]
    pub rank: Option<usize>,

    /// Target accuracy ε for the iteration complexities in `bounds`
    #[arg(long)]
    pub target_eps: Option<f64>,
}

impl Options {
    /// Fills every option missing here from `file`.
    pub fn or(self, file: Options) -> Options {
        Options {
            config: self.config.or(file.config),
            seed: self.seed.or(file.seed),
            seeds: self.seeds.or(file.seeds),
            out: self.out.or(file.out),
            threads: self.threads.or(file.threads),
            kappa: self.kappa.or(file.kappa),
            q: self.q.or(file.q),
            poly_coeffs: self.poly_coeffs.or(file.poly_coeffs),
            optimizer: self.optimizer.or(file.optimizer),
            auto_tune: self.auto_tune.or(file.auto_tune),
            eta: self.eta.or(file.eta),
            beta: self.beta.or(file.beta),
            t: self.t.or(file.t),
            batch: self.batch.or(file.batch),
            sigma: self.sigma.or(file.sigma),
            problem: self.problem.or(file.problem),
            shape: self.shape.or(file.shape),
            efficiency_ratio: self.efficiency_ratio.or(file.efficiency_ratio),
            values: self.values.or(file.values),
            input: self.input.or(file.input),
            delta0: self.delta0.or(file.delta0),
            lipschitz: self.lipschitz.or(file.lipschitz),
            gap: self.gap.or(file.gap),
            rank: self.rank.or(file.rank),
            target_eps: self.target_eps.or(file.target_eps),
        }
    }

    pub fn from_json(text: &str) -> Result<Options> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Ortho,
    Train,
    SweepQ,
    SweepKappa,
    RankSweep,
    BatchSweep,
    Bounds,
}

/// Validated settings for one invocation. `kappa` and `q` stay optional
/// because `verify` treats their absence differently from other commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub kappa: Option<usize>,
    pub q: Option<usize>,
    pub poly: Option<CustomPolynomial>,
    pub optimizer: OptimizerKind,
    pub step: StepRule,
    pub t_max: usize,
    pub batch: usize,
    pub sigma: f64,
    pub problem: ProblemFamily,
    pub shape: (usize, usize),
    pub efficiency_ratio: f64,
    pub values: Option<Vec<usize>>,
    pub input: Option<PathBuf>,
    pub delta0: f64,
    pub lipschitz: f64,
    pub gap: f64,
    pub rank: Option<usize>,
    pub target_eps: f64,
}

pub const DEFAULT_KAPPA: usize = 2;
pub const DEFAULT_Q: usize = 3;

impl RunConfig {
    pub fn kappa_or_default(&self) -> usize {
        self.kappa.unwrap_or(DEFAULT_KAPPA)
    }

    pub fn q_or_default(&self) -> usize {
        self.q.unwrap_or(DEFAULT_Q)
    }

    pub fn from_options(command: Command, o: Options) -> Result<Self> {
        let auto = o.auto_tune.unwrap_or(false);
        if auto && (o.eta.is_some() || o.beta.is_some()) {
            return Err(Error::Parameter("--eta/--beta conflict with --auto-tune".into()));
        }
        if o.beta.is_some() && o.eta.is_none() {
            return Err(Error::Parameter("--beta requires --eta".into()));
        }
        let step = match o.eta {
            Some(eta) => StepRule::Fixed {
                eta,
                beta: o.beta.unwrap_or(0.9),
            },
            None => StepRule::AutoTune,
        };
        let shape = match &o.shape {
            Some(s) => parse_shape(s)?,
            None => (16, 16),
        };
        let mut seeds = o.seeds.unwrap_or_default();
        if seeds.is_empty() {
            seeds.extend(o.seed);
        }
        let cfg = RunConfig {
            command,
            seed: o.seed,
            seeds,
            out: o.out,
            threads: o.threads,
            kappa: o.kappa,
            q: o.q,
            poly: o.poly_coeffs.as_deref().map(str::parse).transpose()?,
            optimizer: o.optimizer.as_deref().unwrap_or("muon-ns").parse()?,
            step,
            t_max: o.t.unwrap_or(200),
            batch: o.batch.unwrap_or(16),
            sigma: o.sigma.unwrap_or(0.5),
            problem: o.problem.as_deref().unwrap_or("quad").parse()?,
            shape,
            efficiency_ratio: o.efficiency_ratio.unwrap_or(1.0),
            values: o.values,
            input: o.input,
            delta0: o.delta0.unwrap_or(0.9),
            lipschitz: o.lipschitz.unwrap_or(1.0),
            gap: o.gap.unwrap_or(1.0),
            rank: o.rank,
            target_eps: o.target_eps.unwrap_or(0.1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let sweep = matches!(
            self.command,
            Command::SweepQ | Command::SweepKappa | Command::RankSweep | Command::BatchSweep
        );
        if sweep && self.seeds.is_empty() {
            return Err(Error::Parameter("sweeps need explicit --seeds".into()));
        }
        if self.command == Command::Ortho && self.input.is_none() {
            return Err(Error::Parameter("ortho needs --input".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("--threads must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::Parameter("--batch must be positive".into()));
        }
        if self.kappa == Some(0) {
            return Err(Error::Parameter("--kappa must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter("--sigma must be non-negative".into()));
        }
        if let Some(v) = &self.values {
            if v.is_empty() || v.contains(&0) {
                return Err(Error::Parameter("--values must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `"m,n"` with both positive.
pub fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::Parse(format!("shape must look like `m,n`, got `{s}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let m: usize = parts[0].parse().map_err(|_| bad())?;
    let n: usize = parts[1].parse().map_err(|_| bad())?;
    if m == 0 || n == 0 {
        return Err(bad());
    }
    Ok((m, n))
}

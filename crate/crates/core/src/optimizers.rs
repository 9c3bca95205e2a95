//! Muon with Newton–Schulz, Muon with an exact SVD polar step, and SGD with
//! momentum, behind one stepping function.
//!
//! All three share the raw momentum `M_t = β M_{t−1} + G_t` and the update
//! `W_t = W_{t−1} − η O_t`; they differ only in the direction `O_t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, operator_norm, polar_factor, Matrix};
use crate::orthogonalizer::{orthogonalize, OrthogonalizeTrace, OrthogonalizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "muon-ns")]
    MuonNs,
    #[serde(rename = "muon-svd")]
    MuonSvd,
    #[serde(rename = "sgdm")]
    Sgdm,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [Self::MuonNs, Self::MuonSvd, Self::Sgdm];

    pub fn name(self) -> &'static str {
        match self {
            Self::MuonNs => "muon-ns",
            Self::MuonSvd => "muon-svd",
            Self::Sgdm => "sgdm",
        }
    }

    pub fn is_muon(self) -> bool {
        !matches!(self, Self::Sgdm)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "muon-ns" => Ok(Self::MuonNs),
            "muon-svd" => Ok(Self::MuonSvd),
            "sgdm" => Ok(Self::Sgdm),
            other => Err(Error::Parse(format!(
                "unknown optimizer `{other}` (expected muon-ns, muon-svd or sgdm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub eta: f64,
    pub beta: f64,
    /// Only consulted by [`OptimizerKind::MuonNs`].
    pub ortho: OrthogonalizerConfig,
    pub batch_size: usize,
}

impl HyperParams {
    pub fn new(eta: f64, beta: f64, ortho: OrthogonalizerConfig, batch_size: usize) -> Result<Self> {
        let hp = Self {
            eta,
            beta,
            ortho,
            batch_size,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Problem constants the tuning formulas need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Smoothness constant `L`.
    pub lipschitz_l: f64,
    /// Initial gap `D = f(W_0) − f*`.
    pub init_gap_d: f64,
    /// Noise level `σ` (per-sample standard deviation in Frobenius norm).
    pub sigma: f64,
    pub batch_size: usize,
    pub horizon_t: usize,
    /// `r = min(m, n)`.
    pub rank_r: usize,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("L", self.lipschitz_l)?;
        positive("D", self.init_gap_d)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.batch_size == 0 || self.horizon_t == 0 || self.rank_r == 0 {
            return Err(Error::Parameter("B, T and r must be positive".into()));
        }
        Ok(())
    }
}

/// Step size and momentum prescribed by the convergence theorems.
///
/// Muon (either variant): `β = 1 − min{√(LDB) / (σ√(rT)), 1}` and
/// `η = √((1 − β) D / (T L))`.
/// SGD-M: `β = 1 − min{√(LDB) / (σ√T), 1}` and
/// `η = min{(1 − β)/L, (1 − β)² / (4L)}`.
///
/// Returns `(η, β)`. With `σ = 0` the clamp gives `β = 0`.
pub fn tuned_eta_beta(consts: &ProblemConstants, kind: OptimizerKind) -> (f64, f64) {
    let ProblemConstants {
        lipschitz_l: l,
        init_gap_d: d,
        sigma,
        batch_size,
        horizon_t,
        rank_r,
    } = *consts;
    let (b, t, r) = (batch_size as f64, horizon_t as f64, rank_r as f64);
    let spread = if kind.is_muon() { (r * t).sqrt() } else { t.sqrt() };
    let ratio = if sigma > 0.0 {
        (l * d * b).sqrt() / (sigma * spread)
    } else {
        f64::INFINITY
    };
    let one_minus_beta = ratio.min(1.0);
    let beta = 1.0 - one_minus_beta;
    let eta = if kind.is_muon() {
        (one_minus_beta * d / (t * l)).sqrt()
    } else {
        (one_minus_beta / l).min(one_minus_beta * one_minus_beta / (4.0 * l))
    };
    (eta, beta)
}

/// Hyperparameters from [`tuned_eta_beta`], with the given orthogonalizer.
pub fn tune_hyperparameters(
    consts: &ProblemConstants,
    kind: OptimizerKind,
    ortho: OrthogonalizerConfig,
) -> Result<HyperParams> {
    consts.validate()?;
    let (eta, beta) = tuned_eta_beta(consts, kind);
    HyperParams::new(eta, beta, ortho, consts.batch_size)
}

/// Iterate, momentum and step counter for one matrix parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub w: Matrix,
    pub m: Matrix,
    pub t: u64,
}

/// `M_0 = 0`, `t = 0`.
pub fn init_state(w0: Matrix) -> OptimizerState {
    let (r, c) = w0.shape();
    OptimizerState {
        w: w0,
        m: Matrix::zeros(r, c),
        t: 0,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    /// `‖O_t‖_op`; only measured when the orthogonalizer traces.
    pub step_dir_op_norm: f64,
    pub ortho_trace: Option<OrthogonalizeTrace>,
    /// `‖M_t‖_*`; only measured when the orthogonalizer traces.
    pub momentum_nuclear: f64,
    /// Wall time spent computing the direction `O_t`.
    pub direction_wall_ns: u64,
    /// FLOPs spent computing `O_t` (matrix multiplies for Newton–Schulz,
    /// the SVD cost model for the polar step, zero for SGD-M).
    pub direction_flops: u64,
}

/// One update `M_t = β M_{t−1} + G_t`, `W_t = W_{t−1} − η O_t`.
pub fn optimizer_step(
    state: &mut OptimizerState,
    g: &Matrix,
    hp: &HyperParams,
    kind: OptimizerKind,
) -> Result<StepDiagnostics> {
    if g.shape() != state.w.shape() {
        return Err(Error::Dimension(format!(
            "gradient {:?} does not match parameter {:?}",
            g.shape(),
            state.w.shape()
        )));
    }
    if !g.is_finite() {
        return Err(Error::InputDomain("gradient has non-finite entries".into()));
    }

    let mut momentum = state.m.scale(hp.beta);
    momentum.axpy(1.0, g);
    state.m = momentum;

    let started = std::time::Instant::now();
    let mut diag = StepDiagnostics::default();
    let direction = match kind {
        OptimizerKind::MuonNs => {
            let (o, trace) = orthogonalize(&state.m, &hp.ortho)?;
            diag.direction_flops = trace.flops;
            diag.ortho_trace = Some(trace);
            o
        }
        OptimizerKind::MuonSvd => {
            let (r, c) = state.m.shape();
            diag.direction_flops = crate::theory::svd_flop_count(r.min(c), r.max(c));
            polar_factor(&state.m, hp.ortho.rank_tol)?
        }
        OptimizerKind::Sgdm => state.m.clone(),
    };
    diag.direction_wall_ns = started.elapsed().as_nanos() as u64;

    if hp.ortho.trace_enabled {
        diag.step_dir_op_norm = operator_norm(&direction)?;
        diag.momentum_nuclear = nuclear_norm(&state.m)?;
    }
    state.w.axpy(-hp.eta, &direction);
    state.t += 1;
    Ok(diag)
}

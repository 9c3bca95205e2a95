//! Momentum orthogonalization: Frobenius pre-scaling followed by `q`
//! Newton–Schulz steps `X ← p(X Xᵀ) X`, or the exact SVD polar factor.
//!
//! With tracing enabled every iterate is measured against the exact polar
//! factor `P = polar(M)` and the projector `Π` onto `range(M)`:
//!
//! * `δ_j = ‖Π − X_j X_jᵀ‖_op`, read off the singular values of `X_j`
//!   restricted to the rank of `M`;
//! * `ε_j = ‖X_j − P‖_op`;
//! * drift `‖polar(X_j) − P‖_op` and leakage `‖(I − Π) X_j X_jᵀ (I − Π)‖_op`.

use crate::error::{Error, Result};
use crate::linalg::{
    operator_norm, polar_factor, projector_from_left, range_leakage, svd, truncated_polar,
    Matrix, RankTolerance,
};
use crate::nspoly::Polynomial;

/// Guard against runaway step counts.
pub const MAX_STEPS: usize = 64;

/// Operator-norm slack before a custom polynomial is flagged for leaving
/// the unit spectral ball.
pub const SPECTRAL_BALL_SLACK: f64 = 1e-6;

/// How the momentum is normalized before the first Newton–Schulz step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrescaleMode {
    /// `α = max{1, ‖M‖_F}`.
    #[default]
    MaxOneFrobenius,
    /// `α = ‖M‖_F` (1 for the zero matrix).
    Frobenius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalizerConfig {
    pub q: usize,
    pub poly: Polynomial,
    /// Iterate on `Mᵀ` when `M` has more rows than columns.
    pub use_transpose_trick: bool,
    pub rank_tol: RankTolerance,
    pub trace_enabled: bool,
    pub prescale: PrescaleMode,
    /// Also form `Π − X Xᵀ` explicitly and record its operator norm.
    pub explicit_residual: bool,
}

impl OrthogonalizerConfig {
    pub fn new(q: usize, poly: impl Into<Polynomial>) -> Result<Self> {
        if q > MAX_STEPS {
            return Err(Error::Parameter(format!(
                "at most {MAX_STEPS} Newton–Schulz steps, got {q}"
            )));
        }
        Ok(Self {
            q,
            poly: poly.into(),
            use_transpose_trick: true,
            rank_tol: RankTolerance::default(),
            trace_enabled: false,
            prescale: PrescaleMode::default(),
            explicit_residual: false,
        })
    }

    /// Degree-κ Newton–Schulz polynomial with `q` steps.
    pub fn newton_schulz(q: usize, kappa: usize) -> Result<Self> {
        Self::new(q, Polynomial::newton_schulz(kappa)?)
    }

    pub fn traced(mut self) -> Self {
        self.trace_enabled = true;
        self
    }
}

/// Per-call record of the orthogonalization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrthogonalizeTrace {
    pub alpha: f64,
    /// Whether the iteration ran on the transpose.
    pub transposed: bool,
    /// Multiply-add FLOPs spent in the Newton–Schulz steps.
    pub flops: u64,
    /// `δ_0 .. δ_q`; empty unless tracing.
    pub delta_per_step: Vec<f64>,
    /// `ε_0 .. ε_q`; empty unless tracing.
    pub epsilon_per_step: Vec<f64>,
    /// `ε_q`; zero unless tracing.
    pub epsilon_q: f64,
    pub polar_drift: f64,
    pub range_leakage: f64,
    /// Explicit `‖Π − X_j X_jᵀ‖_op` per step when requested.
    pub explicit_delta: Vec<f64>,
    /// Largest `‖X_j‖_op` seen while tracing.
    pub max_operator_norm: f64,
    /// A step left the unit spectral ball by more than the slack.
    pub left_spectral_ball: bool,
}

impl OrthogonalizeTrace {
    pub fn delta0(&self) -> Option<f64> {
        self.delta_per_step.first().copied()
    }

    pub fn delta_q(&self) -> Option<f64> {
        self.delta_per_step.last().copied()
    }
}

/// `(M / α, α)` with `α` chosen by the prescale mode.
pub fn prescale_with(m: &Matrix, mode: PrescaleMode) -> (Matrix, f64) {
    let fro = m.frobenius_norm();
    let alpha = match mode {
        PrescaleMode::MaxOneFrobenius => fro.max(1.0),
        PrescaleMode::Frobenius if fro > 0.0 => fro,
        PrescaleMode::Frobenius => 1.0,
    };
    (m.map(|v| v / alpha), alpha)
}

/// `(M / α, α)` with `α = max{1, ‖M‖_F}`.
pub fn prescale(m: &Matrix) -> (Matrix, f64) {
    prescale_with(m, PrescaleMode::MaxOneFrobenius)
}

/// One step `p(X Xᵀ) X`.
pub fn ns_step(x: &Matrix, poly: &Polynomial) -> Matrix {
    let mut flops = 0;
    ns_step_counted(x, poly, &mut flops)
}

/// One step `p(X Xᵀ) X`, adding the multiply FLOPs to `flops`.
///
/// Forms `A = X Xᵀ` once and runs Horner directly on `X`, so a degree-κ step
/// costs one Gram product and κ products `A · Y`. The Newton–Schulz family
/// folds in `B = I − A` (`B Y = Y − A Y`), other polynomials in `A`.
pub fn ns_step_counted(x: &Matrix, poly: &Polynomial, flops: &mut u64) -> Matrix {
    let a = x.gram_counted(flops);
    let (coeffs, shifted) = match poly {
        Polynomial::NewtonSchulz(p) => (p.coeffs_u(), true),
        Polynomial::Custom(p) => (p.coeffs_lambda(), false),
    };
    let (&top, rest) = coeffs.split_last().expect("polynomial has coefficients");
    let mut y = x.scale(top);
    for &c in rest.iter().rev() {
        let ay = a.matmul_counted(&y, flops);
        if shifted {
            y.axpy(-1.0, &ay);
        } else {
            y = ay;
        }
        y.axpy(c, x);
    }
    y
}

/// Pre-scaling plus `cfg.q` Newton–Schulz steps.
pub fn orthogonalize(m: &Matrix, cfg: &OrthogonalizerConfig) -> Result<(Matrix, OrthogonalizeTrace)> {
    if !m.is_finite() {
        return Err(Error::InputDomain("momentum has non-finite entries".into()));
    }
    if cfg.q > MAX_STEPS {
        return Err(Error::Parameter(format!(
            "at most {MAX_STEPS} Newton–Schulz steps, got {}",
            cfg.q
        )));
    }
    let transposed = cfg.use_transpose_trick && m.rows() > m.cols();
    let work = if transposed { m.transpose() } else { m.clone() };
    let (mut x, alpha) = prescale_with(&work, cfg.prescale);

    let mut trace = OrthogonalizeTrace {
        alpha,
        transposed,
        ..Default::default()
    };
    let mut probe = cfg
        .trace_enabled
        .then(|| Probe::new(&work, cfg))
        .transpose()?;
    if let Some(p) = probe.as_mut() {
        p.record(&x, &mut trace)?;
    }
    for _ in 0..cfg.q {
        x = ns_step_counted(&x, &cfg.poly, &mut trace.flops);
        if let Some(p) = probe.as_mut() {
            p.record(&x, &mut trace)?;
        }
    }
    if let Some(&last) = trace.epsilon_per_step.last() {
        trace.epsilon_q = last;
    }
    let o = if transposed { x.transpose() } else { x };
    Ok((o, trace))
}

/// Exact polar step `polar(M)`.
pub fn svd_polar_step(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    polar_factor(m, tol)
}

/// Reference quantities of `M` used to measure every iterate.
struct Probe {
    rank: usize,
    polar: Matrix,
    projector: Matrix,
    explicit: bool,
    custom: bool,
}

impl Probe {
    fn new(m: &Matrix, cfg: &OrthogonalizerConfig) -> Result<Self> {
        let f = svd(m)?;
        let rank = cfg.rank_tol.rank(&f.sigma, m.rows(), m.cols());
        Ok(Self {
            rank,
            polar: truncated_polar(&f, rank),
            projector: projector_from_left(&f.u, rank),
            explicit: cfg.explicit_residual,
            custom: !cfg.poly.is_newton_schulz(),
        })
    }

    fn record(&mut self, x: &Matrix, trace: &mut OrthogonalizeTrace) -> Result<()> {
        let f = svd(x)?;
        let delta = f.sigma[..self.rank]
            .iter()
            .map(|s| (1.0 - s * s).abs())
            .fold(0.0, f64::max);
        trace.delta_per_step.push(delta);
        trace
            .epsilon_per_step
            .push(operator_norm(&(x - &self.polar))?);

        let drift = operator_norm(&(&truncated_polar(&f, self.rank) - &self.polar))?;
        trace.polar_drift = trace.polar_drift.max(drift);
        trace.range_leakage = trace
            .range_leakage
            .max(range_leakage(x, &self.projector)?);

        let op = f.sigma.first().copied().unwrap_or(0.0);
        trace.max_operator_norm = trace.max_operator_norm.max(op);
        if self.custom && op > 1.0 + SPECTRAL_BALL_SLACK {
            trace.left_spectral_ball = true;
        }
        if self.explicit {
            trace
                .explicit_delta
                .push(crate::linalg::orthogonality_residual(x, &self.projector)?);
        }
        Ok(())
    }
}

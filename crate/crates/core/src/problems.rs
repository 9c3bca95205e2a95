//! Synthetic stochastic matrix problems and the training loop.
//!
//! Three families, all seeded:
//!
//! * `QuadraticAlign`: `f(W) = (s/2)‖W − A‖_F²`, smoothness `s`, optimum 0.
//! * `TwoLayerLinear`: `f(W₁, W₂) = (s/2N)‖W₂ W₁ X − Y‖_F²` with targets
//!   produced by a planted pair, so `f* = 0`.
//! * `TanhMlp`: one hidden `tanh` layer and softmax cross-entropy on labels
//!   from a random teacher network.
//!
//! The first parameter is the monitored `m × n` matrix.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, Matrix};
use crate::optimizers::{
    init_state, optimizer_step, HyperParams, OptimizerKind, OptimizerState, ProblemConstants,
};
use crate::rng::{gaussian_matrix, stream, stream_indexed, Purpose};

/// Number of classes in the `TanhMlp` family.
pub const TANH_CLASSES: usize = 4;
/// Margin applied to Hessian power-iteration estimates of `L`.
pub const SMOOTHNESS_SAFETY: f64 = 1.5;
/// Full-batch gradient steps used to estimate `f*`.
pub const REFERENCE_STEPS: usize = 1500;
/// A run is declared diverged once `f` exceeds this multiple of `f(W_0)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemFamily {
    QuadraticAlign,
    TwoLayerLinear,
    TanhMlp,
}

impl ProblemFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::QuadraticAlign => "quad",
            Self::TwoLayerLinear => "two-layer",
            Self::TanhMlp => "tanh-mlp",
        }
    }
}

impl fmt::Display for ProblemFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad" => Ok(Self::QuadraticAlign),
            "two-layer" => Ok(Self::TwoLayerLinear),
            "tanh-mlp" => Ok(Self::TanhMlp),
            other => Err(Error::Parse(format!(
                "unknown problem `{other}` (expected quad, two-layer or tanh-mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// `G = ∇f + Z/√B` with `E‖Z‖_F² = σ²`.
    AdditiveGaussian,
    /// Average of per-example gradients over a sampled batch.
    Minibatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub family: ProblemFamily,
    /// Shape `(m, n)` of the monitored parameter.
    pub shape: (usize, usize),
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    /// Number of examples (data-driven families and minibatch noise).
    pub dataset_size: usize,
    pub seed: u64,
    /// Multiplier `s` on the objective.
    pub loss_scale: f64,
}

impl ProblemSpec {
    pub fn new(family: ProblemFamily, shape: (usize, usize)) -> Self {
        Self {
            family,
            shape,
            noise_sigma: 0.0,
            noise_mode: NoiseMode::AdditiveGaussian,
            dataset_size: 256,
            seed: 0,
            loss_scale: 1.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64, mode: NoiseMode) -> Self {
        self.noise_sigma = sigma;
        self.noise_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dataset_size(mut self, n: usize) -> Self {
        self.dataset_size = n;
        self
    }

    pub fn with_loss_scale(mut self, s: f64) -> Self {
        self.loss_scale = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.0 == 0 || self.shape.1 == 0 {
            return Err(Error::Parameter("problem shape must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if self.dataset_size == 0 {
            return Err(Error::Parameter("dataset size must be positive".into()));
        }
        if !(self.loss_scale > 0.0 && self.loss_scale.is_finite()) {
            return Err(Error::Parameter("loss scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Data {
    Quadratic {
        target: Matrix,
        /// Per-example targets averaging exactly to `target`.
        samples: Vec<Matrix>,
    },
    TwoLayer {
        /// `n × N`
        x: Matrix,
        /// `m × N`
        y: Matrix,
    },
    Tanh {
        x: Matrix,
        labels: Vec<usize>,
    },
}

/// A concrete problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    data: Data,
    init: Vec<Matrix>,
    planted: Option<Vec<Matrix>>,
    estimated_l: f64,
    estimated_d: f64,
}

/// Builds the problem described by `spec`; deterministic in `spec`.
pub fn make_problem(spec: &ProblemSpec) -> Result<Problem> {
    spec.validate()?;
    let (m, n) = spec.shape;
    let mut data_rng = stream(spec.seed, Purpose::ProblemData);
    let mut init_rng = stream(spec.seed, Purpose::Init);
    match spec.family {
        ProblemFamily::QuadraticAlign => {
            let target = gaussian_matrix(&mut data_rng, m, n, 1.0 / (m.max(n) as f64).sqrt());
            Problem::quadratic_align(spec.clone(), target, Matrix::zeros(m, n))
        }
        ProblemFamily::TwoLayerLinear => {
            let count = spec.dataset_size;
            let w1 = gaussian_matrix(&mut data_rng, m, n, 1.0 / (n as f64).sqrt());
            let w2 = gaussian_matrix(&mut data_rng, m, m, 1.0 / (m as f64).sqrt());
            let x = gaussian_matrix(&mut data_rng, n, count, 1.0);
            let y = w2.matmul(&w1.matmul(&x));
            let init = vec![
                gaussian_matrix(&mut init_rng, m, n, 1.0 / (n as f64).sqrt()),
                gaussian_matrix(&mut init_rng, m, m, 1.0 / (m as f64).sqrt()),
            ];
            Problem::finish(spec.clone(), Data::TwoLayer { x, y }, init, Some(vec![w1, w2]))
        }
        ProblemFamily::TanhMlp => {
            let count = spec.dataset_size;
            let teacher1 = gaussian_matrix(&mut data_rng, m, n, 2.0 / (n as f64).sqrt());
            let teacher2 = gaussian_matrix(&mut data_rng, TANH_CLASSES, m, 1.0 / (m as f64).sqrt());
            let x = gaussian_matrix(&mut data_rng, n, count, 1.0);
            let logits = teacher2.matmul(&teacher1.matmul(&x).map(f64::tanh));
            let labels = (0..count)
                .map(|j| {
                    (0..TANH_CLASSES)
                        .max_by(|&a, &b| logits[(a, j)].total_cmp(&logits[(b, j)]))
                        .unwrap_or(0)
                })
                .collect();
            let init = vec![
                gaussian_matrix(&mut init_rng, m, n, 1.0 / (n as f64).sqrt()),
                gaussian_matrix(&mut init_rng, TANH_CLASSES, m, 1.0 / (m as f64).sqrt()),
            ];
            Problem::finish(spec.clone(), Data::Tanh { x, labels }, init, None)
        }
    }
}

impl Problem {
    /// `QuadraticAlign` with an explicit target and starting point.
    pub fn quadratic_align(spec: ProblemSpec, target: Matrix, w0: Matrix) -> Result<Self> {
        spec.validate()?;
        if target.shape() != w0.shape() {
            return Err(Error::Dimension("target and start differ in shape".into()));
        }
        let (m, n) = target.shape();
        let mut rng = stream(spec.seed, Purpose::ProblemData);
        // burn the draws used for the target so sample noise is independent
        let _ = gaussian_matrix(&mut rng, m, n, 1.0);
        let samples = if spec.noise_mode == NoiseMode::Minibatch {
            let count = spec.dataset_size;
            let spread = spec.noise_sigma / ((m * n) as f64).sqrt();
            let mut deltas: Vec<Matrix> =
                (0..count).map(|_| gaussian_matrix(&mut rng, m, n, spread)).collect();
            let mut mean = Matrix::zeros(m, n);
            for d in &deltas {
                mean.axpy(1.0 / count as f64, d);
            }
            deltas
                .iter_mut()
                .map(|d| {
                    d.axpy(-1.0, &mean);
                    &target + d
                })
                .collect()
        } else {
            Vec::new()
        };
        let spec = ProblemSpec {
            shape: (m, n),
            family: ProblemFamily::QuadraticAlign,
            ..spec
        };
        let scale = spec.loss_scale;
        let mut p = Problem {
            spec,
            data: Data::Quadratic { target, samples },
            init: vec![w0],
            planted: None,
            estimated_l: scale,
            estimated_d: 0.0,
        };
        p.estimated_d = p.value(&p.init)?;
        Ok(p)
    }

    fn finish(spec: ProblemSpec, data: Data, init: Vec<Matrix>, planted: Option<Vec<Matrix>>) -> Result<Self> {
        let mut p = Problem {
            spec,
            data,
            init,
            planted,
            estimated_l: 1.0,
            estimated_d: 1.0,
        };
        p.estimated_l = SMOOTHNESS_SAFETY * p.hessian_power_iteration(&p.init, 50)?;
        let f0 = p.value(&p.init)?;
        let best = p.reference_minimum(REFERENCE_STEPS)?;
        p.estimated_d = (f0 - best).max(f64::MIN_POSITIVE);
        Ok(p)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    /// Starting parameters `W_0`.
    pub fn initial_params(&self) -> &[Matrix] {
        &self.init
    }

    /// The planted minimizer, for families that have one.
    pub fn planted_params(&self) -> Option<&[Matrix]> {
        self.planted.as_deref()
    }

    /// `QuadraticAlign` target.
    pub fn target(&self) -> Option<&Matrix> {
        match &self.data {
            Data::Quadratic { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Smoothness in the Frobenius geometry, `‖∇f(X) − ∇f(Y)‖_F ≤ L‖X − Y‖_F`.
    pub fn estimated_l(&self) -> f64 {
        self.estimated_l
    }

    /// Smoothness from the operator norm to the nuclear norm,
    /// `‖∇f(X) − ∇f(Y)‖_* ≤ L‖X − Y‖_op`, which is what the tuning formulas
    /// take. Exact for `QuadraticAlign`; otherwise the bound
    /// `min(m, n) · estimated_l` with the largest parameter rank.
    pub fn op_nuclear_l(&self) -> f64 {
        let rank = self.init.iter().map(|p| p.rows().min(p.cols())).max().unwrap_or(1);
        self.estimated_l * rank as f64
    }

    pub fn estimated_d(&self) -> f64 {
        self.estimated_d
    }

    /// `min(m, n)` of the monitored parameter.
    pub fn rank(&self) -> usize {
        self.spec.shape.0.min(self.spec.shape.1)
    }

    /// Constants for the tuning formulas at batch size `b` and horizon `t`.
    pub fn constants(&self, batch_size: usize, horizon: usize) -> ProblemConstants {
        ProblemConstants {
            lipschitz_l: self.op_nuclear_l(),
            init_gap_d: self.estimated_d,
            sigma: self.spec.noise_sigma,
            batch_size,
            horizon_t: horizon,
            rank_r: self.rank(),
        }
    }

    fn dataset_len(&self) -> usize {
        match &self.data {
            Data::Quadratic { samples, .. } => samples.len(),
            Data::TwoLayer { x, .. } | Data::Tanh { x, .. } => x.cols(),
        }
    }

    fn check_params(&self, params: &[Matrix]) -> Result<()> {
        if params.len() != self.init.len()
            || params.iter().zip(&self.init).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Dimension(format!(
                "expected parameters of shapes {:?}",
                self.init.iter().map(Matrix::shape).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    pub fn value(&self, params: &[Matrix]) -> Result<f64> {
        Ok(self.value_and_grad(params)?.0)
    }

    /// Exact objective and gradient.
    pub fn value_and_grad(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
        self.check_params(params)?;
        Ok(self.eval_on(params, None))
    }

    /// Sampled gradient with mean `∇f` and Frobenius variance `σ²/B`
    /// (additive mode) or the minibatch average (minibatch mode).
    pub fn stochastic_grad(&self, params: &[Matrix], batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Matrix>> {
        self.check_params(params)?;
        if batch == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        let sigma = self.spec.noise_sigma;
        match self.spec.noise_mode {
            NoiseMode::AdditiveGaussian => {
                let (_, mut grads) = self.eval_on(params, None);
                if sigma > 0.0 {
                    let total: usize = grads.iter().map(|g| g.rows() * g.cols()).sum();
                    let scale = sigma / ((total * batch) as f64).sqrt();
                    for g in &mut grads {
                        for v in g.as_mut_slice() {
                            let z: f64 = rng.sample(StandardNormal);
                            *v += scale * z;
                        }
                    }
                }
                Ok(grads)
            }
            NoiseMode::Minibatch => {
                let len = self.dataset_len();
                if batch >= len || (sigma == 0.0 && matches!(self.data, Data::Quadratic { .. })) {
                    return Ok(self.eval_on(params, None).1);
                }
                let mut idx = sample(rng, len, batch).into_vec();
                idx.sort_unstable();
                Ok(self.eval_on(params, Some(&idx)).1)
            }
        }
    }

    /// Objective and gradient on the whole dataset or on selected examples.
    fn eval_on(&self, params: &[Matrix], subset: Option<&[usize]>) -> (f64, Vec<Matrix>) {
        let s = self.spec.loss_scale;
        match &self.data {
            Data::Quadratic { target, samples } => {
                let w = &params[0];
                let centre = match subset {
                    None => target.clone(),
                    Some(idx) => {
                        let mut c = Matrix::zeros(w.rows(), w.cols());
                        for &i in idx {
                            c.axpy(1.0 / idx.len() as f64, &samples[i]);
                        }
                        c
                    }
                };
                let diff = w - &centre;
                let value = 0.5 * s * (w - target).frobenius_norm_sq();
                (value, vec![diff.scale(s)])
            }
            Data::TwoLayer { x, y } => {
                let (x, y) = select_columns(x, y, subset);
                let count = x.cols() as f64;
                let (w1, w2) = (&params[0], &params[1]);
                let hidden = w1.matmul(&x);
                let resid = &w2.matmul(&hidden) - &y;
                let value = 0.5 * s * resid.frobenius_norm_sq() / count;
                let r = resid.scale(s / count);
                let g2 = r.matmul(&hidden.transpose());
                let g1 = w2.transpose().matmul(&r).matmul(&x.transpose());
                (value, vec![g1, g2])
            }
            Data::Tanh { x, labels } => {
                let (x, labels) = match subset {
                    None => (x.clone(), labels.clone()),
                    Some(idx) => (
                        Matrix::from_fn(x.rows(), idx.len(), |i, j| x[(i, idx[j])]),
                        idx.iter().map(|&i| labels[i]).collect(),
                    ),
                };
                let count = x.cols();
                let (w1, w2) = (&params[0], &params[1]);
                let h = w1.matmul(&x).map(f64::tanh);
                let z = w2.matmul(&h);
                let mut dz = Matrix::zeros(z.rows(), count);
                let mut loss = 0.0;
                for j in 0..count {
                    let max = (0..z.rows()).map(|c| z[(c, j)]).fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = (0..z.rows()).map(|c| (z[(c, j)] - max).exp()).sum();
                    loss += -(z[(labels[j], j)] - max) + denom.ln();
                    for c in 0..z.rows() {
                        let p = (z[(c, j)] - max).exp() / denom;
                        let onehot = if c == labels[j] { 1.0 } else { 0.0 };
                        dz[(c, j)] = s * (p - onehot) / count as f64;
                    }
                }
                let g2 = dz.matmul(&h.transpose());
                let dh = w2.transpose().matmul(&dz);
                let da = Matrix::from_fn(dh.rows(), dh.cols(), |i, j| {
                    dh[(i, j)] * (1.0 - h[(i, j)] * h[(i, j)])
                });
                let g1 = da.matmul(&x.transpose());
                (s * loss / count as f64, vec![g1, g2])
            }
        }
    }

    /// Largest Hessian eigenvalue magnitude at `params`, by power iteration
    /// on central-difference Hessian-vector products.
    fn hessian_power_iteration(&self, params: &[Matrix], iters: usize) -> Result<f64> {
        let mut rng = stream_indexed(self.spec.seed, Purpose::Init, 1);
        let mut v: Vec<Matrix> = params
            .iter()
            .map(|p| gaussian_matrix(&mut rng, p.rows(), p.cols(), 1.0))
            .collect();
        normalize(&mut v);
        let h = 1e-4;
        let mut lambda = 0.0;
        for _ in 0..iters {
            let plus: Vec<Matrix> = params.iter().zip(&v).map(|(p, d)| { let mut q = p.clone(); q.axpy(h, d); q }).collect();
            let minus: Vec<Matrix> = params.iter().zip(&v).map(|(p, d)| { let mut q = p.clone(); q.axpy(-h, d); q }).collect();
            let (_, gp) = self.value_and_grad(&plus)?;
            let (_, gm) = self.value_and_grad(&minus)?;
            let mut hv: Vec<Matrix> = gp.iter().zip(&gm).map(|(a, b)| (a - b).scale(0.5 / h)).collect();
            lambda = normalize(&mut hv);
            if lambda == 0.0 {
                break;
            }
            v = hv;
        }
        Ok(lambda.max(f64::MIN_POSITIVE))
    }

    /// Lowest objective seen along full-batch gradient descent with step
    /// `1/L`, starting from `W_0`.
    fn reference_minimum(&self, steps: usize) -> Result<f64> {
        let mut params = self.init.clone();
        let step = 1.0 / self.estimated_l;
        let mut best = f64::INFINITY;
        for _ in 0..steps {
            let (f, grads) = self.value_and_grad(&params)?;
            if !f.is_finite() {
                break;
            }
            best = best.min(f);
            for (p, g) in params.iter_mut().zip(&grads) {
                p.axpy(-step, g);
            }
        }
        best = best.min(self.value(&params)?);
        Ok(best.max(0.0))
    }
}

fn select_columns(x: &Matrix, y: &Matrix, subset: Option<&[usize]>) -> (Matrix, Matrix) {
    match subset {
        None => (x.clone(), y.clone()),
        Some(idx) => (
            Matrix::from_fn(x.rows(), idx.len(), |i, j| x[(i, idx[j])]),
            Matrix::from_fn(y.rows(), idx.len(), |i, j| y[(i, idx[j])]),
        ),
    }
}

/// Scales the concatenated vector to unit norm; returns the old norm.
fn normalize(v: &mut [Matrix]) -> f64 {
    let norm = v.iter().map(|m| m.frobenius_norm_sq()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for m in v.iter_mut() {
            *m = m.scale(1.0 / norm);
        }
    }
    norm
}

/// Outcome of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The objective became non-finite or exceeded the divergence threshold.
    Diverged,
}

/// One optimizer iteration `t` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// `f(W_t)` after the update.
    pub loss: f64,
    /// `‖∇f(W_{t−1})‖_*` of the monitored parameter, exact gradient.
    pub nuclear_grad_norm: f64,
    /// `‖∇f(W_{t−1})‖_F` of the monitored parameter.
    pub frobenius_grad_norm: f64,
    /// Running mean of `nuclear_grad_norm` over steps `1..=t`.
    pub avg_nuclear_grad_norm: f64,
    /// `δ_0`, `δ_q`, `ε_q` of the monitored parameter when traced.
    pub delta0: Option<f64>,
    pub delta_q: Option<f64>,
    pub epsilon_q: Option<f64>,
    /// FLOPs spent on step directions this iteration.
    pub flops: u64,
    /// Wall time spent on step directions this iteration.
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub kind: OptimizerKind,
    pub records: Vec<StepRecord>,
    pub status: RunStatus,
    pub final_params: Vec<Matrix>,
}

impl TrainLog {
    /// `(1/T) Σ_t ‖∇f(W_{t−1})‖_*`.
    pub fn average_nuclear_grad_norm(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.nuclear_grad_norm).sum::<f64>() / self.records.len() as f64
    }

    /// Everything except wall-clock fields, for determinism comparisons.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.status == other.status
            && self.final_params == other.final_params
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                StepRecord { wall_ns: 0, ..a.clone() } == StepRecord { wall_ns: 0, ..b.clone() }
            })
    }
}

/// Runs `t_max` steps of `kind` from the problem's `W_0`. Each parameter
/// matrix gets its own optimizer state; gradient noise is drawn from the
/// `(seed, GradientNoise)` stream.
pub fn run_training(
    problem: &Problem,
    kind: OptimizerKind,
    hp: &HyperParams,
    t_max: usize,
    seed: u64,
) -> Result<TrainLog> {
    hp.validate()?;
    let mut rng = stream(seed, Purpose::GradientNoise);
    let mut states: Vec<OptimizerState> =
        problem.initial_params().iter().cloned().map(init_state).collect();
    let f0 = problem.value(problem.initial_params())?;
    let limit = DIVERGENCE_FACTOR * f0.abs().max(1.0);

    let mut records = Vec::with_capacity(t_max);
    let mut status = RunStatus::Completed;
    let mut nuclear_sum = 0.0;
    let mut params: Vec<Matrix> = states.iter().map(|s| s.w.clone()).collect();
    for t in 1..=t_max {
        let (_, grads) = problem.value_and_grad(&params)?;
        let monitored = &grads[0];
        let nuclear = nuclear_norm(monitored)?;
        let frobenius = monitored.frobenius_norm();
        let sampled = problem.stochastic_grad(&params, hp.batch_size, &mut rng)?;

        let started = Instant::now();
        let mut flops = 0;
        let mut trace = None;
        for (i, (state, g)) in states.iter_mut().zip(&sampled).enumerate() {
            let diag = optimizer_step(state, g, hp, kind)?;
            flops += diag.direction_flops;
            if i == 0 {
                trace = diag.ortho_trace;
            }
        }
        let wall_ns = started.elapsed().as_nanos() as u64;
        params = states.iter().map(|s| s.w.clone()).collect();

        let loss = problem.value(&params)?;
        nuclear_sum += nuclear;
        let traced = trace.filter(|tr| !tr.delta_per_step.is_empty());
        records.push(StepRecord {
            t,
            loss,
            nuclear_grad_norm: nuclear,
            frobenius_grad_norm: frobenius,
            avg_nuclear_grad_norm: nuclear_sum / t as f64,
            delta0: traced.as_ref().and_then(|tr| tr.delta0()),
            delta_q: traced.as_ref().and_then(|tr| tr.delta_q()),
            epsilon_q: traced.as_ref().map(|tr| tr.epsilon_q),
            flops,
            wall_ns,
        });
        if !loss.is_finite() || loss > limit {
            status = RunStatus::Diverged;
            break;
        }
    }
    Ok(TrainLog {
        kind,
        records,
        status,
        final_params: params,
    })
}

//! The invariant suite behind `verify`: seeded matrix corpora, the checks
//! for every module, and a plain-text pass/fail table.
//!
//! Reports contain no timings, so equal seeds give byte-identical output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{
    frobenius_inner, matrix_norms, operator_norm, polar_factor, svd, Matrix, RankTolerance,
};
use crate::nspoly::{
    check_tau_monotone, leading_phi_coefficient, ns_coefficients, phi_closed_form, s_polynomial,
    scan_phi_contraction, tau_local_maxima, CustomPolynomial, Polynomial, MAX_KAPPA,
};
use crate::optimizers::{init_state, optimizer_step, HyperParams, OptimizerKind};
use crate::orthogonalizer::{orthogonalize, OrthogonalizerConfig};
use crate::problems::{make_problem, NoiseMode, ProblemFamily, ProblemSpec};
use crate::rng::{gaussian_matrix, stream, stream_indexed, Purpose};
use crate::theory::{epsilon_chi_bounds, ns_flop_count, orthogonalization_flops, FlopModel};

/// Largest corpus shape.
pub const CORPUS_MAX_SHAPE: (usize, usize) = (24, 32);

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub kappas: Vec<usize>,
    pub q_max: usize,
    /// Matrices in the residual and agreement corpora.
    pub corpus_size: usize,
    /// Matrices in the norm-oracle corpus.
    pub norm_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            kappas: vec![1, 2],
            q_max: 5,
            corpus_size: 200,
            norm_trials: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("status  module          check                          detail\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<7} {:<15} {:<30} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.module,
                c.name,
                c.detail
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

/// `rows × k` matrix with orthonormal columns, `k ≤ rows`.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> Result<Matrix> {
    polar_factor(&gaussian_matrix(rng, rows, k, 1.0), RankTolerance::default())
}

/// `U diag(sigma) Vᵀ` with random orthonormal `U`, `V`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sigma: &[f64]) -> Result<Matrix> {
    let k = sigma.len();
    let u = random_orthonormal(rng, rows, k)?;
    let v = random_orthonormal(rng, cols, k)?;
    let us = Matrix::from_fn(rows, k, |i, j| u[(i, j)] * sigma[j]);
    Ok(us.matmul(&v.transpose()))
}

/// Corpus matrix: shape up to [`CORPUS_MAX_SHAPE`], random rank, singular
/// values spread over three decades and an overall scale in `[0.1, 10]`.
pub fn corpus_matrix(rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let m = rng.random_range(1..=CORPUS_MAX_SHAPE.0);
    let n = rng.random_range(1..=CORPUS_MAX_SHAPE.1);
    let k = rng.random_range(1..=m.min(n));
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let sigma: Vec<f64> = (0..k).map(|_| scale * 10f64.powf(-rng.random_range(0.0..3.0))).collect();
    with_spectrum(rng, m, n, &sigma)
}

/// Corpus matrix whose prescaled residual `δ_0` is at most `delta0_max`.
pub fn controlled_matrix(rng: &mut ChaCha8Rng, delta0_max: f64) -> Result<Matrix> {
    loop {
        let m = rng.random_range(1..=CORPUS_MAX_SHAPE.0);
        let n = rng.random_range(1..=CORPUS_MAX_SHAPE.1);
        let k = rng.random_range(1..=m.min(n).min(4));
        let scale = 10f64.powf(rng.random_range(-0.5..1.0));
        let sigma: Vec<f64> = (0..k).map(|_| scale * rng.random_range(0.4..1.0)).collect();
        let alpha = sigma.iter().map(|s| s * s).sum::<f64>().sqrt().max(1.0);
        let delta0 = sigma.iter().map(|s| (1.0 - (s / alpha).powi(2)).abs()).fold(0.0, f64::max);
        if delta0 <= delta0_max {
            return with_spectrum(rng, m, n, &sigma);
        }
    }
}

/// Worst-case measurements over traced orthogonalizations of a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualSummary {
    pub traces: usize,
    /// max over steps of `δ_{j+1} − δ_j^{κ+1}`
    pub step_contraction_excess: f64,
    /// max of `δ_q − δ_0^{(κ+1)^q}` over every prefix length `q`
    pub total_contraction_excess: f64,
    /// max `|δ_{j+1} − φ(δ_j)|`
    pub recursion_error: f64,
    /// max `|ε_j − (1 − √(1 − δ_j))|`
    pub link_error: f64,
    /// max `ε_q − ε-bound(δ_0, κ, q)`
    pub epsilon_bound_excess: f64,
    /// Traces whose instrumented FLOPs differ from the cost model.
    pub flop_mismatches: usize,
}

/// Runs `count` corpus matrices through `q_max` traced steps for each κ.
pub fn residual_corpus(seed: u64, count: usize, kappas: &[usize], q_max: usize) -> Result<ResidualSummary> {
    let mut rng = stream(seed, Purpose::Corpus);
    let mut s = ResidualSummary {
        step_contraction_excess: f64::NEG_INFINITY,
        total_contraction_excess: f64::NEG_INFINITY,
        epsilon_bound_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for _ in 0..count {
        let m = corpus_matrix(&mut rng)?;
        for &kappa in kappas {
            let poly = Polynomial::newton_schulz(kappa)?;
            let cfg = OrthogonalizerConfig::new(q_max, poly.clone())?.traced();
            let (_, trace) = orthogonalize(&m, &cfg)?;
            s.traces += 1;
            let d = &trace.delta_per_step;
            let e = &trace.epsilon_per_step;
            let power = (kappa + 1) as i32;
            for j in 0..d.len() {
                let link = 1.0 - (1.0 - d[j]).sqrt();
                s.link_error = s.link_error.max((e[j] - link).abs());
                if j + 1 < d.len() {
                    s.step_contraction_excess = s.step_contraction_excess.max(d[j + 1] - d[j].powi(power));
                    s.recursion_error = s.recursion_error.max((d[j + 1] - poly.phi(d[j])?).abs());
                }
                if j > 0 && d[0] < 1.0 {
                    let bound = epsilon_chi_bounds(d[0], kappa, j)?;
                    s.total_contraction_excess = s.total_contraction_excess.max(d[j] - bound.delta_q);
                    s.epsilon_bound_excess = s.epsilon_bound_excess.max(e[j] - bound.epsilon_q);
                }
            }
            if m.rows() == m.cols() && trace.flops != ns_flop_count(m.rows(), m.cols(), q_max, kappa) {
                s.flop_mismatches += 1;
            }
        }
    }
    Ok(s)
}

/// `‖O_NS − O_SVD‖_op` over a corpus of matrices with `δ_0 ≤ delta0_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementSummary {
    pub trials: usize,
    pub worst_error: f64,
    /// Largest error minus its exact prediction `1 − √(1 − φ^q(δ_0))`.
    pub worst_excess: f64,
    /// Trials with error above `1e-6`.
    pub above_1e_6: usize,
}

pub fn ns_svd_agreement(seed: u64, count: usize, delta0_max: f64, kappa: usize, q: usize) -> Result<AgreementSummary> {
    let mut rng = stream_indexed(seed, Purpose::Corpus, 1);
    let cfg = OrthogonalizerConfig::newton_schulz(q, kappa)?.traced();
    let mut s = AgreementSummary {
        trials: count,
        worst_error: 0.0,
        worst_excess: f64::NEG_INFINITY,
        above_1e_6: 0,
    };
    for _ in 0..count {
        let m = controlled_matrix(&mut rng, delta0_max)?;
        let (o, trace) = orthogonalize(&m, &cfg)?;
        let err = operator_norm(&(&o - &polar_factor(&m, cfg.rank_tol)?))?;
        let mut delta = trace.delta0().unwrap_or(0.0);
        for _ in 0..q {
            delta = cfg.poly.phi(delta.clamp(0.0, 1.0))?.max(0.0);
        }
        let predicted = delta / (1.0 + (1.0 - delta).sqrt());
        s.worst_error = s.worst_error.max(err);
        s.worst_excess = s.worst_excess.max(err - predicted);
        s.above_1e_6 += usize::from(err > 1e-6);
    }
    Ok(s)
}

/// Worst normalized violations of the norm facts; each is `≤ 0` when the
/// fact holds up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSummary {
    pub matrices: usize,
    /// `|⟨A, B⟩| − ‖A‖_* ‖B‖_op`, relative
    pub holder: f64,
    /// `‖X‖_op ≤ ‖X‖_F ≤ ‖X‖_*`, relative
    pub chain: f64,
    /// `‖X‖_* − √r ‖X‖_F`, relative
    pub sqrt_rank: f64,
    /// `|⟨X, polar(X)⟩ − ‖X‖_*|`, relative
    pub duality: f64,
    /// `‖polar(cX) − polar(X)‖_op`
    pub scale_invariance: f64,
}

pub fn norm_oracles(seed: u64, count: usize) -> Result<NormSummary> {
    let mut rng = stream_indexed(seed, Purpose::Corpus, 2);
    let tol = RankTolerance::default();
    let mut s = NormSummary {
        matrices: count,
        holder: f64::NEG_INFINITY,
        chain: f64::NEG_INFINITY,
        sqrt_rank: f64::NEG_INFINITY,
        duality: 0.0,
        scale_invariance: 0.0,
    };
    for _ in 0..count {
        let m = rng.random_range(1..=12);
        let n = rng.random_range(1..=12);
        let a = gaussian_matrix(&mut rng, m, n, 1.0);
        let b = gaussian_matrix(&mut rng, m, n, 1.0);
        let na = matrix_norms(&a)?;
        let nb = matrix_norms(&b)?;
        let bound = na.nuclear * nb.operator;
        s.holder = s.holder.max((frobenius_inner(&a, &b)?.abs() - bound) / bound);
        s.chain = s
            .chain
            .max((na.operator - na.frobenius) / na.frobenius)
            .max((na.frobenius - na.nuclear) / na.nuclear);
        let r = m.min(n) as f64;
        s.sqrt_rank = s.sqrt_rank.max((na.nuclear - r.sqrt() * na.frobenius) / na.nuclear);
        let p = polar_factor(&a, tol)?;
        s.duality = s.duality.max((frobenius_inner(&a, &p)? - na.nuclear).abs() / na.nuclear);
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let pc = polar_factor(&a.scale(c), tol)?;
        s.scale_invariance = s.scale_invariance.max(operator_norm(&(&pc - &p))?);
    }
    Ok(s)
}

/// Relative Frobenius error between the analytic gradient and entrywise
/// central differences with step `1e-5`, worst over `points` random points.
pub fn gradient_check(family: ProblemFamily, seed: u64, points: usize) -> Result<f64> {
    let spec = ProblemSpec::new(family, (3, 4)).with_seed(seed).with_dataset_size(24);
    let problem = make_problem(&spec)?;
    let mut rng = stream_indexed(seed, Purpose::Corpus, 3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let w: Vec<Matrix> = problem
            .initial_params()
            .iter()
            .map(|p| p + &gaussian_matrix(&mut rng, p.rows(), p.cols(), 0.5))
            .collect();
        let (_, grads) = problem.value_and_grad(&w)?;
        let (mut diff, mut norm) = (0.0, 0.0);
        for (k, g) in grads.iter().enumerate() {
            for idx in 0..g.as_slice().len() {
                let mut plus = w.clone();
                plus[k].as_mut_slice()[idx] += h;
                let mut minus = w.clone();
                minus[k].as_mut_slice()[idx] -= h;
                let fd = (problem.value(&plus)? - problem.value(&minus)?) / (2.0 * h);
                diff += (fd - g.as_slice()[idx]).powi(2);
                norm += g.as_slice()[idx].powi(2);
            }
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-8));
    }
    Ok(worst)
}

/// Empirical `E‖G − ∇f‖_F²` of additive noise divided by `σ²/B`.
pub fn variance_ratio(seed: u64, sigma: f64, batch: usize, draws: usize) -> Result<f64> {
    let spec = ProblemSpec::new(ProblemFamily::QuadraticAlign, (3, 4))
        .with_seed(seed)
        .with_noise(sigma, NoiseMode::AdditiveGaussian);
    let problem = make_problem(&spec)?;
    let w = problem.initial_params().to_vec();
    let exact = problem.value_and_grad(&w)?.1;
    let mut rng = stream(seed, Purpose::GradientNoise);
    let mut total = 0.0;
    for _ in 0..draws {
        let g = problem.stochastic_grad(&w, batch, &mut rng)?;
        total += (&g[0] - &exact[0]).frobenius_norm_sq();
    }
    Ok(total / draws as f64 / (sigma * sigma / batch as f64))
}

/// `C(2s, s) / 4^s` from exact integers.
fn central_binomial_ratio(s: usize) -> f64 {
    let mut c: u128 = 1;
    for i in 0..s as u128 {
        c = c * (2 * s as u128 - i) / (i + 1);
    }
    c as f64 / 4f64.powi(s as i32)
}

fn check(module: &'static str, name: &'static str, passed: bool, detail: String) -> Check {
    Check { module, name, passed, detail }
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    // linalg
    let norms = norm_oracles(cfg.seed, cfg.norm_trials)?;
    checks.push(check(
        "linalg",
        "holder and norm chain",
        norms.holder <= 1e-12 && norms.chain <= 1e-12 && norms.sqrt_rank <= 1e-12,
        format!("{} matrices, worst {:.3e}", norms.matrices, norms.holder.max(norms.chain).max(norms.sqrt_rank)),
    ));
    checks.push(check(
        "linalg",
        "polar duality and scaling",
        norms.duality <= 1e-10 && norms.scale_invariance <= 1e-10,
        format!("duality {:.3e}, scaling {:.3e}", norms.duality, norms.scale_invariance),
    ));
    let mut rng = stream_indexed(cfg.seed, Purpose::Corpus, 4);
    let mut svd_err: f64 = 0.0;
    for _ in 0..50 {
        let x = corpus_matrix(&mut rng)?;
        let f = svd(&x)?;
        let k = f.sigma.len();
        let ortho = (&f.u.transpose().matmul(&f.u) - &Matrix::identity(k)).max_abs()
            + (&f.v.transpose().matmul(&f.v) - &Matrix::identity(k)).max_abs();
        let rec = (&f.reconstruct() - &x).frobenius_norm() / x.frobenius_norm();
        let sorted = f.sigma.windows(2).all(|w| w[0] >= w[1]);
        svd_err = svd_err.max(ortho).max(rec).max(if sorted { 0.0 } else { 1.0 });
    }
    checks.push(check("linalg", "svd factors", svd_err <= 1e-10, format!("worst {svd_err:.3e}")));

    // nspoly
    let mut coeff_err: f64 = 0.0;
    for kappa in 1..=MAX_KAPPA {
        let c = ns_coefficients(kappa)?;
        for (s, &v) in c.coeffs_u().iter().enumerate() {
            coeff_err = coeff_err.max((v - central_binomial_ratio(s)).abs());
        }
    }
    checks.push(check("nspoly", "coefficient recurrence", coeff_err <= 1e-12, format!("kappa <= {MAX_KAPPA}, worst {coeff_err:.3e}")));
    let c1 = leading_phi_coefficient(1)?;
    checks.push(check("nspoly", "leading coefficient C_1", (c1 - 0.75).abs() <= 1e-15, format!("{c1}")));
    let mut closed: f64 = 0.0;
    for kappa in [1, 2] {
        let poly = Polynomial::newton_schulz(kappa)?;
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            let cf = phi_closed_form(kappa, u).unwrap_or(f64::NAN);
            closed = closed.max((poly.phi(u)? - cf).abs());
        }
    }
    checks.push(check("nspoly", "closed forms kappa 1,2", closed <= 1e-12, format!("worst {closed:.3e}")));
    let mut cancel: f64 = 0.0;
    for kappa in 1..=8 {
        let p = ns_coefficients(kappa)?;
        let s = s_polynomial(&p);
        for &v in &s[..kappa] {
            cancel = cancel.max(v.abs());
        }
        cancel = cancel.max((s[kappa] - (2 * kappa + 1) as f64 * p.coeffs_u()[kappa]).abs());
    }
    checks.push(check("nspoly", "S(u) cancellation", cancel <= 1e-12, format!("kappa <= 8, worst {cancel:.3e}")));
    let mut monotone = true;
    let mut min_deriv = f64::INFINITY;
    for kappa in 1..=8 {
        let r = check_tau_monotone(&Polynomial::newton_schulz(kappa)?, 1000)?;
        monotone &= r.is_monotone_on_grid && (r.tau_at_one - 1.0).abs() <= 1e-12;
        min_deriv = min_deriv.min(r.min_tau_derivative);
    }
    checks.push(check("nspoly", "tau monotone", monotone, format!("kappa <= 8, min tau' {min_deriv:.3e}")));
    let mut worst_contraction = f64::NEG_INFINITY;
    for kappa in 1..=8 {
        worst_contraction = worst_contraction.max(scan_phi_contraction(kappa, 1000)?.max_excess);
    }
    checks.push(check(
        "nspoly",
        "phi(u) <= u^(kappa+1)",
        worst_contraction <= 1e-12,
        format!("kappa <= 8, max excess {worst_contraction:.3e}"),
    ));
    let adhoc = Polynomial::from(CustomPolynomial::ad_hoc_quadratic());
    let (d0, d1) = (adhoc.tau_derivative(0.0), adhoc.tau_derivative(1.0));
    let peaks = tau_local_maxima(&adhoc, 1000);
    let peak_ok = peaks.len() == 1 && (peaks[0] - 0.308).abs() <= 0.02;
    checks.push(check(
        "nspoly",
        "ad-hoc quadratic",
        (d0 - 11.8641).abs() <= 2e-3 && (d1 + 0.5087).abs() <= 2e-3 && peak_ok,
        format!("tau'(0)={d0:.5} tau'(1)={d1:.5} peaks {peaks:.4?}"),
    ));

    // orthogonalizer
    let res = residual_corpus(cfg.seed, cfg.corpus_size, &cfg.kappas, cfg.q_max)?;
    checks.push(check(
        "orthogonalizer",
        "residual contraction",
        res.step_contraction_excess <= 1e-9 && res.total_contraction_excess <= 1e-9,
        format!(
            "{} traces, step {:.3e}, total {:.3e}",
            res.traces, res.step_contraction_excess, res.total_contraction_excess
        ),
    ));
    checks.push(check(
        "orthogonalizer",
        "residual recursion",
        res.recursion_error <= 5e-9,
        format!("worst {:.3e}", res.recursion_error),
    ));
    checks.push(check(
        "orthogonalizer",
        "error-residual link",
        res.link_error <= 1e-8,
        format!("worst {:.3e}", res.link_error),
    ));
    let diag = Matrix::from_diag(&[0.6, 0.8]);
    let (_, tr) = orthogonalize(&diag, &OrthogonalizerConfig::newton_schulz(1, 1)?.traced())?;
    let (d1w, e1w) = (tr.delta_per_step[1], tr.epsilon_q);
    checks.push(check(
        "orthogonalizer",
        "worked instance",
        (d1w - 0.372736).abs() <= 1e-9 && (e1w - 0.208).abs() <= 1e-9,
        format!("delta_1={d1w:.9} eps_1={e1w:.9}"),
    ));
    let agree = ns_svd_agreement(cfg.seed, cfg.corpus_size, 0.9, 2, 4)?;
    checks.push(check(
        "orthogonalizer",
        "ns matches svd polar",
        agree.worst_excess <= 1e-12,
        format!(
            "worst {:.3e}, {} of {} above 1e-6, excess over phi^q {:.3e}",
            agree.worst_error, agree.above_1e_6, agree.trials, agree.worst_excess
        ),
    ));

    // theory
    let b = epsilon_chi_bounds(0.9, 2, 2)?;
    checks.push(check("theory", "chi bound example", (b.chi_q - 1.277671).abs() <= 1e-5, format!("{:.6}", b.chi_q)));
    checks.push(check(
        "theory",
        "measured eps below bound",
        res.epsilon_bound_excess <= 1e-9,
        format!("max excess {:.3e}", res.epsilon_bound_excess),
    ));
    let e = orthogonalization_flops(&FlopModel { m: 64, n: 64, q: 3, kappa: 2, efficiency_ratio: 1.0 })?;
    checks.push(check(
        "theory",
        "flop model",
        res.flop_mismatches == 0 && e.algebraic_ratio == 2.0 / 3.0,
        format!("{} mismatched traces, ratio {}", res.flop_mismatches, e.algebraic_ratio),
    ));

    // optimizers
    let mut rng = stream_indexed(cfg.seed, Purpose::Corpus, 5);
    let mut unit_err: f64 = 0.0;
    for _ in 0..20 {
        let g = gaussian_matrix(&mut rng, 5, 7, 1.0);
        let hp = HyperParams::new(0.1, 0.9, OrthogonalizerConfig::newton_schulz(3, 2)?, 1)?;
        let mut st = init_state(Matrix::zeros(5, 7));
        optimizer_step(&mut st, &g, &hp, OptimizerKind::MuonSvd)?;
        unit_err = unit_err.max((operator_norm(&st.w)? - 0.1).abs());
    }
    checks.push(check("optimizers", "svd step has norm eta", unit_err <= 1e-12, format!("worst {unit_err:.3e}")));

    // problems
    let mut grad_err: f64 = 0.0;
    for family in [ProblemFamily::QuadraticAlign, ProblemFamily::TwoLayerLinear, ProblemFamily::TanhMlp] {
        grad_err = grad_err.max(gradient_check(family, cfg.seed, 5)?);
    }
    checks.push(check("problems", "finite differences", grad_err <= 1e-5, format!("worst {grad_err:.3e}")));
    let ratio = variance_ratio(cfg.seed, 1.0, 4, 10_000)?;
    checks.push(check("problems", "noise variance", (ratio - 1.0).abs() <= 0.05, format!("ratio {ratio:.4}")));

    Ok(VerifyReport { checks })
}

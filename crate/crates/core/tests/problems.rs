use muon_ns::linalg::{singular_values, Matrix};
use muon_ns::optimizers::{init_state, optimizer_step, tune_hyperparameters, HyperParams, OptimizerKind};
use muon_ns::orthogonalizer::OrthogonalizerConfig;
use muon_ns::problems::{make_problem, run_training, NoiseMode, Problem, ProblemFamily, ProblemSpec, RunStatus};
use muon_ns::rng::{gaussian_matrix, stream, stream_indexed, Purpose};

const FAMILIES: [ProblemFamily; 3] = [
    ProblemFamily::QuadraticAlign,
    ProblemFamily::TwoLayerLinear,
    ProblemFamily::TanhMlp,
];

fn small(family: ProblemFamily, seed: u64) -> Problem {
    make_problem(&ProblemSpec::new(family, (3, 4)).with_dataset_size(24).with_seed(seed)).unwrap()
}

fn ns() -> OrthogonalizerConfig {
    OrthogonalizerConfig::newton_schulz(3, 2).unwrap()
}

/// Central differences over every entry of every parameter.
fn numeric_grad(p: &Problem, params: &[Matrix], h: f64) -> Vec<Matrix> {
    params
        .iter()
        .enumerate()
        .map(|(k, w)| {
            Matrix::from_fn(w.rows(), w.cols(), |i, j| {
                let mut plus = params.to_vec();
                let mut minus = params.to_vec();
                plus[k][(i, j)] += h;
                minus[k][(i, j)] -= h;
                (p.value(&plus).unwrap() - p.value(&minus).unwrap()) / (2.0 * h)
            })
        })
        .collect()
}

#[test]
fn gradients_match_finite_differences() {
    for family in FAMILIES {
        let p = small(family, 3);
        let mut rng = stream_indexed(3, Purpose::Corpus, 11);
        for _ in 0..20 {
            let params: Vec<Matrix> = p
                .initial_params()
                .iter()
                .map(|w| gaussian_matrix(&mut rng, w.rows(), w.cols(), 1.0))
                .collect();
            let exact = p.value_and_grad(&params).unwrap().1;
            let approx = numeric_grad(&p, &params, 1e-5);
            for (e, a) in exact.iter().zip(&approx) {
                let err = (e - a).frobenius_norm() / e.frobenius_norm().max(1e-12);
                assert!(err <= 1e-6, "{family}: relative error {err:.2e}");
            }
        }
    }
}

#[test]
fn additive_noise_is_unbiased() {
    let p = make_problem(
        &ProblemSpec::new(ProblemFamily::QuadraticAlign, (3, 4)).with_noise(1.0, NoiseMode::AdditiveGaussian),
    )
    .unwrap();
    let w = p.initial_params().to_vec();
    let exact = &p.value_and_grad(&w).unwrap().1[0];
    let draws = 100_000;
    let mut rng = stream(1, Purpose::GradientNoise);
    let mut sum = Matrix::zeros(3, 4);
    let mut sum_sq = Matrix::zeros(3, 4);
    for _ in 0..draws {
        let g = &p.stochastic_grad(&w, 4, &mut rng).unwrap()[0];
        sum.axpy(1.0, g);
        let d = g - exact;
        sum_sq.axpy(1.0, &d.map(|v| v * v));
    }
    let n = draws as f64;
    for i in 0..3 {
        for j in 0..4 {
            let mean = sum[(i, j)] / n;
            let se = (sum_sq[(i, j)] / n).sqrt() / n.sqrt();
            assert!((mean - exact[(i, j)]).abs() <= 3.0 * se, "entry ({i},{j})");
        }
    }
}

#[test]
fn additive_noise_has_the_declared_variance() {
    let (sigma, batch) = (0.7, 8);
    let p = make_problem(
        &ProblemSpec::new(ProblemFamily::QuadraticAlign, (5, 3)).with_noise(sigma, NoiseMode::AdditiveGaussian),
    )
    .unwrap();
    let w = p.initial_params().to_vec();
    let exact = &p.value_and_grad(&w).unwrap().1[0];
    let mut rng = stream(2, Purpose::GradientNoise);
    let draws = 10_000;
    let total: f64 = (0..draws)
        .map(|_| (&p.stochastic_grad(&w, batch, &mut rng).unwrap()[0] - exact).frobenius_norm_sq())
        .sum();
    let ratio = total / draws as f64 / (sigma * sigma / batch as f64);
    assert!((ratio - 1.0).abs() <= 0.05, "variance ratio {ratio}");
}

#[test]
fn full_minibatch_is_the_exact_gradient() {
    for family in FAMILIES {
        let spec = ProblemSpec::new(family, (3, 4))
            .with_noise(1.0, NoiseMode::Minibatch)
            .with_dataset_size(24);
        let p = make_problem(&spec).unwrap();
        let w = p.initial_params().to_vec();
        let exact = p.value_and_grad(&w).unwrap().1;
        let mut rng = stream(0, Purpose::GradientNoise);
        assert_eq!(p.stochastic_grad(&w, 24, &mut rng).unwrap(), exact);
        assert_eq!(p.stochastic_grad(&w, 100, &mut rng).unwrap(), exact);
    }
}

#[test]
fn runs_repeat_exactly() {
    for family in FAMILIES {
        for kind in [OptimizerKind::MuonNs, OptimizerKind::MuonSvd, OptimizerKind::Sgdm] {
            let spec = ProblemSpec::new(family, (4, 6)).with_noise(0.5, NoiseMode::Minibatch).with_seed(9);
            let p = make_problem(&spec).unwrap();
            let hp = tune_hyperparameters(&p.constants(8, 40), kind, ns()).unwrap();
            let a = run_training(&p, kind, &hp, 40, 5).unwrap();
            let b = run_training(&p, kind, &hp, 40, 5).unwrap();
            assert!(a.same_trajectory(&b), "{family} {kind}");
            assert_eq!(a.final_params, b.final_params);
        }
    }
}

#[test]
fn exact_polar_steps_shrink_every_singular_value_by_the_step_size() {
    let p = make_problem(&ProblemSpec::new(ProblemFamily::QuadraticAlign, (6, 8)).with_noise(0.0, NoiseMode::AdditiveGaussian))
        .unwrap();
    let eta = 0.01;
    let hp = HyperParams::new(eta, 0.0, ns(), 1).unwrap();
    let target = p.target().unwrap();
    let mut state = init_state(p.initial_params()[0].clone());
    let mut prev = singular_values(&(&state.w - target)).unwrap();
    let mut settled = false;
    for _ in 0..1000 {
        let g = p.value_and_grad(std::slice::from_ref(&state.w)).unwrap().1;
        optimizer_step(&mut state, &g[0], &hp, OptimizerKind::MuonSvd).unwrap();
        let next = singular_values(&(&state.w - target)).unwrap();
        if prev.iter().all(|&s| s > eta) {
            for (a, b) in prev.iter().zip(&next) {
                assert!((a - eta - b).abs() <= 1e-9);
            }
        }
        settled |= next.iter().all(|&s| s <= eta + 1e-9);
        if settled {
            assert!(next[0] <= eta + 1e-9);
        }
        prev = next;
    }
    assert!(settled);
}

#[test]
fn tuned_runs_improve_with_the_horizon() {
    for family in FAMILIES {
        let spec = ProblemSpec::new(family, (4, 6)).with_noise(0.0, NoiseMode::AdditiveGaussian).with_seed(2);
        let p = make_problem(&spec).unwrap();
        for kind in [OptimizerKind::MuonNs, OptimizerKind::MuonSvd, OptimizerKind::Sgdm] {
            let avg = |t: usize| {
                let hp = tune_hyperparameters(&p.constants(1, t), kind, ns()).unwrap();
                run_training(&p, kind, &hp, t, 0).unwrap().average_nuclear_grad_norm()
            };
            let (a, b, c) = (avg(50), avg(200), avg(800));
            assert!(a > b && b > c, "{family} {kind}: {a:.3e} {b:.3e} {c:.3e}");
        }
    }
}

#[test]
fn runaway_steps_are_reported_as_divergence() {
    let p = small(ProblemFamily::QuadraticAlign, 0);
    let hp = HyperParams::new(10.0, 0.0, ns(), 1).unwrap();
    let log = run_training(&p, OptimizerKind::Sgdm, &hp, 100, 0).unwrap();
    assert_eq!(log.status, RunStatus::Diverged);
    assert!(log.records.len() < 100);
}

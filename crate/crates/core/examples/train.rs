//! Muon with Newton-Schulz, Muon with exact polar steps, and SGD with
//! momentum on the three test problems, all auto-tuned.

use muon_ns::optimizers::{tune_hyperparameters, OptimizerKind};
use muon_ns::orthogonalizer::OrthogonalizerConfig;
use muon_ns::problems::{make_problem, run_training, NoiseMode, ProblemFamily, ProblemSpec};

fn main() -> Result<(), muon_ns::error::Error> {
    let (t_max, batch) = (300, 16);
    for family in [ProblemFamily::QuadraticAlign, ProblemFamily::TwoLayerLinear, ProblemFamily::TanhMlp] {
        let spec = ProblemSpec::new(family, (8, 12)).with_noise(0.5, NoiseMode::Minibatch).with_seed(4);
        let problem = make_problem(&spec)?;
        for kind in OptimizerKind::ALL {
            let hp = tune_hyperparameters(
                &problem.constants(batch, t_max),
                kind,
                OrthogonalizerConfig::newton_schulz(3, 2)?,
            )?;
            let log = run_training(&problem, kind, &hp, t_max, 0)?;
            let last = log.records.last().unwrap();
            println!(
                "{:>9} {:>8}: eta {:.3e} beta {:.4} | final loss {:.4e} | avg nuclear grad {:.4e}",
                family.name(),
                kind.name(),
                hp.eta,
                hp.beta,
                last.loss,
                log.average_nuclear_grad_norm()
            );
        }
    }
    Ok(())
}

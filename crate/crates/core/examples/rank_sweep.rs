//! How the averaged nuclear gradient norm scales with rank when the
//! op-nuclear smoothness and the signal-to-noise ratio are held fixed.
//! Muon stays flat; SGD with momentum grows.

use muon_ns::experiments::{run_sweep, StepRule, SweepAxis, SweepConfig};
use muon_ns::optimizers::OptimizerKind;
use muon_ns::problems::{NoiseMode, ProblemFamily, ProblemSpec};

fn main() -> Result<(), muon_ns::error::Error> {
    for kind in OptimizerKind::ALL {
        let cfg = SweepConfig {
            axis: SweepAxis::Rank,
            values: vec![8, 16, 32],
            seeds: vec![0, 1],
            problem: ProblemSpec::new(ProblemFamily::QuadraticAlign, (8, 8)).with_noise(1.0, NoiseMode::AdditiveGaussian),
            kind,
            q: 3,
            kappa: 2,
            poly: None,
            step: StepRule::AutoTune,
            t_max: 300,
            batch: 16,
            threads: None,
        };
        let out = run_sweep(&cfg)?;
        let means: Vec<String> = out.mean_by_value().iter().map(|(r, v)| format!("r={r}: {v:.3e}")).collect();
        println!("{:>8}: {} | slope {:.3}", kind.name(), means.join(", "), out.log_log_slope().unwrap());
    }
    Ok(())
}

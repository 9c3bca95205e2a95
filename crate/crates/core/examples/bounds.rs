//! Error-propagation factors and the resulting rate and iteration bounds
//! for the three optimizers.

use muon_ns::optimizers::{OptimizerKind, ProblemConstants};
use muon_ns::theory::{epsilon_chi_bounds, iteration_complexity, rate_bound};

fn main() -> Result<(), muon_ns::error::Error> {
    println!("{:>2} {:>2} {:>12} {:>12} {:>10}", "k", "q", "delta_q", "eps_q", "chi_q");
    for kappa in 1..=3 {
        for q in 1..=4 {
            let b = epsilon_chi_bounds(0.9, kappa, q)?;
            println!("{kappa:>2} {q:>2} {:>12.4e} {:>12.4e} {:>10.6}", b.delta_q, b.epsilon_q, b.chi_q);
        }
    }

    let chi = epsilon_chi_bounds(0.9, 2, 3)?.chi_q;
    let consts = ProblemConstants {
        lipschitz_l: 1.0,
        init_gap_d: 1.0,
        sigma: 0.5,
        batch_size: 16,
        horizon_t: 1000,
        rank_r: 64,
    };
    for kind in OptimizerKind::ALL {
        println!(
            "{:>8}: rate {:.4}, iterations to eps = 0.1: {:.3e}",
            kind.name(),
            rate_bound(kind, &consts, chi),
            iteration_complexity(kind, &consts, chi, 0.1)?
        );
    }
    Ok(())
}

//! Newton-Schulz orthogonalization of a random matrix, step by step,
//! against the exact polar factor and the `δ_0^{(κ+1)^j}` envelope.

use muon_ns::linalg::{polar_factor, Matrix, RankTolerance};
use muon_ns::orthogonalizer::{orthogonalize, OrthogonalizerConfig};
use muon_ns::rng::{gaussian_matrix, stream, Purpose};
use muon_ns::theory::residual_power;

fn main() -> Result<(), muon_ns::error::Error> {
    let mut rng = stream(1, Purpose::Corpus);
    let m: Matrix = gaussian_matrix(&mut rng, 6, 10, 0.3);
    let (q, kappa) = (5, 2);

    let cfg = OrthogonalizerConfig::newton_schulz(q, kappa)?.traced();
    let (o, trace) = orthogonalize(&m, &cfg)?;
    let delta0 = trace.delta0().unwrap();

    println!("alpha = {:.4}, transposed = {}", trace.alpha, trace.transposed);
    println!("{:>2} {:>12} {:>12} {:>12}", "j", "delta_j", "bound", "eps_j");
    for (j, (d, e)) in trace.delta_per_step.iter().zip(&trace.epsilon_per_step).enumerate() {
        println!("{j:>2} {d:>12.4e} {:>12.4e} {e:>12.4e}", residual_power(delta0, kappa, j));
    }

    let exact = polar_factor(&m, RankTolerance::default())?;
    println!("max |O - polar(M)| = {:.2e}", o.max_abs_diff(&exact));
    println!("flops = {}, polar drift = {:.1e}", trace.flops, trace.polar_drift);
    Ok(())
}

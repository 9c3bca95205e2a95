//! Counted multiply FLOPs of Newton-Schulz against the SVD cost model,
//! plus a wall-clock comparison on this machine.

use std::time::Instant;

use muon_ns::linalg::{polar_factor, RankTolerance};
use muon_ns::orthogonalizer::{orthogonalize, OrthogonalizerConfig};
use muon_ns::rng::{gaussian_matrix, stream, Purpose};
use muon_ns::theory::{orthogonalization_flops, FlopModel};

fn main() -> Result<(), muon_ns::error::Error> {
    let mut rng = stream(3, Purpose::Corpus);
    for m in [32, 64, 128] {
        let x = gaussian_matrix(&mut rng, m, m, 1.0);
        let start = Instant::now();
        polar_factor(&x, RankTolerance::default())?;
        let svd = start.elapsed();
        for (q, kappa) in [(1, 1), (3, 2), (5, 2)] {
            let model = orthogonalization_flops(&FlopModel { m, n: m, q, kappa, efficiency_ratio: 1.0 })?;
            let start = Instant::now();
            let (_, trace) = orthogonalize(&x, &OrthogonalizerConfig::newton_schulz(q, kappa)?)?;
            let ns = start.elapsed();
            println!(
                "m={m:>3} q={q} k={kappa}: counted {:>9} model {:>9.0} ratio {:.3} | ns {ns:>9.2?} svd {svd:>9.2?}",
                trace.flops, model.ns_flops, model.algebraic_ratio
            );
        }
    }
    Ok(())
}

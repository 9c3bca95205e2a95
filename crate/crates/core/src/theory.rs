//! Closed-form bounds: Newton–Schulz error and rate-inflation factor,
//! convergence rates, iteration complexities and the FLOP cost model.
//!
//! All `O(·)`/`Θ(·)` constants are set to 1, so absolute values are only
//! meaningful relative to each other.

use crate::error::{Error, Result};
use crate::optimizers::{OptimizerKind, ProblemConstants};

/// `δ_0^{(κ+1)^q}`, evaluated as `exp((κ+1)^q ln δ_0)` so large exponents
/// underflow to zero instead of overflowing.
pub fn residual_power(delta0: f64, kappa: usize, q: usize) -> f64 {
    if delta0 <= 0.0 {
        return 0.0;
    }
    let exponent = ((kappa + 1) as f64).powf(q as f64);
    (exponent * delta0.ln()).exp()
}

/// Upper bounds on the polar error `ε_q` and the factor `χ_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    /// `δ_0^{(κ+1)^q}`, the bound on `δ_q`.
    pub delta_q: f64,
    /// `1 − √(1 − δ_0^{(κ+1)^q})`
    pub epsilon_q: f64,
    /// `(1 − δ_0^{(κ+1)^q})^{−1/2}`
    pub chi_q: f64,
}

pub fn epsilon_chi_bounds(delta0: f64, kappa: usize, q: usize) -> Result<ErrorBounds> {
    if !(0.0..1.0).contains(&delta0) {
        return Err(Error::Parameter(format!(
            "initial residual must lie in [0, 1), got {delta0}"
        )));
    }
    if kappa == 0 {
        return Err(Error::Parameter("degree must be positive".into()));
    }
    let x = residual_power(delta0, kappa, q);
    let root = (1.0 - x).sqrt();
    Ok(ErrorBounds {
        delta_q: x,
        // 1 − √(1 − x) without cancellation
        epsilon_q: x / (1.0 + root),
        chi_q: 1.0 / root,
    })
}

/// The bracketed rate from the comparison table with unit constants.
///
/// Muon: `√(LD/T) + σr/√(BT) + (rσ²LD/(BT))^{1/4}`, times `chi` for the
/// Newton–Schulz variant. SGD-M: `√(rLD/T) + (r²σ²LD/(BT))^{1/4}`.
pub fn rate_bound(kind: OptimizerKind, consts: &ProblemConstants, chi: f64) -> f64 {
    let ProblemConstants {
        lipschitz_l: l,
        init_gap_d: d,
        sigma,
        batch_size,
        horizon_t,
        rank_r,
    } = *consts;
    let (b, t, r) = (batch_size as f64, horizon_t as f64, rank_r as f64);
    match kind {
        OptimizerKind::MuonNs | OptimizerKind::MuonSvd => {
            let base = (l * d / t).sqrt()
                + sigma * r / (b * t).sqrt()
                + (r * sigma * sigma * l * d / (b * t)).powf(0.25);
            if kind == OptimizerKind::MuonNs {
                chi * base
            } else {
                base
            }
        }
        OptimizerKind::Sgdm => {
            (r * l * d / t).sqrt() + (r * r * sigma * sigma * l * d / (b * t)).powf(0.25)
        }
    }
}

/// Iterations to reach `ε`-stationarity, with unit constants.
pub fn iteration_complexity(
    kind: OptimizerKind,
    consts: &ProblemConstants,
    chi: f64,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!(
            "target accuracy must be positive, got {eps}"
        )));
    }
    let ProblemConstants {
        lipschitz_l: l,
        init_gap_d: d,
        sigma,
        batch_size,
        rank_r,
        ..
    } = *consts;
    let (b, r) = (batch_size as f64, rank_r as f64);
    let (e2, e4) = (eps * eps, eps.powi(4));
    let s2 = sigma * sigma;
    Ok(match kind {
        OptimizerKind::MuonNs | OptimizerKind::MuonSvd => {
            let chi = if kind == OptimizerKind::MuonNs { chi } else { 1.0 };
            let c2 = chi * chi;
            (c2 * l * d / e2)
                .max(c2 * r * r * s2 / (b * e2))
                .max(c2 * c2 * r * s2 * l * d / (b * e4))
        }
        OptimizerKind::Sgdm => (r * l * d / e2).max(r * r * s2 * l * d / (b * e4)),
    })
}

/// Inputs of the per-layer cost comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopModel {
    pub m: usize,
    pub n: usize,
    pub q: usize,
    pub kappa: usize,
    /// `Φ_gemm / Φ_svd`, supplied by the caller.
    pub efficiency_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopEstimate {
    pub svd_flops: f64,
    pub ns_flops: f64,
    /// `(2 + 4m/n) / (q(κ+1))`
    pub algebraic_ratio: f64,
    /// Predicted `t_svd / t_ns`.
    pub wallclock_ratio: f64,
}

/// `4m²n + 8m³` for `m ≤ n`.
pub fn svd_flop_count(m: usize, n: usize) -> u64 {
    let (m, n) = (m.min(n) as u64, m.max(n) as u64);
    4 * m * m * n + 8 * m * m * m
}

/// `2q(κ+1)m²n` for `m ≤ n`.
pub fn ns_flop_count(m: usize, n: usize, q: usize, kappa: usize) -> u64 {
    let (m, n) = (m.min(n) as u64, m.max(n) as u64);
    2 * q as u64 * (kappa as u64 + 1) * m * m * n
}

/// Cost model of one orthogonalization. Shapes with `m > n` are transposed.
pub fn orthogonalization_flops(f: &FlopModel) -> Result<FlopEstimate> {
    if f.m == 0 || f.n == 0 || f.q == 0 || f.kappa == 0 {
        return Err(Error::Parameter(
            "m, n, q and kappa must be positive".into(),
        ));
    }
    if !(f.efficiency_ratio > 0.0) {
        return Err(Error::Parameter(
            "efficiency ratio must be positive".into(),
        ));
    }
    let (m, n) = (f.m.min(f.n), f.m.max(f.n));
    let algebraic_ratio = (2.0 + 4.0 * m as f64 / n as f64) / (f.q * (f.kappa + 1)) as f64;
    Ok(FlopEstimate {
        svd_flops: svd_flop_count(m, n) as f64,
        ns_flops: ns_flop_count(m, n, f.q, f.kappa) as f64,
        algebraic_ratio,
        wallclock_ratio: algebraic_ratio * f.efficiency_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(r: usize, t: usize, sigma: f64) -> ProblemConstants {
        ProblemConstants {
            lipschitz_l: 1.0,
            init_gap_d: 1.0,
            sigma,
            batch_size: 1,
            horizon_t: t,
            rank_r: r,
        }
    }

    #[test]
    fn error_bound_examples() {
        let b = epsilon_chi_bounds(0.9, 2, 2).unwrap();
        assert!((b.delta_q - 0.387420489).abs() < 1e-12);
        assert!((b.epsilon_q - 0.217325).abs() < 1e-6);
        assert!((b.chi_q - 1.277671).abs() < 1e-6);

        let b = epsilon_chi_bounds(0.0, 3, 1).unwrap();
        assert_eq!((b.epsilon_q, b.chi_q), (0.0, 1.0));

        let b = epsilon_chi_bounds(0.64, 2, 3).unwrap();
        assert!((b.delta_q - 0.64f64.powi(27)).abs() < 1e-18);
        assert!((b.epsilon_q - 2.93e-6).abs() < 1e-8);
        assert!(b.chi_q - 1.0 < 3e-6);

        assert!(epsilon_chi_bounds(1.0, 2, 2).is_err());
    }

    #[test]
    fn huge_exponents_underflow_to_zero() {
        let b = epsilon_chi_bounds(0.99, 3, 12).unwrap();
        assert_eq!(b.delta_q, 0.0);
        assert_eq!(b.chi_q, 1.0);
    }

    #[test]
    fn rate_examples() {
        let c = unit(4, 100, 1.0);
        let muon = rate_bound(OptimizerKind::MuonSvd, &c, 1.0);
        assert!((muon - (0.1 + 0.4 + 0.04f64.powf(0.25))).abs() < 1e-12);
        assert!((muon - 0.947214).abs() < 1e-6);
        let sgdm = rate_bound(OptimizerKind::Sgdm, &c, 1.0);
        assert!((sgdm - 0.832456).abs() < 1e-6);
        let noiseless = rate_bound(OptimizerKind::MuonSvd, &unit(4, 100, 0.0), 1.0);
        assert!((noiseless - 0.1).abs() < 1e-15);
        assert_eq!(rate_bound(OptimizerKind::MuonNs, &c, 2.0), 2.0 * muon);
    }

    #[test]
    fn complexity_examples() {
        let c = unit(4, 100, 1.0);
        let muon = iteration_complexity(OptimizerKind::MuonNs, &c, 1.0, 0.1).unwrap();
        assert!((muon - 40000.0).abs() < 1e-6);
        let sgdm = iteration_complexity(OptimizerKind::Sgdm, &c, 1.0, 0.1).unwrap();
        assert!((sgdm - 160000.0).abs() < 1e-4);
        let quiet = iteration_complexity(OptimizerKind::MuonNs, &unit(4, 100, 0.0), 1.0, 0.1).unwrap();
        assert!((quiet - 100.0).abs() < 1e-9);
        assert!(iteration_complexity(OptimizerKind::Sgdm, &c, 1.0, 0.0).is_err());
    }

    #[test]
    fn flop_examples() {
        let e = orthogonalization_flops(&FlopModel {
            m: 64,
            n: 64,
            q: 3,
            kappa: 2,
            efficiency_ratio: 1.0,
        })
        .unwrap();
        assert_eq!(e.ns_flops, 4718592.0);
        assert_eq!(e.svd_flops, 3145728.0);
        assert_eq!(e.algebraic_ratio, 6.0 / 9.0);
        assert_eq!(e.wallclock_ratio, e.algebraic_ratio);

        let e = orthogonalization_flops(&FlopModel {
            m: 10,
            n: 10,
            q: 1,
            kappa: 1,
            efficiency_ratio: 4.0,
        })
        .unwrap();
        assert_eq!(e.algebraic_ratio, 3.0);
        assert_eq!(e.wallclock_ratio, 12.0);

        // tall shapes are transposed first
        assert_eq!(svd_flop_count(8, 2), svd_flop_count(2, 8));
    }
}

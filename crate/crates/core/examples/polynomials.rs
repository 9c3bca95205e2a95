//! Newton-Schulz polynomial coefficients, the residual map φ, and the
//! ad-hoc quadratic whose map τ is not monotone on [0, 1].

use muon_ns::nspoly::{
    check_tau_monotone, leading_phi_coefficient, ns_coefficients, phi_closed_form, tau_local_maxima,
    CustomPolynomial, Polynomial,
};

fn main() -> Result<(), muon_ns::error::Error> {
    for kappa in 1..=4 {
        let p = ns_coefficients(kappa)?;
        println!(
            "kappa {kappa}: coefficients in (1 - lambda) {:?}, phi(u) ~ {} u^{}",
            p.coeffs_u(),
            leading_phi_coefficient(kappa)?,
            kappa + 1
        );
    }

    let p2 = Polynomial::newton_schulz(2)?;
    for u in [0.1, 0.5, 0.9] {
        println!("phi_2({u}) = {:.6} (closed form {:.6})", p2.phi(u)?, phi_closed_form(2, u).unwrap());
    }

    let quad = Polynomial::from(CustomPolynomial::ad_hoc_quadratic());
    let report = check_tau_monotone(&quad, 1000)?;
    println!(
        "ad-hoc quadratic: tau'(0) = {:.4}, tau'(1) = {:.4}, monotone = {}, local maxima {:?}",
        quad.tau_derivative(0.0),
        quad.tau_derivative(1.0),
        report.is_monotone_on_grid,
        tau_local_maxima(&quad, 1000)
    );
    Ok(())
}

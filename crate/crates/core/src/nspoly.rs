//! Newton–Schulz polynomials and their scalar maps.
//!
//! The degree-κ Newton–Schulz polynomial is the Taylor truncation of
//! `λ^{-1/2}` at `λ = 1`. In the shifted variable `u = 1 − λ` it reads
//! `p_κ(1 − u) = Σ_{s=0}^{κ} c_s u^s` with `c_s = (2s)! / (4^s (s!)²)`.
//!
//! One Newton–Schulz step maps each eigenvalue `λ` of `X Xᵀ` to
//! `τ(λ) = λ p(λ)²`; equivalently the orthogonality residual `u` maps to
//! `φ(u) = 1 − τ(1 − u)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported Newton–Schulz degree.
pub const MAX_KAPPA: usize = 30;

/// Tolerance below which a negative `τ'` still counts as monotone.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Coefficients of `p_κ(1 − u)` in powers of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsPolynomial {
    coeffs_u: Vec<f64>,
}

impl NsPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs_u.len() - 1
    }

    /// `c_0 .. c_κ`
    pub fn coeffs_u(&self) -> &[f64] {
        &self.coeffs_u
    }

    /// Coefficients in powers of `λ`, expanded from the shifted form.
    pub fn coeffs_lambda(&self) -> Vec<f64> {
        // (1 − λ)^s = Σ_k binom(s, k) (−λ)^k
        let k = self.degree();
        let mut out = vec![0.0; k + 1];
        for (s, &c) in self.coeffs_u.iter().enumerate() {
            let mut binom = 1.0;
            for (j, slot) in out.iter_mut().enumerate().take(s + 1) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                *slot += c * binom * sign;
                binom = binom * (s - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }
}

/// Generates `p_κ` by the ratio recurrence `c_{s+1} = c_s (2s+1) / (2(s+1))`.
pub fn ns_coefficients(kappa: usize) -> Result<NsPolynomial> {
    if kappa == 0 || kappa > MAX_KAPPA {
        return Err(Error::Parameter(format!(
            "Newton–Schulz degree must lie in 1..={MAX_KAPPA}, got {kappa}"
        )));
    }
    Ok(NsPolynomial {
        coeffs_u: coefficient_sequence(kappa),
    })
}

fn coefficient_sequence(last: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(last + 1);
    c.push(1.0);
    for s in 0..last {
        let prev = c[s];
        c.push(prev * (2 * s + 1) as f64 / (2 * (s + 1)) as f64);
    }
    c
}

/// Leading coefficient `C_κ = (2 / 4^{κ+1}) binom(2κ+2, κ+1)` of
/// `φ(u) = C_κ u^{κ+1} + O(u^{κ+2})`. Equals `2 c_{κ+1}`.
pub fn leading_phi_coefficient(kappa: usize) -> Result<f64> {
    if kappa == 0 || kappa > MAX_KAPPA {
        return Err(Error::Parameter(format!(
            "Newton–Schulz degree must lie in 1..={MAX_KAPPA}, got {kappa}"
        )));
    }
    Ok(2.0 * coefficient_sequence(kappa + 1)[kappa + 1])
}

/// Arbitrary polynomial `p(λ) = Σ a_m λ^m`, e.g. a tuned quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPolynomial {
    coeffs_lambda: Vec<f64>,
}

impl CustomPolynomial {
    /// Requires degree at least one and finite coefficients.
    pub fn new(coeffs_lambda: Vec<f64>) -> Result<Self> {
        if coeffs_lambda.len() < 2 {
            return Err(Error::Parameter(
                "custom polynomial needs at least two coefficients".into(),
            ));
        }
        if coeffs_lambda.iter().any(|c| !c.is_finite()) {
            return Err(Error::InputDomain(
                "custom polynomial coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs_lambda })
    }

    /// `3.4445 − 4.7750 λ + 2.0315 λ²`, the hand-tuned quadratic that
    /// popular Muon implementations ship with.
    pub fn ad_hoc_quadratic() -> Self {
        Self {
            coeffs_lambda: vec![3.4445, -4.7750, 2.0315],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs_lambda.len() - 1
    }

    pub fn coeffs_lambda(&self) -> &[f64] {
        &self.coeffs_lambda
    }
}

impl FromStr for CustomPolynomial {
    type Err = Error;

    /// Comma-separated coefficients, constant term first.
    fn from_str(s: &str) -> Result<Self> {
        let coeffs = s
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad polynomial coefficient `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }
}

impl fmt::Display for CustomPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs_lambda.iter().map(|c| format!("{c}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Either polynomial family, as used by the orthogonalizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Polynomial {
    NewtonSchulz(NsPolynomial),
    Custom(CustomPolynomial),
}

impl From<NsPolynomial> for Polynomial {
    fn from(p: NsPolynomial) -> Self {
        Polynomial::NewtonSchulz(p)
    }
}

impl From<CustomPolynomial> for Polynomial {
    fn from(p: CustomPolynomial) -> Self {
        Polynomial::Custom(p)
    }
}

impl Polynomial {
    /// Degree-κ Newton–Schulz polynomial.
    pub fn newton_schulz(kappa: usize) -> Result<Self> {
        ns_coefficients(kappa).map(Self::from)
    }

    pub fn degree(&self) -> usize {
        match self {
            Polynomial::NewtonSchulz(p) => p.degree(),
            Polynomial::Custom(p) => p.degree(),
        }
    }

    pub fn is_newton_schulz(&self) -> bool {
        matches!(self, Polynomial::NewtonSchulz(_))
    }

    /// `p(λ)` by Horner's scheme in `u = 1 − λ` (Newton–Schulz) or in `λ`.
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Polynomial::NewtonSchulz(p) => horner(&p.coeffs_u, 1.0 - lambda),
            Polynomial::Custom(p) => horner(&p.coeffs_lambda, lambda),
        }
    }

    /// `τ(λ) = λ p(λ)²` on `[0, 1]`.
    pub fn tau(&self, lambda: f64) -> Result<f64> {
        check_unit("lambda", lambda)?;
        let p = self.eval(lambda);
        Ok(lambda * p * p)
    }

    /// `φ(u) = 1 − τ(1 − u)` on `[0, 1]`.
    pub fn phi(&self, u: f64) -> Result<f64> {
        check_unit("u", u)?;
        Ok(1.0 - self.tau(1.0 - u)?)
    }

    /// Exact derivative `τ'(λ)` from the expanded coefficients of `τ`.
    pub fn tau_derivative(&self, lambda: f64) -> f64 {
        match self {
            Polynomial::NewtonSchulz(p) => {
                // τ as a polynomial in u: T(u) = (1 − u) q(u)², τ'(λ) = −T'(u)
                let q2 = poly_mul(&p.coeffs_u, &p.coeffs_u);
                let t = poly_mul(&[1.0, -1.0], &q2);
                -horner(&poly_derivative(&t), 1.0 - lambda)
            }
            Polynomial::Custom(p) => {
                let p2 = poly_mul(&p.coeffs_lambda, &p.coeffs_lambda);
                let t = poly_mul(&[0.0, 1.0], &p2);
                horner(&poly_derivative(&t), lambda)
            }
        }
    }

    /// Coefficients of `τ'(λ)` in powers of `λ`.
    pub fn tau_derivative_coeffs_lambda(&self) -> Vec<f64> {
        let a = match self {
            Polynomial::NewtonSchulz(p) => p.coeffs_lambda(),
            Polynomial::Custom(p) => p.coeffs_lambda.clone(),
        };
        let t = poly_mul(&[0.0, 1.0], &poly_mul(&a, &a));
        poly_derivative(&t)
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Horner evaluation, constant term first.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_derivative(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Coefficients of `S(u) = q(u) − 2(1 − u) q'(u)` where `q(u) = p_κ(1 − u)`.
///
/// The ratio identity makes every coefficient below degree κ vanish, leaving
/// `S(u) = (2κ + 1) c_κ u^κ`.
pub fn s_polynomial(poly: &NsPolynomial) -> Vec<f64> {
    let q = &poly.coeffs_u;
    let dq = poly_derivative(q);
    let scaled = poly_mul(&[2.0, -2.0], &dq);
    let mut out = q.clone();
    for (slot, v) in out.iter_mut().zip(scaled) {
        *slot -= v;
    }
    out
}

/// Expanded closed forms of `φ` for κ = 1 and κ = 2.
pub fn phi_closed_form(kappa: usize, u: f64) -> Option<f64> {
    match kappa {
        1 => Some(u * u * (3.0 + u) / 4.0),
        2 => Some(u.powi(3) * (40.0 + 15.0 * u + 9.0 * u * u) / 64.0),
        _ => None,
    }
}

/// Outcome of scanning `τ'` on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub tau_at_one: f64,
    pub min_tau_derivative: f64,
    pub argmin_grid_point: f64,
    pub is_monotone_on_grid: bool,
    pub grid_size: usize,
}

/// Evaluates `τ'` at `grid_size` equispaced points of `[0, 1]`.
pub fn check_tau_monotone(poly: &Polynomial, grid_size: usize) -> Result<MonotonicityReport> {
    if grid_size < 100 {
        return Err(Error::Parameter(format!(
            "monotonicity grid needs at least 100 points, got {grid_size}"
        )));
    }
    let mut min = f64::INFINITY;
    let mut argmin = 0.0;
    for lambda in unit_grid(grid_size) {
        let d = poly.tau_derivative(lambda);
        if d < min {
            min = d;
            argmin = lambda;
        }
    }
    Ok(MonotonicityReport {
        tau_at_one: poly.tau(1.0)?,
        min_tau_derivative: min,
        argmin_grid_point: argmin,
        is_monotone_on_grid: min >= -MONOTONE_SLACK,
        grid_size,
    })
}

/// Interior local maxima of `τ` on `[0, 1]`: sign changes of `τ'` from
/// positive to negative, refined by bisection.
pub fn tau_local_maxima(poly: &Polynomial, grid_size: usize) -> Vec<f64> {
    let grid: Vec<f64> = unit_grid(grid_size.max(2)).collect();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if poly.tau_derivative(lo) > 0.0 && poly.tau_derivative(hi) <= 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if poly.tau_derivative(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    out
}

/// Largest excess `φ(u) − u^{κ+1}` over a uniform grid, with its location.
/// Non-positive means the contraction `φ(u) ≤ u^{κ+1}` held on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionScan {
    pub kappa: usize,
    pub max_excess: f64,
    pub at_u: f64,
    pub grid_size: usize,
}

pub fn scan_phi_contraction(kappa: usize, grid_size: usize) -> Result<ContractionScan> {
    let poly = Polynomial::newton_schulz(kappa)?;
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0.0;
    for u in unit_grid(grid_size.max(2)) {
        let excess = poly.phi(u)? - u.powi(kappa as i32 + 1);
        if excess > worst {
            worst = excess;
            at = u;
        }
    }
    Ok(ContractionScan {
        kappa,
        max_excess: worst,
        at_u: at,
        grid_size,
    })
}

fn unit_grid(n: usize) -> impl Iterator<Item = f64> {
    let last = (n - 1) as f64;
    (0..n).map(move |i| i as f64 / last)
}

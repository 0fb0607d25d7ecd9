//! Limiting objects: semicircle law, its Stieltjes transform, the CLT
//! variance of linear statistics, the Wigner comparison variance and the
//! resolvent covariance kernel.
//!
//! All integrals against the arcsine weight `1/√(4 − μ²)` use Gauss–Chebyshev
//! quadrature of the first kind mapped to `[-2, 2]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::ComplexPoint;
use crate::error::{param, Result};
use crate::testfn::TestFunction;

pub const DEFAULT_ORDER: usize = 64;
pub const MAX_ORDER: usize = 4096;
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Agreement between successive orders required by [`clt_variance_auto`].
pub const ORDER_AGREEMENT: f64 = 1e-10;
/// Below this separation the difference quotient is replaced by `φ'`.
const DIAGONAL_GAP: f64 = 1e-8;

/// Gauss–Chebyshev rule on `[-2, 2]`: nodes `2cos((2k−1)π/(2N))`, weights
/// `π/N`. Integrates `q(μ)/√(4 − μ²)` exactly for polynomial `q` of degree
/// at most `2N − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weight: f64,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(param("quadrature order must be positive"));
        }
        let n = order as f64;
        let nodes = (1..=order)
            .map(|k| 2.0 * ((2 * k - 1) as f64 * PI / (2.0 * n)).cos())
            .collect();
        Ok(Self {
            nodes,
            weight: PI / n,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `∫_{-2}^{2} g(μ) / √(4 − μ²) dμ`.
    pub fn integrate_arcsine<F>(&self, mut g: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut acc = crate::eigen::CompensatedSum::default();
        for &mu in &self.nodes {
            acc.add(g(mu)?);
        }
        Ok(self.weight * acc.value())
    }

    /// Complex-valued version of [`Self::integrate_arcsine`].
    pub fn integrate_arcsine_complex<F>(&self, mut g: F) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        let sum: Complex64 = self.nodes.iter().map(|&mu| g(mu)).sum();
        self.weight * sum
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is positive")
    }
}

/// `(1/2π)√(4 − λ²)` on `[-2, 2]`, zero elsewhere.
pub fn semicircle_density(lambda: f64) -> f64 {
    if lambda.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - lambda * lambda).sqrt() / (2.0 * PI)
    }
}

/// Distribution function of the semicircle law.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (0.5 * x).asin() / PI
    }
}

/// `E_sc[g] = ∫ g(λ) (1/2π)√(4 − λ²) dλ`, exact for polynomial `g` of degree
/// at most `2N − 3`.
pub fn semicircle_expectation<F>(rule: &QuadratureRule, mut g: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    Ok(rule.integrate_arcsine(|mu| Ok(g(mu)? * (4.0 - mu * mu)))? / (2.0 * PI))
}

/// `√(z² − 4)` on the branch behaving like `z` at infinity, taken as
/// `√(z − 2)·√(z + 2)` with principal roots. Valid off the real segment
/// `[-2, 2]`, in either half-plane.
pub fn sqrt_z2_minus_4(z: Complex64) -> Complex64 {
    (z - 2.0).sqrt() * (z + 2.0).sqrt()
}

/// `f(z) = ½(√(z² − 4) − z)` evaluated as `−2/(√(z² − 4) + z)`, which
/// avoids cancellation for large `|z|`.
pub fn stieltjes_f_complex(z: Complex64) -> Complex64 {
    -2.0 / (sqrt_z2_minus_4(z) + z)
}

/// Stieltjes transform of the semicircle law at a point of the upper
/// half-plane.
pub fn stieltjes_f(z: ComplexPoint) -> Complex64 {
    stieltjes_f_complex(z.to_complex())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceResult {
    /// `I[φ] = ∫ φ(μ)(2 − μ²)/√(4 − μ²) dμ`.
    pub condition_integral: f64,
    /// `V[φ] = I²/(2π²)`.
    pub variance: f64,
    /// `|I| < threshold`: no Gaussian limit with this normalization.
    pub degenerate: bool,
    /// Quadrature order used.
    pub order: usize,
}

pub fn condition_integral(phi: &TestFunction, rule: &QuadratureRule) -> Result<f64> {
    rule.integrate_arcsine(|mu| Ok(phi.evaluate(mu)? * (2.0 - mu * mu)))
}

/// Limiting variance of `(p/n)^{1/2}(N_n[φ] − E N_n[φ])` at a fixed order.
pub fn clt_variance(
    phi: &TestFunction,
    rule: &QuadratureRule,
    degeneracy_threshold: f64,
) -> Result<VarianceResult> {
    let integral = condition_integral(phi, rule)?;
    Ok(variance_from_integral(integral, degeneracy_threshold, rule.order()))
}

fn variance_from_integral(integral: f64, threshold: f64, order: usize) -> VarianceResult {
    VarianceResult {
        condition_integral: integral,
        variance: integral * integral / (2.0 * PI * PI),
        degenerate: integral.abs() < threshold,
        order,
    }
}

/// [`clt_variance`] starting at order 64 and doubling until two successive
/// condition integrals agree to `1e-10` (order capped at 4096).
pub fn clt_variance_auto(phi: &TestFunction, degeneracy_threshold: f64) -> Result<VarianceResult> {
    let mut order = DEFAULT_ORDER;
    let mut prev = condition_integral(phi, &QuadratureRule::new(order)?)?;
    while order < MAX_ORDER {
        order *= 2;
        let next = condition_integral(phi, &QuadratureRule::new(order)?)?;
        if (next - prev).abs() <= ORDER_AGREEMENT * next.abs().max(1.0) {
            return Ok(variance_from_integral(next, degeneracy_threshold, order));
        }
        prev = next;
    }
    log::warn!(
        "condition integral of {phi} did not settle by order {MAX_ORDER}; using last value"
    );
    Ok(variance_from_integral(prev, degeneracy_threshold, order))
}

/// Limiting variance of the unnormalized statistic for a Wigner matrix with
/// fourth cumulant `kappa4` and diagonal variance parameter `w2`.
pub fn wigner_variance(
    phi: &TestFunction,
    kappa4: f64,
    w2: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let nodes = rule.nodes();
    let values: Vec<f64> = nodes.iter().map(|&m| phi.evaluate(m)).collect::<Result<_>>()?;
    let mut double = crate::eigen::CompensatedSum::default();
    for (i, (&l1, &f1)) in nodes.iter().zip(&values).enumerate() {
        for (&l2, &f2) in nodes.iter().zip(&values).skip(i) {
            let gap = l1 - l2;
            let quotient = if gap.abs() < DIAGONAL_GAP {
                phi.derivative(l1)?
            } else {
                (f1 - f2) / gap
            };
            let term = quotient * quotient * (4.0 - l1 * l2);
            // Off-diagonal pairs appear twice in the symmetric double sum.
            double.add(if gap.abs() < DIAGONAL_GAP { term } else { 2.0 * term });
        }
    }
    let w = rule.weight();
    let first = w * w * double.value() / (2.0 * PI * PI);
    let cond = condition_integral(phi, rule)?;
    let second = kappa4 * cond * cond / (2.0 * PI * PI);
    let odd = rule.integrate_arcsine(|mu| Ok(phi.evaluate(mu)? * mu))?;
    let third = (w2 - 2.0) * odd * odd / (4.0 * PI * PI);
    Ok(first + second + third)
}

/// `C(z₁, z₂) = 2 f²(z₁) f²(z₂) / (√(z₁² − 4) √(z₂² − 4))`, the limit of
/// `(p/n) Cov(γ_n(z₁), γ_n(z₂))`. Either argument may lie in the lower
/// half-plane; the real axis is excluded.
pub fn covariance_kernel(z1: Complex64, z2: Complex64) -> Result<Complex64> {
    for z in [z1, z2] {
        if !(z.re.is_finite() && z.im.is_finite()) || z.im == 0.0 {
            return Err(param(format!("kernel argument {z} must be finite and off the real axis")));
        }
    }
    let f1 = stieltjes_f_complex(z1);
    let f2 = stieltjes_f_complex(z2);
    Ok(2.0 * f1 * f1 * f2 * f2 / (sqrt_z2_minus_4(z1) * sqrt_z2_minus_4(z2)))
}

/// Largest residual of the two arcsine identities
/// `(1/π)∫ dλ/((z − λ)√(4 − λ²)) = 1/√(z² − 4)` and
/// `(1/π)∫ dλ/√(4 − λ²) = 1` under `rule`.
pub fn arcsine_identities_check(z: ComplexPoint, rule: &QuadratureRule) -> f64 {
    let zc = z.to_complex();
    let resolvent = rule.integrate_arcsine_complex(|mu| (zc - mu).inv()) / PI;
    let r1 = (resolvent - sqrt_z2_minus_4(zc).inv()).norm();
    let mass = rule.weight() * rule.order() as f64 / PI;
    let r2 = (mass - 1.0).abs();
    if r1 > 1e-10 {
        log::info!(
            "arcsine identity residual {r1:e} at z = {zc} with order {}",
            rule.order()
        );
    }
    r1.max(r2)
}

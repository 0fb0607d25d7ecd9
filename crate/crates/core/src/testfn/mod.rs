//! Test functions for linear eigenvalue statistics.
//!
//! The family is closed under real linear combinations, multiplication by
//! `cosh(cλ)` and convolution with the Poisson kernel
//! `P_η(x) = η / (π(x² + η²))`. Fourier transforms use the normalization
//! `φ̂(k) = (1/2π) ∫ e^{ikx} φ(x) dx`.
//!
//! Polynomial members are not integrable. Wherever a transform, a Sobolev
//! norm or a Poisson convolution of a non-constant polynomial is needed, the
//! polynomial is multiplied by [`window`], a smooth cutoff equal to one on
//! `[-3, 3]` and vanishing outside `[-4, 4]`. Eigenvalue statistics always
//! use the bare polynomial.

mod parse;

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::eigen::ComplexPoint;
use crate::error::{param, Error, Result};
use crate::quad::{integrate, integrate_half_line, Tolerance};

pub use parse::parse_spec;

/// Half-width of the region where [`window`] equals one.
pub const WINDOW_FLAT: f64 = 3.0;
/// Half-width of the support of [`window`].
pub const WINDOW_SUPPORT: f64 = 4.0;

/// Largest `|cλ|` for which `cosh(cλ)` is finite.
const COSH_LIMIT: f64 = 709.0;

/// Standard deviations kept on each side of a Gaussian; `e^{-38²/2}`
/// underflows.
const GAUSSIAN_REACH: f64 = 38.0;

const SOBOLEV_CAP: f64 = 16384.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `T_k(μ/2)`.
    Chebyshev { degree: u32 },
    /// `μ^k`.
    Monomial { degree: u32 },
    /// `exp(-(μ - center)² / (2 width²))`.
    GaussianBump { center: f64, width: f64 },
    /// `cosh(rate·μ) · base(μ)`.
    CoshWeighted { rate: f64, base: Box<TestFunction> },
    /// `(P_η ∗ base)(μ)`.
    PoissonSmoothed { base: Box<TestFunction>, eta: f64 },
    /// `Re 1/(μ - z)`.
    ResolventRe(ComplexPoint),
    /// `Im 1/(μ - z)`.
    ResolventIm(ComplexPoint),
    /// `Σ w_i φ_i`; the empty combination is the zero function.
    Combination(Vec<(f64, TestFunction)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub s: f64,
    pub value: f64,
}

impl TestFunction {
    pub fn chebyshev(degree: u32) -> Self {
        Self::Chebyshev { degree }
    }

    pub fn monomial(degree: u32) -> Self {
        Self::Monomial { degree }
    }

    pub fn zero() -> Self {
        Self::Combination(Vec::new())
    }

    pub fn gaussian(center: f64, width: f64) -> Result<Self> {
        if !center.is_finite() || !(width.is_finite() && width > 0.0) {
            return Err(param(format!(
                "gaussian bump needs a finite center and positive width, got ({center}, {width})"
            )));
        }
        Ok(Self::GaussianBump { center, width })
    }

    /// `cosh(rate·λ) · base(λ)`; the base must be integrable.
    pub fn cosh_weighted(rate: f64, base: TestFunction) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(param(format!("cosh growth rate must be positive, got {rate}")));
        }
        if !base.decays_superexponentially() {
            return Err(param(format!(
                "cosh weighting needs a base decaying faster than any exponential, got {base}"
            )));
        }
        Ok(Self::CoshWeighted {
            rate,
            base: Box::new(base),
        })
    }

    pub fn resolvent_re(z: ComplexPoint) -> Self {
        Self::ResolventRe(z)
    }

    pub fn resolvent_im(z: ComplexPoint) -> Self {
        Self::ResolventIm(z)
    }

    /// Real linear combination; nested combinations are flattened.
    pub fn combination(terms: impl IntoIterator<Item = (f64, TestFunction)>) -> Self {
        let mut flat = Vec::new();
        for (w, f) in terms {
            match f {
                Self::Combination(inner) => {
                    flat.extend(inner.into_iter().map(|(v, g)| (w * v, g)));
                }
                other => flat.push((w, other)),
            }
        }
        Self::Combination(flat)
    }

    pub fn scaled(self, weight: f64) -> Self {
        Self::combination([(weight, self)])
    }

    fn is_constant(&self) -> bool {
        matches!(
            self,
            Self::Chebyshev { degree: 0 } | Self::Monomial { degree: 0 }
        )
    }

    fn is_polynomial(&self) -> bool {
        matches!(self, Self::Chebyshev { .. } | Self::Monomial { .. })
    }

    pub fn decays_superexponentially(&self) -> bool {
        match self {
            Self::GaussianBump { .. } => true,
            Self::Combination(terms) => terms.iter().all(|(_, f)| f.decays_superexponentially()),
            _ => false,
        }
    }

    /// Whether the function is in `L¹` without windowing.
    pub fn is_integrable(&self) -> bool {
        match self {
            Self::GaussianBump { .. } | Self::ResolventIm(_) => true,
            Self::CoshWeighted { base, .. } => base.decays_superexponentially(),
            Self::PoissonSmoothed { base, .. } => base.is_integrable(),
            Self::Combination(terms) => terms.iter().all(|(_, f)| f.is_integrable()),
            Self::Chebyshev { .. } | Self::Monomial { .. } | Self::ResolventRe(_) => false,
        }
    }

    /// Whether transforms and Sobolev norms see a polynomial part through
    /// the smooth cutoff (equal to one on `[-3, 3]`, zero outside `(-4, 4)`).
    pub fn uses_window(&self) -> bool {
        match self {
            Self::Chebyshev { .. } | Self::Monomial { .. } => true,
            Self::CoshWeighted { base, .. } | Self::PoissonSmoothed { base, .. } => {
                base.uses_window()
            }
            Self::Combination(terms) => terms.iter().any(|(_, f)| f.uses_window()),
            Self::GaussianBump { .. } | Self::ResolventRe(_) | Self::ResolventIm(_) => false,
        }
    }

    pub fn evaluate(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(param(format!("evaluation point {lambda} is not finite")));
        }
        match self {
            Self::Chebyshev { degree } => Ok(chebyshev_t(*degree, 0.5 * lambda)),
            Self::Monomial { degree } => Ok(lambda.powi(*degree as i32)),
            Self::GaussianBump { center, width } => {
                let u = (lambda - center) / width;
                Ok((-0.5 * u * u).exp())
            }
            Self::CoshWeighted { rate, base } => {
                let c = cosh_guarded(*rate, lambda)?;
                let v = c * base.evaluate(lambda)?;
                if !v.is_finite() {
                    return Err(Error::Range(format!("cosh-weighted value overflows at {lambda}")));
                }
                Ok(v)
            }
            Self::PoissonSmoothed { base, eta } => poisson_evaluate(base, *eta, lambda, false),
            Self::ResolventRe(z) => Ok(resolvent(*z, lambda).re),
            Self::ResolventIm(z) => Ok(resolvent(*z, lambda).im),
            Self::Combination(terms) => {
                let mut acc = crate::eigen::CompensatedSum::default();
                for (w, f) in terms {
                    acc.add(w * f.evaluate(lambda)?);
                }
                Ok(acc.value())
            }
        }
    }

    pub fn derivative(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(param(format!("evaluation point {lambda} is not finite")));
        }
        match self {
            Self::Chebyshev { degree } => {
                if *degree == 0 {
                    Ok(0.0)
                } else {
                    Ok(0.5 * *degree as f64 * chebyshev_u(*degree - 1, 0.5 * lambda))
                }
            }
            Self::Monomial { degree } => match degree {
                0 => Ok(0.0),
                k => Ok(*k as f64 * lambda.powi(*k as i32 - 1)),
            },
            Self::GaussianBump { center, width } => {
                let u = (lambda - center) / width;
                Ok(-u / width * (-0.5 * u * u).exp())
            }
            Self::CoshWeighted { rate, base } => {
                let c = cosh_guarded(*rate, lambda)?;
                let s = rate * (rate * lambda).sinh();
                let v = s * base.evaluate(lambda)? + c * base.derivative(lambda)?;
                if !v.is_finite() {
                    return Err(Error::Range(format!("cosh-weighted slope overflows at {lambda}")));
                }
                Ok(v)
            }
            Self::PoissonSmoothed { base, eta } => poisson_evaluate(base, *eta, lambda, true),
            Self::ResolventRe(z) => Ok(-resolvent(*z, lambda).powi(2).re),
            Self::ResolventIm(z) => Ok(-resolvent(*z, lambda).powi(2).im),
            Self::Combination(terms) => terms
                .iter()
                .map(|(w, f)| Ok(w * f.derivative(lambda)?))
                .sum(),
        }
    }

    /// Value of the integrable version of the function: polynomials of
    /// positive degree are windowed, constants are kept.
    fn integrable_value(&self, lambda: f64, slope: bool) -> Result<f64> {
        if self.is_polynomial() && !self.is_constant() {
            let w = window(lambda);
            if w == 0.0 && window_derivative(lambda) == 0.0 {
                return Ok(0.0);
            }
            if slope {
                Ok(self.derivative(lambda)? * w + self.evaluate(lambda)? * window_derivative(lambda))
            } else {
                Ok(self.evaluate(lambda)? * w)
            }
        } else if slope {
            self.derivative(lambda)
        } else {
            self.evaluate(lambda)
        }
    }

    /// Interval outside which the (windowed) function vanishes to double
    /// precision, when there is one.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Self::Chebyshev { .. } | Self::Monomial { .. } => {
                Some((-WINDOW_SUPPORT, WINDOW_SUPPORT))
            }
            Self::GaussianBump { center, width } => Some((
                center - GAUSSIAN_REACH * width,
                center + GAUSSIAN_REACH * width,
            )),
            Self::CoshWeighted { rate, base } => {
                // cosh(aλ)·G(m, w) is a sum of Gaussians centered at m ± a w².
                let (lo, hi) = base.support()?;
                let shift = match base.as_ref() {
                    Self::GaussianBump { width, .. } => rate * width * width,
                    _ => 0.0,
                };
                Some((lo - shift, hi + shift))
            }
            Self::Combination(terms) => {
                let mut out: Option<(f64, f64)> = None;
                for (_, f) in terms {
                    let (lo, hi) = f.support()?;
                    out = Some(match out {
                        None => (lo, hi),
                        Some((a, b)) => (a.min(lo), b.max(hi)),
                    });
                }
                Some(out.unwrap_or((0.0, 0.0)))
            }
            _ => None,
        }
    }

    /// Points worth splitting a quadrature at.
    fn features(&self, out: &mut Vec<f64>) {
        match self {
            // Shoulders as well as the peak: under the tan substitution a
            // far-away bump can be narrower than the quadrature nodes.
            Self::GaussianBump { center, width } => {
                out.push(*center);
                for j in [1.0, 3.0, 6.0] {
                    out.extend([center - j * width, center + j * width]);
                }
            }
            Self::ResolventRe(z) | Self::ResolventIm(z) => out.push(z.re()),
            Self::CoshWeighted { rate, base } => {
                if let Self::GaussianBump { center, width } = base.as_ref() {
                    let shift = rate * width * width;
                    for c in [center - shift, center + shift] {
                        Self::GaussianBump { center: c, width: *width }.features(out);
                    }
                }
                base.features(out);
            }
            Self::PoissonSmoothed { base, .. } => base.features(out),
            Self::Combination(terms) => terms.iter().for_each(|(_, f)| f.features(out)),
            Self::Chebyshev { .. } | Self::Monomial { .. } => {
                out.extend([-WINDOW_FLAT, WINDOW_FLAT]);
            }
        }
    }

    /// `φ̂(k) = (1/2π) ∫ e^{ikx} φ(x) dx`.
    pub fn fourier_transform(&self, k: f64) -> Result<Complex64> {
        if !k.is_finite() {
            return Err(param(format!("frequency {k} is not finite")));
        }
        match self {
            Self::GaussianBump { center, width } => Ok(gaussian_transform(*center, *width, k)),
            Self::ResolventIm(z) => {
                Ok(0.5 * Complex64::new(-k.abs() * z.im(), k * z.re()).exp())
            }
            Self::ResolventRe(z) => {
                let sign = if k > 0.0 {
                    1.0
                } else if k < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Ok(Complex64::new(0.0, 0.5 * sign)
                    * Complex64::new(-k.abs() * z.im(), k * z.re()).exp())
            }
            Self::PoissonSmoothed { base, eta } => {
                Ok(base.fourier_transform(k)? * (-eta * k.abs()).exp())
            }
            Self::Combination(terms) => terms
                .iter()
                .map(|(w, f)| Ok(*w * f.fourier_transform(k)?))
                .sum(),
            Self::CoshWeighted { rate, base } => match base.as_ref() {
                Self::GaussianBump { center, width } => {
                    let (a, m, w) = (*rate, *center, *width);
                    let shift = a * w * w;
                    // cosh(aλ)G(m,w) = ½e^{am + a²w²/2} G(m + aw², w)
                    //                + ½e^{-am + a²w²/2} G(m - aw², w)
                    let amp_plus = 0.5 * (a * m + a * a * w * w / 2.0).exp();
                    let amp_minus = 0.5 * (-a * m + a * a * w * w / 2.0).exp();
                    Ok(amp_plus * gaussian_transform(m + shift, w, k)
                        + amp_minus * gaussian_transform(m - shift, w, k))
                }
                _ => self.numeric_transform(k),
            },
            Self::Chebyshev { .. } | Self::Monomial { .. } => self.numeric_transform(k),
        }
    }

    /// Direct quadrature of the transform over the (windowed) support.
    fn numeric_transform(&self, k: f64) -> Result<Complex64> {
        let (lo, hi) = self.support().ok_or_else(|| {
            Error::Unsupported(format!("no finite support to transform {self} numerically"))
        })?;
        log::debug!("numeric Fourier transform of {self} on [{lo}, {hi}] at k = {k}");
        // Pieces no longer than half an oscillation period.
        let pieces = ((hi - lo) * k.abs() / PI).ceil().max(8.0) as usize;
        let step = (hi - lo) / pieces as f64;
        let tol = Tolerance::new(1e-16, 1e-12);
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..pieces {
            let a = lo + j as f64 * step;
            let b = if j + 1 == pieces { hi } else { a + step };
            re += integrate(|x| Ok(self.integrable_value(x, false)? * (k * x).cos()), a, b, &[], tol)?;
            im += integrate(|x| Ok(self.integrable_value(x, false)? * (k * x).sin()), a, b, &[], tol)?;
        }
        Ok(Complex64::new(re, im) / (2.0 * PI))
    }

    /// `‖φ‖_s = (∫ (1 + 2|k|)^{2s} |φ̂(k)|² dk)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> Result<SobolevNorm> {
        if !(s.is_finite() && s > 0.0) {
            return Err(param(format!("smoothness index must be positive, got {s}")));
        }
        // |φ̂(-k)| = |φ̂(k)| for real φ, so integrate over k ≥ 0 and double.
        let half = integrate_half_line(
            |k| Ok((1.0 + 2.0 * k).powf(2.0 * s) * self.fourier_transform(k)?.norm_sqr()),
            Tolerance::new(1e-300, 1e-10),
            SOBOLEV_CAP,
        )
        .map_err(|e| match e {
            Error::Divergence { partial_sums, .. } => Error::Divergence {
                message: format!("Sobolev integral of {self} at s = {s} does not converge"),
                partial_sums,
            },
            other => other,
        })?;
        Ok(SobolevNorm {
            s,
            value: (2.0 * half).max(0.0).sqrt(),
        })
    }
}

/// `P_η ∗ φ₀` as a function.
pub fn poisson_smooth(base: TestFunction, eta: f64) -> Result<TestFunction> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(param(format!("smoothing width must be positive, got {eta}")));
    }
    match base {
        // P_η ∗ P_σ = P_{η+σ}.
        TestFunction::PoissonSmoothed { base, eta: inner } => Ok(TestFunction::PoissonSmoothed {
            base,
            eta: inner + eta,
        }),
        TestFunction::CoshWeighted { .. } if !base.is_integrable() => Err(Error::Unsupported(
            format!("Poisson smoothing of {base} diverges"),
        )),
        base => Ok(TestFunction::PoissonSmoothed {
            base: Box::new(base),
            eta,
        }),
    }
}

fn poisson_evaluate(base: &TestFunction, eta: f64, x: f64, slope: bool) -> Result<f64> {
    match base {
        TestFunction::Chebyshev { degree: 0 } | TestFunction::Monomial { degree: 0 } => {
            Ok(if slope { 0.0 } else { 1.0 })
        }
        // Harmonic extension: P_η ∗ 1/(· − z) = 1/(· − (z + iη)).
        TestFunction::ResolventRe(z) | TestFunction::ResolventIm(z) => {
            let shifted = ComplexPoint::new(z.re(), z.im() + eta)?;
            let g = resolvent(shifted, x);
            let g = if slope { -g * g } else { g };
            Ok(if matches!(base, TestFunction::ResolventRe(_)) {
                g.re
            } else {
                g.im
            })
        }
        TestFunction::Combination(terms) => {
            let mut acc = 0.0;
            for (w, f) in terms {
                acc += w * poisson_evaluate(f, eta, x, slope)?;
            }
            Ok(acc)
        }
        TestFunction::PoissonSmoothed { base, eta: inner } => {
            poisson_evaluate(base, eta + inner, x, slope)
        }
        _ => {
            let mut feats = Vec::new();
            base.features(&mut feats);
            let tol = Tolerance::new(1e-15, 1e-12);
            if let Some((lo, hi)) = base.support() {
                // (P_η ∗ g)(x) = ∫ g(λ) η/(π((λ−x)² + η²)) dλ over the support,
                // with cuts at the kernel peak and shoulders.
                let mut cuts = feats;
                for j in [0.0, 1.0, 4.0, 16.0] {
                    cuts.extend([x - j * eta, x + j * eta]);
                }
                let v = integrate(
                    |l| {
                        let d = l - x;
                        Ok(base.integrable_value(l, slope)? * eta / (d * d + eta * eta))
                    },
                    lo,
                    hi,
                    &cuts,
                    tol,
                )?;
                return Ok(v / PI);
            }
            // (1/π) ∫ g(x + η tan θ) dθ over θ ∈ (−π/2, π/2).
            let mut cuts: Vec<f64> = feats.iter().map(|c| ((c - x) / eta).atan()).collect();
            cuts.push(0.0);
            let v = integrate(
                |t| {
                    let lambda = x + eta * t.tan();
                    if !lambda.is_finite() {
                        return Ok(0.0);
                    }
                    base.integrable_value(lambda, slope)
                },
                -0.5 * PI,
                0.5 * PI,
                &cuts,
                tol,
            )?;
            Ok(v / PI)
        }
    }
}

fn resolvent(z: ComplexPoint, lambda: f64) -> Complex64 {
    (Complex64::new(lambda, 0.0) - z.to_complex()).inv()
}

fn cosh_guarded(rate: f64, lambda: f64) -> Result<f64> {
    if (rate * lambda).abs() > COSH_LIMIT {
        return Err(Error::Range(format!(
            "cosh({}) overflows double precision",
            rate * lambda
        )));
    }
    Ok((rate * lambda).cosh())
}

fn gaussian_transform(center: f64, width: f64, k: f64) -> Complex64 {
    let amp = width / (2.0 * PI).sqrt() * (-0.5 * k * k * width * width).exp();
    amp * Complex64::new(0.0, k * center).exp()
}

/// `T_k(x)` by the three-term recurrence.
pub fn chebyshev_t(k: u32, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `U_k(x)`, Chebyshev polynomial of the second kind.
pub fn chebyshev_u(k: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn smooth_step_parts(t: f64) -> (f64, f64) {
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    (a, b)
}

/// Smooth cutoff: one on `[-3, 3]`, zero outside `(-4, 4)`, `C^∞`.
pub fn window(x: f64) -> f64 {
    let t = WINDOW_SUPPORT - x.abs();
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = smooth_step_parts(t);
        a / (a + b)
    }
}

pub fn window_derivative(x: f64) -> f64 {
    let t = WINDOW_SUPPORT - x.abs();
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = smooth_step_parts(t);
    let ds = a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b));
    -x.signum() * ds
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Chebyshev { degree } => write!(f, "chebyshev:{degree}"),
            Self::Monomial { degree } => write!(f, "monomial:{degree}"),
            Self::GaussianBump { center, width } => write!(f, "gaussian:{center:?},{width:?}"),
            Self::CoshWeighted { rate, base } => write!(f, "cosh:{rate:?}({base})"),
            Self::PoissonSmoothed { base, eta } => write!(f, "poisson:{eta:?}({base})"),
            Self::ResolventRe(z) => write!(f, "resolvent-re:{:?},{:?}", z.re(), z.im()),
            Self::ResolventIm(z) => write!(f, "resolvent-im:{:?},{:?}", z.re(), z.im()),
            Self::Combination(terms) if terms.is_empty() => write!(f, "0.0*monomial:0"),
            Self::Combination(terms) => {
                for (i, (w, g)) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{w:?}*{g}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s)
    }
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_spec(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests;

//! Full-spectrum symmetric eigensolver and the spectral observables built on
//! it: linear eigenvalue statistics, resolvent traces and the empirical
//! spectral distribution.
//!
//! The solver reduces the matrix to tridiagonal form with Householder
//! reflections and then runs implicit-shift QL iterations on the tridiagonal
//! pair. Only eigenvalues are computed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::SymmetricMatrix;
use crate::error::{param, Error, Result};
use crate::testfn::TestFunction;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// QL sweeps allowed per eigenvalue.
pub const ITERATION_BUDGET: usize = 50;

/// A point of the open upper half-plane. Serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct ComplexPoint {
    re: f64,
    im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) {
            return Err(param(format!("complex point ({re}, {im}) is not finite")));
        }
        if im <= 0.0 {
            return Err(param(format!(
                "complex point must lie in the upper half-plane, got Im z = {im}"
            )));
        }
        Ok(Self { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn conj(self) -> Complex64 {
        Complex64::new(self.re, -self.im)
    }
}

impl From<ComplexPoint> for [f64; 2] {
    fn from(z: ComplexPoint) -> Self {
        [z.re, z.im]
    }
}

impl TryFrom<[f64; 2]> for ComplexPoint {
    type Error = Error;

    fn try_from(z: [f64; 2]) -> Result<Self> {
        Self::new(z[0], z[1])
    }
}

impl TryFrom<Complex64> for ComplexPoint {
    type Error = Error;

    fn try_from(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }
}

/// Eigenvalues sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Wraps arbitrary finite values, sorting them.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("eigenvalue {i} is not finite")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut values: Vec<f64> = self.values.iter().map(|v| v * factor).collect();
        if factor < 0.0 {
            values.reverse();
        }
        Self { values }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Computes every eigenvalue of `m`.
///
/// `tol` is the relative residual the caller needs; it must lie in
/// `[f64::EPSILON, 1)`. The QL iteration itself deflates at machine
/// precision, which meets any admissible `tol`.
pub fn eigenvalues(m: &SymmetricMatrix, tol: f64) -> Result<Spectrum> {
    if !(f64::EPSILON..1.0).contains(&tol) {
        return Err(param(format!("tolerance must lie in [eps, 1), got {tol}")));
    }
    if let Some(i) = m.as_slice().iter().position(|v| !v.is_finite()) {
        let n = m.n();
        return Err(Error::Data(format!(
            "matrix entry ({}, {}) is not finite",
            i / n,
            i % n
        )));
    }
    let (mut diag, mut off) = tridiagonalize(m);
    tridiagonal_ql(&mut diag, &mut off)?;
    diag.sort_by(f64::total_cmp);
    Ok(Spectrum { values: diag })
}

/// Householder reduction to tridiagonal form.
///
/// Returns `(d, e)` with `d` the diagonal and `e[i]` the coupling between
/// rows `i` and `i + 1` (`e[n-1] = 0`). Works on a packed lower triangle,
/// annihilating row `i` left of the subdiagonal for `i = n-1, …, 2`.
fn tridiagonalize(m: &SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n();
    // Row i of the lower triangle occupies lower[start(i)..start(i) + i + 1].
    let start = |i: usize| i * (i + 1) / 2;
    let mut lower = Vec::with_capacity(start(n));
    for i in 0..n {
        lower.extend_from_slice(&m.row(i)[..=i]);
    }

    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];

    for i in (1..n).rev() {
        let row_i = start(i);
        d[i] = lower[row_i + i];
        let len = i;
        let last = lower[row_i + len - 1];
        if len == 1 {
            e[0] = last;
            continue;
        }
        // Scale to avoid under/overflow while forming the norm.
        let scale: f64 = lower[row_i..row_i + len].iter().map(|x| x.abs()).sum();
        if scale == 0.0 {
            e[len - 1] = 0.0;
            continue;
        }
        let mut head_sq = 0.0;
        for k in 0..len {
            v[k] = lower[row_i + k] / scale;
        }
        for &x in &v[..len - 1] {
            head_sq += x * x;
        }
        let tail = v[len - 1];
        if head_sq == 0.0 {
            e[len - 1] = last;
            continue;
        }
        let norm = (head_sq + tail * tail).sqrt();
        let alpha = if tail >= 0.0 { -norm } else { norm };
        v[len - 1] = tail - alpha;
        let tau = 1.0 / (norm * norm - alpha * tail);
        e[len - 1] = alpha * scale;

        // w = tau * A v over the leading len x len block.
        w[..len].fill(0.0);
        for r in 0..len {
            let row = &lower[start(r)..start(r) + r + 1];
            let vr = v[r];
            let mut acc = row[r] * vr;
            for c in 0..r {
                acc += row[c] * v[c];
                w[c] += row[c] * vr;
            }
            w[r] += acc;
        }
        let mut vw = 0.0;
        for k in 0..len {
            w[k] *= tau;
            vw += v[k] * w[k];
        }
        let half = 0.5 * tau * vw;
        for k in 0..len {
            w[k] -= half * v[k];
        }
        // A <- A - v w^T - w v^T.
        for r in 0..len {
            let (vr, wr) = (v[r], w[r]);
            let row = &mut lower[start(r)..start(r) + r + 1];
            for c in 0..=r {
                row[c] -= vr * w[c] + wr * v[c];
            }
        }
    }
    if n > 0 {
        d[0] = lower[0];
    }
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues
/// overwrite `d`, `e` is destroyed.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > ITERATION_BUDGET {
                return Err(Error::NoConvergence {
                    index: l,
                    budget: ITERATION_BUDGET,
                });
            }
            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `Σ φ(λ_i)` with compensated accumulation.
pub fn linear_statistic(s: &Spectrum, phi: &TestFunction) -> Result<f64> {
    let mut acc = CompensatedSum::default();
    for (i, &lambda) in s.values.iter().enumerate() {
        let v = phi.evaluate(lambda)?;
        if !v.is_finite() {
            return Err(Error::Data(format!(
                "test function is not finite at eigenvalue {i} ({lambda})"
            )));
        }
        acc.add(v);
    }
    Ok(acc.value())
}

/// `Tr (A − z)^{-1} = Σ 1/(λ_i − z)`.
pub fn resolvent_trace(s: &Spectrum, z: ComplexPoint) -> Complex64 {
    let z = z.to_complex();
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    for &lambda in &s.values {
        let g = (Complex64::new(lambda, 0.0) - z).inv();
        re.add(g.re);
        im.add(g.im);
    }
    Complex64::new(re.value(), im.value())
}

/// Fraction of eigenvalues `≤ x`.
pub fn empirical_cdf(s: &Spectrum, x: f64) -> f64 {
    if s.values.is_empty() {
        return 0.0;
    }
    let count = s.values.partition_point(|&v| v <= x);
    count as f64 / s.values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample, EnsembleParams};

    fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[test]
    fn zero_and_two_by_two() {
        let s = eigenvalues(&SymmetricMatrix::zeros(2), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0]);

        for b in [0.7, -2.5, 1e-8] {
            let m = from_fn(2, |i, j| if i == j { 0.0 } else { b });
            let s = eigenvalues(&m, DEFAULT_TOLERANCE).unwrap();
            assert!((s.values()[0] + b.abs()).abs() < 1e-15);
            assert!((s.values()[1] - b.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn one_by_one_and_diagonal() {
        let m = from_fn(1, |_, _| 3.5);
        assert_eq!(eigenvalues(&m, DEFAULT_TOLERANCE).unwrap().values(), &[3.5]);
        let m = from_fn(4, |i, j| if i == j { [3.0, -1.0, 2.0, 0.5][i] } else { 0.0 });
        assert_eq!(
            eigenvalues(&m, DEFAULT_TOLERANCE).unwrap().values(),
            &[-1.0, 0.5, 2.0, 3.0]
        );
    }

    #[test]
    fn known_tridiagonal_spectrum() {
        // Path graph Laplacian-like matrix: eigenvalues 2cos(kπ/(n+1)).
        let n = 40;
        let m = from_fn(n, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        let s = eigenvalues(&m, DEFAULT_TOLERANCE).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in s.values().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_tolerance() {
        let mut m = SymmetricMatrix::zeros(3);
        m.set(0, 2, f64::NAN);
        assert!(matches!(eigenvalues(&m, DEFAULT_TOLERANCE), Err(Error::Data(_))));
        assert!(eigenvalues(&SymmetricMatrix::zeros(3), 0.0).is_err());
    }

    #[test]
    fn negation_reverses_spectrum() {
        let params = EnsembleParams::diluted(60, 6.0, 4).unwrap();
        let m = sample(&params, 0).unwrap();
        let s = eigenvalues(&m, DEFAULT_TOLERANCE).unwrap();
        let neg = eigenvalues(&m.scaled(-1.0), DEFAULT_TOLERANCE).unwrap();
        let norm = m.max_row_sum();
        for (a, b) in s.values().iter().rev().zip(neg.values()) {
            assert!((a + b).abs() < 1e-12 * norm);
        }
    }

    #[test]
    fn statistics_on_spectrum() {
        let params = EnsembleParams::diluted(80, 8.0, 11).unwrap();
        let m = sample(&params, 2).unwrap();
        let s = eigenvalues(&m, DEFAULT_TOLERANCE).unwrap();
        let norm = m.max_row_sum();
        let tol = 80.0 * 1e-10 * norm;

        let one = linear_statistic(&s, &TestFunction::monomial(0)).unwrap();
        assert_eq!(one, 80.0);
        let tr = linear_statistic(&s, &TestFunction::monomial(1)).unwrap();
        assert!(tr.abs() < tol);
        let sq = linear_statistic(&s, &TestFunction::monomial(2)).unwrap();
        assert!((sq - m.frobenius_norm_sq()).abs() < tol * norm);
    }

    #[test]
    fn resolvent_trace_examples() {
        let zeros = Spectrum::from_values(vec![0.0; 7]).unwrap();
        let g = resolvent_trace(&zeros, ComplexPoint::new(0.0, 1.0).unwrap());
        assert!((g - Complex64::new(0.0, 7.0)).norm() < 1e-15);

        let s = Spectrum::from_values(vec![-1.9, -0.3, 0.0, 0.4, 2.2]).unwrap();
        for (x, y) in [(0.0, 1e-3), (1.0, 0.5), (-3.0, 2.0), (0.4, 1e-6)] {
            let z = ComplexPoint::new(x, y).unwrap();
            let g = resolvent_trace(&s, z);
            assert!(g.im * y > 0.0);
            assert!(g.norm() <= s.len() as f64 / y * (1.0 + 1e-12));
            // Trace at the conjugate point is the conjugate.
            let mut conj = Complex64::new(0.0, 0.0);
            for &l in s.values() {
                conj += (Complex64::new(l, 0.0) - z.conj()).inv();
            }
            assert!((conj - g.conj()).norm() <= 1e-12 * g.norm());
        }
    }

    #[test]
    fn cdf_counts() {
        let s = Spectrum::from_values(vec![3.0, 1.0, 2.0, 5.0, 4.0]).unwrap();
        assert_eq!(empirical_cdf(&s, 0.0), 0.0);
        assert_eq!(empirical_cdf(&s, 9.0), 1.0);
        assert_eq!(empirical_cdf(&s, 3.0), 0.6);
        assert_eq!(empirical_cdf(&s, 2.999), 0.4);
    }

    #[test]
    fn compensated_sum_is_order_stable() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        let s: CompensatedSum = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }
}

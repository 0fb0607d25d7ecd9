//! Sample statistics used to compare Monte Carlo fluctuations with their
//! Gaussian limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::eigen::CompensatedSum;
use crate::error::{param, Result};

/// Minimum sample size for normality testing.
pub const MIN_NORMALITY_SAMPLES: usize = 30;

/// Mean computed about the first sample, so a constant sample has exactly
/// its common value as mean.
pub fn mean(samples: &[f64]) -> f64 {
    let Some(&x0) = samples.first() else {
        return f64::NAN;
    };
    let shift: CompensatedSum = samples.iter().map(|x| x - x0).collect();
    x0 + shift.value() / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Adjusted Fisher–Pearson skewness `G₁`; zero for a constant sample.
    pub skewness: f64,
    /// Bias-corrected excess kurtosis `G₂`; zero for a constant sample.
    pub excess_kurtosis: f64,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    let m = samples.len();
    if m < 4 {
        return Err(param(format!("need at least 4 samples for moments, got {m}")));
    }
    let mu = mean(samples);
    let mut s2 = CompensatedSum::default();
    let mut s3 = CompensatedSum::default();
    let mut s4 = CompensatedSum::default();
    for &x in samples {
        let d = x - mu;
        let d2 = d * d;
        s2.add(d2);
        s3.add(d2 * d);
        s4.add(d2 * d2);
    }
    let mf = m as f64;
    let (m2, m3, m4) = (s2.value() / mf, s3.value() / mf, s4.value() / mf);
    let variance = s2.value() / (mf - 1.0);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let big_g1 = g1 * (mf * (mf - 1.0)).sqrt() / (mf - 2.0);
        let big_g2 = ((mf + 1.0) * g2 + 6.0) * (mf - 1.0) / ((mf - 2.0) * (mf - 3.0));
        (big_g1, big_g2)
    } else {
        (0.0, 0.0)
    };
    Ok(Moments {
        mean: mu,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Complementary Kolmogorov distribution `Q(λ) = P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        // P(K ≤ λ) = (√(2π)/λ) Σ_{j≥1} exp(−(2j−1)²π²/(8λ²)).
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            sum += (c * odd * odd).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        // Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2j²λ²).
        let mut sum = 0.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / m - f;
            let below = f - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value with the finite-sample factor `√M + 0.12 + 0.11/√M`.
pub fn ks_p_value(statistic: f64, m: usize) -> f64 {
    let rm = (m as f64).sqrt();
    kolmogorov_survival((rm + 0.12 + 0.11 / rm) * statistic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

/// Moment statistics plus a KS test against `N(0, target_variance)`.
pub fn normality_tests(samples: &[f64], target_variance: f64) -> Result<NormalityReport> {
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(param(format!(
            "normality tests need at least {MIN_NORMALITY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(target_variance.is_finite() && target_variance > 0.0) {
        return Err(param(format!(
            "target variance must be positive, got {target_variance}"
        )));
    }
    let mo = moments(samples)?;
    let normal = Normal::new(0.0, target_variance.sqrt())
        .map_err(|e| param(format!("normal target: {e}")))?;
    let d = ks_statistic(samples, |x| normal.cdf(x));
    Ok(NormalityReport {
        skewness: mo.skewness,
        excess_kurtosis: mo.excess_kurtosis,
        ks_statistic: d,
        ks_p_value: ks_p_value(d, samples.len()),
    })
}

/// `Ẑ(x) = (1/M) Σ_m e^{i x S_m}` at each grid point.
pub fn empirical_char_function(samples: &[f64], x_grid: &[f64]) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(param("empirical characteristic function needs samples"));
    }
    let m = samples.len() as f64;
    Ok(x_grid
        .iter()
        .map(|&x| {
            let mut re = CompensatedSum::default();
            let mut im = CompensatedSum::default();
            for &s in samples {
                let (sin, cos) = (x * s).sin_cos();
                re.add(cos);
                im.add(sin);
            }
            Complex64::new(re.value() / m, im.value() / m)
        })
        .collect())
}

//! Adaptive Gauss–Kronrod (7/15) integration on finite intervals, plus a
//! doubling driver for `[0, ∞)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Nodes and weights as tabulated, digits beyond f64 included.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// Kronrod estimate of `∫|f|`, which bounds attainable roundoff.
    magnitude: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut magnitude = fc.abs() * WGK[7];
    for (k, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let (fl, fr) = (f(center - dx)?, f(center + dx)?);
        let s = fl + fr;
        kron += w * s;
        magnitude += w * (fl.abs() + fr.abs());
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        magnitude: magnitude * half.abs(),
    })
}

/// Integrates `f` over `[a, b]`, first splitting at the interior
/// `breakpoints` (points where the integrand is sharply peaked or kinked).
pub fn integrate<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        heap.push(kronrod(&mut f, left, right)?);
        left = right;
    }

    loop {
        let (total, err, magnitude) = heap.iter().fold((0.0, 0.0, 0.0), |(v, e, m), s| {
            (v + s.value, e + s.error, m + s.magnitude)
        });
        let roundoff = 50.0 * f64::EPSILON * magnitude;
        if err <= tol.abs.max(tol.rel * total.abs()).max(roundoff) {
            return Ok(sign * total);
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{lo}, {hi}] stopped at {MAX_SEGMENTS} segments \
                 (estimate {total:e}, error {err:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point; accept it.
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            continue;
        }
        heap.push(kronrod(&mut f, worst.a, mid)?);
        heap.push(kronrod(&mut f, mid, worst.b)?);
    }
}

/// Integrates over `[0, ∞)` as a sum over `[0, 1], [1, 2], [2, 4], …`,
/// stopping once a block contributes less than `rel` of the running total
/// twice in a row. Gives up at `upper_cap` with the block partial sums.
pub fn integrate_half_line<F>(mut f: F, tol: Tolerance, upper_cap: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = integrate(&mut f, 0.0, 1.0, &[], tol)?;
    let mut partial = vec![total];
    let mut quiet = 0;
    let mut a = 1.0;
    while a < upper_cap {
        // Accuracy is relative to the running total, not to the block.
        let block_tol = Tolerance::new(tol.abs.max(0.1 * tol.rel * total.abs()), tol.rel);
        let block = integrate(&mut f, a, 2.0 * a, &[], block_tol)?;
        total += block;
        partial.push(total);
        if block.abs() <= tol.rel * total.abs() || block.abs() <= tol.abs {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        a *= 2.0;
    }
    Err(Error::Divergence {
        message: format!("integral over [0, {upper_cap}] has not settled"),
        partial_sums: partial,
    })
}

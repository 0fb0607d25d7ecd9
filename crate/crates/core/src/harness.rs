//! Monte Carlo experiment engine.
//!
//! A run draws `M` replicas of the ensemble, diagonalizes each one and
//! records the linear statistics and resolvent traces requested by the
//! configuration. Replicas are evaluated in parallel but every replica is a
//! pure function of `(seed, index)` and all reductions run sequentially in
//! index order, so reports do not depend on the worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, ComplexPoint, Spectrum};
use crate::ensemble::{self, EnsembleKind, EnsembleParams, EntryMoments};
use crate::error::{Error, Result};
use crate::stats::{self, NormalityReport, MIN_NORMALITY_SAMPLES};
use crate::testfn::TestFunction;
use crate::theory::{self, QuadratureRule};

/// Minimum number of replicas for covariance-kernel reporting.
pub const MIN_KERNEL_REPLICAS: usize = 100;
/// Grid size of the semicircle KS distance.
pub const SEMICIRCLE_GRID: usize = 512;
pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatisticFlags {
    pub clt: bool,
    pub kernel: bool,
    pub semicircle: bool,
    pub variance_bound: bool,
    pub char_function: bool,
}

impl Default for StatisticFlags {
    fn default() -> Self {
        Self {
            clt: true,
            kernel: false,
            semicircle: false,
            variance_bound: false,
            char_function: true,
        }
    }
}

/// Acceptance thresholds. Sample-size dependent limits are expressed in
/// standard deviations and resolved against `M` at check time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed relative deviation of the empirical variance from its target.
    pub variance_rel: f64,
    /// `|skewness| < normality_sigmas·√(6/M)`,
    /// `|excess kurtosis| < normality_sigmas·√(24/M)`.
    pub normality_sigmas: f64,
    /// KS p-value below which normality is rejected.
    pub ks_level: f64,
    /// `|Ẑ(x) − e^{−x²V/2}| < char_sigmas/√M`.
    pub char_sigmas: f64,
    /// Allowed `|empirical/predicted − 1|` for kernel checks.
    pub kernel_rel: f64,
    pub semicircle_ks: f64,
    pub degeneracy_threshold: f64,
    /// Rescaled resolvent variance must stay below this multiple of the
    /// kernel limit.
    pub bound_envelope: f64,
    /// `(p/n) Var N_n[φ] ≤ sobolev_envelope · ‖φ‖²_s`.
    pub sobolev_envelope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            variance_rel: 0.25,
            normality_sigmas: 3.3,
            ks_level: 0.01,
            char_sigmas: 4.0,
            kernel_rel: 0.4,
            semicircle_ks: 0.05,
            degeneracy_threshold: theory::DEFAULT_DEGENERACY_THRESHOLD,
            bound_envelope: 10.0,
            sobolev_envelope: 100.0,
        }
    }
}

impl Tolerances {
    pub fn skew_limit(&self, m: usize) -> f64 {
        self.normality_sigmas * (6.0 / m as f64).sqrt()
    }

    pub fn kurtosis_limit(&self, m: usize) -> f64 {
        self.normality_sigmas * (24.0 / m as f64).sqrt()
    }

    pub fn char_limit(&self, m: usize) -> f64 {
        self.char_sigmas / (m as f64).sqrt()
    }
}

/// A kernel argument: a point of the upper half-plane or its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelArg {
    pub point: ComplexPoint,
    #[serde(default)]
    pub conjugate: bool,
}

impl KernelArg {
    pub fn new(point: ComplexPoint, conjugate: bool) -> Self {
        Self { point, conjugate }
    }

    pub fn value(&self) -> Complex64 {
        if self.conjugate {
            self.point.conj()
        } else {
            self.point.to_complex()
        }
    }

    fn apply(&self, trace: Complex64) -> Complex64 {
        if self.conjugate {
            trace.conj()
        } else {
            trace
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleParams,
    pub replicas: usize,
    pub test_functions: Vec<TestFunction>,
    pub resolvent_points: Vec<ComplexPoint>,
    /// Pairs for the kernel check; empty means `(z, z̄)` for every
    /// resolvent point.
    pub kernel_pairs: Vec<(KernelArg, KernelArg)>,
    pub statistics: StatisticFlags,
    pub tolerances: Tolerances,
    /// Grid of the empirical characteristic function.
    pub char_grid: Vec<f64>,
    /// Point of `char_grid` checked against the Gaussian limit.
    pub char_check_x: f64,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleParams, replicas: usize) -> Self {
        Self {
            ensemble,
            replicas,
            test_functions: Vec::new(),
            resolvent_points: Vec::new(),
            kernel_pairs: Vec::new(),
            statistics: StatisticFlags::default(),
            tolerances: Tolerances::default(),
            char_grid: default_char_grid(),
            char_check_x: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.replicas == 0 {
            return Err(Error::Config("at least one replica is required".into()));
        }
        if self.statistics.clt && self.replicas < MIN_NORMALITY_SAMPLES {
            return Err(Error::Config(format!(
                "normality testing needs at least {MIN_NORMALITY_SAMPLES} replicas, got {}",
                self.replicas
            )));
        }
        if self.statistics.kernel && self.replicas < MIN_KERNEL_REPLICAS {
            return Err(Error::Config(format!(
                "kernel checks need at least {MIN_KERNEL_REPLICAS} replicas, got {}",
                self.replicas
            )));
        }
        if self.statistics.kernel && self.resolvent_points.is_empty() {
            return Err(Error::Config("kernel checks need resolvent points".into()));
        }
        for (a, b) in &self.kernel_pairs {
            for arg in [a, b] {
                if !self.resolvent_points.contains(&arg.point) {
                    return Err(Error::Config(format!(
                        "kernel point ({}, {}) is not among the resolvent points",
                        arg.point.re(),
                        arg.point.im()
                    )));
                }
            }
        }
        if self.ensemble.kind == EnsembleKind::WignerComparison
            && self.ensemble.p >= self.ensemble.n as f64
        {
            return Err(Error::Config(
                "Wigner comparison needs p < n (entry variance vanishes at p = n)".into(),
            ));
        }
        if self.char_grid.iter().any(|x| !x.is_finite()) || !self.char_check_x.is_finite() {
            return Err(Error::Config("characteristic function grid must be finite".into()));
        }
        Ok(())
    }

    fn effective_kernel_pairs(&self) -> Vec<(KernelArg, KernelArg)> {
        if !self.kernel_pairs.is_empty() {
            return self.kernel_pairs.clone();
        }
        self.resolvent_points
            .iter()
            .map(|&z| (KernelArg::new(z, false), KernelArg::new(z, true)))
            .collect()
    }
}

pub fn default_char_grid() -> Vec<f64> {
    (-8..=8).map(|i| 0.25 * i as f64).collect()
}

/// Factor applied to eigenvalues before statistics are formed: one for the
/// dilute ensemble, `1/√(n·Var a)` for the Wigner comparison so that the
/// entries have variance `1/n`.
pub fn spectral_scale(params: &EnsembleParams) -> f64 {
    match params.kind {
        EnsembleKind::DilutedGraph => 1.0,
        EnsembleKind::WignerComparison => 1.0 / (1.0 - params.edge_probability()).sqrt(),
    }
}

/// Factor turning `N_n[φ] − mean` into the fluctuation whose limit is
/// compared: `(p/n)^{1/2}` in the dilute regime, one for the Wigner
/// comparison.
pub fn fluctuation_scale(params: &EnsembleParams) -> f64 {
    match params.kind {
        EnsembleKind::DilutedGraph => params.edge_probability().sqrt(),
        EnsembleKind::WignerComparison => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: u64,
    /// `N_n[φ]` per test function.
    pub statistics: Vec<f64>,
    /// `γ_n(z)` per resolvent point.
    pub traces: Vec<Complex64>,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
    /// KS distance of this replica's spectrum to the semicircle law.
    pub semicircle_ks: f64,
}

/// One replica: sample, diagonalize, evaluate.
pub fn run_replica(
    params: &EnsembleParams,
    replica: u64,
    functions: &[TestFunction],
    points: &[ComplexPoint],
) -> Result<(ReplicaResult, Spectrum)> {
    let wrap = |e: Error| Error::Replica {
        replica,
        source: Box::new(e),
    };
    let matrix = ensemble::sample(params, replica).map_err(wrap)?;
    let spectrum = eigen::eigenvalues(&matrix, eigen::DEFAULT_TOLERANCE)
        .map_err(wrap)?
        .scaled(spectral_scale(params));
    let statistics = functions
        .iter()
        .map(|f| eigen::linear_statistic(&spectrum, f))
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    let traces = points
        .iter()
        .map(|&z| eigen::resolvent_trace(&spectrum, z))
        .collect();
    let result = ReplicaResult {
        replica,
        statistics,
        traces,
        spectrum_min: spectrum.min(),
        spectrum_max: spectrum.max(),
        semicircle_ks: semicircle_check(std::slice::from_ref(&spectrum)),
    };
    Ok((result, spectrum))
}

/// Runs replicas `0..count` on `workers` threads and returns them in index
/// order. Spectra are kept only when `keep_spectra` is set.
pub fn run_replicas(
    params: &EnsembleParams,
    count: usize,
    functions: &[TestFunction],
    points: &[ComplexPoint],
    keep_spectra: bool,
    workers: usize,
) -> Result<(Vec<ReplicaResult>, Vec<Spectrum>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<(ReplicaResult, Option<Spectrum>)>> = pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| {
                run_replica(params, r, functions, points)
                    .map(|(res, s)| (res, keep_spectra.then_some(s)))
            })
            .collect()
    });
    let mut results = Vec::with_capacity(count);
    let mut spectra = Vec::new();
    // First failure in index order, independent of scheduling.
    for outcome in outcomes {
        let (res, s) = outcome?;
        results.push(res);
        spectra.extend(s);
    }
    Ok((results, spectra))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPoint {
    pub x: f64,
    pub value: Complex64,
    /// `e^{−x²V/2}` when a Gaussian target exists.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub function: TestFunction,
    /// Mean of `N_n[φ]` over replicas; the centering constant.
    pub sample_mean: f64,
    /// `S_m = scale·(N_n[φ]_m − sample_mean)`.
    pub fluctuations: Vec<f64>,
    pub empirical_variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS test against the Gaussian target; absent when degenerate.
    pub normality: Option<NormalityReport>,
    pub char_function: Vec<CharPoint>,
    /// `I[φ]` (dilute regime only).
    pub condition_integral: Option<f64>,
    /// Limiting variance of the fluctuations.
    pub target_variance: f64,
    pub degenerate: bool,
    /// Cutoff `[flat, support]` applied to polynomial parts in transforms and
    /// Sobolev norms; absent when no window is involved.
    pub window: Option<[f64; 2]>,
    /// `(p/n) Var N_n[φ]` against the Sobolev norm, when requested.
    pub sobolev_bound: Option<SobolevBound>,
    pub variance_pass: Option<bool>,
    pub normality_pass: Option<bool>,
    pub char_function_pass: Option<bool>,
}

/// Smoothness index of the Sobolev-bound check: just above the `3/2`
/// needed for the CLT.
pub const SOBOLEV_BOUND_S: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevBound {
    pub s: f64,
    pub norm_sq: f64,
    pub rescaled_variance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub z1: KernelArg,
    pub z2: KernelArg,
    /// `(p/n)·(1/(M−1)) Σ (γ_m(z₁) − γ̄(z₁))(γ_m(z₂) − γ̄(z₂))`.
    pub empirical: Complex64,
    pub predicted: Complex64,
    /// `empirical / predicted`.
    pub ratio: Complex64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicircleReport {
    pub ks_distance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

pub const REPORT_SCHEMA: &str = "dilute-clt/report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub schema: String,
    pub ensemble: EnsembleParams,
    pub replicas: usize,
    pub entry_moments: EntryMoments,
    pub fluctuation_scale: f64,
    pub spectral_scale: f64,
    /// Fluctuations are centered by the sample mean, which uses one degree
    /// of freedom.
    pub centering: String,
    pub functions: Vec<FunctionReport>,
    pub kernels: Vec<KernelReport>,
    pub semicircle: Option<SemicircleReport>,
    pub replica_results: Vec<ReplicaResult>,
    pub checks: Vec<Check>,
    /// All variance checks passed.
    pub variance_pass: bool,
    pub all_pass: bool,
}

/// Runs an experiment on the default worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CltReport> {
    run_experiment_with_workers(cfg, rayon::current_num_threads())
}

pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<CltReport> {
    cfg.validate()?;
    let (results, spectra) = run_replicas(
        &cfg.ensemble,
        cfg.replicas,
        &cfg.test_functions,
        &cfg.resolvent_points,
        cfg.statistics.semicircle,
        workers,
    )?;
    build_report(cfg, results, &spectra)
}

/// Aggregates replica results; exposed so stored results can be re-analysed.
pub fn build_report(
    cfg: &ExperimentConfig,
    results: Vec<ReplicaResult>,
    spectra: &[Spectrum],
) -> Result<CltReport> {
    let params = &cfg.ensemble;
    let m = results.len();
    let moments = ensemble::entry_moments(params)?;
    let scale = fluctuation_scale(params);
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();

    let mut functions = Vec::with_capacity(cfg.test_functions.len());
    for (idx, phi) in cfg.test_functions.iter().enumerate() {
        let raw: Vec<f64> = results.iter().map(|r| r.statistics[idx]).collect();
        let report = function_report(cfg, phi, &raw, scale, &moments)?;
        for (name, pass) in [
            ("variance", report.variance_pass),
            ("normality", report.normality_pass),
            ("char_function", report.char_function_pass),
            ("sobolev_bound", report.sobolev_bound.map(|b| b.pass)),
        ] {
            if let Some(pass) = pass {
                checks.push(Check {
                    name: format!("{name}[{phi}]"),
                    pass,
                });
            }
        }
        functions.push(report);
    }

    let mut kernels = Vec::new();
    if cfg.statistics.kernel {
        for (a, b) in cfg.effective_kernel_pairs() {
            let ia = index_of(&cfg.resolvent_points, a.point);
            let ib = index_of(&cfg.resolvent_points, b.point);
            let traces: Vec<(Complex64, Complex64)> = results
                .iter()
                .map(|r| (r.traces[ia], r.traces[ib]))
                .collect();
            let mut k = kernel_check(params, a, b, &traces)?;
            let pass = (k.ratio - 1.0).norm() <= tol.kernel_rel;
            k.pass = Some(pass);
            checks.push(Check {
                name: format!("kernel[{}, {}]", a.value(), b.value()),
                pass,
            });
            kernels.push(k);
        }
    }

    let semicircle = if cfg.statistics.semicircle && !spectra.is_empty() {
        let d = semicircle_check(spectra);
        let pass = d < tol.semicircle_ks;
        checks.push(Check {
            name: "semicircle".into(),
            pass,
        });
        Some(SemicircleReport {
            ks_distance: d,
            pass,
        })
    } else {
        None
    };

    let variance_pass = functions.iter().all(|f| f.variance_pass != Some(false));
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(CltReport {
        schema: REPORT_SCHEMA.into(),
        ensemble: *params,
        replicas: m,
        entry_moments: moments,
        fluctuation_scale: scale,
        spectral_scale: spectral_scale(params),
        centering: "sample-mean".into(),
        functions,
        kernels,
        semicircle,
        replica_results: results,
        checks,
        variance_pass,
        all_pass,
    })
}

fn index_of(points: &[ComplexPoint], z: ComplexPoint) -> usize {
    points
        .iter()
        .position(|&p| p == z)
        .expect("kernel points are validated against resolvent points")
}

fn function_report(
    cfg: &ExperimentConfig,
    phi: &TestFunction,
    raw: &[f64],
    scale: f64,
    moments: &EntryMoments,
) -> Result<FunctionReport> {
    let m = raw.len();
    let tol = &cfg.tolerances;
    let sample_mean = stats::mean(raw);
    let fluctuations: Vec<f64> = raw.iter().map(|x| scale * (x - sample_mean)).collect();
    let mo = stats::moments(&fluctuations)?;

    let (condition_integral, target, degenerate) = match cfg.ensemble.kind {
        EnsembleKind::DilutedGraph => {
            let v = theory::clt_variance_auto(phi, tol.degeneracy_threshold)?;
            (Some(v.condition_integral), v.variance, v.degenerate)
        }
        EnsembleKind::WignerComparison => {
            let kappa4 = moments.standardized_kappa4(cfg.ensemble.n);
            let rule = QuadratureRule::new(theory::DEFAULT_ORDER)?;
            let v = theory::wigner_variance(phi, kappa4, moments.w2, &rule)?;
            (None, v, v <= tol.degeneracy_threshold)
        }
    };
    let gaussian = cfg.statistics.clt && !degenerate;

    let normality = if gaussian {
        Some(stats::normality_tests(&fluctuations, target)?)
    } else {
        None
    };

    let char_values = if cfg.statistics.char_function {
        stats::empirical_char_function(&fluctuations, &cfg.char_grid)?
    } else {
        Vec::new()
    };
    let gaussian_cf = |x: f64| (-0.5 * x * x * target).exp();
    let char_function: Vec<CharPoint> = cfg
        .char_grid
        .iter()
        .zip(&char_values)
        .map(|(&x, &value)| CharPoint {
            x,
            value,
            target: (!degenerate).then(|| gaussian_cf(x)),
        })
        .collect();

    let variance_pass = gaussian.then(|| (mo.variance - target).abs() <= tol.variance_rel * target);
    let normality_pass = normality.map(|r| {
        r.skewness.abs() < tol.skew_limit(m)
            && r.excess_kurtosis.abs() < tol.kurtosis_limit(m)
            && r.ks_p_value > tol.ks_level
    });
    let char_function_pass = (gaussian && cfg.statistics.char_function).then(|| {
        let z = stats::empirical_char_function(&fluctuations, &[cfg.char_check_x])
            .expect("fluctuations are non-empty")[0];
        (z - gaussian_cf(cfg.char_check_x)).norm() < tol.char_limit(m)
    });

    let sobolev_bound = if cfg.statistics.variance_bound
        && cfg.ensemble.kind == EnsembleKind::DilutedGraph
    {
        let norm = phi.sobolev_norm(SOBOLEV_BOUND_S)?.value;
        let rescaled = cfg.ensemble.edge_probability() * stats::moments(raw)?.variance;
        Some(SobolevBound {
            s: SOBOLEV_BOUND_S,
            norm_sq: norm * norm,
            rescaled_variance: rescaled,
            pass: rescaled <= tol.sobolev_envelope * norm * norm,
        })
    } else {
        None
    };

    Ok(FunctionReport {
        function: phi.clone(),
        sample_mean,
        fluctuations,
        empirical_variance: mo.variance,
        skewness: mo.skewness,
        excess_kurtosis: mo.excess_kurtosis,
        normality,
        char_function,
        condition_integral,
        target_variance: target,
        degenerate,
        window: phi
            .uses_window()
            .then_some([crate::testfn::WINDOW_FLAT, crate::testfn::WINDOW_SUPPORT]),
        sobolev_bound,
        variance_pass,
        normality_pass,
        char_function_pass,
    })
}

/// Empirical `(p/n)`-rescaled covariance of resolvent traces against the
/// limiting kernel. Conjugate arguments use conjugated traces.
pub fn kernel_check(
    params: &EnsembleParams,
    z1: KernelArg,
    z2: KernelArg,
    traces: &[(Complex64, Complex64)],
) -> Result<KernelReport> {
    let m = traces.len();
    if m < MIN_KERNEL_REPLICAS {
        return Err(Error::Config(format!(
            "kernel check needs at least {MIN_KERNEL_REPLICAS} replicas, got {m}"
        )));
    }
    let g1: Vec<Complex64> = traces.iter().map(|t| z1.apply(t.0)).collect();
    let g2: Vec<Complex64> = traces.iter().map(|t| z2.apply(t.1)).collect();
    let mean1 = complex_mean(&g1);
    let mean2 = complex_mean(&g2);
    let mut re = eigen::CompensatedSum::default();
    let mut im = eigen::CompensatedSum::default();
    for (a, b) in g1.iter().zip(&g2) {
        let prod = (a - mean1) * (b - mean2);
        re.add(prod.re);
        im.add(prod.im);
    }
    let cov = Complex64::new(re.value(), im.value()) / (m as f64 - 1.0);
    let empirical = params.edge_probability() * cov;
    let predicted = theory::covariance_kernel(z1.value(), z2.value())?;
    Ok(KernelReport {
        z1,
        z2,
        empirical,
        predicted,
        ratio: empirical / predicted,
        pass: None,
    })
}

fn complex_mean(values: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    Complex64::new(stats::mean(&re), stats::mean(&im))
}

fn grid_half_width(spectra: &[Spectrum]) -> f64 {
    spectra
        .iter()
        .flat_map(|s| [s.min().abs(), s.max().abs()])
        .filter(|v| v.is_finite())
        .fold(2.5, f64::max)
}

/// Pooled empirical CDF of `spectra` at `x`.
fn pooled_cdf(spectra: &[Spectrum], x: f64) -> f64 {
    let total: usize = spectra.iter().map(Spectrum::len).sum();
    let below: usize = spectra
        .iter()
        .map(|s| s.values().partition_point(|&v| v <= x))
        .sum();
    below as f64 / total as f64
}

/// Largest gap between the pooled empirical CDF and the semicircle CDF over
/// 512 equally spaced points of `[-L, L)`, `L = max(2.5, max |λ|)`; the grid
/// contains zero.
pub fn semicircle_check(spectra: &[Spectrum]) -> f64 {
    if spectra.iter().all(Spectrum::is_empty) {
        return 0.0;
    }
    let l = grid_half_width(spectra);
    let half = (SEMICIRCLE_GRID / 2) as f64;
    (0..SEMICIRCLE_GRID)
        .map(|k| {
            let x = l * (k as f64 / half - 1.0);
            (pooled_cdf(spectra, x) - theory::semicircle_cdf(x)).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub empirical_density: f64,
    pub semicircle_density: f64,
}

/// 64-bin density histogram of the pooled spectra on a symmetric range
/// that contains every eigenvalue.
pub fn spectral_histogram(spectra: &[Spectrum]) -> Vec<HistogramBin> {
    let r = 1.05 * spectra
        .iter()
        .flat_map(|s| [s.min().abs(), s.max().abs()])
        .filter(|v| v.is_finite())
        .fold(2.0, f64::max);
    let width = 2.0 * r / HISTOGRAM_BINS as f64;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    let mut total = 0usize;
    for s in spectra {
        for &v in s.values() {
            let bin = (((v + r) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
            total += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let center = -r + (i as f64 + 0.5) * width;
            HistogramBin {
                center,
                empirical_density: if total == 0 {
                    0.0
                } else {
                    c as f64 / (total as f64 * width)
                },
                semicircle_density: theory::semicircle_density(center),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub p: f64,
    /// `(p/n) Var γ_n(z)`.
    pub rescaled_variance: f64,
    /// Standard error of `rescaled_variance` across replicas.
    pub standard_error: f64,
    /// `C(z, z̄)`.
    pub kernel_prediction: f64,
    pub ratio: f64,
    pub within_envelope: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevRow {
    pub n: usize,
    /// `(p/n) Var N_n[φ]`.
    pub rescaled_variance: f64,
    pub sobolev_norm_sq: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub theta: f64,
    pub z: ComplexPoint,
    pub replicas: usize,
    pub rows: Vec<BoundRow>,
    /// Dimension whose rescaled variance is closest to the kernel limit.
    pub closest_n: usize,
    pub sobolev_function: Option<TestFunction>,
    pub sobolev_s: f64,
    pub sobolev_rows: Vec<SobolevRow>,
    pub all_within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    pub theta: f64,
    pub z: ComplexPoint,
    pub replicas: usize,
    pub seed: u64,
    /// Test function for the Sobolev-norm bound; `None` skips it.
    pub sobolev_function: Option<TestFunction>,
    /// Smoothness index of the Sobolev bound.
    pub sobolev_s: f64,
    pub tolerances: Tolerances,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("sweep needs a non-empty n grid".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!(
                "exponent θ must lie in (0, 1) for the dilute regime, got {}",
                self.theta
            )));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 100) {
            return Err(Error::Config(format!("sweep dimensions must be at least 100, got {n}")));
        }
        if self.replicas < 2 {
            return Err(Error::Config("sweep needs at least two replicas".into()));
        }
        Ok(())
    }

    /// `p = ⌊n^θ⌋`.
    pub fn intensity(&self, n: usize) -> f64 {
        (n as f64).powf(self.theta).floor()
    }
}

/// Monte Carlo estimates of `(p/n) Var γ_n(z)` along `n` with `p = ⌊n^θ⌋`,
/// compared with the kernel limit `C(z, z̄)`.
pub fn variance_bound_check(cfg: &SweepConfig, workers: usize) -> Result<BoundTable> {
    cfg.validate()?;
    let kernel = theory::covariance_kernel(cfg.z.to_complex(), cfg.z.conj())?.re;
    let tol = &cfg.tolerances;
    let functions: Vec<TestFunction> = cfg.sobolev_function.iter().cloned().collect();
    let norm_sq = match &cfg.sobolev_function {
        Some(f) => {
            let v = f.sobolev_norm(cfg.sobolev_s)?.value;
            v * v
        }
        None => 0.0,
    };
    let mut rows = Vec::new();
    let mut sobolev_rows = Vec::new();
    for &n in &cfg.n_grid {
        let p = cfg.intensity(n).max(1.0);
        let params = EnsembleParams::diluted(n, p, cfg.seed)?;
        let (results, _) = run_replicas(&params, cfg.replicas, &functions, &[cfg.z], false, workers)?;
        let traces: Vec<Complex64> = results.iter().map(|r| r.traces[0]).collect();
        let (var, se) = variance_of_complex(&traces);
        let rescaled = params.edge_probability() * var;
        let ratio = rescaled / kernel;
        rows.push(BoundRow {
            n,
            p,
            rescaled_variance: rescaled,
            standard_error: params.edge_probability() * se,
            kernel_prediction: kernel,
            ratio,
            within_envelope: rescaled > 0.0 && rescaled <= tol.bound_envelope * kernel,
        });
        if cfg.sobolev_function.is_some() {
            let stat: Vec<f64> = results.iter().map(|r| r.statistics[0]).collect();
            let var = params.edge_probability() * stats::moments(&stat)?.variance;
            sobolev_rows.push(SobolevRow {
                n,
                rescaled_variance: var,
                sobolev_norm_sq: norm_sq,
                pass: var <= tol.sobolev_envelope * norm_sq,
            });
        }
    }
    let closest_n = rows
        .iter()
        .min_by(|a, b| {
            (a.rescaled_variance - kernel)
                .abs()
                .total_cmp(&(b.rescaled_variance - kernel).abs())
        })
        .map(|r| r.n)
        .unwrap_or(0);
    let all_within_envelope = rows.iter().all(|r| r.within_envelope)
        && sobolev_rows.iter().all(|r| r.pass);
    Ok(BoundTable {
        theta: cfg.theta,
        z: cfg.z,
        replicas: cfg.replicas,
        rows,
        closest_n,
        sobolev_function: cfg.sobolev_function.clone(),
        sobolev_s: cfg.sobolev_s,
        sobolev_rows,
        all_within_envelope,
    })
}

/// `(1/(M−1)) Σ |γ_m − γ̄|²` and its standard error
/// `sd(|γ_m − γ̄|²)/√M`.
fn variance_of_complex(values: &[Complex64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = complex_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).norm_sqr()).collect();
    let acc: eigen::CompensatedSum = sq.iter().copied().collect();
    let var = acc.value() / (m - 1.0);
    let avg = acc.value() / m;
    let spread: eigen::CompensatedSum = sq.iter().map(|s| (s - avg) * (s - avg)).collect();
    let se = (spread.value() / (m - 1.0)).sqrt() / m.sqrt() * m / (m - 1.0);
    (var, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(n: usize, p: f64, m: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(EnsembleParams::diluted(n, p, 7).unwrap(), m);
        cfg.test_functions = vec![TestFunction::monomial(2), TestFunction::monomial(1)];
        cfg.resolvent_points = vec![ComplexPoint::new(0.0, 2.0).unwrap()];
        cfg
    }

    #[test]
    fn fluctuations_are_centered() {
        let report = run_experiment_with_workers(&small_cfg(100, 10.0, 30), 2).unwrap();
        let f = &report.functions[0];
        assert_eq!(f.fluctuations.len(), 30);
        let sum: f64 = f.fluctuations.iter().sum();
        let max = f.fluctuations.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(sum.abs() <= 30.0 * f64::EPSILON * max.max(1e-300) * 4.0, "{sum}");
        assert!(f.empirical_variance >= 0.0);
        let ks = f.normality.unwrap();
        assert!((0.0..=1.0).contains(&ks.ks_p_value));
    }

    #[test]
    fn sobolev_bound_is_reported_on_request() {
        let mut cfg = small_cfg(100, 10.0, 30);
        cfg.test_functions = vec![TestFunction::gaussian(0.0, 1.0).unwrap(), TestFunction::monomial(2)];
        cfg.statistics.variance_bound = true;
        let report = run_experiment_with_workers(&cfg, 1).unwrap();
        let b = report.functions[0].sobolev_bound.unwrap();
        assert_eq!(b.s, SOBOLEV_BOUND_S);
        assert!(b.pass && b.norm_sq > 0.0);
        assert!(report.functions[0].window.is_none());
        assert_eq!(report.functions[1].window, Some([3.0, 4.0]));
        assert!(report.checks.iter().any(|c| c.name == "sobolev_bound[gaussian:0.0,1.0]"));
    }

    #[test]
    fn degenerate_function_is_not_compared() {
        let report = run_experiment_with_workers(&small_cfg(100, 10.0, 30), 1).unwrap();
        let lin = &report.functions[1];
        assert!(lin.degenerate);
        assert!(lin.normality.is_none());
        assert!(lin.variance_pass.is_none());
        assert!(lin.char_function_pass.is_none());
        assert!(lin.empirical_variance.is_finite());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = small_cfg(80, 8.0, 30);
        let a = run_experiment_with_workers(&cfg, 1).unwrap();
        let b = run_experiment_with_workers(&cfg, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn replica_prefix_is_stable() {
        let params = EnsembleParams::diluted(60, 6.0, 3).unwrap();
        let f = [TestFunction::monomial(2)];
        let (short, _) = run_replicas(&params, 5, &f, &[], false, 2).unwrap();
        let (long, _) = run_replicas(&params, 10, &f, &[], false, 2).unwrap();
        assert_eq!(short[..], long[..5]);
    }

    #[test]
    fn config_checks() {
        let mut cfg = small_cfg(50, 5.0, 20);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.statistics.clt = false;
        assert!(cfg.validate().is_ok());
        cfg.statistics.kernel = true;
        assert!(cfg.validate().is_err());
        cfg.replicas = 100;
        assert!(cfg.validate().is_ok());
        cfg.kernel_pairs = vec![(
            KernelArg::new(ComplexPoint::new(0.0, 3.0).unwrap(), false),
            KernelArg::new(ComplexPoint::new(0.0, 2.0).unwrap(), true),
        )];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kernel_of_identical_replicas_is_zero() {
        let params = EnsembleParams::diluted(50, 5.0, 1).unwrap();
        let z = ComplexPoint::new(0.0, 2.0).unwrap();
        let (res, _) = run_replica(&params, 0, &[], &[z]).unwrap();
        let t = res.traces[0];
        let traces = vec![(t, t); 120];
        let k = kernel_check(&params, KernelArg::new(z, false), KernelArg::new(z, true), &traces)
            .unwrap();
        assert_eq!(k.empirical, Complex64::new(0.0, 0.0));
        let expected = (3.0 - 2.0 * 2f64.sqrt()).powi(2) / 4.0;
        assert!((k.predicted.re - expected).abs() < 1e-15);
        let same = kernel_check(&params, KernelArg::new(z, false), KernelArg::new(z, false), &traces)
            .unwrap();
        assert!((same.predicted.re + expected).abs() < 1e-15);
        assert!(kernel_check(&params, KernelArg::new(z, false), KernelArg::new(z, true), &traces[..99]).is_err());
    }

    fn semicircle_quantile(u: f64) -> f64 {
        let (mut lo, mut hi) = (-2.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if theory::semicircle_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn semicircle_distance_examples() {
        let n = 512;
        let values: Vec<f64> = (0..n).map(|i| semicircle_quantile((i as f64 + 0.5) / n as f64)).collect();
        let s = Spectrum::from_values(values).unwrap();
        assert!(semicircle_check(&[s]) < 2.0 / 512.0);

        let zero = Spectrum::from_values(vec![0.0; 10]).unwrap();
        assert_eq!(semicircle_check(std::slice::from_ref(&zero)), 0.5);

        let h = spectral_histogram(&[zero]);
        let width = h[1].center - h[0].center;
        let mass: f64 = h.iter().map(|b| b.empirical_density * width).sum();
        assert!((mass - 1.0).abs() < 1e-9);
        assert_eq!(h.len(), HISTOGRAM_BINS);
    }

    #[test]
    fn resolvent_variance_decays_with_height() {
        let base = SweepConfig {
            n_grid: vec![100],
            theta: 0.5,
            z: ComplexPoint::new(0.0, 2.0).unwrap(),
            replicas: 60,
            seed: 5,
            sobolev_function: Some(TestFunction::gaussian(0.0, 1.0).unwrap()),
            sobolev_s: 1.75,
            tolerances: Tolerances::default(),
        };
        let low = variance_bound_check(&base, 2).unwrap();
        let high = variance_bound_check(
            &SweepConfig {
                z: ComplexPoint::new(0.0, 4.0).unwrap(),
                ..base.clone()
            },
            2,
        )
        .unwrap();
        assert!(high.rows[0].rescaled_variance < low.rows[0].rescaled_variance);
        let k2 = theory::covariance_kernel(Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)).unwrap();
        let k4 = theory::covariance_kernel(Complex64::new(0.0, 4.0), Complex64::new(0.0, -4.0)).unwrap();
        assert!(k4.re < k2.re);
        assert!(low.sobolev_rows[0].pass);
        assert_eq!(low.rows[0].p, 10.0);

        let bad = SweepConfig { theta: 1.0, ..base.clone() };
        assert!(variance_bound_check(&bad, 1).is_err());
        let empty = SweepConfig { n_grid: vec![], ..base };
        assert!(variance_bound_check(&empty, 1).is_err());
    }
}

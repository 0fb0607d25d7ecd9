//! Monte Carlo and numerical tools for linear eigenvalue statistics of
//! sparse random matrices with zero-mean entries.
//!
//! The ensemble is a symmetric `n × n` matrix whose off-diagonal entries
//! take the value `1/√p − √p/n` with probability `p/n` and `−√p/n`
//! otherwise. For `p ≪ n` the centered statistic `N_n[φ] = Σ φ(λ_i)`,
//! rescaled by `(p/n)^{1/2}`, is asymptotically Gaussian with a variance
//! given by an arcsine-law integral.
//!
//! * [`ensemble`] samples matrices reproducibly per `(seed, replica)`.
//! * [`eigen`] diagonalizes them and evaluates statistics.
//! * [`testfn`] describes test functions, their Fourier transforms and
//!   Sobolev norms.
//! * [`theory`] computes limiting variances and covariance kernels.
//! * [`harness`] runs experiments and checks them against theory.

pub mod config;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod quad;
pub mod report;
pub mod stats;
pub mod testfn;
pub mod theory;

pub use eigen::{eigenvalues, linear_statistic, resolvent_trace, ComplexPoint, Spectrum};
pub use ensemble::{sample, EnsembleKind, EnsembleParams, SymmetricMatrix};
pub use error::{Error, Result};
pub use harness::{run_experiment, CltReport, ExperimentConfig};
pub use testfn::TestFunction;
pub use theory::{clt_variance, covariance_kernel, QuadratureRule, VarianceResult};

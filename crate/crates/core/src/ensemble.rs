//! Centered, rescaled adjacency ensemble of a dilute Erdős–Rényi graph.
//!
//! Every off-diagonal entry `a_ij = a_ji` (i < j) takes the value
//! `1/√p − √p/n` with probability `p/n` and `−√p/n` otherwise; the diagonal
//! is zero. The same two-point law realizes both the dilute regime
//! (`p ≪ n`) and the Wigner-type regime (`p = αn`).
//!
//! # Replica streams
//!
//! Replica `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `r` via `set_stream(r)`.
//! ChaCha is counter based, so each replica owns an independent stream and a
//! draw never depends on which worker produced it or in what order. Upper
//! triangle entries are consumed row by row (`i < j`, `j` fastest), one
//! Bernoulli draw per entry.

use rand::distr::{Bernoulli, Distribution};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `p ≪ n`; fluctuations are rescaled by `(p/n)^{1/2}`.
    DilutedGraph,
    /// `p = αn`; fluctuations are compared unrescaled against the Wigner
    /// variance after standardizing the entry variance to `1/n`.
    WignerComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub p: f64,
    pub kind: EnsembleKind,
    pub seed: u64,
}

impl EnsembleParams {
    pub fn new(n: usize, p: f64, kind: EnsembleKind, seed: u64) -> Result<Self> {
        let params = Self { n, p, kind, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn diluted(n: usize, p: f64, seed: u64) -> Result<Self> {
        Self::new(n, p, EnsembleKind::DilutedGraph, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(param(format!("matrix dimension must be at least 2, got {}", self.n)));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(param(format!("edge intensity must be positive, got {}", self.p)));
        }
        if self.p > self.n as f64 {
            return Err(param(format!(
                "edge intensity {} exceeds dimension {}",
                self.p, self.n
            )));
        }
        Ok(())
    }

    /// Edge probability `p/n`.
    pub fn edge_probability(&self) -> f64 {
        self.p / self.n as f64
    }

    pub fn law(&self) -> EntryLaw {
        let n = self.n as f64;
        let q = self.edge_probability();
        EntryLaw {
            // (1 − p/n)/√p is 1/√p − √p/n written so that p = n gives an exact zero.
            edge_value: (1.0 - q) / self.p.sqrt(),
            background_value: -self.p.sqrt() / n,
            edge_probability: q,
        }
    }
}

/// The two admissible off-diagonal values and the probability of the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryLaw {
    pub edge_value: f64,
    pub background_value: f64,
    pub edge_probability: f64,
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from rows, rejecting anything that is not square and
    /// exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(param("matrix rows must all have length n"));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j].to_bits() != entries[j * n + i].to_bits() {
                    return Err(param(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)` together.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.entries.iter().map(|a| a * a).sum()
    }

    /// Largest absolute row sum; an upper bound on the operator norm.
    pub fn max_row_sum(&self) -> f64 {
        self.entries
            .chunks(self.n)
            .map(|r| r.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Deterministic random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Draws replica `replica` of the ensemble.
pub fn sample(params: &EnsembleParams, replica: u64) -> Result<SymmetricMatrix> {
    params.validate()?;
    let law = params.law();
    let coin = Bernoulli::new(law.edge_probability)
        .map_err(|e| param(format!("edge probability: {e}")))?;
    let mut rng = replica_rng(params.seed, replica);
    let n = params.n;
    let mut m = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if coin.sample(&mut rng) {
                law.edge_value
            } else {
                law.background_value
            };
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Closed-form moments of the entry law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMoments {
    pub mean: f64,
    pub variance: f64,
    /// `n²(E a⁴ − 3 E²a²)`.
    pub kappa4: f64,
    /// `n E a_ii²`.
    pub w2: f64,
}

impl EntryMoments {
    /// Fourth cumulant of the entries after rescaling them to variance `1/n`,
    /// the normalization under which the Wigner variance formula holds.
    pub fn standardized_kappa4(&self, n: usize) -> f64 {
        let nv = n as f64 * self.variance;
        self.kappa4 / (nv * nv)
    }
}

pub fn entry_moments(params: &EnsembleParams) -> Result<EntryMoments> {
    params.validate()?;
    let n = params.n as f64;
    let p = params.p;
    let q = params.edge_probability();
    let r = 1.0 - q;
    // E a⁴ = q(1−q)⁴/p² + (1−q)p²/n⁴ and E a² = (1−q)/n, so
    // n²(E a⁴ − 3E²a²) = (n/p)(1−q)⁴ + (1−q)q² − 3(1−q)².
    let kappa4 = (n / p) * r.powi(4) + r * q * q - 3.0 * r * r;
    Ok(EntryMoments {
        mean: 0.0,
        variance: r / n,
        kappa4,
        w2: 0.0,
    })
}

//! TOML run configuration.
//!
//! ```toml
//! schema = "dilute-clt/1"
//! replicas = 400
//! resolvent_points = [[0.0, 2.0]]
//!
//! [ensemble]
//! n = 1000
//! p = 31.0
//! kind = "diluted-graph"
//! seed = 42
//!
//! [[test_functions]]
//! fn = "monomial:2"
//!
//! [[kernel_pairs]]
//! z1 = [0.0, 2.0]
//! z2 = [0.0, 2.0]
//! conjugate2 = true
//!
//! [statistics]
//! kernel = true
//!
//! [tolerances]
//! variance_rel = 0.25
//!
//! [sweep]
//! n_grid = [250, 500, 1000]
//! theta = 0.5
//! z = [0.0, 2.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigen::ComplexPoint;
use crate::ensemble::{EnsembleKind, EnsembleParams};
use crate::error::{Error, Result};
use crate::harness::{
    default_char_grid, ExperimentConfig, KernelArg, StatisticFlags, SweepConfig, Tolerances,
};
use crate::testfn::TestFunction;

pub const CONFIG_SCHEMA: &str = "dilute-clt/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: usize,
    pub p: f64,
    #[serde(default = "default_kind")]
    pub kind: EnsembleKind,
    #[serde(default)]
    pub seed: u64,
}

fn default_kind() -> EnsembleKind {
    EnsembleKind::DilutedGraph
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    #[serde(rename = "fn")]
    pub function: TestFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelPairEntry {
    pub z1: ComplexPoint,
    pub z2: ComplexPoint,
    #[serde(default)]
    pub conjugate1: bool,
    #[serde(default)]
    pub conjugate2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub n_grid: Vec<usize>,
    pub theta: f64,
    pub z: ComplexPoint,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub sobolev_fn: Option<TestFunction>,
    #[serde(default = "default_sobolev_s")]
    pub sobolev_s: f64,
}

fn default_sobolev_s() -> f64 {
    1.75
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub ensemble: EnsembleSection,
    pub replicas: usize,
    #[serde(default)]
    pub test_functions: Vec<FunctionEntry>,
    #[serde(default)]
    pub resolvent_points: Vec<ComplexPoint>,
    #[serde(default)]
    pub kernel_pairs: Vec<KernelPairEntry>,
    #[serde(default)]
    pub statistics: StatisticFlags,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_char_grid")]
    pub char_grid: Vec<f64>,
    #[serde(default = "default_char_x")]
    pub char_check_x: f64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_char_x() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {CONFIG_SCHEMA:?}",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn ensemble_params(&self) -> Result<EnsembleParams> {
        let e = &self.ensemble;
        EnsembleParams::new(e.n, e.p, e.kind, e.seed).map_err(|err| Error::Config(err.to_string()))
    }

    /// Validated experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        self.ensemble_params()?;
        let cfg = self.experiment_unchecked();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Experiment description without cross-field validation, for callers
    /// that adjust it before validating.
    pub fn experiment_unchecked(&self) -> ExperimentConfig {
        let e = &self.ensemble;
        ExperimentConfig {
            ensemble: EnsembleParams {
                n: e.n,
                p: e.p,
                kind: e.kind,
                seed: e.seed,
            },
            replicas: self.replicas,
            test_functions: self.test_functions.iter().map(|f| f.function.clone()).collect(),
            resolvent_points: self.resolvent_points.clone(),
            kernel_pairs: self
                .kernel_pairs
                .iter()
                .map(|k| {
                    (
                        KernelArg::new(k.z1, k.conjugate1),
                        KernelArg::new(k.z2, k.conjugate2),
                    )
                })
                .collect(),
            statistics: self.statistics,
            tolerances: self.tolerances,
            char_grid: self.char_grid.clone(),
            char_check_x: self.char_check_x,
        }
    }

    /// Validated sweep description; requires a `[sweep]` section.
    pub fn sweep(&self) -> Result<SweepConfig> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let cfg = SweepConfig {
            n_grid: s.n_grid.clone(),
            theta: s.theta,
            z: s.z,
            replicas: s.replicas.unwrap_or(self.replicas),
            seed: self.ensemble.seed,
            sobolev_function: s.sobolev_fn.clone(),
            sobolev_s: s.sobolev_s,
            tolerances: self.tolerances,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema = "dilute-clt/1"
replicas = 120
resolvent_points = [[0.0, 2.0]]

[ensemble]
n = 200
p = 14.0
seed = 9

[[test_functions]]
fn = "monomial:2"

[[test_functions]]
fn = "0.5*chebyshev:2+gaussian:0,1"

[[kernel_pairs]]
z1 = [0.0, 2.0]
z2 = [0.0, 2.0]
conjugate2 = true

[statistics]
kernel = true

[tolerances]
variance_rel = 0.3

[sweep]
n_grid = [100, 200]
theta = 0.5
z = [0.0, 4.0]
"#;

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.ensemble.n, 200);
        assert_eq!(exp.ensemble.kind, EnsembleKind::DilutedGraph);
        assert_eq!(exp.test_functions.len(), 2);
        assert!(exp.statistics.kernel && exp.statistics.clt);
        assert_eq!(exp.tolerances.variance_rel, 0.3);
        assert_eq!(exp.tolerances.ks_level, 0.01);
        assert!(exp.kernel_pairs[0].1.conjugate);
        let sweep = cfg.sweep().unwrap();
        assert_eq!(sweep.replicas, 120);
        assert_eq!(sweep.intensity(200), 14.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_schema = SAMPLE.replace("dilute-clt/1", "dilute-clt/9");
        assert!(matches!(RunConfig::from_toml_str(&bad_schema), Err(Error::Config(_))));
        let bad_point = SAMPLE.replace("[[0.0, 2.0]]", "[[0.0, -2.0]]");
        assert!(RunConfig::from_toml_str(&bad_point).is_err());
        let bad_fn = SAMPLE.replace("monomial:2", "sine:2");
        assert!(RunConfig::from_toml_str(&bad_fn).is_err());
        let unknown = SAMPLE.replace("replicas = 120", "replicas = 120\ncolour = 1");
        assert!(RunConfig::from_toml_str(&unknown).is_err());
        let few = SAMPLE.replace("replicas = 120", "replicas = 50");
        assert!(RunConfig::from_toml_str(&few).unwrap().experiment().is_err());
        let big_p = SAMPLE.replace("p = 14.0", "p = 500.0");
        assert!(RunConfig::from_toml_str(&big_p).unwrap().experiment().is_err());
    }
}

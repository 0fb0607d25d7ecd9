//! Output files: `report.json`, `samples.csv` and `manifest.json`.
//!
//! Floats are written with 17 significant digits so every `f64` round-trips
//! exactly. Non-finite values become JSON `null`.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::harness::{BoundTable, Check, CltReport, HistogramBin};

pub const MANIFEST_SCHEMA: &str = "dilute-clt/manifest/1";

/// `f64` in scientific notation with 17 significant digits.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Pretty JSON formatter that writes floats with [`format_f64`].
pub struct PreciseFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for PreciseFormatter<'_> {
    fn default() -> Self {
        Self {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for PreciseFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Data(format!("json encoding: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Data(format!("cannot write {}: {e}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Per-replica table: raw statistic and rescaled fluctuation for every test
/// function, then real and imaginary resolvent traces.
pub fn samples_csv(report: &CltReport, points: &[crate::eigen::ComplexPoint]) -> Result<String> {
    let mut w = csv_writer();
    let mut header = vec!["replica".to_string()];
    for f in &report.functions {
        header.push(format!("statistic[{}]", f.function));
        header.push(format!("fluctuation[{}]", f.function));
    }
    for z in points {
        header.push(format!("gamma_re[{}{:+}i]", z.re(), z.im()));
        header.push(format!("gamma_im[{}{:+}i]", z.re(), z.im()));
    }
    let csv_err = |e: csv::Error| Error::Data(format!("csv encoding: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for (m, r) in report.replica_results.iter().enumerate() {
        let mut row = vec![r.replica.to_string()];
        for (k, f) in report.functions.iter().enumerate() {
            row.push(format_f64(r.statistics[k]));
            row.push(format_f64(f.fluctuations[m]));
        }
        for t in &r.traces {
            row.push(format_f64(t.re));
            row.push(format_f64(t.im));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Provenance of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Canonical TOML of the parsed configuration; reparsing it reproduces
    /// the run.
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub duration_seconds: f64,
    pub exit_code: i32,
    pub status: String,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
    #[serde(skip)]
    started: Option<std::time::Instant>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<String>, seed: Option<u64>, workers: usize) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            workers,
            duration_seconds: 0.0,
            exit_code: 0,
            status: "running".into(),
            error: None,
            checks: Vec::new(),
            outputs: Vec::new(),
            started: Some(std::time::Instant::now()),
        }
    }

    pub fn finish(&mut self, exit_code: i32, error: Option<String>) {
        if let Some(t) = self.started {
            self.duration_seconds = t.elapsed().as_secs_f64();
        }
        self.exit_code = exit_code;
        self.status = if exit_code == 0 { "ok" } else { "failed" }.into();
        self.error = error;
    }
}

/// Bounds table with columns `n, p, rescaled_variance, standard_error,
/// kernel_prediction, ratio`.
pub fn bounds_csv(table: &BoundTable) -> Result<String> {
    let mut w = csv_writer();
    let csv_err = |e: csv::Error| Error::Data(format!("csv encoding: {e}"));
    w.write_record([
        "n",
        "p",
        "rescaled_variance",
        "standard_error",
        "kernel_prediction",
        "ratio",
    ])
        .map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            format_f64(r.p),
            format_f64(r.rescaled_variance),
            format_f64(r.standard_error),
            format_f64(r.kernel_prediction),
            format_f64(r.ratio),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Histogram table with columns `center, empirical_density,
/// semicircle_density`.
pub fn histogram_csv(bins: &[HistogramBin]) -> Result<String> {
    let mut w = csv_writer();
    let csv_err = |e: csv::Error| Error::Data(format!("csv encoding: {e}"));
    w.write_record(["center", "empirical_density", "semicircle_density"])
        .map_err(csv_err)?;
    for b in bins {
        w.write_record([
            format_f64(b.center),
            format_f64(b.empirical_density),
            format_f64(b.semicircle_density),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(digits.len(), 17, "{s}");
        }
    }

    #[test]
    fn json_uses_precise_floats() {
        #[derive(Serialize)]
        struct T {
            a: f64,
            b: Vec<f64>,
            c: f64,
        }
        let s = to_json_string(&T {
            a: 0.1,
            b: vec![1.0, 2.5],
            c: f64::NAN,
        })
        .unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("2.5000000000000000e0"));
        assert!(s.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}

//! Config text through to report JSON and sample CSV.

use dilute_clt::config::RunConfig;
use dilute_clt::harness::run_experiment_with_workers;
use dilute_clt::report::{samples_csv, to_json_string};
use dilute_clt::{linear_statistic, resolvent_trace, sample, eigenvalues, CltReport};

const CONFIG: &str = r#"
schema = "dilute-clt/1"
replicas = 32
resolvent_points = [[0.5, 1.5]]

[ensemble]
n = 80
p = 8.0
seed = 11

[[test_functions]]
fn = "monomial:2"

[[test_functions]]
fn = "gaussian:0,1"
"#;

fn run() -> (RunConfig, CltReport) {
    let cfg = RunConfig::from_toml_str(CONFIG).unwrap();
    let report = run_experiment_with_workers(&cfg.experiment().unwrap(), 2).unwrap();
    (cfg, report)
}

#[test]
fn report_matches_direct_computation() {
    let (cfg, report) = run();
    let params = cfg.ensemble_params().unwrap();
    let scale = (params.p / params.n as f64).sqrt();
    let phi = &report.functions[0].function;
    let direct: Vec<f64> = (0..32)
        .map(|r| {
            let s = eigenvalues(&sample(&params, r).unwrap(), 1e-12).unwrap();
            linear_statistic(&s, phi).unwrap()
        })
        .collect();
    let mean = direct.iter().sum::<f64>() / 32.0;
    for (r, row) in report.replica_results.iter().enumerate() {
        assert_eq!(row.statistics[0], direct[r]);
        let fluct = report.functions[0].fluctuations[r];
        assert!((fluct - scale * (direct[r] - mean)).abs() < 1e-10);
    }
    let s = eigenvalues(&sample(&params, 5).unwrap(), 1e-12).unwrap();
    let g = resolvent_trace(&s, cfg.resolvent_points[0]);
    assert_eq!(report.replica_results[5].traces[0], g);
}

#[test]
fn json_and_csv_round_trip() {
    let (cfg, report) = run();
    let json = to_json_string(&report).unwrap();
    assert!(json.ends_with('\n'));
    let back: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(back["schema"], "dilute-clt/report/1");
    let fl = back["functions"][1]["fluctuations"].as_array().unwrap();
    for (a, b) in fl.iter().zip(&report.functions[1].fluctuations) {
        assert_eq!(a.as_f64().unwrap(), *b);
    }

    let csv = samples_csv(&report, &cfg.resolvent_points).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.len(), 1 + 2 * 2 + 2);
    assert_eq!(header[0], "replica");
    assert!(header[5].starts_with("gamma_re["));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 32);
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), r);
        let stat: f64 = row[1].parse().unwrap();
        assert_eq!(stat, report.replica_results[r].statistics[0]);
        let gamma_im: f64 = row[6].parse().unwrap();
        assert_eq!(gamma_im, report.replica_results[r].traces[0].im);
    }
}

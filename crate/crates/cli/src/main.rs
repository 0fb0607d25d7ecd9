use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dilute_clt::config::RunConfig;
use dilute_clt::error::Error;
use dilute_clt::harness::{self, Check};
use dilute_clt::report::{self, RunManifest};
use dilute_clt::testfn::TestFunction;
use dilute_clt::theory::{self, QuadratureRule};

mod exit;

use exit::{Failure, EXIT_DEGENERATE, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

/// Environment variable overriding the default worker count.
const WORKERS_ENV: &str = "DILUTE_CLT_WORKERS";

#[derive(Parser)]
#[command(name = "dilute-clt", version, about = "Linear eigenvalue statistics of dilute random matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting variance, condition integral and Sobolev norm of a test function.
    Variance(VarianceArgs),
    /// Monte Carlo CLT experiment; writes report.json, samples.csv, manifest.json.
    CltRun(RunArgs),
    /// Variance-bound sweep over a grid of dimensions; writes bounds.csv.
    Sweep(RunArgs),
    /// Pooled semicircle KS distance and a 64-bin density histogram.
    Semicircle(RunArgs),
    /// Empirical resolvent covariances against the limiting kernel.
    KernelCheck(RunArgs),
}

#[derive(Args)]
struct VarianceArgs {
    /// Test function, e.g. "monomial:2" or "0.5*chebyshev:2+1.0*monomial:4".
    #[arg(long = "fn", value_name = "SPEC")]
    function: String,
    /// Also report the Sobolev norm of this smoothness index.
    #[arg(long)]
    s: Option<f64>,
    /// Fixed quadrature order instead of automatic doubling.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = theory::DEFAULT_DEGENERACY_THRESHOLD)]
    threshold: f64,
    /// Exit with status 2 when the function is degenerate.
    #[arg(long)]
    strict: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; overrides the DILUTE_CLT_WORKERS variable.
    #[arg(long)]
    workers: Option<usize>,
    /// Exit with status 2 when a test function is degenerate.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Variance(args) => cmd_variance(&args),
        Command::CltRun(args) => with_manifest("clt-run", &args, cmd_clt_run),
        Command::Sweep(args) => with_manifest("sweep", &args, cmd_sweep),
        Command::Semicircle(args) => with_manifest("semicircle", &args, cmd_semicircle),
        Command::KernelCheck(args) => with_manifest("kernel-check", &args, cmd_kernel_check),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_variance(args: &VarianceArgs) -> Result<u8, Failure> {
    let phi: TestFunction = args.function.parse().map_err(Failure::usage)?;
    let v = match args.order {
        Some(order) => {
            let rule = QuadratureRule::new(order).map_err(Failure::usage)?;
            theory::clt_variance(&phi, &rule, args.threshold)?
        }
        None => theory::clt_variance_auto(&phi, args.threshold)?,
    };
    let sobolev = args.s.map(|s| phi.sobolev_norm(s)).transpose()?;
    if args.json {
        let out = serde_json::json!({
            "function": phi.to_string(),
            "condition_integral": v.condition_integral,
            "variance": v.variance,
            "degenerate": v.degenerate,
            "order": v.order,
            "sobolev_norm": sobolev,
        });
        print!("{}", report::to_json_string(&out)?);
    } else {
        println!("function            {phi}");
        println!("condition_integral  {}", report::format_f64(v.condition_integral));
        println!("variance            {}", report::format_f64(v.variance));
        println!("degenerate          {}", v.degenerate);
        println!("quadrature_order    {}", v.order);
        if let Some(n) = sobolev {
            println!("sobolev_norm[s={}]  {}", n.s, report::format_f64(n.value));
        }
    }
    Ok(if args.strict && v.degenerate {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    })
}

/// Worker count: flag, then environment variable, then available parallelism.
fn resolve_workers(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(w) = flag {
        return if w == 0 {
            Err(Failure::usage("--workers must be at least 1"))
        } else {
            Ok(w)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Failure::usage(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

/// What a subcommand produced: exit code, checks and written files.
struct Outcome {
    code: u8,
    checks: Vec<Check>,
    outputs: Vec<String>,
}

/// Parses the config, then runs `body` and writes `manifest.json` whatever
/// the outcome.
fn with_manifest(
    command: &str,
    args: &RunArgs,
    body: fn(&RunConfig, &RunArgs, usize) -> Result<Outcome, Failure>,
) -> Result<u8, Failure> {
    let workers = resolve_workers(args.workers)?;
    let cfg = RunConfig::from_path(&args.config).map_err(Failure::usage)?;
    std::fs::create_dir_all(&args.out).map_err(|e| {
        Failure::usage(format!("cannot create {}: {e}", args.out.display()))
    })?;
    let snapshot = cfg.to_toml_string().map_err(Failure::usage)?;
    let mut manifest = RunManifest::new(command, Some(snapshot), Some(cfg.ensemble.seed), workers);
    let result = body(&cfg, args, workers);
    match &result {
        Ok(o) => {
            manifest.checks = o.checks.clone();
            manifest.outputs = o.outputs.clone();
            manifest.finish(i32::from(o.code), None);
        }
        Err(f) => manifest.finish(i32::from(f.code), Some(f.message.clone())),
    }
    let path = args.out.join("manifest.json");
    report::write_json(&path, &manifest)?;
    result.map(|o| o.code)
}

fn write(out: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<(), Failure> {
    report::write_text(&out.join(name), text)?;
    outputs.push(name.to_string());
    Ok(())
}

fn verdict(checks: &[Check]) -> u8 {
    if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    }
}

fn cmd_clt_run(cfg: &RunConfig, args: &RunArgs, workers: usize) -> Result<Outcome, Failure> {
    let exp = cfg.experiment().map_err(Failure::usage)?;
    let rep = harness::run_experiment_with_workers(&exp, workers)?;
    let mut outputs = Vec::new();
    write(&args.out, "report.json", &report::to_json_string(&rep)?, &mut outputs)?;
    write(
        &args.out,
        "samples.csv",
        &report::samples_csv(&rep, &exp.resolvent_points)?,
        &mut outputs,
    )?;
    for c in &rep.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let degenerate = rep.functions.iter().any(|f| f.degenerate);
    let code = match verdict(&rep.checks) {
        EXIT_OK if args.strict && degenerate => EXIT_DEGENERATE,
        code => code,
    };
    Ok(Outcome {
        code,
        checks: rep.checks,
        outputs,
    })
}

fn cmd_sweep(cfg: &RunConfig, args: &RunArgs, workers: usize) -> Result<Outcome, Failure> {
    let sweep = cfg.sweep().map_err(Failure::usage)?;
    let table = harness::variance_bound_check(&sweep, workers)?;
    let csv = report::bounds_csv(&table)?;
    print!("{csv}");
    let mut outputs = Vec::new();
    write(&args.out, "bounds.csv", &csv, &mut outputs)?;
    write(&args.out, "sweep.json", &report::to_json_string(&table)?, &mut outputs)?;
    let mut checks: Vec<Check> = table
        .rows
        .iter()
        .map(|r| Check {
            name: format!("envelope[n={}]", r.n),
            pass: r.within_envelope,
        })
        .collect();
    checks.extend(table.sobolev_rows.iter().map(|r| Check {
        name: format!("sobolev_bound[n={}]", r.n),
        pass: r.pass,
    }));
    Ok(Outcome {
        code: verdict(&checks),
        checks,
        outputs,
    })
}

fn cmd_semicircle(cfg: &RunConfig, args: &RunArgs, workers: usize) -> Result<Outcome, Failure> {
    let params = cfg.ensemble_params().map_err(Failure::usage)?;
    if cfg.replicas == 0 {
        return Err(Failure::usage("at least one replica is required"));
    }
    // Spectra arrive standardized to unit entry variance for the Wigner
    // comparison, which is the scale the semicircle law refers to.
    let (_, spectra) = harness::run_replicas(&params, cfg.replicas, &[], &[], true, workers)?;
    let ks = harness::semicircle_check(&spectra);
    let bins = harness::spectral_histogram(&spectra);
    println!("ks_distance {}", report::format_f64(ks));
    let csv = report::histogram_csv(&bins)?;
    print!("{csv}");
    let mut outputs = Vec::new();
    write(&args.out, "histogram.csv", &csv, &mut outputs)?;
    let summary = serde_json::json!({
        "schema": "dilute-clt/semicircle/1",
        "ensemble": params,
        "replicas": cfg.replicas,
        "ks_distance": ks,
        "histogram": bins,
    });
    write(&args.out, "semicircle.json", &report::to_json_string(&summary)?, &mut outputs)?;
    let checks = vec![Check {
        name: "semicircle".into(),
        pass: ks < cfg.tolerances.semicircle_ks,
    }];
    Ok(Outcome {
        code: verdict(&checks),
        checks,
        outputs,
    })
}

fn cmd_kernel_check(cfg: &RunConfig, args: &RunArgs, workers: usize) -> Result<Outcome, Failure> {
    let mut exp = cfg.experiment_unchecked();
    exp.test_functions.clear();
    exp.statistics = harness::StatisticFlags {
        clt: false,
        kernel: true,
        semicircle: false,
        variance_bound: false,
        char_function: false,
    };
    exp.validate().map_err(Failure::usage)?;
    let rep = harness::run_experiment_with_workers(&exp, workers)?;
    let mut outputs = Vec::new();
    let table = serde_json::json!({
        "schema": "dilute-clt/kernel/1",
        "ensemble": rep.ensemble,
        "replicas": rep.replicas,
        "kernels": rep.kernels,
    });
    write(&args.out, "kernel.json", &report::to_json_string(&table)?, &mut outputs)?;
    for k in &rep.kernels {
        println!(
            "z1={} z2={} empirical={} {} predicted={} {} {}",
            k.z1.value(),
            k.z2.value(),
            report::format_f64(k.empirical.re),
            report::format_f64(k.empirical.im),
            report::format_f64(k.predicted.re),
            report::format_f64(k.predicted.im),
            if k.pass == Some(true) { "PASS" } else { "FAIL" }
        );
    }
    Ok(Outcome {
        code: verdict(&rep.checks),
        checks: rep.checks,
        outputs,
    })
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_error(e)
    }
}

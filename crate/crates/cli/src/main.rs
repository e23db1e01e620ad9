//! `calib-lab`: runs one calibration vignette and writes its report.
//!
//! Exit codes: 0 on success, 2 for invalid configuration, 3 when more
//! replicates fail than the failure threshold allows, 1 for anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use calib_core::error::CalibError;
use calib_core::report::{emit_report, ReportFormat};
use calib_core::vignettes::{inclusive_range, run_vignette, Vignette, VignetteConfig};

#[derive(Debug, Parser)]
#[command(
    name = "calib-lab",
    version,
    about = "Run a calibration vignette and emit a CSV or JSON report"
)]
struct Args {
    /// One of laplace, abc, fractional, gp-split, robust.
    #[arg(long)]
    vignette: Vignette,

    /// Replicates per test (realizations per split size for gp-split).
    #[arg(long)]
    n: Option<usize>,

    /// Replicates for the ABC rank test.
    #[arg(long)]
    n_strong: Option<usize>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Report path; the histogram sidecar goes to `<out>.hist.csv`.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value = "csv")]
    format: ReportFormat,

    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, env = "CALIB_LAB_THREADS")]
    threads: Option<usize>,

    /// Degrees of freedom for the Laplace sweep, as `lo:hi[:step]` or a
    /// comma-separated list.
    #[arg(long, value_parser = parse_values)]
    nu_range: Option<FloatList>,

    /// Observation counts for the Laplace sweep.
    #[arg(long, value_parser = parse_counts)]
    n_obs_range: Option<CountList>,

    /// ABC tolerances.
    #[arg(long, value_parser = parse_values)]
    eps_range: Option<FloatList>,

    /// Fractional exponents.
    #[arg(long, value_parser = parse_values)]
    t_set: Option<FloatList>,

    /// Contamination probabilities for the robust vignette.
    #[arg(long, value_parser = parse_values)]
    contam_range: Option<FloatList>,

    /// Total simulation counts for gp-split.
    #[arg(long, value_parser = parse_counts)]
    split_sizes: Option<CountList>,

    /// ABC proposals allowed per accepted draw.
    #[arg(long)]
    abc_budget: Option<u64>,

    /// Use the replicate counts of the original study.
    #[arg(long = "paper-scale")]
    full_scale: bool,

    /// Record wall-clock milliseconds per row instead of 0.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone)]
struct FloatList(Vec<f64>);

#[derive(Debug, Clone)]
struct CountList(Vec<usize>);

fn parse_values(s: &str) -> Result<FloatList, String> {
    parse_floats(s).map(FloatList)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("{t:?} is not a number"))
    };
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(number).collect::<Result<_, _>>()?;
        let (lo, hi, step) = match parts[..] {
            [lo, hi] => (lo, hi, 1.0),
            [lo, hi, step] => (lo, hi, step),
            _ => return Err(format!("range {s:?} must be lo:hi or lo:hi:step")),
        };
        inclusive_range(lo, hi, step).map_err(|e| e.to_string())
    } else {
        let v: Vec<f64> = s.split(',').map(number).collect::<Result<_, _>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(format!("{s:?} contains a non-finite value"));
        }
        Ok(v)
    }
}

fn parse_counts(s: &str) -> Result<CountList, String> {
    parse_floats(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("{v} is not a non-negative integer"))
            }
        })
        .collect::<Result<_, _>>()
        .map(CountList)
}

fn config(args: &Args) -> VignetteConfig {
    let mut cfg = VignetteConfig::new(args.vignette);
    if args.full_scale {
        cfg = cfg.full_scale();
    }
    cfg.seed = args.seed;
    cfg.timing = args.timing;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(n) = args.n_strong {
        cfg.n_strong = n;
    }
    if let Some(b) = args.abc_budget {
        cfg.abc_budget = b;
    }
    if let Some(v) = &args.nu_range {
        cfg.nu_range = v.0.clone();
    }
    if let Some(v) = &args.n_obs_range {
        cfg.n_obs_range = v.0.clone();
    }
    if let Some(v) = &args.eps_range {
        cfg.eps_range = v.0.clone();
    }
    if let Some(v) = &args.t_set {
        cfg.t_set = v.0.clone();
    }
    if let Some(v) = &args.contam_range {
        cfg.contam_range = v.0.clone();
    }
    if let Some(v) = &args.split_sizes {
        cfg.split_sizes = v.0.clone();
    }
    cfg
}

fn exit_code(e: &CalibError) -> u8 {
    match e.root() {
        CalibError::FailureThreshold { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = config(&args);
    if let Err(e) = cfg.validate() {
        eprintln!("calib-lab: {e}");
        return ExitCode::from(2);
    }
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("calib-lab: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let extension = match args.format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{extension}", cfg.vignette)));

    let rows = match run_vignette(&cfg) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("calib-lab: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Err(e) = emit_report(&rows, &out, args.format) {
        eprintln!("calib-lab: {e}");
        return ExitCode::from(1);
    }
    for r in &rows {
        println!(
            "{:<10} {}={:<8} {:<24} stat={:<12.6} p={:<10.4e} n={}",
            r.vignette, r.param_name, r.param_value, r.mode, r.statistic, r.p_value, r.n
        );
    }
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    ExitCode::SUCCESS
}

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use tilegamut::qcp::CornerQualitySpec;
use tilegamut_cli::pipeline::{exit, Config, Method, VerifyConfig};
use tilegamut_cli::report::Report;
use tilegamut_cli::{parse_instance, run_pipeline, svg};

/// Compute a standard color gamut common to a set of projectors.
#[derive(Parser, Debug)]
#[command(name = "tilegamut", version)]
struct Args {
    /// Instance file (JSON).
    #[arg(short, long)]
    input: PathBuf,
    /// Report file; standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Optimizer to run; `all` runs the three and compares them.
    #[arg(long, value_enum, default_value_t = Method::Volmax)]
    method: Method,
    /// Relative tolerance of the polytope computations.
    #[arg(long, default_value_t = tilegamut::polytope::DEFAULT_TOL)]
    tol: f64,
    /// Bracket width at which the min-max bisection stops.
    #[arg(long, default_value_t = 1e-8)]
    qcp_tol: f64,
    /// JSON array of corner quality specs for the min-max method.
    #[arg(long)]
    qcp_specs: Option<PathBuf>,
    /// Write a chromaticity plot (SVG).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Check the results against brute-force oracles.
    #[arg(long)]
    verify: bool,
    /// Cells per axis of the chromaticity grid used by --verify.
    #[arg(long, default_value_t = 200)]
    grid_res: usize,
    /// Random (R, B) draws of the volume check used by --verify.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Seed of the sampling oracle and of --perturb.
    #[arg(long, default_value_t = tilegamut::oracle::DEFAULT_SEED)]
    seed: u64,
    /// On a degenerate configuration, shrink every gamut by a relative
    /// amount of at most this size and retry once.
    #[arg(long)]
    perturb: Option<f64>,
    /// Record per-method runtimes in the report (breaks byte-identical output).
    #[arg(long)]
    timings: bool,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("tilegamut: {msg}");
    ExitCode::from(code as u8)
}

fn write_out(path: Option<&PathBuf>, s: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, s),
        None => std::io::stdout().lock().write_all(s.as_bytes()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let bytes = match fs::read(&args.input) {
        Ok(b) => b,
        Err(e) => return fail(exit::VALIDATION, format!("{}: {e}", args.input.display())),
    };
    let inst = match parse_instance(&bytes) {
        Ok(i) => i,
        Err(e) => return fail(exit::VALIDATION, format!("{}: {e}", args.input.display())),
    };
    let qcp_specs = match &args.qcp_specs {
        None => None,
        Some(p) => match fs::read(p)
            .map_err(|e| e.to_string())
            .and_then(|b| serde_json::from_slice::<Vec<CornerQualitySpec>>(&b).map_err(|e| e.to_string()))
        {
            Ok(s) => Some(s),
            Err(e) => return fail(exit::VALIDATION, format!("{}: {e}", p.display())),
        },
    };
    if !(args.tol > 0.0 && args.qcp_tol > 0.0) || args.perturb.is_some_and(|p| !(p > 0.0 && p < 1.0)) {
        return fail(exit::VALIDATION, "tolerances must be positive and --perturb in (0, 1)");
    }
    let cfg = Config {
        method: args.method,
        qcp_specs,
        tol: args.tol,
        qcp_tol: args.qcp_tol,
        verify: args.verify.then_some(VerifyConfig {
            grid_res: args.grid_res,
            samples: args.samples,
            seed: args.seed,
        }),
        perturb: args.perturb,
        perturb_seed: args.seed,
        timings: args.timings,
    };
    let out = match run_pipeline(&inst, &cfg) {
        Ok(o) => o,
        Err(e) => {
            let hint = if e.is_degenerate() && cfg.perturb.is_none() {
                " (degenerate configuration; --perturb may help)"
            } else {
                ""
            };
            return fail(e.exit_code(), format!("{e}{hint}"));
        }
    };
    for f in &out.failures {
        eprintln!("tilegamut: {} failed: {}", f.method, f.error);
    }
    if let Some(path) = &args.plot {
        if let Err(e) = fs::write(path, svg::emit_svg(&inst, &out)) {
            return fail(exit::NUMERICAL, format!("{}: {e}", path.display()));
        }
    }
    let verified = out.verified();
    let report = Report::new(&inst, &cfg, out);
    if let Err(e) = write_out(args.output.as_ref(), &report.to_json()) {
        return fail(exit::NUMERICAL, e);
    }
    if !verified {
        for v in report.verification.iter().flat_map(|v| &v.violations) {
            eprintln!("tilegamut: verification: {v}");
        }
        return ExitCode::from(exit::VERIFICATION as u8);
    }
    ExitCode::SUCCESS
}

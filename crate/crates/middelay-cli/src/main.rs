//! Command-line front end: spectra, maximal-multiplicity designs, simulation,
//! constrained optimization, verification, branch continuation, and the
//! free-gain conjecture probe, from a single binary.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
//! Failures are reported as JSON `{code, message, context}` on standard
//! error so scripted pipelines can react to structured diagnostics.

use clap::{ArgGroup, Args, Parser, Subcommand};
use middelay::branch_analysis::{continue_branch, locate_branch_point};
use middelay::dde_sim::{
    design_platelet_feedback, equilibrium, platelet_closed_loop, simulate_linear,
    simulate_platelet, trajectory_to_csv, HistoryFunction, LinearTwoDelaySystem, PlateletFeedback,
    PlateletModel,
};
use middelay::gain_opt::{
    conjecture_scan_with_progress, optimize_no_delay, optimize_one_delay,
    optimize_two_delay_mid_with_progress, GainBudget,
};
use middelay::mid_design::{design_one_delay, design_two_delay, verify_multiplicity};
use middelay::quasipoly::Quasipolynomial;
use middelay::rootfinding::{count_roots, default_window, find_roots, spectrum_to_csv, Rectangle};
use middelay::Complex64;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Default tolerance for dominance/abscissa checks in `verify`; overridable
/// with `--tolerance` or the `MIDDELAY_TOL` environment variable.
const DEFAULT_VERIFY_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "middelay",
    version,
    about = "Pole placement, spectra, and simulation for scalar one- and two-delay systems"
)]
struct Cli {
    /// Reserved for forward compatibility; every algorithm is deterministic
    /// and ignores it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Tolerance override for verification checks (default 1e-6; the
    /// MIDDELAY_TOL environment variable is consulted when absent).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate all characteristic roots in a rectangle and export them.
    Spectrum(SpectrumArgs),
    /// Synthesize a maximal-multiplicity feedback design.
    Design(DesignArgs),
    /// Integrate a delay system and export the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Minimize the closed-loop spectral abscissa under a gain budget.
    Optimize(OptimizeArgs),
    /// Check multiplicity and dominance of a design.
    Verify(VerifyArgs),
    /// Continue a root branch of the normalized family in the delay ratio.
    Branch(BranchArgs),
    /// Scan free gains around a design for abscissa improvements
    /// (evidence-gathering only; the underlying question is open).
    ProbeConjecture(ProbeArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SpectrumArgs {
    /// Quasipolynomial as inline JSON or a path to a JSON file with schema
    /// {"terms": [{"coeffs": [c0, c1, ...], "delay": t}, ...]}.
    #[arg(long)]
    input: String,
    #[arg(long)]
    re_min: Option<f64>,
    #[arg(long)]
    re_max: Option<f64>,
    #[arg(long)]
    im_min: Option<f64>,
    #[arg(long)]
    im_max: Option<f64>,
    /// csv (default) or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
#[command(group(ArgGroup::new("family").required(true).args(["two_delay", "one_delay", "platelet"])))]
struct DesignArgs {
    /// Two-delay design: triple root at -a0 - 1/tau1 - 1/tau2.
    #[arg(long)]
    two_delay: bool,
    /// One-delay design: double root at -a0 - 1/tau1.
    #[arg(long)]
    one_delay: bool,
    /// Platelet feedback design around --y-star.
    #[arg(long)]
    platelet: bool,
    #[arg(long, default_value_t = 0.0)]
    a0: f64,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    /// Hill exponent (platelet).
    #[arg(long)]
    n: Option<f64>,
    /// Hill threshold concentration (platelet).
    #[arg(long)]
    theta: Option<f64>,
    /// Destruction rate (platelet).
    #[arg(long)]
    gamma: Option<f64>,
    /// Hill amplitude (platelet).
    #[arg(long)]
    g0: Option<f64>,
    /// Mature-platelet lifespan T; the death delay is tau1 + T.
    #[arg(long)]
    lifespan: Option<f64>,
    /// Target equilibrium concentration (platelet).
    #[arg(long)]
    y_star: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
#[command(group(ArgGroup::new("system").required(true).args(["linear", "platelet_model"])))]
#[command(group(ArgGroup::new("history").required(true).args(["history_const", "history_samples"])))]
struct SimulateArgs {
    /// Linear system as inline JSON or a path:
    /// {"a0":…, "a1":…, "a2":…, "tau1":…, "tau2":…}.
    #[arg(long)]
    linear: Option<String>,
    /// Platelet model as inline JSON or a path:
    /// {"n":…, "theta":…, "gamma":…, "g0":…, "tau1":…, "lifespan":…}.
    #[arg(long)]
    platelet_model: Option<String>,
    /// Feedback as inline JSON or a path (platelet only):
    /// {"s0":…, "alpha1":…, "alpha2":…, "u0":…}.
    #[arg(long)]
    feedback: Option<String>,
    /// Constant initial history.
    #[arg(long)]
    history_const: Option<f64>,
    /// Sampled initial history as inline JSON or a path:
    /// {"times": […], "values": […]} on [-tau_max, 0].
    #[arg(long)]
    history_samples: Option<String>,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt: f64,
    /// csv (default) or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OptimizeArgs {
    /// no-delay, one-delay, or two-delay-mid.
    #[arg(long)]
    family: String,
    /// ℓ¹ budget on the feedback gains.
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    /// Stream grid progress as line-delimited JSON on standard error.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    /// Two-delay design as inline JSON or a path:
    /// {"a0":…, "tau1":…, "tau2":…, "s0":…, "a1":…, "a2":…}.
    #[arg(long)]
    input: String,
    /// Half-height of the dominance search window.
    #[arg(long, default_value_t = 200.0)]
    im_max: f64,
    /// The dominance window extends this far right of s0.
    #[arg(long, default_value_t = 10.0)]
    re_margin: f64,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BranchArgs {
    #[arg(long)]
    lambda_start: f64,
    #[arg(long)]
    lambda_end: f64,
    #[arg(long, default_value_t = 400)]
    steps: u32,
    /// Real part of an approximate starting root of the normalized family.
    #[arg(long)]
    start_re: f64,
    /// Imaginary part of an approximate starting root.
    #[arg(long)]
    start_im: f64,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ProbeArgs {
    #[arg(long)]
    tau1: f64,
    #[arg(long)]
    tau2: f64,
    #[arg(long, default_value_t = 0.5)]
    half_width: f64,
    #[arg(long, default_value_t = 21)]
    grid_points: u32,
    /// Stream per-point progress as line-delimited JSON on standard error.
    #[arg(long)]
    progress: bool,
}

enum CliError {
    Invalid(String, serde_json::Value),
    Numerical(String, serde_json::Value),
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        CliError::Invalid(message.into(), json!({}))
    }

    fn emit(&self) -> u8 {
        let (code, message, context, status) = match self {
            CliError::Invalid(m, c) => ("invalid_input", m, c, 2),
            CliError::Numerical(m, c) => ("numerical_failure", m, c, 3),
        };
        let payload = json!({ "code": code, "message": message, "context": context });
        eprintln!("{payload}");
        status
    }
}

/// Library errors that indicate a malformed request rather than a numerical
/// breakdown map to exit code 2.
fn design_error(e: middelay::DesignError) -> CliError {
    CliError::Invalid(e.to_string(), json!({"stage": "design"}))
}

fn sim_error(e: middelay::SimError) -> CliError {
    use middelay::SimError::*;
    match e {
        InsufficientExtrema(_) => {
            CliError::Numerical(e.to_string(), json!({"stage": "simulate"}))
        }
        _ => CliError::Invalid(e.to_string(), json!({"stage": "simulate"})),
    }
}

fn rootfinding_error(e: middelay::RootFindingError) -> CliError {
    use middelay::RootFindingError::*;
    match e {
        InvalidRectangle { .. } => CliError::Invalid(e.to_string(), json!({"stage": "spectrum"})),
        _ => CliError::Numerical(e.to_string(), json!({"stage": "spectrum"})),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let payload = json!({
                    "code": "invalid_input",
                    "message": e.to_string(),
                    "context": {"stage": "argument parsing"},
                });
                eprintln!("{payload}");
                return ExitCode::from(2);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let output = cli.output.clone();
    let tolerance = cli
        .tolerance
        .or_else(|| std::env::var("MIDDELAY_TOL").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(DEFAULT_VERIFY_TOL);
    let result = match &cli.command {
        Command::Spectrum(args) => run_spectrum(args),
        Command::Design(args) => run_design(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Verify(args) => run_verify(args, tolerance),
        Command::Branch(args) => run_branch(args),
        Command::ProbeConjecture(args) => run_probe(args),
    };
    match result {
        Ok(text) => match write_output(&output, &text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => CliError::Invalid(e.to_string(), json!({"stage": "output"})).emit().into(),
        },
        Err(e) => e.emit().into(),
    }
}

fn write_output(path: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())
        }
    }
}

/// An argument is inline JSON when it starts with `{`, otherwise a path.
fn read_json_argument(arg: &str) -> Result<String, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| CliError::Invalid(format!("cannot read {arg}: {e}"), json!({})))
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    let text = read_json_argument(arg)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("invalid {what}: {e}"), json!({"input": arg})))
}

fn run_spectrum(args: &SpectrumArgs) -> Result<String, CliError> {
    let qp: Quasipolynomial = parse_json(&args.input, "quasipolynomial")?;
    let window = match (args.re_min, args.re_max, args.im_min, args.im_max) {
        (Some(a), Some(b), Some(c), Some(d)) => {
            Rectangle::new(a, b, c, d).map_err(rootfinding_error)?
        }
        (None, None, None, None) => default_window(&qp).ok_or_else(|| {
            CliError::invalid(
                "no default window for this quasipolynomial shape; pass --re-min/--re-max/--im-min/--im-max",
            )
        })?,
        _ => {
            return Err(CliError::invalid(
                "either all of --re-min/--re-max/--im-min/--im-max or none",
            ))
        }
    };
    let spectrum = find_roots(&qp, &window).map_err(rootfinding_error)?;
    match args.format.as_str() {
        "csv" => Ok(spectrum_to_csv(&spectrum)),
        "json" => Ok(format!("{}\n", serde_json::to_string_pretty(&spectrum).unwrap())),
        other => Err(CliError::invalid(format!("unknown format {other}"))),
    }
}

fn run_design(args: &DesignArgs) -> Result<String, CliError> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::invalid(format!("--{name} is required for this design")))
    };
    if args.two_delay {
        let d = design_two_delay(args.a0, need(args.tau1, "tau1")?, need(args.tau2, "tau2")?)
            .map_err(design_error)?;
        return Ok(format!("{}\n", serde_json::to_string_pretty(&d).unwrap()));
    }
    if args.one_delay {
        let d = design_one_delay(args.a0, need(args.tau1, "tau1")?).map_err(design_error)?;
        return Ok(format!("{}\n", serde_json::to_string_pretty(&d).unwrap()));
    }
    let model = PlateletModel::new(
        need(args.n, "n")?,
        need(args.theta, "theta")?,
        need(args.gamma, "gamma")?,
        need(args.g0, "g0")?,
        need(args.tau1, "tau1")?,
        need(args.lifespan, "lifespan")?,
    )
    .map_err(sim_error)?;
    let y_star = need(args.y_star, "y-star")?;
    let (feedback, closed_loop) = platelet_closed_loop(&model, y_star).map_err(sim_error)?;
    let open_loop =
        middelay::dde_sim::linearize_platelet(&model, y_star, 0.0, 0.0).map_err(sim_error)?;
    let y_eq = equilibrium(&model).ok();
    let payload = json!({
        "model": model,
        "y_star": y_star,
        "y_eq": y_eq,
        "feedback": feedback,
        "closed_loop_linearization": closed_loop,
        "closed_loop_quasipolynomial": closed_loop.characteristic(),
        "open_loop_linearization": open_loop,
        "open_loop_quasipolynomial": open_loop.characteristic(),
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&payload).unwrap()))
}

fn run_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let history = match (&args.history_const, &args.history_samples) {
        (Some(c), None) => HistoryFunction::Constant(*c),
        (None, Some(spec)) => parse_json(spec, "history samples")?,
        _ => unreachable!("clap group enforces exactly one history"),
    };
    let trajectory = if let Some(linear) = &args.linear {
        let sys: LinearTwoDelaySystem = parse_json(linear, "linear system")?;
        simulate_linear(&sys, &history, args.t_end, args.dt).map_err(sim_error)?
    } else {
        let model: PlateletModel =
            parse_json(args.platelet_model.as_ref().unwrap(), "platelet model")?;
        let feedback: PlateletFeedback = match &args.feedback {
            Some(f) => parse_json(f, "feedback")?,
            None => return Err(CliError::invalid("--feedback is required with --platelet-model")),
        };
        simulate_platelet(&model, &feedback, &history, args.t_end, args.dt).map_err(sim_error)?
    };
    match args.format.as_str() {
        "csv" => Ok(trajectory_to_csv(&trajectory)),
        "json" => Ok(format!("{}\n", serde_json::to_string_pretty(&trajectory).unwrap())),
        other => Err(CliError::invalid(format!("unknown format {other}"))),
    }
}

fn run_optimize(args: &OptimizeArgs) -> Result<String, CliError> {
    let budget = GainBudget::new(args.bound)
        .map_err(|e| CliError::Invalid(e.to_string(), json!({"bound": args.bound})))?;
    let stream = args.progress;
    let result = match args.family.as_str() {
        "no-delay" => optimize_no_delay(budget),
        "one-delay" => optimize_one_delay(budget),
        "two-delay-mid" => optimize_two_delay_mid_with_progress(budget, |p| {
            if stream {
                eprintln!("{}", serde_json::to_string(p).unwrap());
            }
        }),
        other => {
            return Err(CliError::invalid(format!(
                "unknown family {other}; expected no-delay, one-delay, or two-delay-mid"
            )))
        }
    }
    .map_err(|e| CliError::Numerical(e.to_string(), json!({"stage": "optimize"})))?;
    Ok(format!("{}\n", serde_json::to_string_pretty(&result).unwrap()))
}

fn run_verify(args: &VerifyArgs, tolerance: f64) -> Result<String, CliError> {
    let design: middelay::TwoDelayDesign = parse_json(&args.input, "design")?;
    let qp = design.characteristic();
    let report = verify_multiplicity(&qp, Complex64::new(design.s0, 0.0), 3)
        .map_err(design_error)?;
    // dominance: no root strictly right of s0 (up to the tolerance)
    let window = Rectangle::new(
        design.s0 + tolerance,
        design.s0 + args.re_margin,
        -args.im_max,
        args.im_max,
    )
    .map_err(rootfinding_error)?;
    let intruders = count_roots(&qp, &window).map_err(rootfinding_error)?;
    let payload = json!({
        "design": design,
        "multiplicity": {
            "report": report,
            "passed": report.passed,
        },
        "dominance": {
            "window": window,
            "roots_right_of_s0": intruders,
            "passed": intruders == 0,
        },
        "tolerance": tolerance,
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&payload).unwrap()))
}

fn run_branch(args: &BranchArgs) -> Result<String, CliError> {
    let start = locate_branch_point(
        args.lambda_start,
        Complex64::new(args.start_re, args.start_im),
    )
    .map_err(|e| CliError::Numerical(e.to_string(), json!({"stage": "branch start"})))?;
    let path = continue_branch(&start, args.lambda_end, args.steps)
        .map_err(|e| CliError::Numerical(e.to_string(), json!({"stage": "branch"})))?;
    let mut out = String::from("lambda,re,im,residual\n");
    for point in path {
        out.push_str(&format!(
            "{},{},{},{}\n",
            point.lambda, point.s.re, point.s.im, point.residual
        ));
    }
    Ok(out)
}

fn run_probe(args: &ProbeArgs) -> Result<String, CliError> {
    let stream = args.progress;
    let result = conjecture_scan_with_progress(
        args.tau1,
        args.tau2,
        args.half_width,
        args.grid_points,
        |p| {
            if stream {
                eprintln!("{}", serde_json::to_string(p).unwrap());
            }
        },
    )
    .map_err(|e| CliError::Numerical(e.to_string(), json!({"stage": "probe-conjecture"})))?;
    let improved = result.parameters["improvement_found"] == 1.0;
    let payload = json!({
        "result": result,
        "note": if improved {
            "EVIDENCE OF IMPROVEMENT over the maximal-multiplicity design found; \
             this is reported, not asserted — treat as a lead to investigate"
        } else {
            "no gain pair on the grid beat the maximal-multiplicity abscissa; \
             evidence only, the underlying minimality question remains open"
        },
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&payload).unwrap()))
}

//! Command-line front end: parse system files, run nominal and robust
//! solves, impulse-response simulations, and structural analyses.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 when
//! the solver stopped without converging (the best iterate is still
//! written).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bilinear_control::io::{read_system, system_to_json};
use bilinear_control::{
    dc_peak_check, default_dt, default_horizon, hurwitz_certificate, impulse_response,
    is_strongly_connected, make_chain_system, objective, robustify, solve, solve_robust,
    spectral_abscissa, worst_case_disturbance, worst_case_monotonicity_check,
    BilinearPositiveSystem, ChainModelParams, ControlInput, ModeUsed, SolveMode, SolveOptions,
    SolveResult, UncertaintySpec,
};

const SCHEMA_VERSION: u32 = 1;
const EXIT_INPUT_ERROR: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser)]
#[command(
    name = "bilinear-control",
    version,
    about = "Constant-dose design for monotone bilinear positive systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal constant dose for a system file.
    Solve(SolveArgs),
    /// Robustify the system against its uncertainty block, then solve.
    SolveRobust(SolveRobustArgs),
    /// Integrate the closed-loop impulse response and emit CSV.
    Simulate(SimulateArgs),
    /// Report structural properties and the objective at a given dose.
    Analyze(AnalyzeArgs),
    /// Generate a ready-made example system file.
    Example(ExampleArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// System file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the result document; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Initial dose: scalar, JSON array, or path to a prior result
    /// document.
    #[arg(long)]
    u0: Option<String>,
    /// Iteration budget.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Convergence tolerance for the stall window (and the gradient-norm
    /// stop in gradient mode).
    #[arg(long)]
    tol: Option<f64>,
    /// Step-size scale; default 1/(1 + ||g0||).
    #[arg(long)]
    step: Option<f64>,
    /// Descent variant.
    #[arg(long, value_enum, default_value_t = ModeFlag::Auto)]
    mode: ModeFlag,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct SolveRobustArgs {
    #[command(flatten)]
    solver: SolverFlags,
    /// Also sample this many in-bound perturbations at the solution and
    /// report violations of the worst-case cost bound.
    #[arg(long)]
    verify_samples: Option<usize>,
    /// Seed for the verification sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// System file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Dose: scalar, JSON array, or path to a prior result document.
    #[arg(long)]
    u: String,
    /// Simulation horizon; default 40 closed-loop time constants.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Integration step; default min(1e-2, 0.05/|spectral abscissa|).
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// System file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the JSON report; the human-readable report always
    /// goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Dose at which to evaluate stability and the objective: scalar,
    /// JSON array, or path to a prior result document.
    #[arg(long)]
    u: Option<String>,
}

#[derive(Args)]
struct ExampleArgs {
    /// Emit the cascade family (the only example family).
    #[arg(long)]
    chain: bool,
    /// Chain length.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Decay-offset parameter of the cascade diagonal.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Wrap-around coupling strength.
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Dose cost weight.
    #[arg(long, default_value_t = 3.0)]
    rho: f64,
    /// Where to write the system file; stdout when omitted.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeFlag {
    Auto,
    Subgradient,
    Gradient,
}

impl From<ModeFlag> for SolveMode {
    fn from(m: ModeFlag) -> Self {
        match m {
            ModeFlag::Auto => SolveMode::Auto,
            ModeFlag::Subgradient => SolveMode::Subgradient,
            ModeFlag::Gradient => SolveMode::Gradient,
        }
    }
}

// ---------------------------------------------------------------------
// Result documents
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct HistoryEntry {
    k: usize,
    j_best: f64,
    subgradient_norm: f64,
}

#[derive(Serialize)]
struct VerificationSummary {
    samples: usize,
    seed: u64,
    worst_case_stable: bool,
    worst_case_objective: f64,
    max_sampled_objective: f64,
    unstable_samples: usize,
    cost_violations: usize,
    passed: bool,
}

#[derive(Serialize)]
struct SolveDocument {
    schema_version: u32,
    command: &'static str,
    u_star: Vec<f64>,
    j_star: f64,
    sigma_cl: f64,
    control_cost: f64,
    spectral_abscissa: f64,
    worst_case_disturbance: Vec<f64>,
    converged: bool,
    iterations: usize,
    mode: &'static str,
    history: Vec<HistoryEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    robustified_a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<VerificationSummary>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema_version: u32,
    n: usize,
    m: usize,
    q: usize,
    violations: Vec<String>,
    strongly_connected: bool,
    has_uncertainty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral_abscissa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability_witness_found: Option<bool>,
    /// `null` when the closed loop is unstable (the objective is +inf).
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_cl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    control_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dc_peak_confirmed: Option<bool>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are input errors (exit 1); --help/--version
            // print and succeed.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if is_help { 0 } else { EXIT_INPUT_ERROR });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT_ERROR
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::SolveRobust(args) => cmd_solve_robust(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Example(args) => cmd_example(args),
    }
}

// ---------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------

fn load_system(path: &Path) -> Result<(BilinearPositiveSystem, Option<UncertaintySpec>), String> {
    read_system(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Loads a system and rejects it (with the violation list on stderr) when
/// the model assumptions do not hold.
fn load_validated(
    path: &Path,
) -> Result<(BilinearPositiveSystem, Option<UncertaintySpec>), String> {
    let (sys, unc) = load_system(path)?;
    let violations = sys.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("validation: {v}");
        }
        return Err(format!(
            "{}: system violates the model assumptions ({} finding(s) above)",
            path.display(),
            violations.len()
        ));
    }
    Ok((sys, unc))
}

/// Parses a dose given as a scalar literal, a JSON array, or a path to a
/// prior result document (its `u_star` field is used).
fn parse_dose(text: &str, m: usize) -> Result<ControlInput, String> {
    let entries: Vec<f64> = if let Ok(x) = text.trim().parse::<f64>() {
        vec![x]
    } else if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| format!("dose array did not parse: {e}"))?
    } else {
        let doc = fs::read_to_string(text)
            .map_err(|e| format!("dose is neither a number, an array, nor a readable file: {e}"))?;
        let value: serde_json::Value = serde_json::from_str(&doc)
            .map_err(|e| format!("result document {text} did not parse: {e}"))?;
        let u_star = value
            .get("u_star")
            .and_then(|v| v.as_array())
            .ok_or_else(|| format!("result document {text} carries no u_star array"))?;
        u_star
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| "u_star entries must be numbers".to_string()))
            .collect::<Result<Vec<f64>, String>>()?
    };
    if entries.len() != m {
        return Err(format!(
            "dose has {} entries, system has {m} input channel(s)",
            entries.len()
        ));
    }
    ControlInput::from_slice(&entries).map_err(|e| e.to_string())
}

fn solve_options(flags: &SolverFlags, m: usize) -> Result<SolveOptions, String> {
    let mut opts = SolveOptions::default();
    if let Some(u0) = &flags.u0 {
        opts.u0 = Some(parse_dose(u0, m)?);
    }
    if let Some(mi) = flags.max_iters {
        opts.max_iters = mi;
    }
    if let Some(tol) = flags.tol {
        opts.tol = tol;
    }
    opts.step_a = flags.step;
    opts.mode = flags.mode.into();
    Ok(opts)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mode_name(mode: ModeUsed) -> &'static str {
    match mode {
        ModeUsed::Subgradient => "subgradient",
        ModeUsed::Gradient => "gradient",
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Assembles the result document for a finished solve on `eval_sys` (the
/// system the reported performance figures refer to — the robustified one
/// for robust solves).
fn solve_document(
    command: &'static str,
    eval_sys: &BilinearPositiveSystem,
    res: &SolveResult,
) -> Result<SolveDocument, String> {
    let obj = objective(eval_sys, &res.u_star).map_err(|e| e.to_string())?;
    let disturbance = worst_case_disturbance(eval_sys, &res.u_star)
        .map_err(|e| format!("worst-case disturbance: {e}"))?;
    Ok(SolveDocument {
        schema_version: SCHEMA_VERSION,
        command,
        u_star: res.u_star.vector().iter().cloned().collect(),
        j_star: res.j_star,
        sigma_cl: obj.sigma_cl,
        control_cost: obj.control_cost,
        spectral_abscissa: obj.spectral_abscissa,
        worst_case_disturbance: disturbance.iter().cloned().collect(),
        converged: res.converged,
        iterations: res.iterations,
        mode: mode_name(res.mode_used),
        history: res
            .history
            .iter()
            .map(|h| HistoryEntry {
                k: h.k,
                j_best: h.j_best,
                subgradient_norm: h.subgradient_norm,
            })
            .collect(),
        robustified_a: None,
        verification: None,
    })
}

fn emit_document(doc: &SolveDocument, output: Option<&Path>) -> Result<i32, String> {
    let mut json =
        serde_json::to_string_pretty(doc).map_err(|e| format!("serializing result: {e}"))?;
    json.push('\n');
    write_text(output, &json)?;
    Ok(if doc.converged { 0 } else { EXIT_NOT_CONVERGED })
}

// ---------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------

fn cmd_solve(args: SolveArgs) -> Result<i32, String> {
    let (sys, _) = load_validated(&args.solver.input)?;
    let opts = solve_options(&args.solver, sys.input_dim())?;
    let res = solve(&sys, &opts).map_err(|e| e.to_string())?;
    let doc = solve_document("solve", &sys, &res)?;
    emit_document(&doc, args.solver.output.as_deref())
}

fn cmd_solve_robust(args: SolveRobustArgs) -> Result<i32, String> {
    let (sys, unc) = load_validated(&args.solver.input)?;
    let unc = unc.ok_or_else(|| {
        "robust solve requires an `uncertainty` block in the system file".to_string()
    })?;
    let robust_sys = robustify(&sys, &unc).map_err(|e| match e {
        bilinear_control::Error::NonMonotoneInputMap { entry, value } => format!(
            "input-gain entry {:?} is {value} > 0; the worst-case construction requires \
             every dose to act monotonically (D_u <= 0 entrywise)",
            entry
        ),
        other => other.to_string(),
    })?;
    let opts = solve_options(&args.solver, sys.input_dim())?;
    let res = solve_robust(&sys, &unc, &opts).map_err(|e| e.to_string())?;
    let mut doc = solve_document("solve-robust", &robust_sys, &res)?;
    doc.robustified_a = Some(matrix_rows(robust_sys.a()));
    if let Some(samples) = args.verify_samples {
        let report = worst_case_monotonicity_check(&sys, &unc, &res.u_star, samples, args.seed)
            .map_err(|e| e.to_string())?;
        doc.verification = Some(VerificationSummary {
            samples: report.samples,
            seed: args.seed,
            worst_case_stable: report.worst_case_stable,
            worst_case_objective: report.worst_case_objective,
            max_sampled_objective: report.max_sampled_objective,
            unstable_samples: report.unstable_samples.len(),
            cost_violations: report.cost_violations.len(),
            passed: report.passed(),
        });
    }
    emit_document(&doc, args.solver.output.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, String> {
    let (sys, _) = load_validated(&args.input)?;
    let u = parse_dose(&args.u, sys.input_dim())?;
    let abscissa = spectral_abscissa(&sys.closed_loop(&u).map_err(|e| e.to_string())?);
    let horizon = args.horizon.unwrap_or_else(|| default_horizon(abscissa));
    let dt = args.dt.unwrap_or_else(|| default_dt(abscissa));
    let resp = impulse_response(&sys, &u, horizon, dt).map_err(|e| e.to_string())?;
    let mut out = format!(
        "# spectral_abscissa={:.12e} stable={} norm_growing={} blowup={}\n",
        resp.spectral_abscissa,
        resp.stable_by_abscissa(),
        resp.norm_growing(),
        match resp.blowup {
            Some(t) => format!("{t:.6}"),
            None => "none".to_string(),
        }
    );
    let mut table = Vec::new();
    resp.write_csv(&mut table)
        .map_err(|e| format!("rendering CSV: {e}"))?;
    out.push_str(std::str::from_utf8(&table).expect("CSV is ASCII"));
    write_text(args.output.as_deref(), &out)?;
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32, String> {
    let (sys, unc) = load_system(&args.input)?;
    let violations = sys.validate();
    let connected = is_strongly_connected(sys.a());
    let mut report = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        n: sys.state_dim(),
        m: sys.input_dim(),
        q: sys.disturbance_dim(),
        violations: violations.clone(),
        strongly_connected: connected,
        has_uncertainty: unc.is_some(),
        u: None,
        stable: None,
        spectral_abscissa: None,
        stability_witness_found: None,
        j: None,
        sigma_cl: None,
        control_cost: None,
        dc_peak_confirmed: None,
    };

    println!(
        "system: {} state(s), {} input(s), {} disturbance channel(s)",
        report.n, report.m, report.q
    );
    if violations.is_empty() {
        println!("validation: ok");
    } else {
        println!("validation: {} violation(s)", violations.len());
        for v in &violations {
            println!("  - {v}");
        }
    }
    println!("strongly connected drift: {connected}");
    println!("uncertainty block: {}", if unc.is_some() { "present" } else { "absent" });

    if let Some(u_text) = &args.u {
        if !violations.is_empty() {
            return Err("cannot evaluate the dose on a system that fails validation".into());
        }
        let u = parse_dose(u_text, sys.input_dim())?;
        let a_cl = sys.closed_loop(&u).map_err(|e| e.to_string())?;
        let cert = hurwitz_certificate(&a_cl);
        let obj = objective(&sys, &u).map_err(|e| e.to_string())?;
        report.u = Some(u.vector().iter().cloned().collect());
        report.stable = Some(obj.stable);
        report.spectral_abscissa = Some(cert.spectral_abscissa);
        report.stability_witness_found = Some(cert.witness.is_some());
        report.j = Some(obj.j);
        report.sigma_cl = Some(obj.sigma_cl);
        report.control_cost = Some(obj.control_cost);

        println!("dose: {:?}", u.vector().as_slice());
        println!(
            "spectral abscissa: {:+.6e} ({})",
            cert.spectral_abscissa,
            if obj.stable { "stable" } else { "unstable" }
        );
        if obj.stable {
            println!("objective J: {:.6}", obj.j);
            println!("dc gain peak sigma: {:.6}", obj.sigma_cl);
            println!("dose cost: {:.6}", obj.control_cost);
            // 30-point logarithmic frequency grid over [1e-2, 1e2].
            let omegas: Vec<f64> = (0..30)
                .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 29.0))
                .collect();
            let peak_ok = dc_peak_check(&sys, &u, &omegas).map_err(|e| e.to_string())?;
            report.dc_peak_confirmed = Some(peak_ok);
            println!(
                "zero-frequency gain dominates 30-point grid [1e-2, 1e2]: {peak_ok}"
            );
        } else {
            println!("objective J: infinite (unstable closed loop)");
        }
    }

    if let Some(path) = &args.output {
        let mut json = serde_json::to_string_pretty(&report)
            .map_err(|e| format!("serializing report: {e}"))?;
        json.push('\n');
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(0)
}

fn cmd_example(args: ExampleArgs) -> Result<i32, String> {
    if !args.chain {
        return Err("the only example family is --chain".into());
    }
    let params = ChainModelParams::new(args.n, args.r, args.c, args.rho)
        .map_err(|e| e.to_string())?;
    let sys = make_chain_system(&params);
    let mut json = system_to_json(&sys, None).map_err(|e| e.to_string())?;
    json.push('\n');
    write_text(args.emit.as_deref(), &json)?;
    Ok(0)
}

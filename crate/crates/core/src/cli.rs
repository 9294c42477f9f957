//! Command-line surface: `solve`, `distance`, `oracle-1d` and `verify`.
//!
//! Exit codes: 0 success, 2 bad input, 3 solver did not converge, 4 internal
//! error (linear solver breakdown, failed self-check).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::energy::{KineticRule, ProblemSpec, TimeGrid};
use crate::error::Error;
use crate::io::{self, ConfigReport, GridReport, InputHistogram, RunReport};
use crate::lattice::{GridSpec, Lattice};
use crate::newton::{self, SolveResult, SolverConfig, Termination};
use crate::oracle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fisher-ot", version, about = "Fisher-information regularized optimal transport between histograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the regularized transport path and write frames and a report.
    Solve(SolveArgs),
    /// Solve and print only the distance estimate.
    Distance(SolveArgs),
    /// Exact squared W2 distance between two 1D histograms.
    #[command(name = "oracle-1d")]
    Oracle1d(InputArgs),
    /// Run the derivative, convexity and barrier self-checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    #[arg(long)]
    input0: PathBuf,
    #[arg(long)]
    input1: PathBuf,
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Relative positivity floor added before normalization.
    #[arg(long, default_value_t = 0.01)]
    floor: f64,
    /// Extent `lo,hi` of every axis.
    #[arg(long, default_value = "0,1", value_parser = parse_domain)]
    domain: (f64, f64),
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of interior time levels L.
    #[arg(long, default_value_t = 30)]
    time_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    beta2: f64,
    /// Newton step size.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Relative objective change that stops the iteration.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Trapezoidal)]
    kinetic_rule: RuleArg,
    /// Directory for density frames and the objective trace.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Path of the JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print one line per Newton iteration to stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Seed for the random test points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Pgm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Trapezoidal,
    LeftLevel,
}

impl From<RuleArg> for KineticRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Trapezoidal => KineticRule::Trapezoidal,
            RuleArg::LeftLevel => KineticRule::LeftLevel,
        }
    }
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(format!("need finite lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::LinearSolve { .. } | Error::NonDescent(_) => EXIT_INTERNAL,
            _ => EXIT_BAD_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(&a, out, err),
        Command::Distance(a) => distance(&a, out, err),
        Command::Oracle1d(a) => oracle_1d(&a, out),
        Command::Verify(a) => verify(&a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &Path, format: Option<FormatArg>) -> Result<InputHistogram, Error> {
    let is_pgm = match format {
        Some(FormatArg::Pgm) => true,
        Some(FormatArg::Csv) => false,
        None => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")),
    };
    if is_pgm {
        io::read_pgm(path)
    } else {
        io::read_histogram_csv(path)
    }
}

/// Loaded, floored and normalized endpoints on their lattice.
struct Inputs {
    lattice: Lattice,
    start: Vec<f64>,
    end: Vec<f64>,
}

fn load_inputs(a: &InputArgs) -> Result<Inputs, Error> {
    let mut h0 = load(&a.input0, a.format)?;
    let mut h1 = load(&a.input1, a.format)?;
    if (h0.dim, h0.n_pts) != (h1.dim, h1.n_pts) {
        return Err(Error::InvalidHistogram(format!(
            "input shapes differ: {}-d with {} points vs {}-d with {} points",
            h0.dim, h0.n_pts, h1.dim, h1.n_pts
        )));
    }
    let spec = GridSpec::cube(h0.dim, h0.n_pts, a.domain.0, a.domain.1)?;
    Ok(Inputs { lattice: Lattice::new(spec), start: h0.normalize(a.floor)?, end: h1.normalize(a.floor)? })
}

fn solver_config(a: &SolveArgs) -> SolverConfig {
    SolverConfig { step_size: a.alpha, tolerance: a.tol, max_iterations: a.max_iter, ..SolverConfig::default() }
}

fn run_solver(a: &SolveArgs, err: &mut dyn Write) -> Result<(ProblemSpec, SolverConfig, SolveResult, f64), Failure> {
    let inputs = load_inputs(&a.input)?;
    let prob = ProblemSpec::new(inputs.lattice, TimeGrid::new(a.time_steps)?, inputs.start, inputs.end, a.beta2)?
        .with_kinetic_rule(a.kinetic_rule.into());
    let cfg = solver_config(a);
    let clock = Instant::now();
    let result = newton::newton_solve_with(&prob, &cfg, |r| {
        if a.verbose {
            let _ = writeln!(
                err,
                "iter {:4}  f = {:.10e}  step = {:.3}  |Au-b| = {:.2e}  min p = {:.3e}",
                r.iteration, r.objective, r.step, r.feasibility, r.min_interior_mass
            );
        }
    })?;
    Ok((prob, cfg, result, clock.elapsed().as_secs_f64()))
}

fn exit_for(t: Termination) -> i32 {
    match t {
        Termination::Converged => EXIT_OK,
        Termination::MaxIterations | Termination::StepFailure => EXIT_NOT_CONVERGED,
    }
}

fn solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (prob, cfg, result, wall) = run_solver(a, err)?;
    let mut trace_file = None;
    if let Some(dir) = &a.out_dir {
        let frames = io::write_frames(&result, &prob.lattice, dir)?;
        trace_file = Some(frames.trace.display().to_string());
        let _ = writeln!(out, "frames: {} written to {}", frames.frames.len(), dir.display());
    }
    let constraints = newton::assemble_constraints(&prob)?;
    let feasibility = constraints.residual(&newton::pack(&prob.layout(), &result.density, &result.flux));
    let spec = prob.lattice.spec();
    let config = ConfigReport {
        beta2: prob.beta2,
        time_steps: prob.time.interior_levels(),
        floor: a.input.floor,
        kinetic_rule: format!("{:?}", prob.kinetic_rule),
        solver: cfg,
        grid: GridReport { dim: spec.dim(), n_pts: spec.n_pts(), domain: spec.extents().to_vec(), spacing: spec.spacing() },
    };
    let report = RunReport::new(&result, config, feasibility, trace_file, wall);
    if let Some(path) = &a.report {
        std::fs::write(path, report.to_json() + "\n").map_err(Error::from)?;
    }
    let _ = writeln!(out, "termination: {}", result.termination.as_str());
    let _ = writeln!(out, "iterations: {}", result.iterations);
    let _ = writeln!(out, "objective: {}", result.objective.total);
    let _ = writeln!(out, "distance estimate: {}", result.distance_estimate);
    let _ = writeln!(out, "entropy gap: {}", result.entropy_gap);
    Ok(exit_for(result.termination))
}

fn distance(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (_, _, result, _) = run_solver(a, err)?;
    let _ = writeln!(out, "{}", result.distance_estimate);
    Ok(exit_for(result.termination))
}

fn oracle_1d(a: &InputArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let inputs = load_inputs(a)?;
    if inputs.lattice.dim() != 1 {
        return Err(Error::InvalidHistogram("oracle-1d needs 1D inputs".into()).into());
    }
    let w2 = oracle::w2_squared_1d(&oracle::axis_positions(&inputs.lattice), &inputs.start, &inputs.end)?;
    let _ = writeln!(out, "{w2}");
    Ok(EXIT_OK)
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut rng = StdRng::seed_from_u64(a.seed);
    let checks = oracle::verification_suite(&mut rng)?;
    for c in &checks {
        let _ = writeln!(out, "{} {:<34} value {:.3e} threshold {:.1e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_INTERNAL })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("fisher-ot").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn domain_parsing() {
        assert_eq!(parse_domain("0,2").unwrap(), (0.0, 2.0));
        assert_eq!(parse_domain(" -1 , 1").unwrap(), (-1.0, 1.0));
        assert!(parse_domain("1,1").is_err());
        assert!(parse_domain("3").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = call(&["solve", "--bogus"]);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("Usage"));
        assert_eq!(call(&[]).0, EXIT_BAD_INPUT);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_file_exits_2() {
        let (code, _, err) = call(&["oracle-1d", "--input0", "/nonexistent/a.csv", "--input1", "/nonexistent/b.csv"]);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.starts_with("error:"));
    }
}

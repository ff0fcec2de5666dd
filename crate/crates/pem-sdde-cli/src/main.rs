//! Command-line front end for the pem-sdde library: single-path simulation,
//! coupled-path strong-convergence studies, and Monte-Carlo probes of the
//! structural inequalities.
//!
//! Exit codes: 0 success, 1 probe violations found, 2 usage or configuration
//! error, 3 runtime failure (non-finite state, output I/O).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pem_sdde::{
    b_consistency_probe, build_time_grid, builtin, builtin_names, c_stability_probe, default_alpha,
    generate_path, history_holder_probe, integrate, load_problem, monotonicity_probe,
    strong_convergence, write_convergence_csv, ProbeReport, ProjectionParams, SchemeConfig,
    SddeError, SddeProblem, NORMAL_METHOD,
};

#[derive(Parser)]
#[command(
    name = "pem-sdde",
    version,
    about = "Projected Euler-Maruyama integration of stochastic delay differential equations",
    long_about = "Integrates scalar SDDEs with one constant delay using the projected \
                  Euler-Maruyama scheme, measures strong convergence against a fine-step \
                  reference on coupled Brownian paths, and samples the structural \
                  inequalities (monotonicity, stability, consistency, history regularity) \
                  that back the scheme's convergence guarantees.\n\n\
                  Thread count for parallel sections follows RAYON_NUM_THREADS; results \
                  are bit-identical regardless."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write it as CSV (rows n = -M..N).
    Simulate(SimulateArgs),
    /// Run a strong-convergence study against a fine-step reference.
    Converge(ConvergeArgs),
    /// Sample one structural inequality and report fitted constants.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeChoice {
    /// Projected Euler-Maruyama (states clamped to the ball of radius h^-alpha on use).
    Projected,
    /// Classical Euler-Maruyama (no projection; may diverge on superlinear problems).
    Classical,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    problem: String,
    /// Steps per delay interval; the step size is delay / M.
    #[arg(long = "M", default_value_t = 64)]
    delay_steps: usize,
    /// Master seed for the Brownian path.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Path index (independent noise stream) under the master seed.
    #[arg(long, default_value_t = 0)]
    path_index: u64,
    /// Projection exponent; overrides the value derived from the problem's q.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = SchemeChoice::Projected)]
    scheme: SchemeChoice,
    /// Integration horizon; defaults to the problem's declared horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output file; standard output if omitted. Nothing is written on failure.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    problem: String,
    /// Steps per delay interval of the fine reference grid.
    #[arg(long, default_value_t = 8192)]
    ref_steps: usize,
    /// Step-size factors of the coarse levels relative to the reference.
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 32, 64, 128])]
    levels: Vec<usize>,
    /// Sample paths per level.
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Master seed; path k uses noise stream k.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Projection exponent; overrides the value derived from the problem's q.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = SchemeChoice::Projected)]
    scheme: SchemeChoice,
    /// Output file for the level table; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    /// One-sided coupling bound of drift and diffusion on nested balls.
    Monotonicity,
    /// Mean-square one-step stability of the projected scheme (needs eta > 1).
    CStability,
    /// Local consistency orders 3/2 (conditional mean) and 1 (deviation).
    BConsistency,
    /// Hoelder constant of the initial history on [-delay, 0].
    HistoryHolder,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(value_enum)]
    probe: ProbeKind,
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    problem: String,
    /// Master seed for the sampling streams (history-holder is seed-fixed).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Coupling weight eta. Defaults: the problem's declared eta or 1 for
    /// monotonicity; 2 for c-stability (which requires eta > 1).
    #[arg(long)]
    eta: Option<f64>,
    /// Monotonicity: samples per ball radius.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Monotonicity: outermost ball radius (inner balls are R/2 and R/4).
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    /// Monotonicity: constant to check; defaults to the problem's declared L.
    #[arg(long)]
    declared_l: Option<f64>,
    /// C-stability: steps per delay interval fixing the probed step size.
    #[arg(long = "M", default_value_t = 16)]
    delay_steps: usize,
    /// C-stability: argument pairs per pass.
    #[arg(long, default_value_t = 64)]
    arg_pairs: usize,
    /// C-stability: noise draws per argument pair.
    #[arg(long, default_value_t = 1000)]
    noise_samples: usize,
    /// C-stability: constant to check; fitted on a first pass if omitted.
    #[arg(long)]
    candidate_c: Option<f64>,
    /// B-consistency: grid time at which local errors are measured.
    #[arg(long, default_value_t = 1.0)]
    anchor: f64,
    /// B-consistency: steps per delay interval of each probed level.
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 32, 64, 128])]
    levels: Vec<usize>,
    /// B-consistency: fine substeps per probed step.
    #[arg(long, default_value_t = 8)]
    substep: usize,
    /// B-consistency: outer paths per level.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// History-holder: sampled time pairs.
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<SddeError> for Failure {
    fn from(err: SddeError) -> Self {
        let code = match err {
            SddeError::NonFiniteState { .. } | SddeError::Io(_) => 3,
            SddeError::InvalidArgument(_) | SddeError::Parse { .. } | SddeError::MissingKey(_) => 2,
        };
        Failure { code, message: err.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Converge(args) => run_converge(args),
        Command::Probe(args) => run_probe(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Resolves --problem: a known built-in name, otherwise a file path. All
/// resolution failures are configuration errors.
fn resolve_problem(spec: &str) -> Result<SddeProblem, Failure> {
    if builtin_names().contains(&spec) {
        return builtin(spec).map_err(Failure::from);
    }
    load_problem(Path::new(spec)).map_err(|err| match err {
        SddeError::Io(io) => Failure::usage(format!("cannot open {spec}: {io}")),
        other => Failure::usage(other.to_string()),
    })
}

fn resolve_alpha(flag: Option<f64>, problem: &SddeProblem) -> Result<f64, Failure> {
    match flag {
        Some(alpha) if alpha.is_finite() && alpha > 0.0 => Ok(alpha),
        Some(alpha) => Err(Failure::usage(format!("alpha must be finite and > 0, got {alpha}"))),
        None => default_alpha(problem.assumptions().growth_exponent).map_err(Failure::from),
    }
}

fn write_output(target: Option<&Path>, content: &str) -> Result<(), Failure> {
    match target {
        Some(path) => fs::write(path, content)
            .map_err(|err| Failure::runtime(format!("cannot write {}: {err}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(content.as_bytes())
            .map_err(|err| Failure::runtime(format!("cannot write to standard output: {err}"))),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let problem = resolve_problem(&args.problem)?;
    let horizon = args.horizon.unwrap_or_else(|| problem.horizon());
    let grid = build_time_grid(problem.delay(), horizon, args.delay_steps)?;
    let (config, alpha) = match args.scheme {
        SchemeChoice::Projected => {
            let alpha = resolve_alpha(args.alpha, &problem)?;
            let params = ProjectionParams::new(alpha, grid.step())?;
            (SchemeConfig::projected(params), Some(alpha))
        }
        SchemeChoice::Classical => (SchemeConfig::classical(), None),
    };
    let path = generate_path(
        args.seed,
        args.path_index,
        problem.dim_noise(),
        grid.step(),
        grid.node_count(),
    )?;
    let trajectory = integrate(&problem, &grid, &path, 1, &config)?;

    let mut out = String::new();
    out.push_str("n,t");
    for i in 0..problem.dim_state() {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    let m = grid.delay_steps() as i64;
    let n = grid.node_count() as i64;
    for node in -m..=n {
        let _ = write!(out, "{},{}", node, grid.node(node));
        for value in trajectory.node(node) {
            let _ = write!(out, ",{value}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "# problem={}", problem.name());
    let _ = writeln!(out, "# scheme={}", config.scheme.name());
    let _ = writeln!(out, "# master_seed={}", args.seed);
    let _ = writeln!(out, "# path_index={}", args.path_index);
    let _ = writeln!(out, "# h={}", grid.step());
    let _ = writeln!(out, "# normal_method={NORMAL_METHOD}");
    if let Some(alpha) = alpha {
        let _ = writeln!(out, "# alpha={alpha}");
    } else {
        let _ = writeln!(out, "# divergence_guard={}", config.divergence_guard);
    }
    if let Some(step) = trajectory.diverged_at() {
        let _ = writeln!(out, "# diverged_at={step}");
    }
    write_output(args.output.as_deref(), &out)?;
    Ok(0)
}

fn run_converge(args: ConvergeArgs) -> Result<u8, Failure> {
    let problem = resolve_problem(&args.problem)?;
    let config = match args.scheme {
        SchemeChoice::Projected => {
            let alpha = resolve_alpha(args.alpha, &problem)?;
            let fine_step = problem.delay() / args.ref_steps.max(1) as f64;
            SchemeConfig::projected(ProjectionParams::new(alpha, fine_step)?)
        }
        SchemeChoice::Classical => SchemeConfig::classical(),
    };
    let report = strong_convergence(
        &problem,
        args.ref_steps,
        &args.levels,
        args.paths,
        args.seed,
        &config,
    )?;

    let mut csv = Vec::new();
    write_convergence_csv(&report, &mut csv)
        .map_err(|err| Failure::runtime(format!("cannot format report: {err}")))?;
    let csv = String::from_utf8(csv).expect("csv output is utf-8");
    let slope_line = match &report.fitted_slope {
        Some(fit) => format!(
            "fitted slope {:.4} (stderr {:.4}) over {} levels",
            fit.slope,
            fit.slope_stderr,
            report.levels.len()
        ),
        None => "fitted slope unavailable (no usable levels)".to_string(),
    };
    match args.output.as_deref() {
        Some(path) => {
            write_output(Some(path), &csv)?;
            println!("{slope_line}");
        }
        None => {
            write_output(None, &csv)?;
            eprintln!("{slope_line}");
        }
    }
    Ok(0)
}

fn run_probe(args: ProbeArgs) -> Result<u8, Failure> {
    let problem = resolve_problem(&args.problem)?;
    let report = match args.probe {
        ProbeKind::Monotonicity => {
            let eta = args
                .eta
                .or(problem.assumptions().monotonicity_eta)
                .unwrap_or(1.0);
            let declared = args.declared_l.or(problem.assumptions().monotonicity_const);
            monotonicity_probe(&problem, eta, declared, args.radius, args.samples, args.seed)?
        }
        ProbeKind::CStability => {
            let eta = args.eta.unwrap_or(2.0);
            let step = problem.delay() / args.delay_steps.max(1) as f64;
            c_stability_probe(
                &problem,
                step,
                eta,
                args.candidate_c,
                args.arg_pairs,
                args.noise_samples,
                args.seed,
            )?
        }
        ProbeKind::BConsistency => b_consistency_probe(
            &problem,
            args.anchor,
            &args.levels,
            args.substep,
            args.paths,
            args.seed,
        )?,
        ProbeKind::HistoryHolder => history_holder_probe(&problem, args.pairs)?,
    };
    print_probe_report(problem.name(), &report)?;
    Ok(if report.violations > 0 { 1 } else { 0 })
}

fn print_probe_report(problem_name: &str, report: &ProbeReport) -> Result<(), Failure> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} probe on {}: {} violation(s), {} indeterminate over {} samples",
        report.probe, problem_name, report.violations, report.indeterminate, report.samples
    );
    let _ = writeln!(out, "probe={}", report.probe);
    let _ = writeln!(out, "problem={problem_name}");
    let _ = writeln!(out, "samples={}", report.samples);
    let _ = writeln!(out, "violations={}", report.violations);
    let _ = writeln!(out, "indeterminate={}", report.indeterminate);
    let _ = writeln!(out, "worst_margin={}", report.worst_margin);
    for (name, value) in &report.fitted {
        let _ = writeln!(out, "fitted {name}={value}");
    }
    for note in &report.notes {
        let _ = writeln!(out, "note={note}");
    }
    write_output(None, &out)
}

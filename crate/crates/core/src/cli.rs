//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain violation (invalid network, violated
//! assumption, failed check, non-convergence under `--strict`), 2 usage or
//! parse error. Indices in text output are 1-based; JSON arrays are plain
//! positional arrays.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    f_map, iterate_issue_sequence, iterate_perceived, iterate_single_issue, Trajectory, DEFAULT_TOL,
    OUTER_MAX_ITER,
};
use crate::equilibrium::{
    block_equation_residual, certify, convergence_rate_measurement, equilibrium_properties_check,
    multi_start_probe, solve, solve_fixed_point_with, CertificateSet, EquilibriumReport,
    FixedPointOptions, MethodChoice, PropertyReport, PROBE_STARTS,
};
use crate::error::Error;
use crate::io::{save_json, save_trajectory_csv, to_json, write_trajectory_csv, IoError, NetworkConfig};
use crate::montecarlo::{
    run_uniqueness_experiment, sample_simplex, threads_from_env, ChernoffPlan, ExperimentConfig, Model,
    DEFAULT_MATCH_TOL,
};
use crate::network::{
    analyze_structure, check_assumption_a1, InfluenceNetwork, PowerVector, StubbornnessProfile,
};

/// Largest block-equation residual `check` accepts.
pub const BLOCK_RESIDUAL_TOL: f64 = 1e-9;
/// Cells above which a Monte Carlo run gets a runtime warning.
pub const LARGE_RUN_CELLS: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "socialpower", version, about = "Social power evolution with stubborn individuals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a network config and describe its structure.
    Validate {
        config: PathBuf,
    },
    /// Iterate power dynamics and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Solve for the equilibrium and report certificates and property checks.
    Equilibrium(EquilibriumArgs),
    /// Verify the equilibrium properties of an instance.
    Check(CheckArgs),
    /// Randomized uniqueness experiment.
    Montecarlo(MontecarloArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Stopping tolerance (ℓ1).
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = OUTER_MAX_ITER)]
    pub max_steps: usize,
    /// Exit with status 1 when an iteration does not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    Issues,
    Single,
    Perceived,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = SimModel::Issues)]
    pub model: SimModel,
    /// `uniform`, `vertex:i` (1-based), `random`, or comma-separated values.
    #[arg(long, default_value = "uniform")]
    pub x0: String,
    /// Number of runs; each `random` run draws a fresh start.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV path. With several runs a 3-digit run index is added to the file stem.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON path (default: stdout, or stderr when the CSV goes to stdout).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Iterate,
    StarFullyStubborn,
    StarPartiallyStubborn,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Iterate => MethodChoice::Iterate,
            MethodArg::StarFullyStubborn => MethodChoice::StarFullyStubborn,
            MethodArg::StarPartiallyStubborn => MethodChoice::StarPartiallyStubborn,
        }
    }
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Start for iteration (same forms as `simulate --x0`).
    #[arg(long, default_value = "uniform")]
    pub x0: String,
    /// Also iterate from random starts and report whether the limits agree.
    #[arg(long)]
    pub probe: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub config: PathBuf,
    /// JSON array with the equilibrium to check; solved for when absent.
    #[arg(long)]
    pub x_star: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = OUTER_MAX_ITER)]
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McModel {
    Issues,
    Single,
}

#[derive(Debug, Args)]
pub struct MontecarloArgs {
    /// Accuracy; with `--eta` sets both counts to the Chernoff sample size.
    #[arg(long, requires = "eta", conflicts_with_all = ["pairs", "inits"])]
    pub epsilon: Option<f64>,
    /// Miss probability (one minus confidence).
    #[arg(long, requires = "epsilon", conflicts_with_all = ["pairs", "inits"])]
    pub eta: Option<f64>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub inits: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = McModel::Issues)]
    pub model: McModel,
    /// ℓ1 radius within which two limits count as the same equilibrium.
    #[arg(long, default_value_t = DEFAULT_MATCH_TOL)]
    pub tolerance: f64,
    /// Susceptibilities are drawn uniformly from `[0, cap)`.
    #[arg(long, default_value_t = 1.0)]
    pub theta_cap: f64,
    /// Print the plan without running it.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Error carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Domain(e) => Failure::from(e),
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::domain(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Equilibrium(a) => cmd_equilibrium(a),
        Command::Check(a) => cmd_check(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
    }
}

fn load(path: &Path) -> CliResult<(InfluenceNetwork, StubbornnessProfile)> {
    Ok(NetworkConfig::load(path)?.build()?)
}

fn standing_assumption_violation(prof: &StubbornnessProfile) -> Option<String> {
    if let Some(i) = prof.theta().iter().position(|&t| t >= 1.0) {
        return Some(format!(
            "theta_{} = {} is not below 1",
            i + 1,
            prof.get(i)
        ));
    }
    if prof.theta().iter().all(|&t| t == 0.0) {
        return Some("every theta is 0".into());
    }
    None
}

fn require_standing(prof: &StubbornnessProfile) -> CliResult {
    match standing_assumption_violation(prof) {
        Some(msg) => Err(Failure::domain(format!("assumption 2 violated: {msg}"))),
        None => Ok(()),
    }
}

fn one_based(set: &[usize]) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ")
}

fn cmd_validate(config: &Path) -> CliResult<i32> {
    let (net, prof) = load(config)?;
    let s = analyze_structure(&net);
    let a1 = check_assumption_a1(&net, &prof, &PowerVector::uniform(net.n()));
    let a2 = standing_assumption_violation(&prof);
    let comps = |cs: &[Vec<usize>]| {
        cs.iter()
            .map(|c| format!("{{{}}}", one_based(c)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("network: valid (n = {})", net.n());
    println!("renormalized rows: {}", one_based(net.renormalized_rows()));
    println!(
        "assumption 1: {}",
        if a1 { "holds" } else { "violated: a sink component has every theta = 1" }
    );
    println!(
        "assumption 2: {}",
        a2.as_deref().map_or("holds".to_string(), |m| format!("violated: {m}"))
    );
    println!("fully stubborn: {}", one_based(&prof.fully_stubborn()));
    println!("partially stubborn: {}", one_based(&prof.partially_stubborn()));
    println!("strongly connected components: {}", comps(&s.sccs));
    println!("sink components: {}", comps(&s.sink_sccs));
    println!(
        "star center: {}",
        s.star_center.map_or("none".to_string(), |c| (c + 1).to_string())
    );
    println!("doubly stochastic: {}", if s.doubly_stochastic { "yes" } else { "no" });
    require_standing(&prof)?;
    Ok(0)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

/// Starting point described by `desc`; `run` selects the random stream.
fn parse_x0(desc: &str, n: usize, seed: &mut Option<u64>, run: usize) -> CliResult<PowerVector> {
    match desc.trim() {
        "uniform" => Ok(PowerVector::uniform(n)),
        "random" => {
            let s = *seed.get_or_insert_with(|| resolve_seed(None));
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            rng.set_stream(run as u64);
            Ok(sample_simplex(&mut rng, n))
        }
        s if s.starts_with("vertex:") => {
            let i: usize = s["vertex:".len()..]
                .parse()
                .map_err(|_| Failure::usage(format!("bad vertex index in {s:?}")))?;
            if i == 0 || i > n {
                return Err(Failure::domain(format!("vertex index {i} outside 1..={n}")));
            }
            Ok(PowerVector::vertex(n, i - 1))
        }
        s => {
            let values = s
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Failure::usage(format!("cannot parse x0 {s:?}")))?;
            if values.len() != n {
                return Err(Failure::domain(format!("x0 has {} entries, network has {n}", values.len())));
            }
            Ok(PowerVector::new(values)?)
        }
    }
}

/// Prints a line, ignoring a closed stdout.
fn print_stdout(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => Ok(save_json(p, value)?),
        None => {
            print_stdout(&to_json(value));
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    run: usize,
    model: &'static str,
    x0: PowerVector,
    converged: bool,
    /// ℓ1 change over the last step.
    residual: f64,
    steps: usize,
    final_x: PowerVector,
    /// `‖F(x) - x‖₁` at the final point.
    equilibrium_residual: f64,
    observed_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
}

fn run_path(out: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{:03}.{}", run + 1, ext.to_string_lossy()),
        None => format!("{stem}-{:03}", run + 1),
    };
    out.with_file_name(name)
}

fn observed_rate(net: &InfluenceNetwork, prof: &StubbornnessProfile, t: &Trajectory) -> Option<f64> {
    let opts = FixedPointOptions {
        tol: 1e-14,
        max_iter: 100_000,
        ..FixedPointOptions::default()
    };
    let refined = solve_fixed_point_with(net, prof, t.last(), opts).ok()?;
    convergence_rate_measurement(t, &refined.x_star).ok().map(|f| f.rate)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<i32> {
    let (net, prof) = load(&a.config)?;
    require_standing(&prof)?;
    if a.runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    if a.runs > 1 && a.out.is_none() {
        return Err(Failure::usage("--out is required with --runs > 1"));
    }
    let n = net.n();
    let mut seed = a.seed;
    let mut summaries = Vec::with_capacity(a.runs);
    let mut all_converged = true;
    for run in 0..a.runs {
        let x0 = parse_x0(&a.x0, n, &mut seed, run)?;
        let (tol, max) = (a.solver.tol, a.solver.max_steps);
        let (t, model) = match a.model {
            SimModel::Issues => (iterate_issue_sequence(&net, &prof, &x0, max, tol)?, "issues"),
            SimModel::Single => (iterate_single_issue(&net, &prof, &x0, max, tol)?.trajectory, "single"),
            SimModel::Perceived => (iterate_perceived(&net, &prof, &x0, max, tol)?, "perceived"),
        };
        all_converged &= t.converged;
        let csv = match &a.out {
            Some(out) => {
                let path = run_path(out, run, a.runs);
                save_trajectory_csv(&path, &t)?;
                Some(path.display().to_string())
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write_trajectory_csv(&mut lock, &t)?;
                let _ = lock.flush();
                None
            }
        };
        let last = t.last().clone();
        summaries.push(RunSummary {
            run: run + 1,
            model,
            x0,
            converged: t.converged,
            residual: t.final_residual,
            steps: t.steps(),
            equilibrium_residual: f_map(&net, &prof, &last)?.l1_distance(&last),
            final_x: last,
            observed_rate: observed_rate(&net, &prof, &t),
            csv,
        });
    }
    #[derive(Serialize)]
    struct Summary {
        seed: Option<u64>,
        runs: Vec<RunSummary>,
    }
    let summary = Summary { seed, runs: summaries };
    match (&a.summary, &a.out) {
        (Some(p), _) => save_json(p, &summary)?,
        (None, Some(_)) => print_stdout(&to_json(&summary)),
        (None, None) => eprintln!("{}", to_json(&summary)),
    }
    if a.solver.strict && !all_converged {
        return Err(Failure::domain("iteration did not converge"));
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct EquilibriumOutput {
    #[serde(flatten)]
    report: EquilibriumReport,
    properties: Option<PropertyReport>,
    block_residual: Option<f64>,
}

fn cmd_equilibrium(a: EquilibriumArgs) -> CliResult<i32> {
    let (net, prof) = load(&a.config)?;
    require_standing(&prof)?;
    let mut seed = a.seed;
    let x0 = parse_x0(&a.x0, net.n(), &mut seed, 0)?;
    let opts = FixedPointOptions {
        tol: a.solver.tol,
        max_iter: a.solver.max_steps,
        ..FixedPointOptions::default()
    };
    let mut report = solve(&net, &prof, &x0, a.method.into(), opts)?;
    if a.probe {
        let s = match seed {
            Some(s) => s,
            None => resolve_seed(None),
        };
        report.probe = Some(multi_start_probe(&net, &prof, PROBE_STARTS, s, opts)?);
    }
    let (properties, block_residual) = if report.solved {
        (
            Some(equilibrium_properties_check(&net, &prof, &report.x_star)?),
            Some(block_equation_residual(&net, &prof, &report.x_star)?),
        )
    } else {
        (None, None)
    };
    let solved = report.solved;
    emit_json(
        &EquilibriumOutput {
            report,
            properties,
            block_residual,
        },
        a.out.as_deref(),
    )?;
    if a.solver.strict && !solved {
        return Err(Failure::domain("equilibrium not solved"));
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct CheckOutput {
    x_star: PowerVector,
    residual: f64,
    properties: PropertyReport,
    block_residual: f64,
    block_equations_hold: bool,
    certificates: CertificateSet,
    all_hold: bool,
}

fn cmd_check(a: CheckArgs) -> CliResult<i32> {
    let (net, prof) = load(&a.config)?;
    require_standing(&prof)?;
    let x_star = match &a.x_star {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            let values: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            if values.len() != net.n() {
                return Err(Failure::domain(format!(
                    "x* has {} entries, network has {}",
                    values.len(),
                    net.n()
                )));
            }
            PowerVector::new(values)?
        }
        None => {
            let opts = FixedPointOptions {
                tol: a.tol,
                max_iter: a.max_steps,
                ..FixedPointOptions::default()
            };
            solve(&net, &prof, &PowerVector::uniform(net.n()), MethodChoice::Auto, opts)?.x_star
        }
    };
    let properties = equilibrium_properties_check(&net, &prof, &x_star)?;
    let block_residual = block_equation_residual(&net, &prof, &x_star)?;
    let block_equations_hold = block_residual < BLOCK_RESIDUAL_TOL;
    let all_hold = properties.all_hold() && block_equations_hold;
    let out = CheckOutput {
        x_star,
        residual: properties.residual,
        certificates: certify(&net, &prof)?,
        properties,
        block_residual,
        block_equations_hold,
        all_hold,
    };
    for c in out.properties.failures() {
        eprintln!("failed: {} ({})", c.name, c.detail);
    }
    emit_json(&out, a.out.as_deref())?;
    if all_hold {
        Ok(0)
    } else {
        Err(Failure::domain("equilibrium property check failed"))
    }
}

fn cmd_montecarlo(a: MontecarloArgs) -> CliResult<i32> {
    let plan = match (a.epsilon, a.eta) {
        (Some(eps), Some(eta)) => Some(ChernoffPlan::new(eps, eta).map_err(|e| Failure::usage(e.to_string()))?),
        _ => None,
    };
    let (pairs, inits) = match plan {
        Some(p) => {
            eprintln!(
                "chernoff sample size N = {} (epsilon = {}, eta = {})",
                p.samples, p.epsilon, p.eta
            );
            (p.samples as usize, p.samples as usize)
        }
        None => (a.pairs.unwrap_or(200), a.inits.unwrap_or(200)),
    };
    if pairs == 0 || inits == 0 {
        return Err(Failure::usage("--pairs and --inits must be at least 1"));
    }
    if a.n < 2 {
        return Err(Failure::usage("--n must be at least 2"));
    }
    let cells = pairs as u64 * (inits as u64 + 1);
    if cells > LARGE_RUN_CELLS {
        log::warn!(
            "{pairs} pairs x {inits} starts = {cells} runs; full-scale experiments take hours to days"
        );
    }
    let seed = resolve_seed(a.seed);
    let mut cfg = ExperimentConfig::new(pairs, inits, a.n, seed);
    cfg.model = match a.model {
        McModel::Issues => Model::Issues,
        McModel::Single => Model::Single,
    };
    cfg.tolerance = a.tolerance;
    cfg.theta_max_cap = a.theta_cap;
    cfg.solver_tol = a.solver.tol;
    cfg.max_steps = a.solver.max_steps;
    cfg.threads = threads_from_env();
    if a.dry_run {
        #[derive(Serialize)]
        struct DryRun {
            plan: Option<ChernoffPlan>,
            config: ExperimentConfig,
        }
        emit_json(&DryRun { plan, config: cfg }, a.out.as_deref())?;
        return Ok(0);
    }
    let mut experiment = run_uniqueness_experiment(&cfg)?;
    experiment.plan = plan;
    emit_json(&experiment, a.out.as_deref())?;
    if a.solver.strict && !experiment.non_convergent.is_empty() {
        return Err(Failure::domain(format!(
            "{} runs did not converge",
            experiment.non_convergent.len()
        )));
    }
    Ok(0)
}

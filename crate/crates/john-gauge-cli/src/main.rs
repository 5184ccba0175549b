//! Command-line driver for the `john-gauge` library.
//!
//! Six subcommands cover the full workflow: `gen` writes simplex instance
//! files, `mvie` computes maximum-volume inscribed ellipsoids, `certify`
//! extracts and checks contact decompositions of the identity, `theorem3`
//! runs the ball-iff-regular classifier suite, `blsuite` runs the lifted
//! integral suite (isotropy, product bound, orthonormality), and `plot2d`
//! exports CSV plot data for two-dimensional instances.
//!
//! Every command is deterministic for fixed flags: seeds are explicit,
//! Monte Carlo chunking is order-independent, and suite cases are emitted
//! in case-index order, so report files are byte-identical across runs.
//! Wall-clock timings go to stderr only. The environment variable
//! `JOHN_GAUGE_THREADS` caps the size of the worker pool.
//!
//! Exit codes: 0 success / all cases pass, 1 usage error, 2 infeasible or
//! degenerate input (including I/O and parse failures), 3 a suite or
//! certificate check ran but disagreed with the expected verdict.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use john_gauge::blcheck::{density_by_name, equality_orthonormality_check, lift, BLSystem};
use john_gauge::engine::{engine_by_name, MvieEngine};
use john_gauge::geom::{random_simplex, regular_simplex, Ellipsoid, HPolytope, Simplex};
use john_gauge::john::{certificate_from_ellipsoid, regular_certificate};
use john_gauge::mvie::{analytic_simplex_john, is_ball, SolverConfig, SolverReport, SolverStatus};

const EXIT_USAGE: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_DISAGREEMENT: u8 = 3;

/// Rejection threshold on the edge-determinant magnitude used by every
/// random-instance draw; rules out numerically flat simplices.
const MIN_DET: f64 = 0.05;
/// Pass gate applied to certificate residuals by `certify`.
const DEFAULT_CERTIFY_GATE: f64 = 1e-7;
/// Isotropy residual gate applied to every lifted system in `blsuite`.
const ISOTROPY_GATE: f64 = 1e-10;
/// Orthonormality verdict tolerance used by `blsuite`.
const ORTHO_TOL: f64 = 1e-6;
/// A Monte Carlo case earns a variance warning when its 99.7% confidence
/// radius exceeds this width, i.e. when percent-level questions cannot be
/// resolved at the requested sample budget.
const VARIANCE_WARN_WIDTH: f64 = 1e-2;
/// Number of boundary samples on an exported ellipse.
const ELLIPSE_SAMPLES: usize = 256;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "john-gauge",
    version,
    about = "Inscribed ellipsoids, contact decompositions, and integral suites for simplices and H-polytopes",
    after_help = "Exit codes: 0 success/all-pass, 1 usage, 2 infeasible/degenerate input, 3 suite disagreements.\n\
                  JOHN_GAUGE_THREADS caps the worker pool; timings print to stderr only."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simplex instance file.
    Gen(GenArgs),
    /// Compute the maximum-volume inscribed ellipsoid of an instance.
    Mvie(MvieArgs),
    /// Extract and verify a contact decomposition of the identity.
    Certify(CertifyArgs),
    /// Ball-iff-regular classifier suite over random simplices.
    Theorem3(Theorem3Args),
    /// Lifted-system integral suite: isotropy, product bound, orthonormality.
    Blsuite(BlsuiteArgs),
    /// Export polygon, ellipse, and contact-point plot data as CSV.
    Plot2d(Plot2dArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Instance family: an exactly regular simplex (inradius 1, centered
    /// at the origin) or a seeded random one with vertices in [-1, 1]^n.
    #[arg(value_parser = ["regular", "random"])]
    kind: String,
    /// Ambient dimension (at least 1).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Seed for the random family; ignored for regular instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Convergence threshold on the KKT residual.
    #[arg(long = "tol-kkt", default_value_t = SolverConfig::default().tol_kkt)]
    tol_kkt: f64,
    /// Newton-step budget across the whole barrier path.
    #[arg(long, default_value_t = SolverConfig::default().max_newton_iters)]
    max_iters: usize,
    /// Barrier weight shrink factor per stage, strictly inside (0, 1).
    #[arg(long, default_value_t = SolverConfig::default().barrier_shrink)]
    barrier_shrink: f64,
    /// Chebyshev radius at or below which the interior counts as empty.
    #[arg(long, default_value_t = SolverConfig::default().degeneracy_floor)]
    degeneracy_floor: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol_kkt: self.tol_kkt,
            max_newton_iters: self.max_iters,
            barrier_shrink: self.barrier_shrink,
            degeneracy_floor: self.degeneracy_floor,
        }
    }
}

#[derive(Args)]
struct MvieArgs {
    /// Instance file: simplex JSON ("vertices") or halfspace JSON
    /// ("normals"/"offsets").
    input: PathBuf,
    /// Solver strategy; `numeric` accepts any bounded H-polytope,
    /// `analytic` is exact but requires simplex input.
    #[arg(long, default_value = "numeric")]
    engine: String,
    /// Destination for the ellipsoid + report JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CertifyArgs {
    /// Instance file: simplex or halfspace JSON.
    input: PathBuf,
    /// Solver strategy used to find the inscribed ellipsoid.
    #[arg(long, default_value = "numeric")]
    engine: String,
    /// Residual gate for the pass/fail verdict.
    #[arg(long = "tol-pass", default_value_t = DEFAULT_CERTIFY_GATE)]
    tol_pass: f64,
    /// Destination for the certificate JSON (stdout when omitted); the
    /// human-readable summary always goes to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct Theorem3Args {
    /// Ambient dimension of every generated instance.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Number of random instances; one regular instance always leads the
    /// suite as case 0.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Base seed for the random instance stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Classify only the regular instance.
    #[arg(long)]
    regular_only: bool,
    /// Ball verdict tolerance on the relative semi-axis spread.
    #[arg(long = "tol-ball", default_value_t = 1e-6)]
    tol_ball: f64,
    /// Regularity verdict tolerance on the relative edge-length spread.
    #[arg(long = "tol-regular", default_value_t = 1e-6)]
    tol_regular: f64,
    /// Solver strategy for the ellipsoid underlying the ball verdict.
    #[arg(long, default_value = "analytic")]
    engine: String,
    /// Destination for the JSON-lines report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BlsuiteArgs {
    /// Base dimension of the simplices whose certificates are lifted.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Monte Carlo sample budget per case (at least 10000).
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Base seed for instance draws and sampling.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of random normalized instances after the regular case 0.
    #[arg(long, default_value_t = 3)]
    cases: u64,
    /// Density family for the per-direction factors: `exponential`
    /// (one-sided, sharp bound) or `gaussian` (two-sided control case).
    #[arg(long, default_value = "exponential")]
    density: String,
    /// Destination for the JSON-lines report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Plot2dArgs {
    /// Two-dimensional instance file: simplex or halfspace JSON.
    input: PathBuf,
    /// Destination for the CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    Usage(String),
    Io(String, io::Error),
    Parse(String, serde_json::Error),
    Lib(john_gauge::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(..) | CliError::Parse(..) => EXIT_BAD_INPUT,
            CliError::Lib(john_gauge::Error::UnknownStrategy(..)) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_BAD_INPUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(path, e) => write!(f, "{path}: {e}"),
            CliError::Parse(path, e) => write!(f, "{path}: {e}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<john_gauge::Error> for CliError {
    fn from(e: john_gauge::Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successful outcomes; anything else
            // is a usage error.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.code());
    }
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Mvie(args) => cmd_mvie(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Theorem3(args) => cmd_theorem3(&args),
        Command::Blsuite(args) => cmd_blsuite(&args),
        Command::Plot2d(args) => cmd_plot2d(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// Cap the global worker pool when `JOHN_GAUGE_THREADS` is set.
fn configure_threads() -> CliResult<()> {
    match std::env::var("JOHN_GAUGE_THREADS") {
        Ok(v) => {
            let threads: usize = v.parse().map_err(|_| {
                CliError::Usage(format!("JOHN_GAUGE_THREADS must be a positive integer, got `{v}`"))
            })?;
            if threads == 0 {
                return Err(CliError::Usage(
                    "JOHN_GAUGE_THREADS must be a positive integer, got `0`".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(format!("thread pool setup failed: {e}")))
        }
        Err(_) => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Instance files
// ---------------------------------------------------------------------------

/// On-disk simplex schema: the vertex list plus an optional marker set by
/// `gen regular`. Field order matches the serializer so a read/rewrite
/// cycle is byte-identical.
#[derive(Serialize, Deserialize)]
struct SimplexFile {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regular: Option<bool>,
}

impl SimplexFile {
    fn from_simplex(s: &Simplex, regular: bool) -> Self {
        SimplexFile {
            dim: s.dim(),
            vertices: s.vertices().iter().map(|v| v.as_slice().to_vec()).collect(),
            regular: if regular { Some(true) } else { None },
        }
    }

    fn to_simplex(&self) -> CliResult<Simplex> {
        if self.vertices.iter().any(|v| v.len() != self.dim) {
            return Err(CliError::Lib(john_gauge::Error::InvalidInput(format!(
                "simplex vertices must have length dim = {}",
                self.dim
            ))));
        }
        let vertices = self.vertices.iter().map(|v| DVector::from_column_slice(v)).collect();
        Ok(Simplex::new(vertices)?)
    }
}

enum Instance {
    Simplex(Simplex),
    Polytope(HPolytope),
}

impl Instance {
    fn dim(&self) -> usize {
        match self {
            Instance::Simplex(s) => s.dim(),
            Instance::Polytope(p) => p.dim(),
        }
    }

    /// Halfspace view used by the solvers.
    fn halfspaces(&self) -> CliResult<HPolytope> {
        match self {
            Instance::Simplex(s) => Ok(s.to_halfspaces()?),
            Instance::Polytope(p) => Ok(p.clone()),
        }
    }
}

/// Read an instance file, detecting the schema by its keys: simplex files
/// carry "vertices", halfspace files carry "normals".
fn load_instance(path: &Path) -> CliResult<Instance> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(shown.clone(), e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(shown.clone(), e))?;
    let keys = value
        .as_object()
        .ok_or_else(|| CliError::Lib(john_gauge::Error::InvalidInput(format!(
            "{shown}: expected a top-level JSON object"
        ))))?;
    if keys.contains_key("vertices") {
        let file: SimplexFile =
            serde_json::from_value(value).map_err(|e| CliError::Parse(shown, e))?;
        Ok(Instance::Simplex(file.to_simplex()?))
    } else if keys.contains_key("normals") {
        let p: HPolytope = serde_json::from_value(value).map_err(|e| CliError::Parse(shown, e))?;
        Ok(Instance::Polytope(p))
    } else {
        Err(CliError::Lib(john_gauge::Error::InvalidInput(format!(
            "{shown}: neither a simplex file (vertices) nor a halfspace file (normals)"
        ))))
    }
}

/// Write `content` to `--out` or stdout.
fn emit(out: &Option<PathBuf>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(path.display().to_string(), e)),
        None => {
            io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Io("stdout".into(), e))
        }
    }
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn jsonl(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Deterministic per-case seed stream: skips seeds whose rejection
/// sampling fails so every accepted draw is reproducible from the flags.
fn draw_simplex(n: usize, next_seed: &mut u64) -> CliResult<(Simplex, u64)> {
    for _ in 0..1000 {
        let seed = *next_seed;
        *next_seed += 1;
        match random_simplex(n, seed, MIN_DET) {
            Ok(s) => return Ok((s, seed)),
            Err(john_gauge::Error::Conditioning(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(CliError::Lib(john_gauge::Error::Conditioning(
        "random simplex rejection budget exhausted".into(),
    )))
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn cmd_gen(args: &GenArgs) -> CliResult<u8> {
    let n = args.dim as usize;
    let file = match args.kind.as_str() {
        "regular" => SimplexFile::from_simplex(&regular_simplex(n)?, true),
        "random" => {
            let mut next = args.seed;
            let (s, _) = draw_simplex(n, &mut next)?;
            SimplexFile::from_simplex(&s, false)
        }
        other => return Err(CliError::Usage(format!("unknown instance kind `{other}`"))),
    };
    emit(&args.out, &pretty(&file))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// mvie
// ---------------------------------------------------------------------------

/// Ellipsoid file with the solve report attached; the leading fields form
/// a plain ellipsoid JSON so geometry parsers can read it directly.
#[derive(Serialize)]
struct MvieFile {
    center: Vec<f64>,
    shape: Vec<Vec<f64>>,
    report: SolverReport,
}

impl MvieFile {
    fn new(e: &Ellipsoid, report: SolverReport) -> Self {
        let n = e.dim();
        MvieFile {
            center: e.center().as_slice().to_vec(),
            shape: (0..n).map(|r| (0..n).map(|c| e.shape()[(r, c)]).collect()).collect(),
            report,
        }
    }
}

fn solve_instance(
    instance: &Instance,
    engine: &dyn MvieEngine,
    cfg: &SolverConfig,
) -> CliResult<(Ellipsoid, SolverReport)> {
    Ok(engine.solve(&instance.halfspaces()?, cfg)?)
}

fn cmd_mvie(args: &MvieArgs) -> CliResult<u8> {
    let engine = engine_by_name(&args.engine)?;
    let instance = load_instance(&args.input)?;
    let started = Instant::now();
    let (e, report) = solve_instance(&instance, engine.as_ref(), &args.solver.config())?;
    eprintln!(
        "{} engine: status {:?}, {} iterations, kkt {:.3e} ({:.3} s)",
        engine.name(),
        report.status,
        report.iterations,
        report.final_kkt_residual,
        started.elapsed().as_secs_f64()
    );
    let converged = report.status == SolverStatus::Converged;
    emit(&args.out, &pretty(&MvieFile::new(&e, report)))?;
    Ok(if converged { 0 } else { EXIT_BAD_INPUT })
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

fn cmd_certify(args: &CertifyArgs) -> CliResult<u8> {
    let engine = engine_by_name(&args.engine)?;
    let instance = load_instance(&args.input)?;
    let hp = instance.halfspaces()?;
    let (e, report) = solve_instance(&instance, engine.as_ref(), &args.solver.config())?;
    if report.status != SolverStatus::Converged {
        return Err(CliError::Lib(john_gauge::Error::Verification(format!(
            "solver finished with status {:?}; certificate extraction needs a converged ellipsoid",
            report.status
        ))));
    }
    let cert = certificate_from_ellipsoid(&hp, &e)?;
    let weight_sum: f64 = cert.weights().iter().sum();
    let pass = cert.residual_a() <= args.tol_pass && cert.residual_b() <= args.tol_pass;
    eprintln!("contacts:   {}", cert.contacts().len());
    eprintln!("residual_a: {:.6e}", cert.residual_a());
    eprintln!("residual_b: {:.6e}", cert.residual_b());
    eprintln!("sum c_i:    {:.12} (dimension {})", weight_sum, cert.dim());
    eprintln!("verdict:    {} at gate {:.1e}", if pass { "pass" } else { "fail" }, args.tol_pass);
    emit(&args.out, &pretty(&cert))?;
    Ok(if pass { 0 } else { EXIT_DISAGREEMENT })
}

// ---------------------------------------------------------------------------
// theorem3
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ClassifierCase {
    case: usize,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    dim: usize,
    edge_spread: f64,
    axis_spread: f64,
    ball: bool,
    regular: bool,
    agree: bool,
}

#[derive(Serialize)]
struct ClassifierSummary {
    cases: usize,
    pass: usize,
    fail: usize,
    max_edge_spread: f64,
    max_axis_spread: f64,
    disagreements: Vec<usize>,
}

/// Relative spread of the semi-axes, the quantity behind the ball verdict.
fn axis_spread(e: &Ellipsoid) -> f64 {
    let axes = e.semi_axes();
    let min = axes[0];
    let max = axes[axes.len() - 1];
    (max - min) / max
}

fn cmd_theorem3(args: &Theorem3Args) -> CliResult<u8> {
    let engine = engine_by_name(&args.engine)?;
    let n = args.dim as usize;
    let cfg = SolverConfig::default();
    let started = Instant::now();

    let mut instances: Vec<(&'static str, Option<u64>, Simplex)> =
        vec![("regular", None, regular_simplex(n)?)];
    if !args.regular_only {
        let mut next = args.seed;
        for _ in 0..args.trials {
            let (s, seed) = draw_simplex(n, &mut next)?;
            instances.push(("random", Some(seed), s));
        }
    }

    let mut report = String::new();
    let mut summary = ClassifierSummary {
        cases: instances.len(),
        pass: 0,
        fail: 0,
        max_edge_spread: 0.0,
        max_axis_spread: 0.0,
        disagreements: Vec::new(),
    };
    for (case, (kind, seed, s)) in instances.iter().enumerate() {
        let (e, _) = engine.solve(&s.to_halfspaces()?, &cfg)?;
        let record = ClassifierCase {
            case,
            kind,
            seed: *seed,
            dim: n,
            edge_spread: s.edge_spread(),
            axis_spread: axis_spread(&e),
            ball: is_ball(&e, args.tol_ball),
            regular: s.is_regular(args.tol_regular),
            agree: is_ball(&e, args.tol_ball) == s.is_regular(args.tol_regular),
        };
        summary.max_edge_spread = summary.max_edge_spread.max(record.edge_spread);
        summary.max_axis_spread = summary.max_axis_spread.max(record.axis_spread);
        if record.agree {
            summary.pass += 1;
        } else {
            summary.fail += 1;
            summary.disagreements.push(case);
        }
        report.push_str(&jsonl(&record));
    }
    report.push_str(&jsonl(&summary));
    eprintln!(
        "classified {} cases in {:.3} s ({} disagreements)",
        summary.cases,
        started.elapsed().as_secs_f64(),
        summary.fail
    );
    let failed = summary.fail > 0;
    emit(&args.out, &report)?;
    Ok(if failed { EXIT_DISAGREEMENT } else { 0 })
}

// ---------------------------------------------------------------------------
// blsuite
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LiftCase {
    case: usize,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    dim: usize,
    isotropy: f64,
    section_volume: f64,
    closed_form: f64,
    value: f64,
    std_error: f64,
    samples: usize,
    within_bound: bool,
    matches_closed_form: bool,
    orthonormal: bool,
    max_offdiag: f64,
    implied_normal_product: f64,
    variance_warning: bool,
}

#[derive(Serialize)]
struct LiftSummary {
    cases: usize,
    pass: usize,
    fail: usize,
    max_isotropy: f64,
    variance_warnings: usize,
}

/// Lift the exact inscribed-ellipsoid certificate of `s`.
fn lifted_system_of(s: &Simplex) -> CliResult<BLSystem> {
    let hp = s.to_halfspaces()?;
    let e = analytic_simplex_john(s)?;
    let cert = certificate_from_ellipsoid(&hp, &e)?;
    Ok(lift(&cert)?)
}

fn cmd_blsuite(args: &BlsuiteArgs) -> CliResult<u8> {
    let density = density_by_name(&args.density)?;
    let n = args.dim as usize;
    let samples = args.samples as usize;
    let started = Instant::now();

    let mut systems: Vec<(&'static str, Option<u64>, BLSystem)> =
        vec![("regular", None, lift(&regular_certificate(n)?)?)];
    let mut next = args.seed;
    for _ in 0..args.cases {
        let (s, seed) = draw_simplex(n, &mut next)?;
        systems.push(("random", Some(seed), lifted_system_of(&s)?));
    }

    let mut report = String::new();
    let mut summary = LiftSummary {
        cases: systems.len(),
        pass: 0,
        fail: 0,
        max_isotropy: 0.0,
        variance_warnings: 0,
    };
    for (case, (kind, seed, sys)) in systems.iter().enumerate() {
        let vol = sys.section_body()?.volume();
        let closed = density.closed_form(vol, n);
        let est = density.estimate(sys, vol, samples, args.seed + case as u64)?;
        let (orthonormal, max_offdiag, implied) = equality_orthonormality_check(sys, ORTHO_TOL);
        let record = LiftCase {
            case,
            kind,
            seed: *seed,
            dim: n,
            isotropy: sys.isotropy_residual(),
            section_volume: vol,
            closed_form: closed,
            value: est.value,
            std_error: est.std_error,
            samples: est.samples,
            within_bound: est.value <= 1.0 + 3.0 * est.std_error,
            matches_closed_form: (est.value - closed).abs() <= 3.0 * est.std_error,
            orthonormal,
            max_offdiag,
            implied_normal_product: implied,
            variance_warning: 3.0 * est.std_error > VARIANCE_WARN_WIDTH,
        };
        summary.max_isotropy = summary.max_isotropy.max(record.isotropy);
        if record.variance_warning {
            summary.variance_warnings += 1;
        }
        if record.within_bound && record.matches_closed_form && record.isotropy <= ISOTROPY_GATE {
            summary.pass += 1;
        } else {
            summary.fail += 1;
        }
        report.push_str(&jsonl(&record));
    }
    report.push_str(&jsonl(&summary));
    eprintln!(
        "{} density, {} cases x {} samples in {:.3} s ({} failures, {} variance warnings)",
        density.name(),
        summary.cases,
        samples,
        started.elapsed().as_secs_f64(),
        summary.fail,
        summary.variance_warnings
    );
    let failed = summary.fail > 0;
    emit(&args.out, &report)?;
    Ok(if failed { EXIT_DISAGREEMENT } else { 0 })
}

// ---------------------------------------------------------------------------
// plot2d
// ---------------------------------------------------------------------------

/// Vertices of a bounded 2-D polytope: pairwise facet intersections that
/// satisfy every constraint, deduplicated and sorted by angle around the
/// centroid so consecutive rows trace the boundary.
fn polygon_ring(p: &HPolytope) -> CliResult<Vec<DVector<f64>>> {
    let m = p.num_facets();
    let mut points: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = (p.normal(i), p.normal(j));
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = DVector::from_column_slice(&[
                (p.offset(i) * b[1] - p.offset(j) * a[1]) / det,
                (a[0] * p.offset(j) - b[0] * p.offset(i)) / det,
            ]);
            let feasible = (0..m).all(|k| p.normal(k).dot(&x) <= p.offset(k) + 1e-9);
            if feasible && points.iter().all(|q| (q - &x).norm() > 1e-9) {
                points.push(x);
            }
        }
    }
    if points.len() < 3 {
        return Err(CliError::Lib(john_gauge::Error::Degenerate(
            "2-D input has fewer than 3 vertices".into(),
        )));
    }
    let centroid = points.iter().sum::<DVector<f64>>() / points.len() as f64;
    points.sort_by(|u, v| {
        let au = (u[1] - centroid[1]).atan2(u[0] - centroid[0]);
        let av = (v[1] - centroid[1]).atan2(v[0] - centroid[0]);
        au.total_cmp(&av)
    });
    Ok(points)
}

fn csv_row(out: &mut String, kind: &str, x: f64, y: f64) {
    out.push_str(&format!("{kind},{x},{y}\n"));
}

fn cmd_plot2d(args: &Plot2dArgs) -> CliResult<u8> {
    let instance = load_instance(&args.input)?;
    if instance.dim() != 2 {
        return Err(CliError::Usage(format!(
            "plot2d requires a 2-D instance, got dimension {}",
            instance.dim()
        )));
    }
    let hp = instance.halfspaces()?;

    // Exact construction for simplex input, numeric solve otherwise.
    let (e, report) = match &instance {
        Instance::Simplex(s) => {
            let e = analytic_simplex_john(s)?;
            (e, None)
        }
        Instance::Polytope(_) => {
            let engine = engine_by_name("numeric")?;
            let (e, r) = engine.solve(&hp, &args.solver.config())?;
            (e, Some(r))
        }
    };
    if let Some(r) = report {
        if r.status != SolverStatus::Converged {
            return Err(CliError::Lib(john_gauge::Error::Verification(format!(
                "solver finished with status {:?}",
                r.status
            ))));
        }
    }

    let ring = match &instance {
        Instance::Simplex(s) => s.vertices().to_vec(),
        Instance::Polytope(p) => polygon_ring(p)?,
    };
    let cert = certificate_from_ellipsoid(&hp, &e)?;

    let mut csv = String::from("kind,x,y\n");
    for v in &ring {
        csv_row(&mut csv, "vertex", v[0], v[1]);
    }
    for k in 0..ELLIPSE_SAMPLES {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / ELLIPSE_SAMPLES as f64;
        let unit = DVector::from_column_slice(&[theta.cos(), theta.sin()]);
        let x = e.center() + e.shape() * unit;
        csv_row(&mut csv, "ellipse", x[0], x[1]);
    }
    // Contacts live on the unit sphere of the normalized body; map them
    // back through the ellipsoid chart to boundary tangency points.
    for u in cert.contacts() {
        let x = e.center() + e.shape() * u;
        csv_row(&mut csv, "contact", x[0], x[1]);
    }
    emit(&args.out, &csv)?;
    Ok(0)
}

//! The `qps` command line.
//!
//! Exit codes: 0 pass, 1 identity violation, 2 usage error, 3 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::algebra::OperatorMatrix;
use crate::error::QpsError;
use crate::fano::{build_fano_grid, build_fano_grid_via_orbit, FanoGrid, HalfPoint};
use crate::representation::{Family, PhaseChoice, PhaseClass, UnitaryCache, UNITARITY_LIMIT};
use crate::sp2z::Sp2Z;
use crate::verify::{self, parse_suites, Suite, VerifyConfig};
use crate::wigner::{load_state_file, moment_identity, wigner_transform};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qps", version, about = "Discrete Wigner functions on a doubled half-integer phase space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump Fano operators, all cells or one `--point`.
    Fano {
        #[command(flatten)]
        run: RunArgs,
        /// Doubled coordinates `dq,dp`.
        #[arg(long, value_parser = parse_pair)]
        point: Option<(usize, usize)>,
    },
    /// Wigner grid of a state file.
    Wigner {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        state: PathBuf,
    },
    /// Representation unitary for `--h κ,μ,λ,ν` and its conjugation residuals.
    Rep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = parse_h, allow_hyphen_values = true)]
        h: Sp2Z,
    },
    /// Moment identity deviation for one `(a, b)`.
    Moments {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        a: i64,
        #[arg(long)]
        b: i64,
    },
    /// Run invariant suites and print a deviation table.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// `all` or a comma-separated list of suites.
        #[arg(long, default_value = "all", value_parser = parse_suite_list)]
        suite: SuiteList,
        /// Perturb one closed-form phase, chosen by this seed.
        #[arg(long, hide = true)]
        mutate: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    #[value(alias = "structured")]
    Json,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dim: usize,
    /// `new` (default) or `leonhardt`.
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long, allow_hyphen_values = true)]
    pub nplus: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nminus: Option<i64>,
    #[arg(long, env = "QPS_TOLERANCE", default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub out: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Worker threads for grid construction; output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Comma-separated suite names, parsed as one value.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteList(pub Vec<Suite>);

fn parse_suite_list(s: &str) -> Result<SuiteList, String> {
    parse_suites(s).map(SuiteList)
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?)),
        _ => Err(format!("expected dq,dp, got '{s}'")),
    }
}

fn parse_h(s: &str) -> Result<Sp2Z, String> {
    let v: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c, d] => Sp2Z::new(*a, *b, *c, *d).map_err(|e| e.to_string()),
        _ => Err(format!("expected κ,μ,λ,ν, got '{s}'")),
    }
}

/// Resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub phase_choice: PhaseChoice,
    pub class: PhaseClass,
    pub tolerance: f64,
    pub seed: u64,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn family(&self) -> Option<Family> {
        self.class.family()
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn violation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VIOLATION,
            message: message.into(),
        }
    }
}

impl From<QpsError> for Failure {
    fn from(e: QpsError) -> Self {
        let code = match e {
            QpsError::Io(_) | QpsError::MalformedDocument(_) => EXIT_IO,
            QpsError::InvalidDimension(_)
            | QpsError::NotUnimodular(..)
            | QpsError::NotCoprime(..)
            | QpsError::PointOutOfRange { .. }
            | QpsError::LeonhardtOddDimension(_)
            | QpsError::ReductionEvenDimension(_)
            | QpsError::FamilyMismatch { .. }
            | QpsError::MomentIndex { .. }
            | QpsError::DimensionMismatch { .. } => EXIT_USAGE,
            _ => EXIT_VIOLATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Combines `--family` with explicit `n±`; a missing `n±` takes the family's
/// canonical value.
pub fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    if args.dim == 0 {
        return Err(QpsError::InvalidDimension(0).into());
    }
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(Failure::usage(format!("tolerance must be positive, got {}", args.tol)));
    }
    let family = args.family.unwrap_or(Family::New);
    let base = PhaseChoice::for_family(family, args.dim)?;
    let pc = PhaseChoice::new(
        args.nplus.unwrap_or(base.n_plus),
        args.nminus.unwrap_or(base.n_minus),
        args.dim,
    )?;
    let class = pc.classify();
    if let Some(f) = args.family {
        if class != PhaseClass::from(f) {
            return Err(QpsError::FamilyMismatch {
                n_plus: pc.n_plus,
                n_minus: pc.n_minus,
                family: f.name(),
            }
            .into());
        }
    }
    Ok(RunConfig {
        dim: args.dim,
        phase_choice: pc,
        class,
        tolerance: args.tol,
        seed: args.seed,
        format: args.out,
        output: args.output.clone(),
    })
}

fn require_family(cfg: &RunConfig) -> Result<Family, Failure> {
    cfg.family().ok_or_else(|| {
        Failure::usage(format!(
            "(n+ = {}, n- = {}) at N = {} is inadmissible; this command needs the new or Leonhardt family",
            cfg.phase_choice.n_plus, cfg.phase_choice.n_minus, cfg.dim
        ))
    })
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().ansi().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return e.exit_code();
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "qps: {}", f.message);
            f.code
        }
    }
}

fn run_args(cmd: &Command) -> &RunArgs {
    match cmd {
        Command::Fano { run, .. }
        | Command::Wigner { run, .. }
        | Command::Rep { run, .. }
        | Command::Moments { run, .. }
        | Command::Verify { run, .. } => run,
    }
}

pub fn execute(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let args = run_args(cmd);
    let cfg = resolve(args)?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = match args.threads {
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::usage(e.to_string()))?;
            pool.install(|| dispatch(cmd, &cfg, &mut out, &mut err))
        }
        None => dispatch(cmd, &cfg, &mut out, &mut err),
    };
    let flushed = stdout.write_all(&out).and_then(|_| stderr.write_all(&err));
    if let Err(e) = flushed {
        return Err(Failure {
            code: EXIT_IO,
            message: e.to_string(),
        });
    }
    result
}

fn dispatch(cmd: &Command, cfg: &RunConfig, stdout: &mut Vec<u8>, stderr: &mut Vec<u8>) -> Result<i32, Failure> {
    match cmd {
        Command::Fano { point, .. } => cmd_fano(cfg, *point, stdout),
        Command::Wigner { state, .. } => cmd_wigner(cfg, state, stdout),
        Command::Rep { h, .. } => cmd_rep(cfg, h, stdout, stderr),
        Command::Moments { a, b, .. } => cmd_moments(cfg, *a, *b, stdout, stderr),
        Command::Verify { suite, mutate, .. } => cmd_verify(cfg, &suite.0, *mutate, stdout, stderr),
    }
}

fn emit(cfg: &RunConfig, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure {
        code: EXIT_IO,
        message: e.to_string(),
    };
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }),
        None => stdout.write_all(text.as_bytes()).map_err(io),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct MatrixDoc {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&OperatorMatrix> for MatrixDoc {
    fn from(m: &OperatorMatrix) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

fn class_name(class: PhaseClass) -> &'static str {
    class.family().map(|f| f.name()).unwrap_or("inadmissible")
}

fn matrix_csv(out: &mut String, prefix: &str, m: &OperatorMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(out, "{prefix}{i},{j},{:.16e},{:.16e}", z.re, z.im);
        }
    }
}

fn fano_grid(cfg: &RunConfig) -> Result<FanoGrid, Failure> {
    match cfg.family() {
        Some(f) => Ok(build_fano_grid(f, cfg.dim)?),
        // inadmissible choices only have the orbit construction
        None => Ok(build_fano_grid_via_orbit(&cfg.phase_choice, &UnitaryCache::new())?),
    }
}

fn cmd_fano(cfg: &RunConfig, point: Option<(usize, usize)>, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let grid = fano_grid(cfg)?;
    let points: Vec<HalfPoint> = match point {
        Some((dq, dp)) => vec![HalfPoint::new(dq, dp, cfg.dim)?],
        None => grid.points().collect(),
    };
    let text = match cfg.format {
        OutputFormat::Csv => {
            let mut s = String::from("dq,dp,row,col,re,im\n");
            for pt in &points {
                matrix_csv(&mut s, &format!("{},{},", pt.dq, pt.dp), grid.cell(*pt).as_ref());
            }
            s
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Cell {
                dq: usize,
                dp: usize,
                #[serde(flatten)]
                op: MatrixDoc,
            }
            #[derive(Serialize)]
            struct Doc {
                dim: usize,
                family: &'static str,
                cells: Vec<Cell>,
            }
            to_json(&Doc {
                dim: cfg.dim,
                family: class_name(cfg.class),
                cells: points
                    .iter()
                    .map(|pt| Cell {
                        dq: pt.dq,
                        dp: pt.dp,
                        op: grid.cell(*pt).as_ref().into(),
                    })
                    .collect(),
            })
        }
    };
    emit(cfg, &text, stdout)?;
    Ok(EXIT_PASS)
}

fn cmd_wigner(cfg: &RunConfig, state: &std::path::Path, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let family = require_family(cfg)?;
    let rho = load_state_file(state).map_err(|e| match e {
        QpsError::Io(io) => Failure {
            code: EXIT_IO,
            message: format!("{}: {io}", state.display()),
        },
        other => other.into(),
    })?;
    if rho.dim() != cfg.dim {
        return Err(Failure::usage(format!(
            "state has dimension {} but --dim is {}",
            rho.dim(),
            cfg.dim
        )));
    }
    let grid = build_fano_grid(family, cfg.dim)?;
    let w = wigner_transform(&rho, &grid)?;
    let text = match cfg.format {
        OutputFormat::Csv => w.to_csv(),
        OutputFormat::Json => to_json(&w.to_document()),
    };
    emit(cfg, &text, stdout)?;
    let total = w.total();
    if (total - 1.0).abs() > cfg.tolerance.max(1e-9) {
        return Err(Failure::violation(format!("normalization Σ W = 1 violated: Σ W = {total:.16e}")));
    }
    Ok(EXIT_PASS)
}

fn cmd_rep(cfg: &RunConfig, h: &Sp2Z, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let u = crate::representation::build_unitary(h, &cfg.phase_choice)?;
    let (unitarity, q_rel, p_rel) = u.residuals();
    let text = match cfg.format {
        OutputFormat::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# h = {h}, n+ = {}, n- = {}, N = {}", cfg.phase_choice.n_plus, cfg.phase_choice.n_minus, cfg.dim);
            let _ = writeln!(s, "# unitarity residual {unitarity:.3e}");
            let _ = writeln!(s, "# Q conjugation residual {q_rel:.3e}");
            let _ = writeln!(s, "# P conjugation residual {p_rel:.3e}");
            s.push_str("row,col,re,im\n");
            matrix_csv(&mut s, "", &u.matrix);
            s
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Residuals {
                unitarity: f64,
                q_conjugation: f64,
                p_conjugation: f64,
            }
            #[derive(Serialize)]
            struct Doc {
                dim: usize,
                h: [[i64; 2]; 2],
                n_plus: i64,
                n_minus: i64,
                class: &'static str,
                singular_gap: f64,
                residuals: Residuals,
                matrix: MatrixDoc,
            }
            to_json(&Doc {
                dim: cfg.dim,
                h: h.rows(),
                n_plus: cfg.phase_choice.n_plus,
                n_minus: cfg.phase_choice.n_minus,
                class: class_name(cfg.class),
                singular_gap: u.singular_gap,
                residuals: Residuals {
                    unitarity,
                    q_conjugation: q_rel,
                    p_conjugation: p_rel,
                },
                matrix: (&u.matrix).into(),
            })
        }
    };
    emit(cfg, &text, stdout)?;
    let worst = unitarity.max(q_rel).max(p_rel);
    let limit = cfg.tolerance.max(UNITARITY_LIMIT);
    if worst >= limit {
        let _ = writeln!(
            stderr,
            "qps: identity violated: U Q U† = a_Q P^λ Q^κ, U P U† = a_P P^ν Q^μ: residual {worst:.3e} ≥ {limit:.1e}"
        );
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_PASS)
}

fn cmd_moments(cfg: &RunConfig, a: i64, b: i64, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let family = require_family(cfg)?;
    let grid = build_fano_grid(family, cfg.dim)?;
    let m = moment_identity(&grid, a, b)?;
    let text = match cfg.format {
        OutputFormat::Csv => format!("a,b,deviation\n{a},{b},{:.16e}\n", m.deviation),
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Doc {
                dim: usize,
                family: &'static str,
                a: i64,
                b: i64,
                deviation: f64,
                lhs: MatrixDoc,
                rhs: MatrixDoc,
            }
            to_json(&Doc {
                dim: cfg.dim,
                family: family.name(),
                a,
                b,
                deviation: m.deviation,
                lhs: (&m.lhs).into(),
                rhs: (&m.rhs).into(),
            })
        }
    };
    emit(cfg, &text, stdout)?;
    if m.deviation.is_nan() || m.deviation >= cfg.tolerance {
        let _ = writeln!(
            stderr,
            "qps: identity violated: Σ ω_N^(bp+aq) Δ(q,p) = c(a,b) P^b Q^a: deviation {:.3e} ≥ {:.1e}",
            m.deviation, cfg.tolerance
        );
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_PASS)
}

fn cmd_verify(
    cfg: &RunConfig,
    suites: &[Suite],
    mutate: Option<u64>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let family = require_family(cfg)?;
    let vcfg = VerifyConfig {
        dim: cfg.dim,
        family,
        tolerance: cfg.tolerance,
        seed: cfg.seed,
        mutate,
    };
    let report = verify::run(&vcfg, suites)?;
    emit(cfg, &report.table(), stdout)?;
    if report.passed() {
        return Ok(EXIT_PASS);
    }
    for c in report.failures() {
        let _ = writeln!(
            stderr,
            "qps: identity violated: {} [{} / {}]: deviation {:.3e} ≥ {:.1e}",
            c.identity, c.suite, c.name, c.deviation, c.tolerance
        );
    }
    Ok(EXIT_VIOLATION)
}

//! `fockdil`: batch front-end that reads tuple, lifting and symbol files,
//! runs one analysis per input and writes a JSON, text or CSV report.
//!
//! Exit codes: 0 when every assertion passes, 1 when one fails, 2 when an
//! input or argument cannot be parsed.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fockdil::invariants::{EstimateMethod, TraceWindow};
use rayon::prelude::*;

use commands::{InputError, RunConfig, SymmetricArgs};
use report::{write_atomic, Report};

#[derive(Debug, Parser)]
#[command(name = "fockdil", version, about = "Dilation analyses of row contractions on truncated Fock spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Fock truncation level N.
    #[arg(long, global = true, default_value_t = 6, value_parser = parse_level)]
    trunc: usize,
    /// Comparison tolerance for predicates and equivalence.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = parse_positive)]
    tol: f64,
    /// Relative cutoff below which singular values count as zero.
    #[arg(long = "rank-tol", global = true, default_value_t = 1e-9, value_parser = parse_positive)]
    rank_tol: f64,
    /// Tolerance for innerness of truncated symbols.
    #[arg(long = "tol-inner", global = true, default_value_t = 1e-8, value_parser = parse_positive)]
    tol_inner: f64,
    /// Threshold for the residual of exact identities.
    #[arg(long = "check-tol", global = true, default_value_t = 1e-8, value_parser = parse_positive)]
    check_tol: f64,
    /// Threshold for identities reached as limits of powers.
    #[arg(long = "limit-tol", global = true, default_value_t = 1e-6, value_parser = parse_positive)]
    limit_tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    report: Format,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write reports into this directory instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Text => "text",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Args)]
struct Inputs {
    /// Input files, processed independently.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Constraints {
    Commutators,
    None,
}

impl Constraints {
    fn name(self) -> &'static str {
        match self {
            Constraints::Commutators => "commutators",
            Constraints::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Window {
    Full,
    LowerEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    LastValue,
    Richardson,
}

#[derive(Debug, Args)]
struct SymmetricFlags {
    /// Also compute the symmetric statistics (commuting tuples only).
    #[arg(long)]
    symmetric: bool,
    #[arg(long, value_enum, default_value_t = Window::Full)]
    window: Window,
    #[arg(long, value_enum, default_value_t = Method::LastValue)]
    method: Method,
    /// Largest Fock dimension for which the Poisson statistic is formed.
    #[arg(long = "poisson-max-dim", default_value_t = 1024)]
    poisson_max_dim: usize,
}

impl SymmetricFlags {
    fn args(&self) -> SymmetricArgs {
        SymmetricArgs {
            enabled: self.symmetric,
            window: match self.window {
                Window::Full => TraceWindow::Full,
                Window::LowerEdge => TraceWindow::LowerEdge,
            },
            method: match self.method {
                Method::LastValue => EstimateMethod::LastValue,
                Method::Richardson => EstimateMethod::Richardson,
            },
            poisson_max_dim: self.poisson_max_dim,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a tuple file holds a row contraction.
    Validate(Inputs),
    /// Defect operators D_* and D with their ranks.
    Defects(Inputs),
    /// Limit Q of Φ^n(1), *-stability and the c.n.c. test.
    Stability(Inputs),
    /// Minimal isometric dilation on Γ_{≤N}.
    Dilate {
        #[command(flatten)]
        inputs: Inputs,
        /// Longest word in the dilation check.
        #[arg(long, default_value_t = 3)]
        len: usize,
    },
    /// Poisson kernel on Γ_{≤N}.
    Poisson(Inputs),
    /// Characteristic function of a tuple.
    Charfn(Inputs),
    /// Characteristic function of a lifting.
    LiftCharfn {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long = "allow-nonreduced")]
        allow_nonreduced: bool,
        /// Power of Φ_A whose norm bounds the truncation error.
        #[arg(long, default_value_t = 3)]
        buffer: usize,
    },
    /// Extended characteristic function of an ergodic coisometric tuple.
    ExtCharfn(Inputs),
    /// Characteristic function compressed to a constrained Fock space.
    ConstrainedCharfn {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Constraints::Commutators)]
        constraints: Constraints,
        #[arg(long = "allow-nonreduced")]
        allow_nonreduced: bool,
        #[arg(long, default_value_t = 3)]
        buffer: usize,
    },
    /// Unitary equivalence of two symbols.
    Equiv { a: PathBuf, b: PathBuf },
    /// Product of two symbols.
    Compose { a: PathBuf, b: PathBuf },
    /// Functional model lifting of a tuple C and a symbol.
    Model { tuple: PathBuf, symbol: PathBuf },
    /// Classification of a lifting.
    Classify(Inputs),
    /// Fixed points of the completely positive map of a tuple.
    Fixpoints(Inputs),
    /// Correspondence between fixed points of Φ_C and Φ_E.
    KappaInv(Inputs),
    /// Curvature sequence and its estimate.
    Curv {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        sym: SymmetricFlags,
    },
    /// Euler characteristic sequence and its estimate.
    Euler {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        sym: SymmetricFlags,
    },
    /// Curvature of A against the rank/trace expression from the symbol.
    #[command(name = "curvature-identity", alias = "thm611")]
    CurvatureIdentity {
        #[command(flatten)]
        inputs: Inputs,
        /// Largest accepted gap between the two sides at the last level.
        #[arg(long = "gap-tol", default_value_t = 0.05, value_parser = parse_positive)]
        gap_tol: f64,
    },
    /// Constrained Fock space and the constrained piece of the dilation.
    Constrain {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Constraints::Commutators)]
        constraints: Constraints,
        #[arg(long, default_value_t = 3)]
        len: usize,
    },
    /// Cocycle products against the Poisson kernel.
    Cocycle {
        #[command(flatten)]
        inputs: Inputs,
        /// Largest number of factors.
        #[arg(long = "k-max", default_value_t = 5)]
        k_max: usize,
        /// Restrict an ergodic tuple to the complement of its invariant vector first.
        #[arg(long = "off-omega")]
        off_omega: bool,
    },
}

fn parse_level(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected an integer ≥ 1, got {s:?}")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

/// Commands whose reports carry invariant sequences for CSV output.
fn has_traces(cmd: &Command) -> bool {
    matches!(cmd, Command::Curv { .. } | Command::Euler { .. } | Command::CurvatureIdentity { .. })
}

type Outcome = Result<(String, Report), InputError>;

fn per_input<T: Send, L, F>(paths: &[PathBuf], load: L, run: F) -> Vec<Outcome>
where
    L: Fn(&Path) -> Result<(report::InputEcho, T), InputError> + Sync,
    F: Fn(report::InputEcho, T) -> Report + Sync,
{
    paths
        .par_iter()
        .map(|p| {
            let (echo, value) = load(p)?;
            let stem = echo.stem();
            Ok((stem, run(echo, value)))
        })
        .collect()
}

fn pair_stem(a: &report::InputEcho, b: &report::InputEcho) -> String {
    format!("{}_{}", a.stem(), b.stem())
}

fn run(cmd: &Command, cfg: &RunConfig) -> Vec<Outcome> {
    use commands as c;
    match cmd {
        Command::Validate(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::validate(cfg, e, t)),
        Command::Defects(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::defects_cmd(cfg, e, t)),
        Command::Stability(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::stability(cfg, e, t)),
        Command::Dilate { inputs, len } => per_input(&inputs.inputs, c::load_tuple, |e, t| c::dilate(cfg, e, t, *len)),
        Command::Poisson(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::poisson(cfg, e, t)),
        Command::Charfn(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::charfn(cfg, e, t)),
        Command::LiftCharfn { inputs, allow_nonreduced, buffer } => per_input(&inputs.inputs, c::load_lifting, |e, b| {
            c::lift_charfn(cfg, e, b, *allow_nonreduced, *buffer)
        }),
        Command::ExtCharfn(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::ext_charfn(cfg, e, t)),
        Command::ConstrainedCharfn { inputs, constraints, allow_nonreduced, buffer } => {
            per_input(&inputs.inputs, c::load_lifting, |e, b| {
                c::constrained_charfn(cfg, e, b, constraints.name(), *allow_nonreduced, *buffer)
            })
        }
        Command::Equiv { a, b } => vec![(|| {
            let (ea, ta) = c::load_symbol(a)?;
            let (eb, tb) = c::load_symbol(b)?;
            Ok((pair_stem(&ea, &eb), c::equiv(cfg, vec![ea, eb], &ta, &tb)))
        })()],
        Command::Compose { a, b } => vec![(|| {
            let (ea, ta) = c::load_symbol(a)?;
            let (eb, tb) = c::load_symbol(b)?;
            Ok((pair_stem(&ea, &eb), c::compose_cmd(cfg, vec![ea, eb], &ta, &tb)))
        })()],
        Command::Model { tuple, symbol } => vec![(|| {
            let (ec, t) = c::load_tuple(tuple)?;
            let (es, th) = c::load_symbol(symbol)?;
            Ok((pair_stem(&ec, &es), c::model(cfg, vec![ec, es], t, &th)))
        })()],
        Command::Classify(i) => per_input(&i.inputs, c::load_lifting, |e, b| c::classify_cmd(cfg, e, b)),
        Command::Fixpoints(i) => per_input(&i.inputs, c::load_tuple, |e, t| c::fixpoints(cfg, e, t)),
        Command::KappaInv(i) => per_input(&i.inputs, c::load_lifting, |e, b| c::kappa_inv(cfg, e, b)),
        Command::Curv { inputs, sym } => per_input(&inputs.inputs, c::load_tuple, |e, t| c::curv(cfg, e, t, sym.args())),
        Command::Euler { inputs, sym } => per_input(&inputs.inputs, c::load_tuple, |e, t| c::euler(cfg, e, t, sym.args())),
        Command::CurvatureIdentity { inputs, gap_tol } => per_input(&inputs.inputs, c::load_lifting, |e, b| {
            c::curvature_identity(cfg, e, b, *gap_tol)
        }),
        Command::Constrain { inputs, constraints, len } => per_input(&inputs.inputs, c::load_tuple, |e, t| {
            c::constrain(cfg, e, t, constraints.name(), *len)
        }),
        Command::Cocycle { inputs, k_max, off_omega } => per_input(&inputs.inputs, c::load_tuple, |e, t| {
            c::cocycle(cfg, e, t, *k_max, *off_omega)
        }),
    }
}

fn file_safe(s: &str) -> String {
    s.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' { ch } else { '_' }).collect()
}

/// Writes one report in the requested format.
fn emit(stem: &str, rep: &Report, format: Format, out: Option<&Path>) -> Result<(), String> {
    let base = format!("{}.{}", file_safe(stem), rep.command);
    let io = |e: std::io::Error| e.to_string();
    match (format, out) {
        (Format::Json, Some(dir)) => write_atomic(dir, &format!("{base}.json"), &rep.to_json()).map(|_| ()).map_err(io),
        (Format::Json, None) => {
            print!("{}", rep.to_json());
            Ok(())
        }
        (Format::Text, Some(dir)) => write_atomic(dir, &format!("{base}.txt"), &rep.to_text()).map(|_| ()).map_err(io),
        (Format::Text, None) => {
            print!("{}", rep.to_text());
            Ok(())
        }
        (Format::Csv, Some(dir)) => {
            for (statistic, body) in rep.to_csv()? {
                write_atomic(dir, &format!("{base}.{}.csv", file_safe(&statistic)), &body).map_err(io)?;
            }
            write_atomic(dir, &format!("{base}.json"), &rep.to_json()).map(|_| ()).map_err(io)
        }
        (Format::Csv, None) => {
            for (statistic, body) in rep.to_csv()? {
                print!("# {statistic}\n{body}");
            }
            Ok(())
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("FOCKDIL_THREADS") else {
        return Ok(());
    };
    let n = parse_level(raw.trim()).map_err(|e| format!("FOCKDIL_THREADS: {e}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("FOCKDIL_THREADS: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if cli.report == Format::Csv && !has_traces(&cli.command) {
        eprintln!("error: --report csv is available for curv, euler and curvature-identity");
        return ExitCode::from(2);
    }
    let cfg = RunConfig {
        trunc: cli.trunc,
        tol: cli.tol,
        rank_tol: cli.rank_tol,
        tol_inner: cli.tol_inner,
        check_tol: cli.check_tol,
        limit_tol: cli.limit_tol,
        seed: cli.seed,
        report: cli.report.name().into(),
    };
    let mut code = 0u8;
    for outcome in run(&cli.command, &cfg) {
        match outcome {
            Err(e) => {
                eprintln!("error: {e}");
                code = 2;
            }
            Ok((stem, rep)) => {
                if let Err(e) = emit(&stem, &rep, cli.report, cli.out.as_deref()) {
                    eprintln!("error: writing report for {stem}: {e}");
                    code = 2;
                }
                if !rep.passed() {
                    let names = rep.inputs.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(" ");
                    for name in rep.failed_names() {
                        eprintln!("assertion failed: {name} ({names})");
                    }
                    code = code.max(1);
                }
            }
        }
    }
    ExitCode::from(code)
}

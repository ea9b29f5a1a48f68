//! Command-line front end.
//!
//! Exit codes: 0 feasible / success, 1 infeasible / nothing found, 2 usage or
//! input error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::feasibility::{self, fmt_set, fmt_tuple, FeasibilityError, Witness};
use crate::oracle::{self, OracleError, DEFAULT_CAP};
use crate::protocol::{self, PatternOutcomes, SimError, SimulationRun};
use crate::render;
use crate::task::{self, CallPattern, SummoningTask, TaskMode};
use crate::Exec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "summoning", version, about = "Feasibility, simulation and certificates for quantum summoning tasks")]
pub struct Cli {
    /// Override the task file's call regime.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<TaskMode>,
    /// Override the task file's causal tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print nothing; report through the exit code only.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_mode(s: &str) -> Result<TaskMode, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide feasibility under the task's regime.
    Check { file: PathBuf },
    /// Print a chain ordering of the diamonds (unrestricted calls).
    Order { file: PathBuf },
    /// Run the summoning protocol for a call pattern.
    Simulate {
        file: PathBuf,
        /// Comma-separated 1-based call indices, or `none`.
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        calls: Option<String>,
        /// Every call pattern, followed by a no-signalling audit.
        #[arg(long)]
        all: bool,
    },
    /// Search all causal strategies; certify infeasibility by parity.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// Look for a causal path from s through every (segment) diamond.
    Path { file: PathBuf },
    /// Emit the causal structure as DOT or CSV.
    Render {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Csv,
}

/// Parses `1,3`, `none` into a pattern over `1..=n`.
pub fn parse_calls(text: &str, n: usize) -> Result<CallPattern, String> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("none") || text.is_empty() {
        return Ok(CallPattern::empty());
    }
    let mut indices = Vec::new();
    for part in text.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .map_err(|_| format!("bad call index `{}`", part.trim()))?;
        if i == 0 {
            return Err("call index 0: indices are 1-based".into());
        }
        if i > n {
            return Err(format!("call index {i} is beyond the task's {n} pairs"));
        }
        indices.push(i);
    }
    CallPattern::from_indices(indices).map_err(|e| e.to_string())
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    quiet: bool,
}

macro_rules! say {
    ($io:expr, $($arg:tt)*) => {
        if !$io.quiet {
            let _ = writeln!($io.out, $($arg)*);
        }
    };
}

macro_rules! fail {
    ($io:expr, $($arg:tt)*) => {{
        let _ = writeln!($io.err, "error: {}", format!($($arg)*).trim_end());
        return EXIT_INPUT;
    }};
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INPUT
                }
            };
        }
    };
    let mut io = Io { out, err, quiet: cli.quiet };
    match &cli.command {
        Command::Check { file } => match load(&cli, file, &mut io) {
            Ok(task) => run_check(&task, &mut io),
            Err(code) => code,
        },
        Command::Order { file } => match load(&cli, file, &mut io) {
            Ok(task) => run_order(&task, &mut io),
            Err(code) => code,
        },
        Command::Simulate { file, calls, all } => match load(&cli, file, &mut io) {
            Ok(task) => run_simulate(&task, calls.as_deref(), *all, &mut io),
            Err(code) => code,
        },
        Command::Oracle { file, cap } => match load(&cli, file, &mut io) {
            Ok(task) => run_oracle(&task, *cap, &mut io),
            Err(code) => code,
        },
        Command::Path { file } => match load(&cli, file, &mut io) {
            Ok(task) => run_path(&task, &mut io),
            Err(code) => code,
        },
        Command::Render { file, format } => match load(&cli, file, &mut io) {
            Ok(task) => run_render(&task, *format, &mut io),
            Err(code) => code,
        },
    }
}

/// Reads, parses, applies overrides (flag > file > default) and validates.
fn load(cli: &Cli, file: &PathBuf, io: &mut Io) -> Result<SummoningTask, i32> {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(io.err, "error: cannot read {}: {e}", file.display());
            return Err(EXIT_INPUT);
        }
    };
    let mut task = match task::parse_task(&text) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            return Err(EXIT_INPUT);
        }
    };
    if let Some(mode) = cli.mode {
        task.mode = mode;
    }
    if let Some(tol) = cli.tol {
        task.tol = tol;
    }
    let report = task.validate();
    if !report.ok() {
        let _ = writeln!(io.err, "error: invalid task:\n{}", report.to_string().trim_end());
        return Err(EXIT_INPUT);
    }
    Ok(task)
}

fn witness_line(w: &Witness) -> String {
    format!("witness: {w}")
}

fn run_check(task: &SummoningTask, io: &mut Io) -> i32 {
    let verdict = match feasibility::check(task) {
        Ok(v) => v,
        Err(e) => fail!(io, "{e}"),
    };
    say!(io, "mode: {}", task.mode);
    if verdict.feasible {
        say!(io, "verdict: feasible");
        if let Some(order) = &verdict.ordering {
            say!(io, "ordering: {}", fmt_tuple(order));
        }
        if task.mode == TaskMode::ExtendedGeometry {
            match verdict.empty_diamonds.as_slice() {
                [] => say!(io, "diagnostic: no empty diamonds"),
                [i] => say!(io, "diagnostic: one empty diamond (pair {i})"),
                more => say!(io, "diagnostic: {} empty diamonds {}", more.len(), fmt_set(more)),
            }
        }
        EXIT_OK
    } else {
        say!(io, "verdict: infeasible");
        if let Some(w) = &verdict.witness {
            say!(io, "{}", witness_line(w));
        }
        EXIT_NEGATIVE
    }
}

fn run_order(task: &SummoningTask, io: &mut Io) -> i32 {
    match feasibility::construct_ordering(task) {
        Ok(order) => {
            debug_assert!(feasibility::ordering_is_valid(task, &order));
            say!(io, "ordering: {}", fmt_tuple(&order));
            EXIT_OK
        }
        Err(FeasibilityError::Infeasible(w)) => {
            say!(io, "no ordering: {w}");
            EXIT_NEGATIVE
        }
        Err(e) => fail!(io, "{e}"),
    }
}

fn print_run(io: &mut Io, run: &SimulationRun) {
    say!(io, "calls {}: {}", run.pattern, run.outcome);
    if !io.quiet {
        for line in run.log.to_string().lines() {
            let _ = writeln!(io.out, "  {line}");
        }
    }
}

fn sim_error(io: &mut Io, e: SimError) -> i32 {
    match e {
        SimError::Feasibility(FeasibilityError::Infeasible(w)) => {
            say!(io, "no chain protocol: {w}");
            EXIT_NEGATIVE
        }
        other => fail!(io, "{other}"),
    }
}

fn run_simulate(task: &SummoningTask, calls: Option<&str>, all: bool, io: &mut Io) -> i32 {
    let extended = task.mode == TaskMode::ExtendedGeometry;
    let patterns: Vec<CallPattern> = if all {
        if extended {
            match task::enumerate_patterns(task) {
                Ok(p) => p,
                Err(e) => fail!(io, "{e}"),
            }
        } else {
            if task.n() > protocol::MAX_SWEEP_PAIRS {
                fail!(io, "--all is limited to {} pairs", protocol::MAX_SWEEP_PAIRS);
            }
            (0..1u64 << task.n()).map(CallPattern::from_bits).collect()
        }
    } else {
        match parse_calls(calls.unwrap_or("none"), task.n()) {
            Ok(p) => vec![p],
            Err(e) => fail!(io, "{e}"),
        }
    };

    if extended {
        for &pattern in &patterns {
            match protocol::simulate_two_call_extended(task, pattern) {
                Ok(run) => print_run(io, &run),
                Err(e) => return sim_error(io, e),
            }
        }
        return EXIT_OK;
    }

    let plan = match protocol::plan_chain_protocol(task) {
        Ok(plan) => plan,
        Err(e) => return sim_error(io, e),
    };
    say!(io, "chain: {}", fmt_tuple(&plan.ordering));
    let runs = Exec::default().map_slice(&patterns, |&p| protocol::simulate(&plan, p));
    let mut outcomes = Vec::with_capacity(runs.len());
    for run in runs {
        match run {
            Ok(run) => {
                print_run(io, &run);
                outcomes.push((run.pattern, run.outcome));
            }
            Err(e) => return sim_error(io, e),
        }
    }
    if all {
        let results = PatternOutcomes { n: task.n(), outcomes };
        let returns = results.returns();
        say!(
            io,
            "{} outcomes: {} returns, {} without return",
            results.outcomes.len(),
            returns,
            results.outcomes.len() - returns
        );
        let audit = protocol::audit_no_signalling(&results, task);
        say!(io, "{audit}");
        if !audit.passed() {
            return EXIT_NEGATIVE;
        }
    }
    EXIT_OK
}

fn describe_strategy(s: &oracle::CausalStrategy) -> Vec<String> {
    let mut lines = Vec::new();
    for (k, vis) in s.visible.iter().enumerate() {
        let subsets: Vec<String> = (0..1u64 << vis.len())
            .filter(|&l| s.tables[k] >> l & 1 == 1)
            .map(|l| {
                let members: Vec<usize> = vis
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| l >> p & 1 == 1)
                    .map(|(_, &j)| j)
                    .collect();
                fmt_set(&members)
            })
            .collect();
        let shown = if subsets.is_empty() { "never".to_string() } else { subsets.join(" ") };
        lines.push(format!("  r{} (sees {}): return on {}", k + 1, fmt_set(vis), shown));
    }
    lines
}

fn run_oracle(task: &SummoningTask, cap: u64, io: &mut Io) -> i32 {
    let result = match oracle::exhaustive_search_with(task, cap, Exec::default()) {
        Ok(r) => r,
        Err(e @ OracleError::CapExceeded { .. }) => fail!(io, "{e}"),
        Err(e) => fail!(io, "{e}"),
    };
    if let Some(strategy) = &result.strategy {
        say!(io, "valid strategy found (#{} of {})", result.checked, result.space);
        for line in describe_strategy(strategy) {
            say!(io, "{line}");
        }
        return EXIT_OK;
    }
    let verdict = match feasibility::check_unrestricted(task) {
        Ok(v) => v,
        Err(e) => fail!(io, "{e}"),
    };
    match verdict.witness {
        Some(Witness::NoDominant(set)) => match oracle::parity_certificate_with(task, &set, cap, Exec::default()) {
            Ok(cert) => {
                let even = if cert.counts_even == Some(false) { "odd Q_i seen" } else { "Q_i even" };
                say!(
                    io,
                    "no valid strategy among {}; parity: {even}, need {}",
                    result.space,
                    cert.required_total
                );
                say!(io, "{cert}");
            }
            Err(e) => fail!(io, "{e}"),
        },
        Some(w) => {
            say!(io, "no valid strategy among {}", result.space);
            say!(io, "{}", witness_line(&w));
        }
        None => fail!(io, "search found no strategy for a feasible task"),
    }
    EXIT_NEGATIVE
}

fn run_path(task: &SummoningTask, io: &mut Io) -> i32 {
    match feasibility::find_sequential_causal_path(task) {
        Ok(Some(route)) => {
            say!(io, "sequential causal path: s -> {}", fmt_tuple(&route));
            EXIT_OK
        }
        Ok(None) => {
            say!(io, "no sequential causal path");
            EXIT_NEGATIVE
        }
        Err(e) => fail!(io, "{e}"),
    }
}

fn run_render(task: &SummoningTask, format: Format, io: &mut Io) -> i32 {
    let text = match format {
        Format::Dot => render::to_dot(task),
        Format::Csv => render::to_csv(task),
    };
    if !io.quiet {
        let _ = write!(io.out, "{text}");
    }
    EXIT_OK
}

/// Outcome of a CLI invocation captured in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Captured {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_captured<I, T>(args: I) -> Captured
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(args, &mut out, &mut err);
    Captured {
        code,
        stdout: String::from_utf8_lossy(&out).into_owned(),
        stderr: String::from_utf8_lossy(&err).into_owned(),
    }
}

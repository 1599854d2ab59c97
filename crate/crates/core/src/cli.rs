//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 when a solver stops before reaching its
//! tolerance, 2 for bad input (flags, files, scenarios, caps).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::cfr::{cfr_solve, CfrLogRow, CfrOptions, Variant};
use crate::error::{Error, Result};
use crate::evaluation::{worst_case_reward, EvalMode, EvalReport, PursuerPolicy, DEFAULT_STATE_BOUND};
use crate::graph::GridSpec;
use crate::meta::{double_oracle_solve, IterationLog};
use crate::paths::{PathMode, PathSet};
use crate::scenario::{
    bundled, seed_paths, EvalSection, GraphSource, ResultRow, ScenarioFile, SolverKind,
    SolverSection,
};
use crate::dynamics::InfoCase;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGENCE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "unsg", version, about = "Pursuit-evasion games on road graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Simple,
    Walks,
}

impl From<ModeArg> for PathMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Simple => PathMode::Simple,
            ModeArg::Walks => PathMode::Walks,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
    Auto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Do,
    Cfr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Vanilla,
    Plus,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print a scenario skeleton on a random grid.
    GenGrid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 1.0)]
        side_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        diag_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "grid")]
        id: String,
    },
    /// Enumerate evader paths as CSV (one path per line).
    Enumerate {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Worst-case catch probability of a policy file over a path set.
    Evaluate {
        scenario: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Path CSV; enumerated from the scenario when omitted.
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        state_bound: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve a scenario with double oracle or CFR.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverArg,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// CFR iterations.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum, default_value = "plus")]
        variant: VariantArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Convergence log CSV destination.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Add wall-clock columns.
        #[arg(long)]
        timing: bool,
    },
    /// Run every bundled benchmark with its configured solvers.
    Bench {
        /// Keep scenarios whose id contains this text.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timing: bool,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    ScenarioFile::parse(&read(path)?)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Parse(format!("write failed: {e}")))
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::GenGrid {
            rows,
            cols,
            side_prob,
            diag_prob,
            seed,
            id,
        } => {
            let spec = GridSpec {
                rows,
                cols,
                side_exist_prob: side_prob,
                diagonal_exist_prob: diag_prob,
                seed,
            };
            emit(out, &grid_skeleton(spec, id)?.to_toml()?)?;
            Ok(EXIT_OK)
        }
        Command::Enumerate {
            scenario,
            mode,
            max_len,
            cap,
        } => {
            let s = load_scenario(&scenario)?;
            let config = s.config()?;
            let mut opts = s.path_options();
            if let Some(m) = mode {
                opts.mode = m.into();
            }
            if let Some(l) = max_len {
                opts.max_len = l;
            }
            if let Some(c) = cap {
                opts.cap = c;
            }
            let set = crate::paths::enumerate_paths(&config.graph, config.evader_start, &opts)?;
            emit(out, &set.to_csv())?;
            let _ = writeln!(err, "paths: {}", set.len());
            Ok(EXIT_OK)
        }
        Command::Evaluate {
            scenario,
            policy,
            paths,
            method,
            samples,
            state_bound,
            seed,
        } => {
            let s = load_scenario(&scenario)?;
            let config = s.config()?;
            let policy = PursuerPolicy::from_text(&read(&policy)?)?;
            let set = match paths {
                Some(p) => PathSet::from_csv(&read(&p)?, s.eval.path_mode)?,
                None => s.paths(&config)?,
            };
            let state_bound = state_bound.unwrap_or(DEFAULT_STATE_BOUND);
            let samples = samples.unwrap_or(s.solver.mc_samples);
            let seed = seed.unwrap_or(s.solver.seed);
            let mode = match method {
                MethodArg::Exact => EvalMode::Exact { state_bound },
                MethodArg::Mc => EvalMode::MonteCarlo { samples, seed },
                MethodArg::Auto => EvalMode::Auto {
                    state_bound,
                    samples,
                    seed,
                },
            };
            let report = worst_case_reward(&policy, &set, &config, mode)?;
            emit(
                out,
                &format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row(&s.id)),
            )?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            scenario,
            solver,
            eps,
            max_iters,
            iterations,
            variant,
            seed,
            log,
            timing,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(e) = eps {
                s.solver.eps = e;
            }
            if let Some(m) = max_iters {
                s.solver.max_iters = m;
            }
            if let Some(n) = iterations {
                s.solver.cfr_iterations = n;
            }
            if let Some(seed) = seed {
                s.solver.seed = seed;
            }
            let variant = match variant {
                VariantArg::Vanilla => Variant::Vanilla,
                VariantArg::Plus => Variant::PlusAveraging,
            };
            let kind = match solver {
                SolverArg::Do => SolverKind::Do,
                SolverArg::Cfr => SolverKind::Cfr,
            };
            let run = solve_scenario(&s, kind, variant)?;
            if let Some(path) = log {
                let mut text = run.log_header(timing).to_string();
                text.push('\n');
                for row in run.log_rows(timing) {
                    text.push_str(&row);
                    text.push('\n');
                }
                fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            }
            emit(
                out,
                &format!(
                    "{}\n{}\n",
                    ResultRow::csv_header(timing),
                    run.row.csv_row(timing)
                ),
            )?;
            if run.converged {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(
                    err,
                    "error: {}",
                    Error::NonConvergence {
                        iterations: run.row.iterations,
                        gap: run.row.gap,
                    }
                );
                Ok(EXIT_NONCONVERGENCE)
            }
        }
        Command::Bench {
            filter,
            seed,
            timing,
        } => {
            let text = bench_csv(filter.as_deref(), seed, timing)?;
            emit(out, &text)?;
            Ok(EXIT_OK)
        }
    }
}

/// A complete scenario on the grid with placeholder positions: exits in
/// the corners, the evader in the middle and one pursuer in the first
/// corner.
pub fn grid_skeleton(spec: GridSpec, id: String) -> Result<ScenarioFile> {
    spec.validate()?;
    let mut exits = vec![
        spec.vertex(0, 0),
        spec.vertex(0, spec.cols - 1),
        spec.vertex(spec.rows - 1, 0),
        spec.vertex(spec.rows - 1, spec.cols - 1),
    ];
    exits.sort_unstable();
    exits.dedup();
    let horizon = spec.rows + spec.cols;
    Ok(ScenarioFile {
        id,
        horizon,
        info_case: InfoCase::PursuerSeesEvader,
        allow_stay: true,
        capture_before_escape: true,
        exits,
        pursuer_starts: vec![spec.vertex(0, 0)],
        evader_start: spec.vertex(spec.rows / 2, spec.cols / 2),
        graph: GraphSource::Grid(spec),
        eval: EvalSection {
            path_mode: PathMode::Simple,
            max_len: horizon,
            path_cap: crate::paths::DEFAULT_PATH_CAP,
        },
        solver: SolverSection::default(),
    })
}

/// Outcome of one solver run on one scenario.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub row: ResultRow,
    pub converged: bool,
    pub do_log: Vec<IterationLog>,
    pub cfr_log: Vec<CfrLogRow>,
}

impl SolveRun {
    fn log_header(&self, timing: bool) -> &'static str {
        if self.cfr_log.is_empty() {
            IterationLog::csv_header(timing)
        } else {
            CfrLogRow::CSV_HEADER
        }
    }

    fn log_rows(&self, timing: bool) -> Vec<String> {
        if self.cfr_log.is_empty() {
            self.do_log.iter().map(|r| r.csv_row(timing)).collect()
        } else {
            self.cfr_log.iter().map(CfrLogRow::csv_row).collect()
        }
    }
}

/// Runs one solver with the scenario's settings. Double oracle reports its
/// final bound gap and converges when that gap is within `eps`. CFR reports
/// the exploitability of its average profile; it has no tolerance, so any
/// run of at least one iteration counts as converged.
pub fn solve_scenario(s: &ScenarioFile, kind: SolverKind, variant: Variant) -> Result<SolveRun> {
    let config = s.config()?;
    let started = Instant::now();
    match kind {
        SolverKind::Do => {
            let full = s.paths(&config)?;
            let seed = seed_paths(&full, s.solver.seed)?;
            let res = double_oracle_solve(&config, &full, &seed, s.do_options())?;
            Ok(SolveRun {
                row: ResultRow {
                    scenario: s.id.clone(),
                    solver: kind.as_str().into(),
                    value: res.value,
                    gap: if res.log.is_empty() { f64::NAN } else { res.gap() },
                    iterations: res.log.len(),
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                },
                converged: res.converged,
                do_log: res.log,
                cfr_log: Vec::new(),
            })
        }
        SolverKind::Cfr => {
            let opts = CfrOptions::new(s.solver.cfr_iterations, variant);
            let sol = cfr_solve(&config, opts)?;
            Ok(SolveRun {
                row: ResultRow {
                    scenario: s.id.clone(),
                    solver: kind.as_str().into(),
                    value: sol.value,
                    gap: sol.exploitability,
                    iterations: sol.iterations,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                },
                converged: sol.iterations > 0,
                do_log: Vec::new(),
                cfr_log: sol.log,
            })
        }
    }
}

/// Results table over the bundled scenarios, one row per (scenario, solver).
pub fn bench_csv(filter: Option<&str>, seed: Option<u64>, timing: bool) -> Result<String> {
    let mut text = String::from(ResultRow::csv_header(timing));
    text.push('\n');
    for mut s in bundled() {
        if filter.is_some_and(|f| !s.id.contains(f)) {
            continue;
        }
        if let Some(seed) = seed {
            s.solver.seed = seed;
        }
        for &kind in &s.solver.bench {
            let run = solve_scenario(&s, kind, Variant::PlusAveraging)?;
            text.push_str(&run.row.csv_row(timing));
            text.push('\n');
        }
    }
    Ok(text)
}

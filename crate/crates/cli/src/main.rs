//! `vpdiff`: differential regression checks between two device-model versions.

mod render;

use std::fs;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use vpdiff_core::dsl::{free_expr_term, parse_model, validate_model};
use vpdiff_core::interp::{request_args, request_assumptions, Explorer};
use vpdiff_core::{
    build_harness, init_env, load_model, run_pipeline, Backend, HarnessConfig, SolveResult, Solver, SolverConfig,
    SourceUnit, ValidatedModel, Verdict,
};

#[derive(Parser, Debug)]
#[command(
    name = "vpdiff",
    version,
    about = "Differential regression checker for device models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare two versions of a model and report every divergence.
    Check {
        old: String,
        new: String,
        /// Harness configuration (JSON).
        #[arg(long)]
        config: Option<String>,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        json: Option<String>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        max_paths: Option<usize>,
        #[arg(long)]
        loop_bound: Option<u32>,
        /// Zero wall-time and memory figures so reports compare byte for byte.
        #[arg(long)]
        seed_report: bool,
    },
    /// Explore one handler of one model and print every path.
    Explore {
        model: String,
        #[arg(long)]
        handler: String,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        max_paths: Option<usize>,
        #[arg(long)]
        loop_bound: Option<u32>,
    },
    /// Validate a model and print it back in canonical form.
    Parse { model: String },
    /// Decide a width-1 expression such as `x:u8 + 1 == 0`.
    SolveDebug {
        expr: String,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Builtin,
    External,
}

/// A failure with its exit code.
#[derive(Debug)]
enum Fail {
    Usage(String),
    Internal(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 3,
            Fail::Internal(_) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(3);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (Fail::Usage(m) | Fail::Internal(m)) = &f;
            eprintln!("vpdiff: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Result<u8, Fail> {
    match cmd {
        Command::Check {
            old,
            new,
            config,
            json,
            solver,
            max_paths,
            loop_bound,
            seed_report,
        } => {
            let mut cfg = match &config {
                Some(p) => HarnessConfig::from_json(&read(p)?).map_err(|e| Fail::Usage(format!("{p}: {e}")))?,
                None => HarnessConfig::default(),
            };
            apply_overrides(&mut cfg.solver, &mut cfg.budget, solver, max_paths, loop_bound);
            let old_m = load(&old, cfg.budget.loop_bound)?;
            let new_m = load(&new, cfg.budget.loop_bound)?;
            probe_solver(&cfg.solver)?;
            let plan = build_harness(old_m, new_m, &cfg).map_err(|e| Fail::Usage(e.to_string()))?;
            let mut report = run_pipeline(&plan).map_err(|e| Fail::Internal(e.to_string()))?;
            if seed_report {
                report.zero_resources();
            }
            if let Some(path) = &json {
                fs::write(path, report.to_json() + "\n")
                    .map_err(|e| Fail::Usage(format!("cannot write {path}: {e}")))?;
            }
            print!("{}", render::report(&report));
            let verdict = report.verdict();
            if verdict == Verdict::Truncated {
                eprintln!("vpdiff: warning: exploration was truncated; results are incomplete");
            }
            Ok(match verdict {
                Verdict::Clean => 0,
                Verdict::Differences => 1,
                Verdict::PossibleOnly => 2,
                Verdict::Truncated => 5,
            })
        }
        Command::Explore {
            model,
            handler,
            solver,
            max_paths,
            loop_bound,
        } => {
            let mut cfg = HarnessConfig::default();
            apply_overrides(&mut cfg.solver, &mut cfg.budget, solver, max_paths, loop_bound);
            let m = load(&model, cfg.budget.loop_bound)?;
            let h = m
                .handler(&handler)
                .ok_or_else(|| Fail::Usage(format!("{model} has no handler named {handler}")))?;
            let args = request_args(h);
            let assume = request_assumptions(h, &args);
            let env = init_env(&m, None);
            let solver = Solver::new(cfg.solver);
            let explorer = Explorer {
                model: &m,
                budget: cfg.budget,
                solver: &solver,
            };
            let ex = explorer
                .explore(&handler, &env, &args, &Default::default(), &assume)
                .map_err(|e| Fail::Internal(e.to_string()))?;
            print!("{}", render::exploration(&handler, &env, &ex));
            Ok(0)
        }
        Command::Parse { model } => {
            let src = source(&model)?;
            let ast = parse_model(&src).map_err(|e| Fail::Usage(format!("{model}:{e}")))?;
            let vm = validate_model(&ast).map_err(|e| Fail::Usage(format!("{model}:{e}")))?;
            print!("{}", vm.ast());
            Ok(0)
        }
        Command::SolveDebug { expr, solver } => {
            let t = free_expr_term(&expr).map_err(|e| Fail::Usage(e.to_string()))?;
            if t.width() != 1 {
                return Err(Fail::Usage(format!("expression has width {}, expected 1", t.width())));
            }
            let mut cfg = SolverConfig::default();
            apply_overrides(&mut cfg, &mut Default::default(), solver, None, None);
            probe_solver(&cfg)?;
            let pc = vpdiff_core::PathCondition::new().and(&t);
            match Solver::new(cfg).solve(&pc) {
                SolveResult::Sat(a) if a.iter().next().is_none() => println!("sat"),
                SolveResult::Sat(a) => println!("sat {a}"),
                SolveResult::Unsat => println!("unsat"),
                SolveResult::Unknown(why) => println!("unknown ({why})"),
            }
            Ok(0)
        }
    }
}

fn apply_overrides(
    solver: &mut SolverConfig,
    budget: &mut vpdiff_core::ExploreBudget,
    backend: Option<SolverArg>,
    max_paths: Option<usize>,
    loop_bound: Option<u32>,
) {
    match backend {
        Some(SolverArg::Builtin) => solver.backend = Backend::Builtin,
        Some(SolverArg::External) => solver.backend = Backend::External,
        None => {}
    }
    if solver.backend == Backend::External && solver.resolved_external_cmd().is_none() {
        solver.external_cmd = Some("z3 -in".into());
    }
    if let Some(n) = max_paths {
        budget.max_paths = n;
    }
    if let Some(n) = loop_bound {
        budget.loop_bound = n;
    }
}

/// Fails early when an external solver was requested but cannot be started.
fn probe_solver(cfg: &SolverConfig) -> Result<(), Fail> {
    if cfg.backend != Backend::External {
        return Ok(());
    }
    let t = free_expr_term("probe:u1 == 1").expect("probe expression parses");
    match Solver::new(cfg.clone()).solve(&vpdiff_core::PathCondition::new().and(&t)) {
        SolveResult::Unknown(why) => Err(Fail::Usage(format!("external solver unusable: {why}"))),
        _ => Ok(()),
    }
}

fn read(path: &str) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|_| Fail::Usage(format!("cannot read {path}")))
}

fn source(path: &str) -> Result<SourceUnit, Fail> {
    let bytes = fs::read(path).map_err(|_| Fail::Usage(format!("cannot read {path}")))?;
    SourceUnit::from_bytes(path, bytes).map_err(|e| Fail::Usage(format!("{path}:{e}")))
}

fn load(path: &str, loop_bound: u32) -> Result<Arc<ValidatedModel>, Fail> {
    if loop_bound == 0 {
        return Err(Fail::Usage("loop bound must be at least 1".into()));
    }
    let src = source(path)?;
    load_model(&src, loop_bound)
        .map(Arc::new)
        .map_err(|e| Fail::Usage(e.to_string()))
}

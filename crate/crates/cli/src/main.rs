use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use netfix_core::abstraction::ModelRegistry;
use netfix_core::corpus::{load_corpus, load_program, load_tests, read_file, run_benchmark, BenchRecord};
use netfix_core::driver::{first_fault, repair, RepairConfig};
use netfix_core::ir::{statement_text, Program};
use netfix_core::localizer::check_faulty_symbolic;
use netfix_core::smt::{solver_available, SolverConfig};
use netfix_core::testkit::{is_faulty, run_test, ExecBounds, UnitTest};

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "netfix", version, about = "Test-driven repair of programs in a small OO IR")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize and patch a fault; writes `<program>.fixed.np`.
    Repair(Inputs),
    /// Print the first fault location.
    Localize(Inputs),
    /// Report whether the tests fail, concretely and symbolically.
    Check(Inputs),
    /// Repair every benchmark under a corpus directory.
    Bench {
        #[arg(default_value = "benchmarks")]
        dir: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Args)]
struct Inputs {
    program: PathBuf,
    tests: PathBuf,
    #[command(flatten)]
    opts: Options,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct Options {
    /// Loop iterations per frame and recursion depth.
    #[arg(long, default_value_t = ExecBounds::default().unroll_k)]
    unroll: usize,
    /// Expansion budget for synthesized expressions.
    #[arg(long, default_value_t = RepairConfig::default().max_expansions)]
    expansions: usize,
    /// Solver binary (`z3` on PATH by default).
    #[arg(long)]
    solver: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Analyze `@network` functions by their bodies instead of models.
    #[arg(long)]
    no_abstraction: bool,
    /// Inline callees instead of using summaries.
    #[arg(long)]
    no_summaries: bool,
    /// Extra models, as a JSON manifest.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl Options {
    fn config(&self) -> Result<RepairConfig, Failure> {
        let models = match &self.models {
            Some(path) => {
                let json = read_file(path).map_err(|e| Failure::Input(e.to_string()))?;
                let r = ModelRegistry::builtin()
                    .with_manifest(&json)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                Some(r)
            }
            None => None,
        };
        let cfg = RepairConfig {
            bounds: ExecBounds { unroll_k: self.unroll, ..ExecBounds::default() },
            max_expansions: self.expansions,
            no_abstraction: self.no_abstraction,
            no_summaries: self.no_summaries,
            solver: SolverConfig { path: self.solver.clone(), seed: self.seed, timeout_ms: self.timeout * 1000 },
            models,
        };
        if !solver_available(&cfg.solver) {
            let name = cfg.solver.path.as_deref().unwrap_or(Path::new("z3")).display().to_string();
            return Err(Failure::Solver(format!("solver `{name}` is not available")));
        }
        Ok(cfg)
    }
}

fn load_inputs(i: &Inputs) -> Result<(Program, Vec<UnitTest>), Failure> {
    let p = load_program(&i.program).map_err(|e| Failure::Input(e.to_string()))?;
    let tests = load_tests(&i.tests).map_err(|e| Failure::Input(e.to_string()))?;
    if tests.is_empty() {
        return Err(Failure::Input(format!("{}: no tests", i.tests.display())));
    }
    for t in &tests {
        t.check(&p).map_err(|e| Failure::Input(format!("test {}: {e}", t.name)))?;
    }
    Ok((p, tests))
}

/// `dir/name.np` becomes `dir/name.fixed.np`.
fn fixed_path(program: &Path) -> PathBuf {
    let stem = program.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    program.with_file_name(format!("{stem}.fixed.np"))
}

fn cmd_repair(i: &Inputs) -> Result<u8, Failure> {
    let (p, tests) = load_inputs(i)?;
    let cfg = i.opts.config()?;
    let report = repair(&p, &tests, &cfg);
    match i.opts.report {
        ReportFormat::Text => println!("{report}"),
        ReportFormat::Json => println!("{}", report.to_json()),
    }
    let Some(fixed) = &report.program else {
        return Ok(EXIT_FAILED);
    };
    let out = fixed_path(&i.program);
    std::fs::write(&out, fixed.to_string()).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    info!("wrote {}", out.display());
    Ok(0)
}

fn cmd_localize(i: &Inputs) -> Result<u8, Failure> {
    let (p, tests) = load_inputs(i)?;
    let cfg = i.opts.config()?;
    if !is_faulty(&p, &tests, &cfg.bounds) {
        println!("not faulty");
        return Ok(0);
    }
    match first_fault(&p, &tests, &cfg).map_err(Failure::Solver)? {
        Some((f, l)) => {
            let stmt = p.statement(l).map(|s| statement_text(s, &p.strings)).unwrap_or_default();
            match i.opts.report {
                ReportFormat::Text => println!("fault at line {l} in {f}: {stmt}"),
                ReportFormat::Json => {
                    println!("{}", serde_json::json!({ "function": f.to_string(), "line": l, "statement": stmt }))
                }
            }
            Ok(0)
        }
        None => {
            println!("no fault location found");
            Ok(EXIT_FAILED)
        }
    }
}

fn cmd_check(i: &Inputs) -> Result<u8, Failure> {
    let (p, tests) = load_inputs(i)?;
    let cfg = i.opts.config()?;
    let work = cfg.working_program(&p);
    let concrete = is_faulty(&p, &tests, &cfg.bounds);
    let symbolic =
        check_faulty_symbolic(&work, &tests, &cfg.localizer()).map_err(|e| Failure::Solver(e.to_string()))?;
    let modeled = is_faulty(&work, &tests, &cfg.bounds);
    let verdict = if concrete { "faulty" } else { "not faulty" };
    match i.opts.report {
        ReportFormat::Text => {
            println!("{verdict}");
            for t in &tests {
                println!("  {:<24} {:?}", t.name, run_test(&p, t, &cfg.bounds));
            }
            if symbolic != modeled {
                println!("symbolic check disagrees: {}", if symbolic { "faulty" } else { "not faulty" });
            }
        }
        ReportFormat::Json => println!(
            "{}",
            serde_json::json!({ "faulty": concrete, "symbolic_faulty": symbolic, "agree": symbolic == modeled })
        ),
    }
    Ok(if symbolic == modeled { 0 } else { EXIT_FAILED })
}

fn print_table(rows: &[BenchRecord]) {
    println!(
        "{:<18} {:>5} {:>5} {:>4} {:>4} {:>6} {:>12} {:>14} {:>9}",
        "Benchmark", "Lines", "Tests", "Succ", "Exp", "Line", "Loc Time (s)", "Synth Time (s)", "Total (s)"
    );
    let mark = |b: bool| if b { "yes" } else { "no" };
    for r in rows {
        println!(
            "{:<18} {:>5} {:>5} {:>4} {:>4} {:>6} {:>12.3} {:>14.3} {:>9.3}",
            r.name,
            r.lines,
            r.tests,
            mark(r.repaired),
            r.exact.map(mark).unwrap_or("-"),
            r.line.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
            r.timings.localization,
            r.timings.synthesis,
            r.timings.total
        );
    }
    let ok = rows.iter().filter(|r| r.repaired).count();
    let exact = rows.iter().filter(|r| r.exact == Some(true)).count();
    println!("repaired {ok}/{}, exact {exact}/{}", rows.len(), rows.len());
}

fn cmd_bench(dir: &Path, out: Option<&Path>, opts: &Options) -> Result<u8, Failure> {
    let corpus = load_corpus(dir).map_err(|e| Failure::Input(e.to_string()))?;
    let cfg = opts.config()?;
    let rows: Vec<BenchRecord> = corpus
        .iter()
        .map(|b| {
            info!("running {}", b.name);
            run_benchmark(b, &cfg)
        })
        .collect();
    let json = serde_json::to_string_pretty(&rows).expect("records serialize");
    match opts.report {
        ReportFormat::Text => print_table(&rows),
        ReportFormat::Json => println!("{json}"),
    }
    if let Some(path) = out {
        std::fs::write(path, &json).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(if rows.iter().all(|r| r.repaired) { 0 } else { EXIT_FAILED })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Command::Repair(i) => cmd_repair(i),
        Command::Localize(i) => cmd_localize(i),
        Command::Check(i) => cmd_check(i),
        Command::Bench { dir, out, opts } => cmd_bench(dir, out.as_deref(), opts),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

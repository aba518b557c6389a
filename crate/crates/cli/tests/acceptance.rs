//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use netfix_core::abstraction::{apply_abstraction, ModelRegistry};
use netfix_core::corpus::{differing_lines, load_corpus, load_program, load_tests, Benchmark};
use netfix_core::ir::*;
use netfix_core::localizer::*;
use netfix_core::synth::*;
use netfix_core::testkit::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value as Json;

fn benchmarks() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

fn corpus() -> Vec<Benchmark> {
    load_corpus(&benchmarks()).expect("corpus loads")
}

fn netfix(args: &[&str]) -> (Option<i32>, String, Duration) {
    let t0 = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_netfix")).args(args).output().expect("binary runs");
    (o.status.code(), String::from_utf8_lossy(&o.stdout).into_owned(), t0.elapsed())
}

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn squash(s: &str) -> String {
    s.split_whitespace().collect()
}

fn end_to_end() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = benchmarks().join("firewall");
    for f in ["program.np", "tests.json"] {
        std::fs::copy(src.join(f), dir.path().join(f)).map_err(|e| e.to_string())?;
    }
    let program = dir.path().join("program.np");
    let tests = dir.path().join("tests.json");
    let (code, out, took) = netfix(&["repair", program.to_str().unwrap(), tests.to_str().unwrap(), "--report", "json"]);
    if code != Some(0) {
        return Err(format!("exit {code:?}: {out}"));
    }
    let report: Json = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let mut targets: Vec<&str> =
        report["iterations"].as_array().unwrap().iter().filter_map(|i| i["function"].as_str()).collect();
    targets.dedup();
    let pos = |f: &str| targets.iter().position(|t| *t == f);
    let (Some(init), Some(same)) = (pos("FirewallRule.init/0"), pos("FirewallRule.isSameAs/1")) else {
        return Err(format!("targets {targets:?}"));
    };
    if init >= same {
        return Err(format!("isSameAs before the constructor: {targets:?}"));
    }
    let original = load_program(&program).map_err(|e| e.to_string())?;
    let line = report["outcome"]["line"].as_u64().ok_or("no line")?;
    let faulty =
        original.statement(LineId(line as u32)).map(|s| statement_text(s, &original.strings)).unwrap_or_default();
    if !faulty.contains("this.dl_dst != r.dl_dst") {
        return Err(format!("localized line {line}: {faulty}"));
    }
    let fixed = load_program(&dir.path().join("program.fixed.np")).map_err(|e| e.to_string())?;
    let ts = load_tests(&tests).map_err(|e| e.to_string())?;
    if !verify(&fixed, &ts, &ExecBounds::default()) {
        return Err("fixed program fails the tests".into());
    }
    let expected = load_program(&src.join("expected_patch.np")).map_err(|e| e.to_string())?;
    let patch = report["outcome"]["patch"].as_str().unwrap_or_default();
    let want = expected.statement(LineId(18)).map(|s| statement_text(s, &expected.strings)).unwrap_or_default();
    if squash(patch) != squash(&want) {
        return Err(format!("patch `{patch}`, expected `{want}`"));
    }
    if took >= Duration::from_secs(60) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("targets {targets:?}, line {line}, patch `{patch}`, {:.2}s", took.as_secs_f64()))
}

fn consistency() -> Verdict {
    let b = ExecBounds::default();
    let mut checks = 0;
    for bm in corpus() {
        if bm.program.all_lines().len() > 200 {
            return Err(format!("{} has more than 200 lines", bm.name));
        }
        let programs = [
            ("raw", bm.program.clone()),
            ("abstracted", apply_abstraction(&bm.program, &ModelRegistry::builtin())),
            ("expected", bm.expected_patch.clone().unwrap_or_else(|| bm.program.clone())),
        ];
        for (what, p) in &programs {
            for t in &bm.tests {
                let pass = run_test(p, t, &b).is_pass();
                for no_summaries in [false, true] {
                    let cfg = LocalizerConfig { no_summaries, ..LocalizerConfig::default() };
                    let sat = check_test_symbolic(p, t, &cfg).map_err(|e| e.to_string())?;
                    if sat != pass {
                        return Err(format!("{}/{what}/{}: sat {sat}, concrete pass {pass}", bm.name, t.name));
                    }
                    checks += 1;
                }
            }
        }
    }
    let n = corpus().len();
    if n < 8 {
        return Err(format!("only {n} benchmarks"));
    }
    Ok(format!("{checks} checks over {n} benchmarks"))
}

fn relaxation() -> Verdict {
    let cfg = LocalizerConfig::default();
    let mut slowest = Duration::ZERO;
    let mut n = 0;
    for bm in corpus() {
        let Some(line) = bm.fault_line() else { continue };
        let t0 = Instant::now();
        let p = apply_abstraction(&bm.program, &ModelRegistry::builtin());
        if !check_faulty_symbolic(&p, &bm.tests, &cfg).map_err(|e| e.to_string())? {
            return Err(format!("{}: satisfiable with all guards", bm.name));
        }
        if !relaxed_sat(&p, &bm.tests, line, &cfg).map_err(|e| e.to_string())? {
            return Err(format!("{}: unsatisfiable with line {line} relaxed", bm.name));
        }
        let took = t0.elapsed();
        if took >= Duration::from_secs(10) {
            return Err(format!("{}: {took:?}", bm.name));
        }
        slowest = slowest.max(took);
        n += 1;
    }
    Ok(format!("{n} benchmarks, slowest {:.2}s", slowest.as_secs_f64()))
}

// ---- randomized sketch completion ----

const VALUE_HOLE: &str = "class S { static func f(x: int, y: int): int {
  0: r = 0
  1: return r } }";

const COND_HOLE: &str = "class S { static func f(x: int, y: int): int {
  0: r = 0
  1: if (x < y) goto 3
  2: r = 1
  3: return r } }";

const OPS: [BinOp; 8] =
    [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Lt, BinOp::Eq, BinOp::And, BinOp::BitXor, BinOp::Div];

fn leaf(rng: &mut StdRng) -> Expr {
    if rng.gen_bool(0.5) {
        Expr::int(rng.gen_range(-2..4))
    } else {
        Expr::var(if rng.gen_bool(0.5) { "x" } else { "y" })
    }
}

fn random_grammar(rng: &mut StdRng) -> Grammar {
    let n = rng.gen_range(2..4);
    let mut rules = vec![(0, Rhs::Leaf(leaf(rng)))];
    for _ in 0..rng.gen_range(2..8) {
        let lhs = rng.gen_range(0..n);
        let rhs = match rng.gen_range(0..7) {
            0..=2 => Rhs::Leaf(leaf(rng)),
            3 => Rhs::Unary(if rng.gen_bool(0.5) { UnOp::Neg } else { UnOp::Not }, rng.gen_range(0..n)),
            _ => Rhs::Binary(OPS[rng.gen_range(0..OPS.len())], rng.gen_range(0..n), rng.gen_range(0..n)),
        };
        rules.push((lhs, rhs));
    }
    Grammar::new((0..n).map(|i| format!("N{i}")).collect(), 0, rules)
}

struct Instance {
    sketch: Sketch,
    grammar: Grammar,
    tests: Vec<UnitTest>,
    states: Vec<TestStates>,
}

/// Tests come from a target fill, drawn from the grammar or not.
fn random_instance(rng: &mut StdRng, k: usize) -> Instance {
    let grammar = random_grammar(rng);
    let cond = rng.gen_bool(0.5);
    let p = parse_program(if cond { COND_HOLE } else { VALUE_HOLE }).unwrap();
    let line = LineId(if cond { 1 } else { 0 });
    let sketch = make_sketch(&p, &FuncSig::new("S", "f", 2), line).unwrap();
    let pool = enumerate_all(&grammar, k.min(4));
    let target = if rng.gen_bool(0.6) && !pool.is_empty() {
        pool[rng.gen_range(0..pool.len())].clone()
    } else {
        let x = || Expr::var("x");
        let y = || Expr::var("y");
        let others = [
            Expr::bin(BinOp::Add, Expr::bin(BinOp::Mul, x(), y()), Expr::int(7)),
            Expr::bin(BinOp::Lt, y(), Expr::int(-1)),
            Expr::bin(BinOp::Sub, y(), x()),
            Expr::int(2),
        ];
        others[rng.gen_range(0..others.len())].clone()
    };
    let want = sketch.complete(&target).unwrap();
    let b = ExecBounds::default();
    let mut tests = Vec::new();
    let mut states = Vec::new();
    for i in 0..rng.gen_range(1..4) {
        let args = vec![Scalar::Int(rng.gen_range(-5..6)), Scalar::Int(rng.gen_range(-5..6))];
        let probe = UnitTest::new(&format!("t{i}"), "S.f", args.clone(), Scalar::Int(0));
        let Ok(out) = execute(&want, &probe, &b, None).result else { continue };
        tests.push(UnitTest::new(&format!("t{i}"), "S.f", args, Scalar::Int(out)));
        let pre = execute(&p, &probe, &b, Some(line)).snapshot.expect("hole line runs");
        let post = if cond { (out == 0) as i64 } else { out };
        states.push(TestStates::Reached(LineStates { pre, post: Some(post) }));
    }
    if tests.is_empty() {
        tests.push(UnitTest::new("t", "S.f", vec![Scalar::Int(0), Scalar::Int(0)], Scalar::Int(0)));
        states.push(TestStates::NotReached);
    }
    Instance { sketch, grammar, tests, states }
}

fn soundness() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let b = ExecBounds::default();
    let (mut found, mut violations) = (0, 0);
    const N: usize = 1000;
    for i in 0..N {
        let k = rng.gen_range(1..7);
        let inst = random_instance(&mut rng, k);
        let cfg = SynthConfig { max_expansions: k, ..SynthConfig::default() };
        let fast = (i % 2 == 0).then_some(&inst.states[..]);
        let r = complete_sketch(&inst.sketch, &inst.grammar, &inst.tests, &cfg, fast);
        if let Some(p) = r.program {
            found += 1;
            let one_line = differing_lines(&inst.sketch.reference, &p).iter().all(|l| *l == inst.sketch.line);
            if !verify(&p, &inst.tests, &b) || !one_line {
                violations += 1;
            }
        }
    }
    let detail = format!("{N} instances, {found} completed, {violations} violations");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn completeness() -> Verdict {
    let mut rng = StdRng::seed_from_u64(5);
    let b = ExecBounds::default();
    let (mut agree, mut solvable) = (0, 0);
    const N: usize = 150;
    for _ in 0..N {
        let k = rng.gen_range(1..=5);
        let inst = random_instance(&mut rng, 6);
        let exists = enumerate_all(&inst.grammar, k)
            .iter()
            .any(|e| inst.sketch.complete(e).is_some_and(|p| verify(&p, &inst.tests, &b)));
        let cfg = SynthConfig { max_expansions: k, ..SynthConfig::default() };
        let slow = complete_sketch(&inst.sketch, &inst.grammar, &inst.tests, &cfg, None).program.is_some();
        let quick =
            complete_sketch(&inst.sketch, &inst.grammar, &inst.tests, &cfg, Some(&inst.states)).program.is_some();
        solvable += exists as usize;
        if slow == exists && quick == exists {
            agree += 1;
        }
    }
    let detail = format!("{agree}/{N} agree with brute force ({solvable} solvable)");
    if agree == N {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trace_fidelity() -> Verdict {
    let cfg = LocalizerConfig::default();
    let mut n = 0;
    for bm in corpus() {
        let programs = [bm.program.clone(), apply_abstraction(&bm.program, &ModelRegistry::builtin())];
        for p in &programs {
            for t in &bm.tests {
                let executed = execute(p, t, &cfg.bounds, None).lines;
                if !trace_forced(p, t, &executed, &cfg).map_err(|e| e.to_string())? {
                    return Err(format!("{}/{}: some model selects other lines", bm.name, t.name));
                }
                n += 1;
            }
        }
    }
    Ok(format!("{n} traces"))
}

fn repair_seconds(args: &[&str]) -> Result<Option<f64>, String> {
    let (code, out, _) = netfix(args);
    let v: Json = serde_json::from_str(&out).map_err(|e| format!("exit {code:?}: {e}"))?;
    Ok((v["outcome"]["status"] == "repaired").then(|| v["timings"]["total"].as_f64().unwrap_or(0.0)))
}

fn abstraction_value() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = benchmarks().join("firewall");
    for f in ["program.np", "tests.json"] {
        std::fs::copy(src.join(f), dir.path().join(f)).map_err(|e| e.to_string())?;
    }
    let p = dir.path().join("program.np").display().to_string();
    let t = dir.path().join("tests.json").display().to_string();
    let mut runs = Vec::new();
    for seed in ["1", "2", "3"] {
        let base = ["repair", p.as_str(), t.as_str(), "--seed", seed, "--report", "json"];
        let with = repair_seconds(&base)?.ok_or("default configuration failed")?;
        let mut ablated = base.to_vec();
        ablated.push("--no-abstraction");
        let without = repair_seconds(&ablated)?;
        let ok = without.is_none_or(|w| w > with);
        runs.push((seed, with, without, ok));
    }
    let detail = runs
        .iter()
        .map(|(s, w, wo, _)| match wo {
            Some(x) => format!("seed {s}: {w:.3}s vs {x:.3}s"),
            None => format!("seed {s}: {w:.3}s vs failed"),
        })
        .collect::<Vec<_>>()
        .join(", ");
    if runs.iter().all(|r| r.3) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn strip_timings(v: &mut Json) {
    match v {
        Json::Object(m) => {
            m.remove("timings");
            m.values_mut().for_each(strip_timings);
        }
        Json::Array(xs) => xs.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn determinism() -> Verdict {
    let root = benchmarks().display().to_string();
    let mut outs = Vec::new();
    for _ in 0..2 {
        let (_, out, _) = netfix(&["bench", &root, "--seed", "7", "--report", "json"]);
        let mut v: Json = serde_json::from_str(&out).map_err(|e| e.to_string())?;
        strip_timings(&mut v);
        outs.push(serde_json::to_string_pretty(&v).unwrap());
    }
    if outs[0] == outs[1] {
        Ok(format!("{} bytes identical", outs[0].len()))
    } else {
        Err("reports differ".into())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("end-to-end firewall repair", end_to_end),
        ("symbolic/concrete consistency", consistency),
        ("relaxation property", relaxation),
        ("sketch completion soundness", soundness),
        ("sketch completion completeness", completeness),
        ("trace fidelity", trace_fidelity),
        ("abstraction value", abstraction_value),
        ("bench determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(d) => println!("criterion {}: PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {d}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

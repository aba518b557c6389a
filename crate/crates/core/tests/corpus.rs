use std::path::Path;
use std::time::{Duration, Instant};

use netfix_core::abstraction::{apply_abstraction, ModelRegistry};
use netfix_core::corpus::*;
use netfix_core::ir::Program;
use netfix_core::localizer::*;
use netfix_core::testkit::*;

fn corpus() -> Vec<Benchmark> {
    load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap()
}

#[test]
fn corpus_has_small_faulty_benchmarks_with_ground_truth() {
    let c = corpus();
    assert!(c.len() >= 8);
    let b = ExecBounds::default();
    for bm in &c {
        assert!(bm.program.all_lines().len() <= 200, "{}", bm.name);
        assert!(is_faulty(&bm.program, &bm.tests, &b), "{} is not faulty", bm.name);
        let fixed = bm.expected_patch.as_ref().unwrap_or_else(|| panic!("{} has no expected patch", bm.name));
        assert!(verify(fixed, &bm.tests, &b), "{}: expected patch fails", bm.name);
        assert!(bm.fault_line().is_some(), "{}: patch differs at more than one line", bm.name);
    }
}

fn variants(bm: &Benchmark) -> Vec<(&'static str, Program)> {
    vec![
        ("raw", bm.program.clone()),
        ("abstracted", apply_abstraction(&bm.program, &ModelRegistry::builtin())),
        ("expected", bm.expected_patch.clone().unwrap()),
    ]
}

#[test]
fn symbolic_and_concrete_checks_agree_on_every_test() {
    let b = ExecBounds::default();
    for bm in corpus() {
        for (what, p) in variants(&bm) {
            for t in &bm.tests {
                let pass = run_test(&p, t, &b).is_pass();
                for no_summaries in [false, true] {
                    let cfg = LocalizerConfig { no_summaries, ..LocalizerConfig::default() };
                    let sym = check_test_symbolic(&p, t, &cfg).unwrap();
                    assert_eq!(sym, pass, "{}/{what}/{} (no_summaries = {no_summaries})", bm.name, t.name);
                }
            }
        }
    }
}

#[test]
fn relaxing_the_faulty_line_restores_satisfiability() {
    let cfg = LocalizerConfig::default();
    for bm in corpus() {
        let t0 = Instant::now();
        let p = apply_abstraction(&bm.program, &ModelRegistry::builtin());
        let line = bm.fault_line().unwrap();
        assert!(check_faulty_symbolic(&p, &bm.tests, &cfg).unwrap(), "{}", bm.name);
        assert!(relaxed_sat(&p, &bm.tests, line, &cfg).unwrap(), "{}", bm.name);
        assert!(t0.elapsed() < Duration::from_secs(10), "{}", bm.name);
    }
}

#[test]
fn every_model_selects_the_executed_lines() {
    let cfg = LocalizerConfig::default();
    for bm in corpus() {
        for (what, p) in variants(&bm) {
            for t in &bm.tests {
                let executed = execute(&p, t, &cfg.bounds, None).lines;
                assert_eq!(
                    trace_lines(&p, t, &cfg).unwrap().as_ref(),
                    Some(&executed),
                    "{}/{what}/{}",
                    bm.name,
                    t.name
                );
                assert!(trace_forced(&p, t, &executed, &cfg).unwrap(), "{}/{what}/{}", bm.name, t.name);
            }
        }
    }
}

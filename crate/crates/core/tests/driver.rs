use std::path::Path;

use netfix_core::corpus::{load_benchmark, Benchmark};
use netfix_core::driver::*;
use netfix_core::ir::*;
use netfix_core::localizer::VisitedMap;
use netfix_core::testkit::*;

fn bench(name: &str) -> Benchmark {
    load_benchmark(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(name)).unwrap()
}

fn reason(r: &RepairReport) -> &str {
    match &r.outcome {
        RepairOutcome::Failed { reason } => reason,
        RepairOutcome::Repaired { .. } => panic!("unexpectedly repaired"),
    }
}

#[test]
fn firewall_is_repaired_with_an_equality_call() {
    let b = bench("firewall");
    let r = repair(&b.program, &b.tests, &RepairConfig::default());
    assert!(r.is_repaired(), "{r}");
    assert_eq!(r.targets(), vec!["FirewallRule.init/0", "FirewallRule.isSameAs/1"]);
    assert_eq!(r.fault_line(), Some(LineId(18)));
    assert_eq!(r.patch(), Some("if (!this.dl_dst.equals(r.dl_dst)) goto 20"));
    let fixed = r.program.as_ref().unwrap();
    assert!(verify(fixed, &b.tests, &ExecBounds::default()));
    assert_eq!(fixed, b.expected_patch.as_ref().unwrap());
}

#[test]
fn without_abstraction_the_library_is_searched_too() {
    let b = bench("firewall");
    let cfg = RepairConfig { no_abstraction: true, ..RepairConfig::default() };
    let r = repair(&b.program, &b.tests, &cfg);
    assert!(r.is_repaired(), "{r}");
    assert!(r.targets().iter().any(|t| t.starts_with("MacAddress.")), "{:?}", r.targets());
}

#[test]
fn correct_programs_are_not_repaired() {
    let b = bench("firewall");
    let r = repair(b.expected_patch.as_ref().unwrap(), &b.tests, &RepairConfig::default());
    assert_eq!(reason(&r), NOT_FAULTY);
    assert!(r.iterations.is_empty());
}

#[test]
fn a_fault_hidden_by_models_is_reported() {
    let b = bench("firewall");
    // break equals, keep isSameAs correct
    let text = b.expected_patch.as_ref().unwrap().to_string().replace("if (o == null) goto 8", "if (o != null) goto 8");
    let p = parse_program(&text).unwrap();
    assert!(is_faulty(&p, &b.tests, &ExecBounds::default()));
    let r = repair(&p, &b.tests, &RepairConfig::default());
    assert_eq!(reason(&r), IN_MODELS);
    let r = repair(&p, &b.tests, &RepairConfig { no_abstraction: true, ..RepairConfig::default() });
    // any verified one-line patch will do; the loop reaches isSameAs first
    assert!(r.is_repaired(), "{r}");
    assert!(verify(r.program.as_ref().unwrap(), &b.tests, &ExecBounds::default()));
}

const LAYERED: &str = "class H {
  static func inc(x: int): int {
    0: y = x + 2
    1: return y
  }
  static func mid(a: int): int {
    2: r = H.inc(a)
    3: return r
  }
  static func t(a: int): int {
    4: s = H.mid(a)
    5: return s
  }
}";

#[test]
fn a_faulty_call_leads_into_the_callee() {
    let p = parse_program(LAYERED).unwrap();
    let tests: Vec<UnitTest> =
        (0..3).map(|a| UnitTest::new(&format!("t{a}"), "H.t", vec![Scalar::Int(a)], Scalar::Int(a + 1))).collect();
    let r = repair(&p, &tests, &RepairConfig::default());
    assert!(r.is_repaired(), "{r}");
    assert_eq!(r.targets(), vec!["H.mid/1", "H.inc/1"]);
    assert!(r.iterations.iter().any(|i| matches!(&i.synthesis, StepResult::Descend { callee } if callee == "H.inc/1")));
    assert_eq!(r.fault_line(), Some(LineId(0)));
    assert_eq!(r.patch(), Some("y = 1 + x"));
}

/// Exonerating a caller marks its callees' lines visited, so a fault in a
/// callee that is also tested directly can be skipped for good.
#[test]
fn exonerated_callees_are_not_revisited() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/exonerated_callee");
    let p = netfix_core::corpus::load_program(&dir.join("program.np")).unwrap();
    let tests = netfix_core::corpus::load_tests(&dir.join("tests.json")).unwrap();
    let r = repair(&p, &tests, &RepairConfig::default());
    assert_eq!(reason(&r), "no function left to repair", "{r}");
    let exhausted: Vec<&str> = r.iterations.iter().map(|i| i.function.as_str()).collect();
    assert!(!exhausted.contains(&"Link.age/1"), "{exhausted:?}");
}

#[test]
fn selection_follows_first_invocation_and_skips_library_code() {
    let b = bench("firewall");
    let b_ = ExecBounds::default();
    let init = FuncSig::new("FirewallRule", "init", 0);
    let same = FuncSig::new("FirewallRule", "isSameAs", 1);
    assert_eq!(invocation_order(&b.program, &b.tests, &b_, true), vec![init.clone(), same.clone()]);
    let all = invocation_order(&b.program, &b.tests, &b_, false);
    assert_eq!(all.first(), Some(&init));
    assert!(all.contains(&FuncSig::new("MacAddress", "of", 1)));
    assert!(!all.contains(&FuncSig::new("FirewallTest", "test", 2)), "test entries are never targets");

    let mut state = SelectionState { order: vec![init.clone(), same.clone()], descend: None };
    let mut v = VisitedMap::new(&b.program);
    assert_eq!(select_function(&b.program, &v, &mut state), Some(init.clone()));
    v.visit_all(b.program.function(&init).unwrap().lines());
    assert_eq!(select_function(&b.program, &v, &mut state), Some(same.clone()));
    let of = FuncSig::new("MacAddress", "of", 1);
    state.descend = Some(of.clone());
    assert_eq!(select_function(&b.program, &v, &mut state), Some(of));
    assert_eq!(state.descend, None);
    v.visit_all(b.program.function(&same).unwrap().lines());
    assert_eq!(select_function(&b.program, &v, &mut state), None);
}

#[test]
fn first_fault_matches_the_repair_loop() {
    let b = bench("firewall");
    let got = first_fault(&b.program, &b.tests, &RepairConfig::default()).unwrap();
    assert_eq!(got, Some((FuncSig::new("FirewallRule", "init", 0), LineId(13))));
}

#[test]
fn reports_round_trip_through_json() {
    let b = bench("vlan_check");
    let r = repair(&b.program, &b.tests, &RepairConfig::default());
    let back: RepairReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back.outcome, r.outcome);
    assert_eq!(back.iterations, r.iterations);
    assert!(back.program.is_none());
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["outcome"]["status"], "repaired");
    assert!(v["timings"]["total"].as_f64().unwrap() > 0.0);
    let text = r.to_string();
    assert!(text.starts_with("repaired: line 2: if (4095 <= v) goto 5"), "{text}");
}

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use netfix_core::abstraction::{apply_abstraction, ModelRegistry};
use netfix_core::corpus::{differing_lines, load_corpus};
use netfix_core::ir::*;
use netfix_core::localizer::{localize_fault, LineStates, LocalizationResult, LocalizerConfig, TestStates, VisitedMap};
use netfix_core::synth::*;
use netfix_core::testkit::*;
use proptest::prelude::*;
use proptest::sample::Index;

type Rules = Vec<(NtId, Rhs)>;

/// Splits `total` into `parts` positive summands, in every order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Bottom-up enumeration: for each expression derivable from `start` in
/// at most `k` expansions, the smallest such number.
fn bottom_up(n: usize, start: NtId, rules: &Rules, k: usize) -> HashMap<Expr, usize> {
    // exact[size][nt]
    let mut exact: Vec<Vec<HashSet<Expr>>> = vec![vec![HashSet::new(); n]; k + 1];
    for size in 1..=k {
        for (lhs, rhs) in rules {
            let kids = rhs.children();
            for split in compositions(size - 1, kids.len()) {
                let mut combos: Vec<Vec<Expr>> = vec![vec![]];
                for (kid, s) in kids.iter().zip(&split) {
                    let mut next = Vec::new();
                    for c in &combos {
                        for e in &exact[*s][*kid] {
                            let mut c = c.clone();
                            c.push(e.clone());
                            next.push(c);
                        }
                    }
                    combos = next;
                }
                for c in combos {
                    let e = rhs.build(c);
                    exact[size][*lhs].insert(e);
                }
            }
        }
    }
    let mut out = HashMap::new();
    for (size, sets) in exact.iter().enumerate() {
        for e in &sets[start] {
            out.entry(e.clone()).or_insert(size);
        }
    }
    out
}

const OPS: [BinOp; 8] =
    [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Lt, BinOp::Eq, BinOp::And, BinOp::BitXor, BinOp::Div];

fn rhs(n: usize) -> impl Strategy<Value = Rhs> {
    prop_oneof![
        3 => prop_oneof![(-2i64..4).prop_map(Expr::int), prop::sample::select(vec!["x", "y"]).prop_map(Expr::var)]
            .prop_map(Rhs::Leaf),
        1 => (prop::sample::select(vec![UnOp::Neg, UnOp::Not]), 0..n).prop_map(|(op, a)| Rhs::Unary(op, a)),
        3 => (prop::sample::select(OPS.to_vec()), 0..n, 0..n).prop_map(|(op, a, b)| Rhs::Binary(op, a, b)),
    ]
}

/// A grammar over `x` and `y` with two or three non-terminals. The start
/// symbol always has a leaf.
fn rules() -> impl Strategy<Value = (usize, Rules)> {
    (2usize..4).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, rhs(n)), 2..8), rhs(1))).prop_map(
        |(n, mut rs, leaf)| {
            let leaf = match leaf {
                Rhs::Leaf(e) => e,
                _ => Expr::var("x"),
            };
            rs.insert(0, (0, Rhs::Leaf(leaf)));
            (n, rs)
        },
    )
}

fn grammar(n: usize, rules: &Rules) -> Grammar {
    Grammar::new((0..n).map(|i| format!("N{i}")).collect(), 0, rules.clone())
}

const VALUE_HOLE: &str = "class S { static func f(x: int, y: int): int {
  0: r = 0
  1: return r } }";

const COND_HOLE: &str = "class S { static func f(x: int, y: int): int {
  0: r = 0
  1: if (x < y) goto 3
  2: r = 1
  3: return r } }";

struct Instance {
    sketch: Sketch,
    tests: Vec<UnitTest>,
    /// States of the hole line the tests force.
    states: Vec<TestStates>,
}

fn instance(cond: bool, target: &Expr, inputs: &[(i64, i64)]) -> Instance {
    let p = parse_program(if cond { COND_HOLE } else { VALUE_HOLE }).unwrap();
    let f = FuncSig::new("S", "f", 2);
    let line = LineId(if cond { 1 } else { 0 });
    let sketch = make_sketch(&p, &f, line).unwrap();
    let want = sketch.complete(target).unwrap();
    let b = ExecBounds::default();
    let mut tests = Vec::new();
    let mut states = Vec::new();
    for (i, (x, y)) in inputs.iter().enumerate() {
        let args = vec![Scalar::Int(*x), Scalar::Int(*y)];
        let probe = UnitTest::new(&format!("t{i}"), "S.f", args.clone(), Scalar::Int(0));
        let Ok(out) = execute(&want, &probe, &b, None).result else { continue };
        tests.push(UnitTest::new(&format!("t{i}"), "S.f", args.clone(), Scalar::Int(out)));
        let pre = execute(&p, &probe, &b, Some(line)).snapshot.expect("hole line runs");
        // output 0 means the jump was taken
        let post = if cond { (out == 0) as i64 } else { out };
        states.push(TestStates::Reached(LineStates { pre, post: Some(post) }));
    }
    if tests.is_empty() {
        tests.push(UnitTest::new("t", "S.f", vec![Scalar::Int(0), Scalar::Int(0)], Scalar::Int(0)));
        states.push(TestStates::NotReached);
    }
    Instance { sketch, tests, states }
}

fn inputs() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-5i64..6, -5i64..6), 1..4)
}

fn other_targets() -> Vec<Expr> {
    vec![
        Expr::bin(BinOp::Add, Expr::bin(BinOp::Mul, Expr::var("x"), Expr::var("y")), Expr::int(7)),
        Expr::bin(BinOp::Lt, Expr::var("y"), Expr::int(-1)),
        Expr::bin(BinOp::Sub, Expr::var("y"), Expr::var("x")),
        Expr::int(2),
    ]
}

/// Every passing return is a one-line change that verifies and comes
/// from the grammar.
fn check_sound(inst: &Instance, g: &Grammar, k: usize, fast: bool) -> Result<bool, TestCaseError> {
    let cfg = SynthConfig { max_expansions: k, ..SynthConfig::default() };
    let r = complete_sketch(&inst.sketch, g, &inst.tests, &cfg, fast.then_some(&inst.states[..]));
    let Some(prog) = r.program else { return Ok(false) };
    prop_assert!(verify(&prog, &inst.tests, &cfg.bounds));
    let lines = differing_lines(&inst.sketch.reference, &prog);
    prop_assert!(lines.is_empty() || lines == vec![inst.sketch.line]);
    let e = r.expr.unwrap();
    prop_assert!(enumerate_all(g, k).contains(&e));
    prop_assert_eq!(prog.statement(inst.sketch.line), r.patch.as_ref());
    Ok(true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_matches_bottom_up_oracle((n, rs) in rules(), k in 1usize..6) {
        let g = grammar(n, &rs);
        let got = enumerate_all(&g, k);
        let oracle = bottom_up(n, 0, &rs, k);
        let set: HashSet<&Expr> = got.iter().collect();
        prop_assert_eq!(set.len(), got.len(), "duplicates");
        prop_assert_eq!(set, oracle.keys().collect::<HashSet<_>>());
        let sizes: Vec<usize> = got.iter().map(|e| oracle[e]).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "not by size: {:?}", sizes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn completion_is_sound(
        (n, rs) in rules(),
        cond in any::<bool>(),
        k in 1usize..7,
        pick in any::<Index>(),
        from_grammar in any::<bool>(),
        fast in any::<bool>(),
        xs in inputs(),
    ) {
        let g = grammar(n, &rs);
        let target = if from_grammar {
            let all = enumerate_all(&g, k.min(4));
            pick.get(&all).clone()
        } else {
            pick.get(&other_targets()).clone()
        };
        let inst = instance(cond, &target, &xs);
        check_sound(&inst, &g, k, fast)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// With budget `k`, completion fails iff no expression of at most `k`
    /// expansions passes, with or without forced states.
    #[test]
    fn completion_is_complete(
        (n, rs) in rules(),
        cond in any::<bool>(),
        k in 1usize..6,
        pick in any::<Index>(),
        from_grammar in any::<bool>(),
        xs in inputs(),
    ) {
        let g = grammar(n, &rs);
        let target = if from_grammar {
            pick.get(&enumerate_all(&g, 6)).clone()
        } else {
            pick.get(&other_targets()).clone()
        };
        let inst = instance(cond, &target, &xs);
        let b = ExecBounds::default();
        let exists = bottom_up(n, 0, &rs, k)
            .keys()
            .any(|e| inst.sketch.complete(e).is_some_and(|p| verify(&p, &inst.tests, &b)));
        let cfg = SynthConfig { max_expansions: k, ..SynthConfig::default() };
        let slow = complete_sketch(&inst.sketch, &g, &inst.tests, &cfg, None);
        let quick = complete_sketch(&inst.sketch, &g, &inst.tests, &cfg, Some(&inst.states));
        prop_assert_eq!(slow.program.is_some(), exists);
        prop_assert_eq!(quick.program.is_some(), exists);
        prop_assert_eq!(slow.expr, quick.expr, "the fast path only skips failing candidates");
    }
}

#[test]
fn cost_ordering_prefers_smaller_fills() {
    // N0 ::= N0 + N0 | x | 1 ; the first passing fill of `r = ??` for
    // f(3, 0) = 4 is `x + 1`, not a larger equivalent
    let g = Grammar::new(
        vec!["N0".into()],
        0,
        vec![(0, Rhs::Binary(BinOp::Add, 0, 0)), (0, Rhs::Leaf(Expr::var("x"))), (0, Rhs::Leaf(Expr::int(1)))],
    );
    let inst = instance(false, &Expr::bin(BinOp::Add, Expr::int(1), Expr::var("x")), &[(3, 0), (5, 2)]);
    let r = complete_sketch(&inst.sketch, &g, &inst.tests, &SynthConfig::default(), None);
    assert_eq!(r.expr, Some(Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1))));
    assert_eq!(enumerate_all(&g, 1), vec![Expr::var("x"), Expr::int(1)]);
    assert_eq!(enumerate_all(&g, 3).len(), 2 + 4);
}

#[test]
fn unproductive_rules_are_dropped() {
    let g = Grammar::new(
        vec!["S".into(), "Loop".into()],
        0,
        vec![(0, Rhs::Leaf(Expr::int(0))), (0, Rhs::Unary(UnOp::Neg, 1)), (1, Rhs::Unary(UnOp::Neg, 1))],
    );
    assert_eq!(g.len(), 1);
    assert_eq!(g.min_cost(1), None);
}

#[test]
fn sketches_classify_holes() {
    let b = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap();
    let fw = b.iter().find(|b| b.name == "firewall").unwrap();
    let f = FuncSig::new("FirewallRule", "isSameAs", 1);
    let s = make_sketch(&fw.program, &f, LineId(18)).unwrap();
    assert_eq!((s.kind, s.hole_type.clone()), (HoleKind::JumpCond, Type::Bool));
    assert_eq!(s.text(), "if (??) goto 20");
    let init = FuncSig::new("FirewallRule", "init", 0);
    assert_eq!(make_sketch(&fw.program, &init, LineId(13)).unwrap().kind, HoleKind::CallExpr);
    assert_eq!(make_sketch(&fw.program, &init, LineId(16)).unwrap().kind, HoleKind::ReturnValue);
    assert_eq!(
        make_sketch(&fw.program, &f, LineId(21)),
        Err(SketchError::NotInFunction { line: LineId(21), func: f.clone() })
    );
    let t = FuncSig::new("FirewallTest", "test", 2);
    assert_eq!(make_sketch(&fw.program, &t, LineId(21)), Err(SketchError::NoHoleForNew(LineId(21))));
}

#[test]
fn firewall_grammar_offers_the_equality_call() {
    let b = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap();
    let fw = b.iter().find(|b| b.name == "firewall").unwrap();
    let work = apply_abstraction(&fw.program, &ModelRegistry::builtin());
    let f = FuncSig::new("FirewallRule", "isSameAs", 1);
    let s = make_sketch(&work, &f, LineId(18)).unwrap().with_reference(&fw.program);
    let g = generate_grammar(&s);
    let text = g.to_string();
    assert!(text.contains(".equals("), "{text}");
    assert!(!text.contains("get_"), "accessors added by abstraction stay out");
    let want = fw.expected_patch.as_ref().unwrap();
    let Some(Statement::Jump(cond, _)) = want.statement(LineId(18)) else { panic!() };
    assert!(enumerate_all(&g, SynthConfig::default().max_expansions).contains(cond));
}

/// Fast-path rejections on the corpus never discard a passing candidate.
#[test]
fn fast_path_rejects_only_failing_candidates() {
    let corpus = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap();
    let mut audited = BTreeMap::new();
    for b in &corpus {
        let work = apply_abstraction(&b.program, &ModelRegistry::builtin());
        let line = b.fault_line().unwrap();
        let f = work.function_of_line(line).unwrap();
        let mut v = VisitedMap::new(&work);
        let cfg = LocalizerConfig::default();
        // visit earlier candidates until the ground-truth line comes up
        let states = loop {
            let loc = localize_fault(&work, &f, &b.tests, &v, &cfg).unwrap();
            match loc.result {
                LocalizationResult::FaultAt(l) if l == line => break loc.states,
                LocalizationResult::FaultAt(l) => {
                    v.visit(l);
                }
                LocalizationResult::NoFault => panic!("{}: line {line} never localized", b.name),
            }
        };
        let s = make_sketch(&work, &f, line).unwrap().with_reference(&b.program);
        let g = generate_grammar(&s);
        let scfg = SynthConfig { audit_fast_path: true, ..SynthConfig::default() };
        let r = complete_sketch(&s, &g, &b.tests, &scfg, Some(&states));
        assert!(r.program.is_some(), "{}", b.name);
        assert_eq!(r.stats.fast_path_violations, 0, "{}", b.name);
        audited.insert(b.name.clone(), r.stats.fast_rejected);
    }
    assert!(audited.values().sum::<usize>() > 0, "the fast path rejected nothing: {audited:?}");
}

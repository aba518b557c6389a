use netfix_core::ir::*;
use netfix_core::testkit::*;
use proptest::prelude::*;

fn prog(text: &str) -> Program {
    parse_program(text).expect("parses")
}

fn int_test(entry: &str, inputs: &[i64], expected: i64) -> UnitTest {
    UnitTest::new("t", entry, inputs.iter().map(|v| Scalar::Int(*v)).collect(), Scalar::Int(expected))
}

fn run(p: &Program, entry: &str, inputs: &[i64]) -> Result<i64, Halt> {
    execute(p, &int_test(entry, inputs, 0), &ExecBounds::default(), None).result
}

const SHAPES: &str = r#"
class Square {
  fields: side: int;
  func area(): int {
    0: a = this.side * this.side
    1: return a
  }
}

class Rect {
  fields: w: int, h: int;
  func area(): int {
    2: a = this.w * this.h
    3: return a
  }
}

class Main {
  static func pick(square: bool, x: int): int {
    4: if (square) goto 9
    5: r = new Rect
    6: r.w = x
    7: r.h = 2
    8: if (true) goto 12
    9: r = new Square
    10: r.side = x
    11: if (true) goto 12
    12: a = r.area()
    13: return a
  }

  static func div(a: int, b: int): int {
    14: q = a / b
    15: return q
  }

  static func deref(): int {
    16: r = null
    17: v = r.w
    18: return v
  }

  static func count(n: int): int {
    19: i = 0
    20: if (i >= n) goto 23
    21: i = i + 1
    22: if (true) goto 20
    23: return i
  }

  static func fact(n: int): int {
    24: if (n <= 1) goto 29
    25: m = n - 1
    26: f = Main.fact(m)
    27: r = n * f
    28: return r
    29: return 1
  }
}
"#;

#[test]
fn virtual_calls_dispatch_on_the_allocated_class() {
    let p = prog(SHAPES);
    let b = ExecBounds::default();
    let sq = UnitTest::new("sq", "Main.pick", vec![Scalar::Bool(true), Scalar::Int(3)], Scalar::Int(9));
    let rect = UnitTest::new("rect", "Main.pick", vec![Scalar::Bool(false), Scalar::Int(3)], Scalar::Int(6));
    assert_eq!(run_test(&p, &sq, &b), Outcome::Pass);
    assert_eq!(run_test(&p, &rect, &b), Outcome::Pass);
    let ex = execute(&p, &sq, &b, None);
    assert!(ex.lines.contains(&LineId(0)) && !ex.lines.contains(&LineId(2)));
    assert_eq!(ex.calls, vec![FuncSig::new("Main", "pick", 2), FuncSig::new("Square", "area", 0)]);
}

#[test]
fn division_by_zero_and_null_dereference_get_stuck() {
    let p = prog(SHAPES);
    assert_eq!(run(&p, "Main.div", &[7, 2]), Ok(3));
    assert_eq!(run(&p, "Main.div", &[-7, 2]), Ok(-3));
    assert!(matches!(run(&p, "Main.div", &[7, 0]), Err(Halt::Stuck(_))));
    assert!(matches!(run(&p, "Main.deref", &[]), Err(Halt::Stuck(_))));
}

#[test]
fn loops_and_recursion_are_bounded() {
    let p = prog(SHAPES);
    let b = ExecBounds::default();
    assert_eq!(run(&p, "Main.count", &[b.unroll_k as i64]), Ok(b.unroll_k as i64));
    assert_eq!(run(&p, "Main.count", &[b.unroll_k as i64 + 1]), Err(Halt::Bound));
    assert_eq!(run(&p, "Main.fact", &[3]), Ok(6));
    assert_eq!(run(&p, "Main.fact", &[10]), Err(Halt::Bound));
    let wide = ExecBounds { unroll_k: 12, ..b };
    let t = int_test("Main.fact", &[10], 3_628_800);
    assert_eq!(run_test(&p, &t, &wide), Outcome::Pass);
}

#[test]
fn outcomes_classify_results() {
    let p = prog(SHAPES);
    let b = ExecBounds::default();
    assert_eq!(run_test(&p, &int_test("Main.div", &[8, 2], 4), &b), Outcome::Pass);
    assert_eq!(run_test(&p, &int_test("Main.div", &[8, 2], 5), &b), Outcome::Fail(4));
    assert!(matches!(run_test(&p, &int_test("Main.div", &[8, 0], 0), &b), Outcome::Stuck(_)));
    assert_eq!(run_test(&p, &int_test("Main.count", &[9], 9), &b), Outcome::BoundExceeded);
    assert!(is_faulty(&p, &[int_test("Main.div", &[8, 2], 5)], &b));
    assert!(verify(&p, &[int_test("Main.div", &[8, 2], 4)], &b));
}

#[test]
fn observed_line_reports_state_and_value() {
    let p = prog(SHAPES);
    let ex = execute(&p, &int_test("Main.div", &[9, 3], 3), &ExecBounds::default(), Some(LineId(14)));
    let snap = ex.snapshot.expect("line 14 runs");
    assert_eq!(snap.vars.get("a"), Some(&9));
    assert_eq!(snap.vars.get("b"), Some(&3));
    assert_eq!(ex.observed_value, Some(3));
}

#[test]
fn tests_parse_from_json_and_check_their_entry() {
    let json = r#"[{"name": "a", "entry": "Main.div", "inputs": [4, 2], "expected": 2},
                  {"name": "b", "entry": "Main.pick", "inputs": [true, 1], "expected": 2}]"#;
    let tests = parse_tests(json).unwrap();
    assert_eq!(tests[1].inputs[0], Scalar::Bool(true));
    assert_eq!(parse_tests(&tests_to_json(&tests)).unwrap(), tests);
    let p = prog(SHAPES);
    assert!(tests.iter().all(|t| t.check(&p).is_ok()));
    assert!(int_test("Main.nope", &[], 0).check(&p).is_err());
    assert!(int_test("Square.area", &[], 0).check(&p).is_err(), "instance entries are rejected");
    assert!(int_test("nodot", &[], 0).check(&p).is_err());
    assert!(parse_tests("{").is_err());
}

#[test]
fn strings_are_distinct_interned_values() {
    let p = prog(
        r#"class S { static func same(x: int): bool {
             0: a = "tcp"
             1: b = "udp"
             2: c = a == b
             3: d = "tcp" == a
             4: r = d && !c
             5: return r } }"#,
    );
    let t = UnitTest::new("s", "S.same", vec![Scalar::Int(0)], Scalar::Bool(true));
    assert_eq!(run_test(&p, &t, &ExecBounds::default()), Outcome::Pass);
}

/// Reference semantics computed in 128 bits and truncated.
fn reference(op: BinOp, x: i64, y: i64) -> Option<i64> {
    let (a, b) = (x as i128, y as i128);
    let trunc = |v: i128| v as i64;
    let sh = (y & 63) as u32;
    Some(match op {
        BinOp::Add => trunc(a + b),
        BinOp::Sub => trunc(a - b),
        BinOp::Mul => trunc(a * b),
        BinOp::Div if y == 0 => return None,
        BinOp::Div => trunc(a / b),
        BinOp::Rem if y == 0 => return None,
        BinOp::Rem => trunc(a % b),
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
        BinOp::BitXor => x ^ y,
        BinOp::BitAnd => x & y,
        BinOp::BitOr => x | y,
        BinOp::Shl => trunc(a << sh),
        BinOp::Shr => x >> sh,
        BinOp::UShr => ((x as u64) >> sh) as i64,
    })
}

const ALL_OPS: [BinOp; 19] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
    BinOp::Rem,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::And,
    BinOp::Or,
    BinOp::BitXor,
    BinOp::BitAnd,
    BinOp::BitOr,
    BinOp::Shl,
    BinOp::Shr,
    BinOp::UShr,
];

fn operand() -> impl Strategy<Value = i64> {
    prop_oneof![any::<i64>(), -70i64..70, Just(i64::MIN), Just(i64::MAX)]
}

proptest! {
    #[test]
    fn binary_operators_match_reference(op in prop::sample::select(ALL_OPS.to_vec()), x in operand(), y in operand()) {
        prop_assert_eq!(apply_binop(op, x, y), reference(op, x, y));
    }

    #[test]
    fn interpreter_applies_operators_through_programs(op in prop::sample::select(ALL_OPS.to_vec()), x in operand(), y in operand()) {
        let base = parse_program("class E { static func f(x: int, y: int): int { 0: r = x + y\n 1: return r } }").unwrap();
        let p2 = base.with_statement(
            LineId(0),
            Statement::Assign(LValue::Var("r".into()), Expr::bin(op, Expr::var("x"), Expr::var("y"))),
        );
        let got = run(&p2, "E.f", &[x, y]);
        match reference(op, x, y) {
            Some(v) => prop_assert_eq!(got, Ok(v)),
            None => prop_assert!(matches!(got, Err(Halt::Stuck(_)))),
        }
    }
}

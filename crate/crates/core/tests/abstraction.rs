use netfix_core::abstraction::*;
use netfix_core::ir::*;
use netfix_core::localizer::{check_test_symbolic, LocalizerConfig};
use netfix_core::testkit::*;
use proptest::prelude::*;

const MAC: &str = "@network class Mac {
  fields: value: int;
  static func of(v: int): Mac {
    0: a = new Mac
    1: a.value = v
    2: return a
  }
  func equals(o: Mac): bool {
    3: if (o == null) goto 7
    4: d = this.value - o.value
    5: if (d != 0) goto 7
    6: return true
    7: return false
  }
  func hashCode(): int {
    8: h = this.value
    9: return h
  }
}
class T {
  static func eq(x: int, y: int): bool {
    10: a = Mac.of(x)
    11: b = Mac.of(y)
    12: r = a.equals(b)
    13: return r
  }
  static func hash(x: int, y: int): int {
    14: a = Mac.of(x)
    15: h = a.hashCode()
    16: return h
  }
  static func nul(x: int, y: int): bool {
    17: a = Mac.of(x)
    18: b = null
    19: r = a.equals(b)
    20: return r
  }
}";

fn registry() -> ModelRegistry {
    ModelRegistry::new().value_wrapper("Mac", "value")
}

#[test]
fn models_replace_network_bodies_and_add_accessors() {
    let p = parse_program(MAC).unwrap();
    let a = apply_abstraction(&p, &registry());
    let mac = a.class("Mac").unwrap();
    for f in ["of", "equals", "hashCode", "get_value", "set_value"] {
        let d = mac.functions.iter().find(|d| d.name == f).unwrap();
        assert!(d.is_abstracted(), "{f}");
    }
    assert!(a.class("T").unwrap().functions.iter().all(|f| !f.is_abstracted()));
    // without a model the body stays
    let partial = apply_abstraction(&p, &ModelRegistry::new());
    let eq = partial.function(&FuncSig::new("Mac", "equals", 1)).unwrap();
    assert!(!eq.is_abstracted());
}

#[test]
fn a_model_that_does_not_fit_is_ignored() {
    let p = parse_program(MAC).unwrap();
    let bad = ModelRegistry::new().register(AbstractModel {
        sig: FuncSig::new("Mac", "equals", 1),
        template: ModelTemplate::ValueEquals { field: "nope".into() },
    });
    let a = apply_abstraction(&p, &bad);
    assert!(!a.function(&FuncSig::new("Mac", "equals", 1)).unwrap().is_abstracted());
}

#[test]
fn manifests_bind_templates_to_functions() {
    let r = ModelRegistry::new()
        .with_manifest(
            r#"{"Ip.same": {"template": "value_equals", "field": "addr"},
                           "Ip.raw/0": {"template": "field_projection", "field": "addr"}}"#,
        )
        .unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r.get(&FuncSig::new("Ip", "same", 1)), Some(&ModelTemplate::ValueEquals { field: "addr".into() }));
    assert!(r.get(&FuncSig::new("Ip", "raw", 0)).is_some());
    assert!(matches!(
        ModelRegistry::new().with_manifest(r#"{"nodot": {"template": "setter", "field": "f"}}"#),
        Err(ManifestError::Key(_))
    ));
    assert!(matches!(
        ModelRegistry::new().with_manifest(r#"{"A.f/x": {"template": "setter", "field": "f"}}"#),
        Err(ManifestError::Key(_))
    ));
    assert!(matches!(
        ModelRegistry::new().with_manifest(r#"{"A.f": {"template": "frobnicate"}}"#),
        Err(ManifestError::Json(_))
    ));
    assert_eq!(ModelRegistry::builtin().len(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Models agree with the bodies they replace, and their symbolic form
    /// agrees with their concrete one.
    #[test]
    fn models_agree_with_bodies_and_encoding(
        entry in prop::sample::select(vec!["T.eq", "T.hash", "T.nul"]),
        x in -1000i64..1000,
        same in any::<bool>(),
        y in -1000i64..1000,
    ) {
        let p = parse_program(MAC).unwrap();
        let a = apply_abstraction(&p, &registry());
        let y = if same { x } else { y };
        let b = ExecBounds::default();
        let probe = UnitTest::new("t", entry, vec![Scalar::Int(x), Scalar::Int(y)], Scalar::Int(0));
        let raw = execute(&p, &probe, &b, None).result;
        let modeled = execute(&a, &probe, &b, None).result;
        prop_assert_eq!(&raw, &modeled);
        let out = modeled.unwrap();
        let cfg = LocalizerConfig::default();
        for (expected, pass) in [(out, true), (out + 1, false)] {
            let t = UnitTest::new("t", entry, vec![Scalar::Int(x), Scalar::Int(y)], Scalar::Int(expected));
            prop_assert_eq!(check_test_symbolic(&a, &t, &cfg).unwrap(), pass);
        }
    }
}

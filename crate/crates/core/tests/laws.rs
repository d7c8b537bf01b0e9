use sqed_core::laws::{check_law, Corpus, LawBudgets, LawId};
use sqed_core::zoo::{preset, OpcodeConfig};

fn builtin() -> Corpus {
    Corpus::builtin()
}

fn assert_passes(law: LawId, corpus: &Corpus, budgets: &LawBudgets) -> u64 {
    let start = std::time::Instant::now();
    let r = check_law(law, corpus, budgets);
    eprintln!("{law}: {} instances in {:?}; notes {:?}", r.instances, start.elapsed(), r.notes);
    assert!(r.passed(), "{law}: {:?}", r.violations);
    assert_eq!(r.law, law);
    r.instances
}

#[test]
fn per_transition_laws_hold() {
    let corpus = builtin();
    let b = LawBudgets::default();
    for law in [LawId::Eq2, LawId::Eq3, LawId::Eq4, LawId::Cor1, LawId::Lemma1] {
        assert!(assert_passes(law, &corpus, &b) > 0);
    }
}

#[test]
fn oracle_agrees_with_path_search() {
    assert!(assert_passes(LawId::Prop1, &builtin(), &LawBudgets::default()) > 0);
}

#[test]
fn conforming_tests_preserve_consistency() {
    assert!(assert_passes(LawId::Lemma2, &builtin(), &LawBudgets::default()) > 0);
}

#[test]
fn search_failures_are_real_bugs() {
    assert!(assert_passes(LawId::Lemma3, &builtin(), &LawBudgets::default()) >= 6);
}

#[test]
fn bug_specific_cases() {
    let corpus = builtin();
    let b = LawBudgets::default();
    assert!(assert_passes(LawId::Lemma4A, &corpus, &b) > 0);
    assert!(assert_passes(LawId::Lemma4B, &corpus, &b) > 0);
}

#[test]
fn soft_reset_law() {
    assert!(assert_passes(LawId::Lemma5, &builtin(), &LawBudgets::default()) > 0);
}

#[test]
fn soundness_and_completeness() {
    assert!(assert_passes(LawId::Thm1, &builtin(), &LawBudgets::default()) > 0);
}

#[test]
fn hard_reset_equivalence() {
    assert!(assert_passes(LawId::Thm2, &builtin(), &LawBudgets::default()) > 0);
}

#[test]
fn corrupted_spec_expression_is_caught() {
    let mut cfg = preset("toy4").unwrap();
    cfg.name = "toy4-badspec".into();
    cfg.opcodes[0] = OpcodeConfig { name: "ADD".into(), expr: "a + b + 1".into(), implementation: Some("a + b".into()) };
    let corpus = Corpus::from_configs(&[cfg]).unwrap();
    let r = check_law(LawId::Lemma2, &corpus, &LawBudgets::default());
    assert!(!r.passed());
}

#[test]
fn reports_are_reproducible() {
    let corpus = builtin();
    let b = LawBudgets { state_depth: 1, ..LawBudgets::default() };
    assert_eq!(check_law(LawId::Eq4, &corpus, &b), check_law(LawId::Eq4, &corpus, &b));
}

#[test]
fn law_ids_parse() {
    for law in LawId::ALL {
        assert_eq!(LawId::parse(law.name()), Some(law));
    }
    assert_eq!(LawId::parse("Lemma-4A"), Some(LawId::Lemma4A));
    assert_eq!(LawId::parse("lemma9"), None);
}

use proptest::prelude::*;
use sqed_core::model::{ArchState, InitStrategy, State, Step};
use sqed_core::qed::{consistent_initial_states, inconsistent_pairs, is_qed_test, qed_consistent_dual, QedError, TestMeta};
use sqed_core::zoo::{build_system, parse_instruction, preset};
use sqed_core::{
    dup_seq, qed_consistent, run_qed_test, DupMap, Family, Instruction, Loc, QedTest, TransitionSystem, Witness,
};

fn load(name: &str) -> (TransitionSystem, DupMap) {
    let cfg = preset(name).unwrap();
    let (sys, _) = build_system(&cfg).unwrap();
    (sys, cfg.dup_map().unwrap())
}

fn parse_all(sys: &TransitionSystem, text: &[&str]) -> Vec<Instruction> {
    text.iter().map(|t| parse_instruction(sys, t).unwrap()).collect()
}

fn test_of(steps: Vec<Instruction>, family: Family) -> QedTest {
    QedTest { steps: steps.into_iter().map(Step::Exec).collect(), family, meta: TestMeta::default() }
}

#[test]
fn consistency_examples() {
    let m = DupMap::halves(4).unwrap();
    assert!(qed_consistent(&m, &State::initial(ArchState(vec![0; 4]))));
    assert!(qed_consistent(&m, &State::initial(ArchState(vec![1, 2, 1, 2]))));
    assert!(!qed_consistent(&m, &State::initial(ArchState(vec![1, 2, 2, 1]))));
}

#[test]
fn ridecore_example_verdicts() {
    let (sys, m) = load("ridecore-lite");
    let inits = consistent_initial_states(&sys, &m, &InitStrategy::Sample { count: 8, seed: 0 }, 100).unwrap();
    let add_mul = parse_all(&sys, &["ADD l12 l4 l15", "MUL l15 l12 l12"]);
    let passing = QedTest::standard(&m, &add_mul).unwrap();
    let mul_add_mul = parse_all(&sys, &["MUL l15 l12 l12", "ADD l12 l4 l15", "MUL l15 l12 l12"]);
    let failing = QedTest::standard(&m, &mul_add_mul).unwrap();
    let dups = dup_seq(&m, &add_mul).unwrap();
    let interleaved = test_of(vec![add_mul[0], dups[0], add_mul[1], dups[1]], Family::Interleaved);
    assert!(is_qed_test(&sys, &m, &interleaved.steps, Family::Interleaved));
    for s0 in &inits {
        assert!(!run_qed_test(&sys, &m, &passing, s0).unwrap().failed());
        let v = run_qed_test(&sys, &m, &failing, s0).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness, Some(Witness::Pair { original: Loc(15), duplicate: Loc(31) }));
        assert!(!qed_consistent(&m, v.trace.last()));
    }
    // The back-to-back MUL corrupts l31 no matter the values, so the
    // interleaved test fails from the zero state too.
    let v = run_qed_test(&sys, &m, &interleaved, &inits[0]).unwrap();
    assert!(v.failed());
    assert!(v.has_mismatch(Loc(15), Loc(31)));
}

#[test]
fn test_execution_preconditions() {
    let (sys, m) = load("toy4");
    let t = QedTest::standard(&m, &parse_all(&sys, &["ADD l0 l0 l1"])).unwrap();
    let bad = State::initial(ArchState(vec![1, 0, 0, 0]));
    assert_eq!(run_qed_test(&sys, &m, &t, &bad).unwrap_err(), QedError::NotConsistent);
    let later = sys.step(&sys.zero_state(), &parse_all(&sys, &["ADD l0 l0 l1"])[0]).unwrap();
    assert_eq!(run_qed_test(&sys, &m, &t, &later).unwrap_err(), QedError::NotInitial);
}

#[test]
fn family_membership() {
    let (sys, m) = load("toy4");
    let add = parse_all(&sys, &["ADD l0 l0 l1"]);
    let std = QedTest::standard(&m, &add).unwrap();
    assert!(is_qed_test(&sys, &m, &std.steps, Family::Standard));
    assert!(!is_qed_test(&sys, &m, &[Step::Exec(add[0])], Family::Standard));

    let pair = parse_all(&sys, &["ADD l0 l0 l1", "MUL l1 l0 l0"]);
    let d = dup_seq(&m, &pair).unwrap();
    let mov = parse_all(&sys, &["MOV l1 l1 l1"])[0];
    let extended: Vec<Step> = [pair[0], mov, pair[1], d[0], d[1]].into_iter().map(Step::Exec).collect();
    assert!(is_qed_test(&sys, &m, &extended, Family::Extended));
    assert!(!is_qed_test(&sys, &m, &extended, Family::Standard));

    let srst = sys.soft_reset().unwrap();
    let soft: Vec<Step> = [pair[0], pair[1], srst, d[0], srst, d[1]].into_iter().map(Step::Exec).collect();
    assert!(is_qed_test(&sys, &m, &soft, Family::SoftReset));
}

/// Every standard test with at most two originals ends consistent on the
/// reference machine, from every consistent initial state.
#[test]
fn reference_standard_tests_pass_exhaustively() {
    let (sys, m) = load("toy4");
    let inits = consistent_initial_states(&sys, &m, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let originals: Vec<Instruction> =
        sys.alphabet().into_iter().filter(|i| sqed_core::classify_instr(&m, i) == sqed_core::InstrClass::Original).collect();
    let mut tests = 0;
    for a in &originals {
        for b in std::iter::once(None).chain(originals.iter().map(Some)) {
            let mut sigma = vec![*a];
            sigma.extend(b);
            let t = QedTest::standard(&m, &sigma).unwrap();
            for s0 in &inits {
                assert!(!run_qed_test(&sys, &m, &t, s0).unwrap().failed());
                tests += 1;
            }
        }
    }
    assert_eq!(tests, inits.len() * originals.len() * (originals.len() + 1));
}

#[test]
fn reference_interleaved_and_extended_tests_pass() {
    let (sys, m) = load("toy4");
    let inits = consistent_initial_states(&sys, &m, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let pair = parse_all(&sys, &["MUL l1 l0 l1", "ADD l0 l1 l1"]);
    let d = dup_seq(&m, &pair).unwrap();
    let nop = sys.canonical_nop().unwrap();
    let tests = [
        test_of(vec![pair[0], d[0], pair[1], d[1]], Family::Interleaved),
        test_of(vec![pair[0], pair[1], d[0], nop, d[1]], Family::Extended),
    ];
    for t in &tests {
        for s0 in &inits {
            assert!(!run_qed_test(&sys, &m, t, s0).unwrap().failed());
        }
    }
}

#[test]
fn failing_verdict_lists_every_inconsistent_pair() {
    let (sys, m) = load("mulmul4");
    let sigma = parse_all(&sys, &["MUL l0 l0 l1", "MUL l1 l0 l0"]);
    let t = QedTest::standard(&m, &sigma).unwrap();
    let s0 = State::initial(ArchState(vec![1, 2, 1, 2]));
    let v = run_qed_test(&sys, &m, &t, &s0).unwrap();
    let pairs = inconsistent_pairs(&m, v.trace.last());
    assert_eq!(v.mismatches.len(), pairs.len());
    assert!(v.failed());
    assert!(v.witness.is_some());
}

proptest! {
    #[test]
    fn dual_formulation_agrees(arch in prop::collection::vec(0u8..3, 8), k in 0usize..105) {
        let maps = DupMap::enumerate_all(8);
        let m = &maps[k % maps.len()];
        let s = State::initial(ArchState(arch));
        prop_assert_eq!(qed_consistent(m, &s), qed_consistent_dual(m, &s));
        prop_assert_eq!(qed_consistent(m, &s), inconsistent_pairs(m, &s).is_empty());
    }
}

use sqed_core::bmc::{
    bmc_search_maps, build_bug_specific_test, build_hard_reset_test, build_soft_reset_test, check_hard_reset_test,
    find_bug_prefix, hard_reset_test, supported_families, BuildError,
};
use sqed_core::model::{ArchState, InitStrategy, State, Step};
use sqed_core::qed::{consistent_initial_states, is_qed_test, BugCase};
use sqed_core::spec::OracleConfig;
use sqed_core::zoo::{build_system, parse_instruction, preset};
use sqed_core::{
    bmc_search, classify_instr, dup_seq, find_bugs, run_qed_test, DupMap, Family, InstrClass, Instruction, Loc,
    QedTest, SearchConfig, SearchOutcome, SpecRelation, TransitionSystem, Witness,
};

struct Fixture {
    sys: TransitionSystem,
    spec: SpecRelation,
    map: DupMap,
}

fn load(name: &str) -> Fixture {
    let cfg = preset(name).unwrap();
    let (sys, spec) = build_system(&cfg).unwrap();
    Fixture { sys, spec, map: cfg.dup_map().unwrap() }
}

fn parse_all(sys: &TransitionSystem, text: &[&str]) -> Vec<Instruction> {
    text.iter().map(|t| parse_instruction(sys, t).unwrap()).collect()
}

fn ridecore_cfg(families: &[Family], bound: usize) -> SearchConfig {
    let f = load("ridecore-lite");
    let mut cfg = SearchConfig::new(bound, families);
    cfg.alphabet = Some(parse_all(&f.sys, &["ADD l12 l4 l15", "MUL l15 l12 l12"]));
    cfg.inits = InitStrategy::Sample { count: 8, seed: 0 };
    cfg
}

#[test]
fn reference_machine_has_no_failing_test() {
    let f = load("toy4");
    let cfg = SearchConfig::new(2, &supported_families(&f.sys));
    let r = bmc_search(&f.sys, &f.map, &cfg).unwrap();
    assert!(matches!(r.outcome, SearchOutcome::NoFailure { complete: true, .. }));
    assert!(r.stats.tests_executed > 0);
}

#[test]
fn reference_machine_standard_bound_three() {
    let f = load("toy4");
    let r = bmc_search(&f.sys, &f.map, &SearchConfig::new(3, &[Family::Standard, Family::Interleaved])).unwrap();
    assert!(matches!(r.outcome, SearchOutcome::NoFailure { complete: true, .. }));
}

#[test]
fn ridecore_standard_search_finds_back_to_back_mul() {
    let f = load("ridecore-lite");
    let r = bmc_search(&f.sys, &f.map, &ridecore_cfg(&[Family::Standard], 3)).unwrap();
    let (test, verdict, _) = r.failure().expect("failing test");
    // The original MUL followed directly by its duplicate is already two
    // back-to-back MULs.
    let expected = QedTest::standard(&f.map, &parse_all(&f.sys, &["MUL l15 l12 l12"])).unwrap();
    assert_eq!(test.steps, expected.steps);
    assert_eq!(verdict.witness, Some(Witness::Pair { original: Loc(15), duplicate: Loc(31) }));
}

#[test]
fn ridecore_interleaved_search_fails() {
    let f = load("ridecore-lite");
    let r = bmc_search(&f.sys, &f.map, &ridecore_cfg(&[Family::Interleaved], 2)).unwrap();
    let (test, verdict, _) = r.failure().expect("failing test");
    assert!(test.len() <= 4);
    assert!(is_qed_test(&f.sys, &f.map, &test.steps, Family::Interleaved));
    assert!(verdict.has_mismatch(Loc(15), Loc(31)));
}

/// Re-enumerates every standard test up to the returned one and checks
/// that none of them fails.
#[test]
fn standard_search_is_shortest_first() {
    let f = load("deep4");
    let inits = consistent_initial_states(&f.sys, &f.map, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let r = bmc_search(&f.sys, &f.map, &SearchConfig::new(3, &[Family::Standard])).unwrap();
    let (found, _, _) = r.failure().expect("deep4 fails at n = 3");
    let originals: Vec<Instruction> =
        f.sys.alphabet().into_iter().filter(|i| classify_instr(&f.map, i) == InstrClass::Original).collect();
    let mut smaller = 0;
    let mut sigma: Vec<Vec<Instruction>> = vec![vec![]];
    for _ in 0..found.meta.original_len {
        sigma = sigma
            .into_iter()
            .flat_map(|p| {
                originals.iter().map(move |i| {
                    let mut q = p.clone();
                    q.push(*i);
                    q
                })
            })
            .collect();
        for s in &sigma {
            let t = QedTest::standard(&f.map, s).unwrap();
            if !t.order(found).is_lt() {
                continue;
            }
            smaller += 1;
            for s0 in &inits {
                assert!(!run_qed_test(&f.sys, &f.map, &t, s0).unwrap().failed(), "{s:?} fails");
            }
        }
    }
    assert!(smaller > 0);
}

#[test]
fn search_result_is_independent_of_thread_count() {
    let f = load("mulmul4");
    let cfg = SearchConfig::new(2, &supported_families(&f.sys));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bmc_search(&f.sys, &f.map, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.outcome, b.outcome);
    assert_eq!(a.stats.tests_executed, b.stats.tests_executed);
}

#[test]
fn budget_exhaustion_is_reported_incomplete() {
    let f = load("toy4");
    let mut cfg = SearchConfig::new(3, &[Family::Standard]);
    cfg.max_tests = 1000;
    let r = bmc_search(&f.sys, &f.map, &cfg).unwrap();
    assert!(matches!(r.outcome, SearchOutcome::NoFailure { complete: false, .. }));
    assert!(!r.is_complete());
}

#[test]
fn every_family_finds_mulmul() {
    let f = load("mulmul4");
    for family in supported_families(&f.sys) {
        let r = bmc_search(&f.sys, &f.map, &SearchConfig::new(2, &[family])).unwrap();
        let (test, verdict, init) = r.failure().unwrap_or_else(|| panic!("{family:?}"));
        assert_eq!(test.family, family);
        assert!(is_qed_test(&f.sys, &f.map, &test.steps, family), "{family:?}");
        assert_eq!(&run_qed_test(&f.sys, &f.map, test, init).unwrap(), verdict);
    }
}

#[test]
fn searching_over_maps_keeps_the_smallest() {
    let f = load("stomp4");
    let maps = DupMap::enumerate_all(4);
    let (idx, r) = bmc_search_maps(&f.sys, &maps, &SearchConfig::new(2, &[Family::Standard])).unwrap();
    let (best, _, _) = r.failure().expect("some map exposes the stomp");
    for m in &maps {
        if let Some((t, _, _)) = bmc_search(&f.sys, m, &SearchConfig::new(2, &[Family::Standard])).unwrap().failure() {
            assert!(!t.order(best).is_lt());
        }
    }
    assert!(idx.is_some());
}

fn bugs(f: &Fixture, depth: usize) -> Vec<sqed_core::Bug> {
    let inits = sqed_core::model::initial_states(&f.sys, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    find_bugs(&f.sys, &f.spec, &inits, &OracleConfig::new(depth)).unwrap().bugs
}

#[test]
fn bug_specific_test_for_output_corruption() {
    let f = load("mulmul4");
    let inits = consistent_initial_states(&f.sys, &f.map, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let mut built = 0;
    for bug in bugs(&f, 1).iter().filter(|b| classify_instr(&f.map, &b.instr) == InstrClass::Duplicate) {
        let Some(t) = build_bug_specific_test(&f.sys, &f.spec, &f.map, bug, 2, &inits, None).unwrap() else {
            continue;
        };
        built += 1;
        assert_eq!(t.meta.case, Some(BugCase::A));
        let (lx, ly) = t.meta.roles.unwrap();
        let i1 = t.instructions().next().unwrap();
        assert_eq!((lx, ly), (i1.out, bug.instr.out));
        let v = run_qed_test(&f.sys, &f.map, &t, t.meta.init.as_ref().unwrap()).unwrap();
        assert!(v.failed() && v.has_mismatch(lx, ly));
    }
    assert!(built > 0);
}

#[test]
fn bug_specific_test_for_location_corruption() {
    let f = load("stomp4");
    let mut built = 0;
    for m in DupMap::enumerate_all(4) {
        if !m.is_duplicate(Loc(3)) {
            continue;
        }
        let inits = consistent_initial_states(&f.sys, &m, &InitStrategy::Exhaustive, 1 << 10).unwrap();
        for bug in bugs(&f, 1).iter().filter(|b| classify_instr(&m, &b.instr) == InstrClass::Duplicate) {
            let Some(t) = build_bug_specific_test(&f.sys, &f.spec, &m, bug, 2, &inits, None).unwrap() else {
                continue;
            };
            if t.meta.case != Some(BugCase::B) {
                continue;
            }
            built += 1;
            let (lx, ly) = t.meta.roles.unwrap();
            assert_eq!((lx, ly), (m.undup(Loc(3)).unwrap(), Loc(3)));
            let v = run_qed_test(&f.sys, &m, &t, t.meta.init.as_ref().unwrap()).unwrap();
            assert!(v.failed() && v.has_mismatch(lx, ly));
        }
    }
    assert!(built > 0);
}

#[test]
fn forwarding_bug_has_no_bug_specific_test() {
    let f = load("fwd4");
    for m in DupMap::enumerate_all(4) {
        let inits = consistent_initial_states(&f.sys, &m, &InitStrategy::Exhaustive, 1 << 10).unwrap();
        for bug in bugs(&f, 1).iter().filter(|b| classify_instr(&m, &b.instr) == InstrClass::Duplicate) {
            assert!(build_bug_specific_test(&f.sys, &f.spec, &m, bug, 3, &inits, None).unwrap().is_none());
        }
    }
    // An extended test still exposes it: a NOP between the halves is not
    // needed, the duplicate half forwards among itself.
    let r = bmc_search(&f.sys, &f.map, &SearchConfig::new(2, &[Family::Extended])).unwrap();
    assert!(r.failure().is_some());
}

#[test]
fn bug_specific_needs_a_duplicate_instruction() {
    let f = load("mulmul4");
    let bug = bugs(&f, 1).into_iter().find(|b| classify_instr(&f.map, &b.instr) == InstrClass::Original).unwrap();
    let err = build_bug_specific_test(&f.sys, &f.spec, &f.map, &bug, 1, &[], None).unwrap_err();
    assert!(matches!(err, BuildError::NotDuplicate(_)));
}

#[test]
fn soft_reset_test_for_back_to_back_mul() {
    let f = load("mulmul4");
    let inits = consistent_initial_states(&f.sys, &f.map, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let originals: Vec<Instruction> =
        f.sys.alphabet().into_iter().filter(|i| classify_instr(&f.map, i) == InstrClass::Original).collect();
    let (s0, prefix) = find_bug_prefix(&f.sys, &f.spec, &f.map, &inits, &originals, 3).unwrap().unwrap();
    assert_eq!(prefix.len(), 2);
    let mul = f.sys.opcode_by_name("MUL").unwrap();
    assert!(prefix.iter().all(|i| i.opcode == mul));
    let t = build_soft_reset_test(&f.sys, &f.spec, &f.map, &prefix, &s0).unwrap();
    let ir = f.sys.soft_reset().unwrap();
    let d = dup_seq(&f.map, &prefix).unwrap();
    let expected: Vec<Step> = [prefix[0], prefix[1], ir, d[0], ir, d[1]].into_iter().map(Step::Exec).collect();
    assert_eq!(t.steps, expected);
    let v = run_qed_test(&f.sys, &f.map, &t, &s0).unwrap();
    assert!(v.failed());
    // Every duplicate ran right after a reset, so it followed no MUL.
    for (j, step) in v.trace.steps.iter().enumerate().skip(2) {
        if let Step::Exec(i) = step {
            if classify_instr(&f.map, i) == InstrClass::Duplicate {
                assert_eq!(v.trace.states[j].narch, sqed_core::NarchState::INITIAL);
            }
        }
    }
}

#[test]
fn soft_reset_constructor_rejects_out_of_scope_prefixes() {
    let f = load("toy4");
    let inits = consistent_initial_states(&f.sys, &f.map, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let originals: Vec<Instruction> =
        f.sys.alphabet().into_iter().filter(|i| classify_instr(&f.map, i) == InstrClass::Original).collect();
    assert!(find_bug_prefix(&f.sys, &f.spec, &f.map, &inits, &originals, 3).unwrap().is_none());
    let one = parse_all(&f.sys, &["MUL l1 l0 l0"]);
    assert_eq!(
        build_soft_reset_test(&f.sys, &f.spec, &f.map, &one, &inits[0]).unwrap_err(),
        BuildError::OutOfScope(1)
    );
}

#[test]
fn hard_reset_tests() {
    let f = load("mulmul4");
    let mu = State::initial(ArchState(vec![2, 3, 1, 0]));
    let prefix = parse_all(&f.sys, &["MUL l1 l0 l0", "MUL l2 l1 l1"]);
    let t = build_hard_reset_test(&f.sys, &f.spec, &prefix, &mu).unwrap();
    let ir = f.sys.soft_reset().unwrap();
    let expected = vec![
        Step::Exec(prefix[0]),
        Step::Exec(prefix[1]),
        Step::HardReset(mu.arch.clone()),
        Step::Exec(prefix[0]),
        Step::Exec(ir),
        Step::Exec(prefix[1]),
    ];
    assert_eq!(t.steps, expected);
    let v = check_hard_reset_test(&f.sys, &t, &mu).unwrap();
    assert!(v.failed());
    assert_eq!(v.witness, Some(Witness::Location { loc: Loc(2) }));
    assert_eq!(v.trace.states[t.len()].arch, {
        let mut direct = f.sys.step(&mu, &prefix[0]).unwrap();
        direct.narch = sqed_core::NarchState::INITIAL;
        f.sys.step(&direct, &prefix[1]).unwrap().arch
    });

    let r = load("toy4");
    let t = hard_reset_test(&r.sys, &prefix, &mu).unwrap();
    assert!(!check_hard_reset_test(&r.sys, &t, &mu).unwrap().failed());
    assert_eq!(hard_reset_test(&r.sys, &prefix[..1], &mu).unwrap_err(), BuildError::OutOfScope(1));
}

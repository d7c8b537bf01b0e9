use proptest::prelude::*;
use sqed_core::model::{enumerate_reachable, initial_states, run, ArchState, InitStrategy, State};
use sqed_core::zoo::{build_system, parse_instruction, preset};
use sqed_core::{Instruction, TransitionSystem};

fn system(name: &str) -> TransitionSystem {
    build_system(&preset(name).unwrap()).unwrap().0
}

fn instr(sys: &TransitionSystem, text: &str) -> Instruction {
    parse_instruction(sys, text).unwrap()
}

#[test]
fn add_updates_output_only() {
    let sys = system("toy4");
    let s = State::initial(ArchState(vec![1, 2, 0, 0]));
    let next = sys.step(&s, &instr(&sys, "ADD l0 l0 l1")).unwrap();
    assert_eq!(next.arch.0, vec![3, 2, 0, 0]);
}

#[test]
fn mov_self_move_keeps_every_state() {
    let sys = system("toy4");
    let mov = instr(&sys, "MOV l0 l0 l0");
    for s in initial_states(&sys, &InitStrategy::Exhaustive, 1 << 10).unwrap() {
        assert_eq!(sys.step(&s, &mov).unwrap().arch, s.arch);
    }
}

#[test]
fn back_to_back_mul_is_off_by_one() {
    let sys = system("mulmul4");
    let mul = instr(&sys, "MUL l1 l0 l0");
    let s0 = State::initial(ArchState(vec![3, 0, 0, 0]));
    let s1 = sys.step(&s0, &mul).unwrap();
    assert_eq!(s1.get(mul.out), 1);
    let s2 = sys.step(&s1, &mul).unwrap();
    assert_eq!(s2.get(mul.out), 2);
}

#[test]
fn malformed_instruction_is_rejected() {
    let sys = system("toy4");
    let bad = Instruction { out: sqed_core::Loc(4), ..instr(&sys, "ADD l0 l0 l1") };
    assert!(sys.step(&sys.zero_state(), &bad).is_err());
}

#[test]
fn empty_run_is_single_state() {
    let sys = system("toy4");
    let s0 = sys.zero_state();
    let p = run(&sys, &s0, &[]).unwrap();
    assert_eq!(p.states, vec![s0]);
}

#[test]
fn two_self_moves_share_arch() {
    let sys = system("toy4");
    let s0 = State::initial(ArchState(vec![1, 2, 3, 0]));
    let mov = instr(&sys, "MOV l2 l2 l2");
    let p = run(&sys, &s0, &[mov, mov]).unwrap();
    assert_eq!(p.states.len(), 3);
    assert!(p.states.iter().all(|s| s.arch == s0.arch));
}

#[test]
fn example_trace_on_ridecore_ends_inconsistent() {
    let sys = system("ridecore-lite");
    let seq: Vec<Instruction> = [
        "MUL l15 l12 l12",
        "ADD l12 l4 l15",
        "MUL l15 l12 l12",
        "MUL l31 l28 l28",
        "ADD l28 l20 l31",
        "MUL l31 l28 l28",
    ]
    .iter()
    .map(|t| instr(&sys, t))
    .collect();
    let p = run(&sys, &sys.zero_state(), &seq).unwrap();
    assert_ne!(p.last().get(sqed_core::Loc(15)), p.last().get(sqed_core::Loc(31)));
}

#[test]
fn depth_zero_reaches_only_inits() {
    let sys = system("toy4");
    let inits = vec![sys.zero_state(), State::initial(ArchState(vec![1, 1, 1, 1]))];
    let r = enumerate_reachable(&sys, &inits, &sys.alphabet(), 0, 1000).unwrap();
    let mut expected = inits.clone();
    expected.sort();
    let mut got: Vec<State> = r.into_iter().collect();
    got.sort();
    assert_eq!(got, expected);
}

#[test]
fn depth_one_is_one_application_of_every_instruction() {
    let sys = system("toy4");
    let s0 = State::initial(ArchState(vec![1, 2, 3, 0]));
    let alphabet = sys.alphabet();
    let mut expected: Vec<State> = alphabet.iter().map(|i| sys.step(&s0, i).unwrap()).collect();
    expected.push(s0.clone());
    expected.sort();
    expected.dedup();
    let mut got: Vec<State> = enumerate_reachable(&sys, &[s0], &alphabet, 1, 100_000).unwrap().into_iter().collect();
    got.sort();
    assert_eq!(got, expected);
}

#[test]
fn reachability_budget_is_reported() {
    let sys = system("toy4");
    let inits = initial_states(&sys, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    assert!(enumerate_reachable(&sys, &inits, &sys.alphabet(), 2, 10).is_err());
}

#[test]
fn step_is_total_on_toy4() {
    let sys = system("mulmul4");
    let inits = initial_states(&sys, &InitStrategy::Exhaustive, 1 << 10).unwrap();
    let states = enumerate_reachable(&sys, &inits, &sys.alphabet(), 1, 1 << 20).unwrap();
    for s in &states {
        for i in sys.alphabet() {
            let a = sys.step(s, &i).unwrap();
            assert_eq!(a, sys.step(s, &i).unwrap());
        }
    }
}

#[test]
fn sampled_inits_are_reproducible() {
    let sys = system("ridecore-lite");
    let strat = InitStrategy::Sample { count: 5, seed: 7 };
    let a = initial_states(&sys, &strat, 100).unwrap();
    assert_eq!(a, initial_states(&sys, &strat, 100).unwrap());
    assert_eq!(a.len(), 5);
    assert_eq!(a[0], sys.zero_state());
}

fn arb_seq(len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..1000, 0..len)
}

proptest! {
    #[test]
    fn path_prefix_closure(arch in prop::collection::vec(0u8..4, 4), a in arb_seq(5), b in arb_seq(5)) {
        let sys = system("deep4");
        let alphabet = sys.alphabet();
        let pick = |v: &[usize]| v.iter().map(|k| alphabet[k % alphabet.len()]).collect::<Vec<_>>();
        let (a, b) = (pick(&a), pick(&b));
        let s0 = State::initial(ArchState(arch));
        let whole: Vec<Instruction> = a.iter().chain(&b).copied().collect();
        let pa = run(&sys, &s0, &a).unwrap();
        let pb = run(&sys, pa.last(), &b).unwrap();
        let pw = run(&sys, &s0, &whole).unwrap();
        let mut joined = pa.states.clone();
        joined.extend(pb.states.into_iter().skip(1));
        prop_assert_eq!(pw.states, joined);
    }

    #[test]
    fn reachability_is_monotone(arch in prop::collection::vec(0u8..4, 4), d in 0usize..2) {
        let sys = system("mulmul4");
        let alphabet = sys.alphabet();
        let s0 = State::initial(ArchState(arch));
        let small = enumerate_reachable(&sys, &[s0.clone()], &alphabet, d, 1 << 20).unwrap();
        let deeper = enumerate_reachable(&sys, &[s0.clone()], &alphabet, d + 1, 1 << 20).unwrap();
        let wider = enumerate_reachable(&sys, &[s0, sys.zero_state()], &alphabet, d, 1 << 20).unwrap();
        prop_assert!(small.iter().all(|s| deeper.contains(s)));
        prop_assert!(small.iter().all(|s| wider.contains(s)));
    }
}

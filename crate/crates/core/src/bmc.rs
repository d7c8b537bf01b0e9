//! Bounded exhaustive search for failing QED tests, and constructors for
//! bug-specific, soft-reset and hard-reset tests.
//!
//! Reset-free families and soft-reset tests are enumerated by a depth-first
//! walk over a union automaton of all enabled families. Children are visited
//! in instruction order, so leaves come out in lexicographic order and the
//! first failing leaf at a given length is the minimal failing test of that
//! length. The walk carries the states reached from every initial state, so
//! shared prefixes are executed once.
//!
//! Hard-reset tests are searched layer by layer: a test with prefix `p` and
//! reset target `mu` fails iff executing `p[k]` from `run(mu, p[..k-1])`
//! differs from executing it after a soft reset of that same state. For each
//! state at depth `k-1` only the smallest `(prefix, mu)` reaching it matters.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dup::{classify_instr, dup_instr, undup_instr, DupError, DupMap, InstrClass};
use crate::model::{
    initial_states, run, InitStrategy, Instruction, Loc, ModelError, NarchState, Role, State, Step, TransitionSystem,
};
use crate::qed::{
    consistent_initial_states, hard_reset_verdict, order_steps, qed_consistent, run_qed_test, BugCase, Family,
    QedError, QedTest, TestMeta, Verdict,
};
use crate::spec::{classify_violation, spec_holds, Bug, SpecError, SpecRelation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("bound must be at least 1")]
    InvalidBound,
    #[error("instruction alphabet is empty")]
    EmptyAlphabet,
    #[error("no test families selected")]
    NoFamilies,
    #[error("alphabet instruction {0:?} is not an original instruction under the dup map")]
    NotOriginal(Instruction),
    #[error("system does not support {0:?} tests")]
    Unsupported(Family),
    #[error(transparent)]
    Qed(#[from] QedError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// `n`: original-half length for reset-free families, bug-prefix size
    /// `k` for reset families.
    pub bound: usize,
    pub families: Vec<Family>,
    /// Restricts the original instructions (and hard-reset prefixes) used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<Instruction>>,
    #[serde(default)]
    pub inits: InitStrategy,
    /// Most NOP insertions in an extended test.
    pub max_nops: usize,
    /// Upper bound on (test, initial state) executions.
    pub max_tests: u64,
    /// Upper bound on states held in one hard-reset layer.
    pub max_states: usize,
    /// Upper bound on enumerated initial states.
    pub init_budget: usize,
}

impl SearchConfig {
    pub fn new(bound: usize, families: &[Family]) -> Self {
        SearchConfig {
            bound,
            families: families.to_vec(),
            alphabet: None,
            inits: InitStrategy::Exhaustive,
            max_nops: 2,
            max_tests: 400_000_000,
            max_states: 4_000_000,
            init_budget: 1 << 20,
        }
    }
}

/// The families a system can run: resets need hardware support.
pub fn supported_families(sys: &TransitionSystem) -> Vec<Family> {
    Family::ALL
        .into_iter()
        .filter(|f| match f {
            Family::SoftReset => sys.soft_reset_opcode().is_some(),
            Family::HardReset => sys.supports_hard_reset() && sys.soft_reset_opcode().is_some(),
            _ => true,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchOutcome {
    NoFailure {
        bound: usize,
        /// Longest test length fully explored.
        explored_length: usize,
        complete: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Failure {
        test: QedTest,
        verdict: Verdict,
        init: State,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub tests_executed: u64,
    pub states_visited: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn failure(&self) -> Option<(&QedTest, &Verdict, &State)> {
        match &self.outcome {
            SearchOutcome::Failure { test, verdict, init } => Some((test, verdict, init)),
            SearchOutcome::NoFailure { .. } => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        match self.outcome {
            SearchOutcome::NoFailure { complete, .. } => complete,
            SearchOutcome::Failure { .. } => true,
        }
    }
}

/// One way of reading a partial sequence as a prefix of a family member.
#[derive(Clone, Debug)]
struct Parse {
    family: Family,
    n: usize,
    sigma: Vec<Instruction>,
    dups: usize,
    nops_left: usize,
    pos: usize,
}

struct Ctx<'a> {
    sys: &'a TransitionSystem,
    m: &'a DupMap,
    alphabet: &'a [Instruction],
    nops: &'a [Instruction],
    soft_reset: Option<Instruction>,
    inits: &'a [State],
}

impl Ctx<'_> {
    fn dup(&self, i: &Instruction) -> Instruction {
        dup_instr(self.m, i).expect("alphabet holds original instructions only")
    }

    /// Successor parses keyed by the next instruction.
    fn expand(&self, parses: &[Parse], out: &mut BTreeMap<Instruction, Vec<Parse>>) {
        for p in parses {
            let mut push = |i: Instruction, next: Parse| out.entry(i).or_default().push(next);
            let advanced = |p: &Parse| Parse { pos: p.pos + 1, ..p.clone() };
            match p.family {
                Family::Standard | Family::Extended | Family::Interleaved => {
                    let can_orig = p.sigma.len() < p.n && (p.family == Family::Interleaved || p.dups == 0);
                    if can_orig {
                        for a in self.alphabet {
                            let mut next = advanced(p);
                            next.sigma.push(*a);
                            push(*a, next);
                        }
                    }
                    let dup_ready = if p.family == Family::Interleaved {
                        p.dups < p.sigma.len()
                    } else {
                        p.sigma.len() == p.n && p.dups < p.n
                    };
                    if dup_ready {
                        let mut next = advanced(p);
                        next.dups += 1;
                        push(self.dup(&p.sigma[p.dups]), next);
                    }
                    if p.family == Family::Extended && p.nops_left > 0 {
                        for nop in self.nops {
                            let mut next = advanced(p);
                            next.nops_left -= 1;
                            push(*nop, next);
                        }
                    }
                }
                Family::SoftReset => {
                    if p.sigma.len() < p.n {
                        for a in self.alphabet {
                            let mut next = advanced(p);
                            next.sigma.push(*a);
                            push(*a, next);
                        }
                    } else {
                        let t = p.pos - p.n;
                        let ir = self.soft_reset.expect("soft-reset family requires the opcode");
                        let i = if t % 2 == 0 { ir } else { self.dup(&p.sigma[t / 2]) };
                        push(i, advanced(p));
                    }
                }
                Family::HardReset => unreachable!("hard-reset tests are searched separately"),
            }
        }
    }

    fn advance(&self, states: &[State], i: &Instruction) -> Vec<State> {
        states
            .iter()
            .map(|s| {
                let mut n = s.clone();
                self.sys.apply(&mut n, i);
                n
            })
            .collect()
    }
}

fn catalan(n: usize) -> u64 {
    let mut c: u64 = 1;
    for k in 0..n as u64 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k as u64).fold(1u64, |acc, j| acc * (n as u64 - j) / (j + 1))
}

fn initial_parses(cfg: &SearchConfig, families: &[Family], total: usize) -> Vec<Parse> {
    let mut out = Vec::new();
    let fresh = |family, n, nops_left| Parse { family, n, sigma: Vec::new(), dups: 0, nops_left, pos: 0 };
    for &f in families {
        match f {
            Family::Standard | Family::Interleaved => {
                if total % 2 == 0 && (1..=cfg.bound).contains(&(total / 2)) {
                    out.push(fresh(f, total / 2, 0));
                }
            }
            Family::Extended => {
                for j in 0..=cfg.max_nops.min(total) {
                    let rest = total - j;
                    if rest % 2 == 0 && (1..=cfg.bound).contains(&(rest / 2)) {
                        out.push(fresh(f, rest / 2, j));
                    }
                }
            }
            Family::SoftReset => {
                if total % 3 == 0 && (2..=cfg.bound).contains(&(total / 3)) {
                    out.push(fresh(f, total / 3, 0));
                }
            }
            Family::HardReset => {}
        }
    }
    out
}

/// Upper bound on the leaves generated from `parses`.
fn leaf_bound(parses: &[Parse], alphabet: usize, nops: usize) -> u64 {
    let a = alphabet as u64;
    parses
        .iter()
        .map(|p| {
            let sigmas = a.saturating_pow(p.n as u32);
            match p.family {
                Family::Standard | Family::SoftReset => sigmas,
                Family::Interleaved => sigmas.saturating_mul(catalan(p.n)),
                Family::Extended => sigmas
                    .saturating_mul(binomial(2 * p.n + p.nops_left, p.nops_left))
                    .saturating_mul((nops as u64).saturating_pow(p.nops_left as u32)),
                Family::HardReset => 0,
            }
        })
        .fold(0u64, u64::saturating_add)
}

#[derive(Default)]
struct GroupResult {
    leaves: u64,
    nodes: u64,
    failure: Option<(Vec<Instruction>, Family, usize)>,
}

fn dfs(
    ctx: &Ctx,
    total: usize,
    seq: &mut Vec<Instruction>,
    parses: Vec<Parse>,
    states: Vec<State>,
    acc: &mut GroupResult,
) -> bool {
    acc.nodes += states.len() as u64;
    if seq.len() == total {
        acc.leaves += states.len() as u64;
        if let Some(idx) = states.iter().position(|s| !qed_consistent(ctx.m, s)) {
            let family = parses
                .iter()
                .filter(|p| p.pos == total)
                .map(|p| p.family)
                .min()
                .expect("every parse completes at the target length");
            acc.failure = Some((seq.clone(), family, idx));
            return true;
        }
        return false;
    }
    let mut children = BTreeMap::new();
    ctx.expand(&parses, &mut children);
    for (i, next) in children {
        let next_states = ctx.advance(&states, &i);
        seq.push(i);
        let found = dfs(ctx, total, seq, next, next_states, acc);
        seq.pop();
        if found {
            return true;
        }
    }
    false
}

/// Minimal failing reset-free or soft-reset test of exactly `total` steps.
fn search_length(ctx: &Ctx, total: usize, parses: Vec<Parse>, stats: &mut SearchStats) -> Option<(QedTest, usize)> {
    let mut groups = BTreeMap::new();
    ctx.expand(&parses, &mut groups);
    let groups: Vec<(Instruction, Vec<Parse>)> = groups.into_iter().collect();
    let best = AtomicUsize::new(usize::MAX);
    let results: Vec<Option<GroupResult>> = groups
        .into_par_iter()
        .enumerate()
        .map(|(g, (first, next))| {
            if best.load(AtomicOrdering::Relaxed) < g {
                return None;
            }
            let mut acc = GroupResult { nodes: ctx.inits.len() as u64, ..GroupResult::default() };
            let states = ctx.advance(ctx.inits, &first);
            let mut seq = vec![first];
            if dfs(ctx, total, &mut seq, next, states, &mut acc) {
                best.fetch_min(g, AtomicOrdering::Relaxed);
            }
            Some(acc)
        })
        .collect();
    // Groups before the first failing one always run to completion, so
    // these counts do not depend on scheduling.
    for r in results.into_iter().flatten() {
        stats.tests_executed += r.leaves;
        stats.states_visited += r.nodes;
        if let Some((seq, family, idx)) = r.failure {
            let n = parses.iter().find(|p| p.family == family).map(|p| p.n).unwrap_or(0);
            let meta = TestMeta {
                original_len: n,
                prefix_len: (family == Family::SoftReset).then_some(n),
                ..TestMeta::default()
            };
            let test = QedTest { steps: seq.into_iter().map(Step::Exec).collect(), family, meta };
            return Some((test, idx));
        }
    }
    None
}

/// Smallest `(prefix, mu)` reaching each state in exactly `depth` steps.
struct HardResetLayers<'a> {
    sys: &'a TransitionSystem,
    inits: &'a [State],
    alphabet: &'a [Instruction],
    depth: usize,
    layer: HashMap<State, (Vec<Instruction>, usize)>,
}

impl<'a> HardResetLayers<'a> {
    fn new(sys: &'a TransitionSystem, inits: &'a [State], alphabet: &'a [Instruction]) -> Self {
        let mut layer = HashMap::new();
        for (idx, s) in inits.iter().enumerate() {
            layer.entry(s.clone()).or_insert((Vec::new(), idx));
        }
        HardResetLayers { sys, inits, alphabet, depth: 0, layer }
    }

    fn better(&self, a: &(Vec<Instruction>, usize), b: &(Vec<Instruction>, usize)) -> bool {
        (&a.0, &self.inits[a.1].arch) < (&b.0, &self.inits[b.1].arch)
    }

    fn advance_to(&mut self, depth: usize, max_states: usize, stats: &mut SearchStats) -> Result<(), usize> {
        while self.depth < depth {
            let mut next: HashMap<State, (Vec<Instruction>, usize)> = HashMap::new();
            for (s, (prefix, mu)) in &self.layer {
                for i in self.alphabet {
                    let mut n = s.clone();
                    self.sys.apply(&mut n, i);
                    let mut p = prefix.clone();
                    p.push(*i);
                    let cand = (p, *mu);
                    match next.get(&n) {
                        Some(cur) if !self.better(&cand, cur) => {}
                        _ => {
                            next.insert(n, cand);
                        }
                    }
                }
                if next.len() > max_states {
                    return Err(next.len());
                }
            }
            stats.states_visited += next.len() as u64;
            self.layer = next;
            self.depth += 1;
        }
        Ok(())
    }

    /// Smallest failing `(prefix, last, mu)` at the current depth.
    fn failing(&self, stats: &mut SearchStats) -> Option<(Vec<Instruction>, Instruction, usize)> {
        let entries: Vec<(&State, &(Vec<Instruction>, usize))> = self.layer.iter().collect();
        let found: Vec<(Vec<Instruction>, Instruction, usize)> = entries
            .par_iter()
            .filter_map(|(s, (prefix, mu))| {
                let reset = State { arch: s.arch.clone(), narch: NarchState::INITIAL };
                self.alphabet
                    .iter()
                    .find(|i| {
                        let mut a = (*s).clone();
                        self.sys.apply(&mut a, i);
                        let mut b = reset.clone();
                        self.sys.apply(&mut b, i);
                        a.arch != b.arch
                    })
                    .map(|i| (prefix.clone(), *i, *mu))
            })
            .collect();
        stats.tests_executed += (self.layer.len() * self.alphabet.len()) as u64;
        found.into_iter().min_by(|a, b| (&a.0, a.1, &self.inits[a.2].arch).cmp(&(&b.0, b.1, &self.inits[b.2].arch)))
    }
}

/// Original-instruction alphabet for `m`: the configured restriction, or
/// every original instruction of the system.
pub fn original_alphabet(
    sys: &TransitionSystem,
    m: &DupMap,
    restrict: Option<&[Instruction]>,
) -> Result<Vec<Instruction>, SearchError> {
    let mut out = match restrict {
        Some(list) => {
            for i in list {
                sys.validate_instruction(i)?;
                if classify_instr(m, i) != InstrClass::Original {
                    return Err(SearchError::NotOriginal(*i));
                }
            }
            list.to_vec()
        }
        None => sys.alphabet().into_iter().filter(|i| classify_instr(m, i) == InstrClass::Original).collect(),
    };
    out.sort();
    out.dedup();
    Ok(out)
}

/// Instructions inserted by extended tests: the canonical NOP and every
/// architecture-preserving self-move of a regular opcode.
pub fn nop_alphabet(sys: &TransitionSystem) -> Vec<Instruction> {
    let mut out: Vec<Instruction> = sys.canonical_nop().into_iter().collect();
    out.extend(sys.alphabet().into_iter().filter(|i| {
        sys.opcode(i.opcode).is_some_and(|o| o.role == Role::Regular) && sys.is_nop_form(i)
    }));
    out.sort();
    out
}

/// Explores QED tests by increasing length, then lexicographically, and
/// returns the first failing one.
pub fn bmc_search(sys: &TransitionSystem, m: &DupMap, cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    let start = Instant::now();
    if cfg.bound == 0 {
        return Err(SearchError::InvalidBound);
    }
    if cfg.families.is_empty() {
        return Err(SearchError::NoFamilies);
    }
    let supported = supported_families(sys);
    let mut families = cfg.families.clone();
    families.sort();
    families.dedup();
    if let Some(f) = families.iter().find(|f| !supported.contains(f)) {
        return Err(SearchError::Unsupported(*f));
    }
    let reset_free: Vec<Family> = families.iter().copied().filter(|f| *f != Family::HardReset).collect();
    let hard_reset = families.contains(&Family::HardReset);
    // Hard-reset prefixes may use any instruction; only the other families
    // need originals.
    let alphabet =
        if reset_free.is_empty() { Vec::new() } else { original_alphabet(sys, m, cfg.alphabet.as_deref())? };
    if !reset_free.is_empty() && alphabet.is_empty() {
        return Err(SearchError::EmptyAlphabet);
    }
    let nops = nop_alphabet(sys);

    let consistent = if reset_free.is_empty() {
        Vec::new()
    } else {
        consistent_initial_states(sys, m, &cfg.inits, cfg.init_budget)?
    };
    let hr_inits = if hard_reset { initial_states(sys, &cfg.inits, cfg.init_budget)? } else { Vec::new() };
    let hr_alphabet = match &cfg.alphabet {
        Some(list) => {
            let mut v = list.clone();
            v.sort();
            v.dedup();
            v
        }
        None => sys.alphabet(),
    };

    let ctx = Ctx { sys, m, alphabet: &alphabet, nops: &nops, soft_reset: sys.soft_reset().ok(), inits: &consistent };
    let mut layers = HardResetLayers::new(sys, &hr_inits, &hr_alphabet);

    let max_len = families
        .iter()
        .map(|f| match f {
            Family::Standard | Family::Interleaved => 2 * cfg.bound,
            Family::Extended => 2 * cfg.bound + cfg.max_nops,
            Family::SoftReset => 3 * cfg.bound,
            Family::HardReset => 2 * cfg.bound + 2,
        })
        .max()
        .unwrap_or(0);

    let mut stats = SearchStats::default();
    let mut explored = 0;
    let incomplete = |explored: usize, reason: String, mut stats: SearchStats| {
        stats.wall_time = start.elapsed();
        Ok(SearchResult {
            outcome: SearchOutcome::NoFailure {
                bound: cfg.bound,
                explored_length: explored,
                complete: false,
                reason: Some(reason),
            },
            stats,
        })
    };

    for total in 1..=max_len {
        let parses = initial_parses(cfg, &reset_free, total);
        let hr_k = (hard_reset && total % 2 == 0 && total >= 6 && (total - 2) / 2 <= cfg.bound).then(|| (total - 2) / 2);
        if parses.is_empty() && hr_k.is_none() {
            explored = total;
            continue;
        }
        let estimate = leaf_bound(&parses, alphabet.len(), nops.len()).saturating_mul(consistent.len() as u64);
        if stats.tests_executed.saturating_add(estimate) > cfg.max_tests {
            return incomplete(
                explored,
                format!("test budget of {} executions exhausted before length {total}", cfg.max_tests),
                stats,
            );
        }

        let mut best: Option<(QedTest, State)> = None;
        if !parses.is_empty() && !consistent.is_empty() {
            if let Some((test, idx)) = search_length(&ctx, total, parses, &mut stats) {
                best = Some((test, consistent[idx].clone()));
            }
        }
        if let Some(k) = hr_k {
            if let Err(size) = layers.advance_to(k - 1, cfg.max_states, &mut stats) {
                return incomplete(
                    explored,
                    format!("hard-reset layer {} exceeded {} states ({size})", k - 1, cfg.max_states),
                    stats,
                );
            }
            if let Some((mut prefix, last, mu)) = layers.failing(&mut stats) {
                prefix.push(last);
                let mu = hr_inits[mu].clone();
                let test = hard_reset_test(sys, &prefix, &mu).expect("search only builds well-formed tests");
                let better = match &best {
                    Some((b, _)) => order_steps(&test.steps, &b.steps) == std::cmp::Ordering::Less,
                    None => true,
                };
                if better {
                    best = Some((test, mu));
                }
            }
        }
        if let Some((test, init)) = best {
            let verdict = run_qed_test(sys, m, &test, &init)?;
            debug_assert!(verdict.failed());
            stats.wall_time = start.elapsed();
            return Ok(SearchResult { outcome: SearchOutcome::Failure { test, verdict, init }, stats });
        }
        explored = total;
    }
    stats.wall_time = start.elapsed();
    Ok(SearchResult {
        outcome: SearchOutcome::NoFailure { bound: cfg.bound, explored_length: explored, complete: true, reason: None },
        stats,
    })
}

/// Runs [`bmc_search`] under each dup map and keeps the smallest failure
/// (ties go to the earlier map).
pub fn bmc_search_maps(
    sys: &TransitionSystem,
    maps: &[DupMap],
    cfg: &SearchConfig,
) -> Result<(Option<usize>, SearchResult), SearchError> {
    let mut best: Option<(usize, SearchResult)> = None;
    let mut stats = SearchStats::default();
    let mut last = None;
    for (k, m) in maps.iter().enumerate() {
        let r = bmc_search(sys, m, cfg)?;
        stats.tests_executed += r.stats.tests_executed;
        stats.states_visited += r.stats.states_visited;
        stats.wall_time += r.stats.wall_time;
        if let Some((t, _, _)) = r.failure() {
            let better = match &best {
                Some((_, b)) => order_steps(&t.steps, &b.failure().expect("kept only failures").0.steps).is_lt(),
                None => true,
            };
            if better {
                best = Some((k, r));
            }
        } else {
            last = Some(r);
        }
    }
    match best {
        Some((k, mut r)) => {
            r.stats = stats;
            Ok((Some(k), r))
        }
        None => {
            let mut r = last.ok_or(SearchError::NoFamilies)?;
            r.stats = stats;
            Ok((None, r))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("{0:?} is not a duplicate instruction under this dup map; try a different map")]
    NotDuplicate(Instruction),
    #[error("bug prefix of size {0} is out of scope (needs k >= 2)")]
    OutOfScope(usize),
    #[error("sequence does not end in its first specification violation")]
    NotABugPrefix,
    #[error("the buggy instruction corrupts duplicate location {0}")]
    CorruptsDuplicate(Loc),
    #[error("initial state is not a QED-consistent initial state")]
    BadInit,
    #[error(transparent)]
    Dup(#[from] DupError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_consistent_init(sys: &TransitionSystem, m: &DupMap, s0: &State) -> Result<(), BuildError> {
    sys.validate_state(s0)?;
    if !s0.is_initial() || !qed_consistent(m, s0) {
        return Err(BuildError::BadInit);
    }
    Ok(())
}

/// Roles and case for a standard test `trace` of length `2n` whose
/// `(n+1)`-th instruction is `i_b`, if the location-preservation
/// requirements hold.
fn bug_specific_roles(
    spec: &SpecRelation,
    m: &DupMap,
    i1: &Instruction,
    ib: &Instruction,
    states: &[State],
    n: usize,
) -> Result<Option<(BugCase, Loc, Loc)>, BuildError> {
    let last = 2 * n;
    let kind = classify_violation(spec, &states[n], ib, &states[n + 1])?;
    if kind.is_type_a() {
        let (lx, ly) = (i1.out, ib.out);
        let ok = states[n + 1].get(ly) == states[last].get(ly)
            && states[1].get(lx) == states[last].get(lx)
            && [ib.ins.0, ib.ins.1].iter().all(|&l| states[0].get(l) == states[n].get(l));
        return Ok(ok.then_some((BugCase::A, lx, ly)));
    }
    let ViolationKind::TypeB { bad_locations } = kind else { unreachable!("type-A kinds handled above") };
    for ly in bad_locations {
        let Some(lx) = m.undup(ly) else { continue };
        if lx == i1.out {
            continue;
        }
        let ok = states[n + 1].get(ly) == states[last].get(ly)
            && states[1].get(lx) == states[last].get(lx)
            && states[1].get(ly) == states[n].get(ly);
        if ok {
            return Ok(Some((BugCase::B, lx, ly)));
        }
    }
    Ok(None)
}

/// Searches for a standard test whose `(n+1)`-th instruction is the bug's
/// instruction, whose first instruction is its original preimage, whose
/// original half reaches a trigger state at position `n` from one of
/// `inits`, and whose trace meets the location-preservation requirements of
/// the matching case. Connectors between the first instruction and the
/// trigger are original instructions that avoid the first instruction's
/// locations, explored breadth-first up to `connector_depth`, drawn from
/// `candidates` or the whole alphabet.
pub fn build_bug_specific_test(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    m: &DupMap,
    bug: &Bug,
    connector_depth: usize,
    inits: &[State],
    candidates: Option<&[Instruction]>,
) -> Result<Option<QedTest>, BuildError> {
    let ib = bug.instr;
    if classify_instr(m, &ib) != InstrClass::Duplicate {
        return Err(BuildError::NotDuplicate(ib));
    }
    let i1 = undup_instr(m, &ib)?;
    for s0 in inits {
        check_consistent_init(sys, m, s0)?;
    }
    let avoid = i1.locations();
    let connectors: Vec<Instruction> = candidates
        .map(<[Instruction]>::to_vec)
        .unwrap_or_else(|| sys.alphabet())
        .into_iter()
        .filter(|i| classify_instr(m, i) == InstrClass::Original && i.locations().iter().all(|l| !avoid.contains(l)))
        .collect();

    let mut frontier: Vec<(usize, Vec<Instruction>, State)> = Vec::new();
    for (idx, s0) in inits.iter().enumerate() {
        let s1 = sys.step(s0, &i1)?;
        if spec_holds(spec, s0, &i1, &s1)? {
            frontier.push((idx, Vec::new(), s1));
        }
    }
    let mut seen: std::collections::HashSet<(usize, State)> =
        frontier.iter().map(|(idx, _, s)| (*idx, s.clone())).collect();
    for depth in 0..=connector_depth {
        // Connector first, then initial state.
        frontier.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        for (idx, connector, sn) in &frontier {
            let mut after = sn.clone();
            sys.apply(&mut after, &ib);
            if spec_holds(spec, sn, &ib, &after)? {
                continue;
            }
            let mut originals = vec![i1];
            originals.extend(connector);
            let n = originals.len();
            let mut test = QedTest::standard(m, &originals)?;
            let trace = run(sys, &inits[*idx], &test.instructions().copied().collect::<Vec<_>>())?;
            if let Some((case, lx, ly)) = bug_specific_roles(spec, m, &i1, &ib, &trace.states, n)? {
                test.meta = TestMeta {
                    original_len: n,
                    prefix_len: None,
                    init: Some(inits[*idx].clone()),
                    roles: Some((lx, ly)),
                    case: Some(case),
                };
                return Ok(Some(test));
            }
        }
        if depth == connector_depth {
            break;
        }
        let mut next = Vec::new();
        for (idx, connector, s) in &frontier {
            for c in &connectors {
                let mut n = s.clone();
                sys.apply(&mut n, c);
                if seen.insert((*idx, n.clone())) {
                    let mut conn = connector.clone();
                    conn.push(*c);
                    next.push((*idx, conn, n));
                }
            }
        }
        frontier = next;
    }
    Ok(None)
}

/// `prefix :: (i_r, dup(prefix[j]))` for each `j`.
pub fn soft_reset_test(sys: &TransitionSystem, m: &DupMap, prefix: &[Instruction]) -> Result<QedTest, BuildError> {
    let k = prefix.len();
    if k < 2 {
        return Err(BuildError::OutOfScope(k));
    }
    let ir = sys.soft_reset()?;
    let mut steps: Vec<Step> = prefix.iter().copied().map(Step::Exec).collect();
    for i in prefix {
        steps.push(Step::Exec(ir));
        steps.push(Step::Exec(dup_instr(m, i)?));
    }
    Ok(QedTest {
        steps,
        family: Family::SoftReset,
        meta: TestMeta { original_len: k, prefix_len: Some(k), ..TestMeta::default() },
    })
}

/// Soft-reset test for a minimal bug prefix: every instruction but the
/// last satisfies the specification from `s0`, the last violates it, and
/// the violation leaves every duplicate location intact.
pub fn build_soft_reset_test(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    m: &DupMap,
    prefix: &[Instruction],
    s0: &State,
) -> Result<QedTest, BuildError> {
    if prefix.len() < 2 {
        return Err(BuildError::OutOfScope(prefix.len()));
    }
    check_consistent_init(sys, m, s0)?;
    let trace = run(sys, s0, prefix)?;
    let k = prefix.len();
    for j in 0..k {
        let holds = spec_holds(spec, &trace.states[j], &prefix[j], &trace.states[j + 1])?;
        if holds == (j + 1 == k) {
            return Err(BuildError::NotABugPrefix);
        }
    }
    if let Some(l) = trace.states[k - 1].arch.diff(&trace.states[k].arch).into_iter().find(|l| m.is_duplicate(*l)) {
        return Err(BuildError::CorruptsDuplicate(l));
    }
    let mut test = soft_reset_test(sys, m, prefix)?;
    test.meta.init = Some(s0.clone());
    Ok(test)
}

/// Shortest original-only sequence from one of `inits` whose last
/// instruction is its first specification violation and leaves duplicate
/// locations intact; ties broken by sequence, then initial-state order.
pub fn find_bug_prefix(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    m: &DupMap,
    inits: &[State],
    alphabet: &[Instruction],
    max_len: usize,
) -> Result<Option<(State, Vec<Instruction>)>, BuildError> {
    let mut frontier: Vec<(Vec<Instruction>, usize, State)> =
        inits.iter().enumerate().map(|(k, s)| (Vec::new(), k, s.clone())).collect();
    let mut seen: std::collections::HashSet<(usize, State)> =
        frontier.iter().map(|(_, k, s)| (*k, s.clone())).collect();
    for _ in 0..max_len {
        let mut next = Vec::new();
        let mut hits: Vec<(Vec<Instruction>, usize)> = Vec::new();
        for (prefix, k, s) in &frontier {
            for i in alphabet {
                let mut n = s.clone();
                sys.apply(&mut n, i);
                let mut p = prefix.clone();
                p.push(*i);
                if spec_holds(spec, s, i, &n)? {
                    if seen.insert((*k, n.clone())) {
                        next.push((p, *k, n));
                    }
                } else if s.arch.diff(&n.arch).iter().all(|l| !m.is_duplicate(*l)) {
                    hits.push((p, *k));
                }
            }
        }
        if let Some((p, k)) = hits.into_iter().min() {
            return Ok(Some((inits[k].clone(), p)));
        }
        next.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        frontier = next;
    }
    Ok(None)
}

/// `prefix :: i_{R,mu} :: prefix[..k-1] :: i_r :: prefix[k-1]`.
pub fn hard_reset_test(sys: &TransitionSystem, prefix: &[Instruction], mu: &State) -> Result<QedTest, BuildError> {
    let k = prefix.len();
    if k < 2 {
        return Err(BuildError::OutOfScope(k));
    }
    let reset = sys.hard_reset_to(mu)?;
    let ir = sys.soft_reset()?;
    let mut steps: Vec<Step> = prefix.iter().copied().map(Step::Exec).collect();
    steps.push(reset);
    steps.extend(prefix[..k - 1].iter().copied().map(Step::Exec));
    steps.push(Step::Exec(ir));
    steps.push(Step::Exec(prefix[k - 1]));
    Ok(QedTest {
        steps,
        family: Family::HardReset,
        meta: TestMeta { original_len: k, prefix_len: Some(k), init: Some(mu.clone()), ..TestMeta::default() },
    })
}

/// [`hard_reset_test`] for a prefix whose last instruction violates the
/// specification when executed from `run(mu, prefix[..k-1])`.
pub fn build_hard_reset_test(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    prefix: &[Instruction],
    mu: &State,
) -> Result<QedTest, BuildError> {
    let test = hard_reset_test(sys, prefix, mu)?;
    let trace = run(sys, mu, prefix)?;
    let k = prefix.len();
    if spec_holds(spec, &trace.states[k - 1], &prefix[k - 1], &trace.states[k])? {
        return Err(BuildError::NotABugPrefix);
    }
    Ok(test)
}

/// Fails iff the states after positions `k` and `2k+2` differ.
pub fn check_hard_reset_test(sys: &TransitionSystem, t: &QedTest, mu: &State) -> Result<Verdict, QedError> {
    hard_reset_verdict(sys, t, mu)
}

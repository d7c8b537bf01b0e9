//! Executable checks of the framework's laws over a corpus
//! of processors. Every check enumerates a finite instantiation (corpus x
//! bounds), reports exact instance counts and lists every violation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmc::{
    bmc_search, build_bug_specific_test, build_soft_reset_test, find_bug_prefix, nop_alphabet, original_alphabet,
    supported_families, SearchConfig, SearchOutcome,
};
use crate::dup::{classify_instr, dup_instr, dup_seq, DupMap, InstrClass};
use crate::model::{
    enumerate_reachable, initial_states, run, run_steps, InitStrategy, Instruction, Loc, State,
    TransitionSystem, Value,
};
use crate::qed::{consistent_initial_states, qed_consistent, run_qed_test, BugCase, Family, QedTest};
use crate::spec::{
    bounded_counterexample, find_bugs, single_instruction_bug_over, spec_holds, Bug, OracleConfig, SpecRelation,
};
use crate::zoo::{build_system, format_instruction, presets, ConfigError, ProcessorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawId {
    Lemma1,
    Lemma2,
    Cor1,
    Eq2,
    Eq3,
    Eq4,
    Prop1,
    Lemma3,
    Lemma4A,
    Lemma4B,
    Lemma5,
    Thm1,
    Thm2,
}

impl LawId {
    pub const ALL: [LawId; 13] = [
        LawId::Eq2,
        LawId::Eq3,
        LawId::Eq4,
        LawId::Cor1,
        LawId::Lemma1,
        LawId::Prop1,
        LawId::Lemma2,
        LawId::Lemma3,
        LawId::Lemma4A,
        LawId::Lemma4B,
        LawId::Lemma5,
        LawId::Thm1,
        LawId::Thm2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LawId::Lemma1 => "lemma1",
            LawId::Lemma2 => "lemma2",
            LawId::Cor1 => "cor1",
            LawId::Eq2 => "eq2",
            LawId::Eq3 => "eq3",
            LawId::Eq4 => "eq4",
            LawId::Prop1 => "prop1",
            LawId::Lemma3 => "lemma3",
            LawId::Lemma4A => "lemma4a",
            LawId::Lemma4B => "lemma4b",
            LawId::Lemma5 => "lemma5",
            LawId::Thm1 => "thm1",
            LawId::Thm2 => "thm2",
        }
    }

    pub fn parse(s: &str) -> Option<LawId> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        LawId::ALL.into_iter().find(|l| l.name() == norm)
    }

    pub fn statement(self) -> &'static str {
        match self {
            LawId::Eq2 => "a spec-conforming original instruction leaves every duplicate location unchanged",
            LawId::Eq3 => "a spec-conforming duplicate instruction leaves every original location unchanged",
            LawId::Eq4 => "spec-conforming instructions with equal opcodes and equal input values agree on output",
            LawId::Cor1 => "an original and its duplicate with matching inputs produce matching outputs",
            LawId::Lemma1 => "an original/duplicate pair preserves agreement on all original/duplicate locations",
            LawId::Prop1 => "the oracle finds a bug iff an independent bounded-correctness check fails",
            LawId::Lemma2 => "QED tests whose steps all conform to the spec keep a consistent state consistent",
            LawId::Lemma3 => "every failing QED test found by search points at a real bug",
            LawId::Lemma4A => "bug-specific tests for output-corrupting bugs fail on the expected pair",
            LawId::Lemma4B => "bug-specific tests for location-corrupting bugs fail on the expected pair",
            LawId::Lemma5 => "soft-reset tests for minimal bug prefixes fail on single-instruction-correct systems",
            LawId::Thm1 => "search is sound and complete for bugs with a bug-specific test",
            LawId::Thm2 => "single-instruction correct with no failing hard-reset test iff the oracle finds no bug",
        }
    }
}

impl fmt::Display for LawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawBudgets {
    /// Depth of the reachable-state set used by the per-transition laws.
    pub state_depth: usize,
    /// Largest original-half length for the preservation law.
    pub lemma2_bound: usize,
    pub prop1_depth: usize,
    pub search_bound: usize,
    pub max_nops: usize,
    pub oracle_depth: usize,
    pub hard_reset_bound: usize,
    pub connector_depth: usize,
    pub prefix_len: usize,
    pub max_states: usize,
    pub init_budget: usize,
}

impl Default for LawBudgets {
    fn default() -> Self {
        LawBudgets {
            state_depth: 2,
            lemma2_bound: 2,
            prop1_depth: 2,
            search_bound: 2,
            max_nops: 2,
            oracle_depth: 2,
            hard_reset_bound: 4,
            connector_depth: 2,
            prefix_len: 3,
            max_states: 4_000_000,
            init_budget: 1 << 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub config: ProcessorConfig,
    pub sys: TransitionSystem,
    pub spec: SpecRelation,
    pub map: DupMap,
    pub inits: InitStrategy,
    /// Original instructions the laws and searches are restricted to.
    pub focus: Option<Vec<Instruction>>,
}

impl CorpusEntry {
    pub fn new(config: ProcessorConfig) -> Result<Self, ConfigError> {
        let (sys, spec) = build_system(&config)?;
        let map = config.dup_map()?;
        let focus = config.search.parsed_alphabet(&sys).map_err(|message| ConfigError::Expression {
            name: format!("{} search alphabet", config.name),
            message,
        })?;
        let inits = config.search.inits.clone().unwrap_or_default();
        Ok(CorpusEntry { config, sys, spec, map, inits, focus })
    }

    pub fn name(&self) -> &str {
        self.sys.name()
    }

    pub fn injected(&self) -> bool {
        !self.config.injections.is_empty()
    }

    /// Every instruction the laws range over: the whole alphabet, or the
    /// focus set with its duplicates, the NOP forms and the soft reset.
    pub fn alphabet(&self) -> Vec<Instruction> {
        match &self.focus {
            None => self.sys.alphabet(),
            Some(focus) => {
                let mut out: BTreeSet<Instruction> = focus.iter().copied().collect();
                out.extend(focus.iter().filter_map(|i| dup_instr(&self.map, i).ok()));
                out.extend(nop_alphabet(&self.sys));
                out.extend(self.sys.soft_reset().ok());
                out.into_iter().collect()
            }
        }
    }

    pub fn originals(&self) -> Vec<Instruction> {
        original_alphabet(&self.sys, &self.map, self.focus.as_deref()).unwrap_or_default()
    }

    fn all_inits(&self, b: &LawBudgets) -> Result<Vec<State>, String> {
        initial_states(&self.sys, &self.inits, b.init_budget).map_err(|e| e.to_string())
    }

    fn consistent_inits(&self, m: &DupMap, b: &LawBudgets) -> Result<Vec<State>, String> {
        consistent_initial_states(&self.sys, m, &self.inits, b.init_budget).map_err(|e| e.to_string())
    }

    fn fmt(&self, i: &Instruction) -> String {
        format_instruction(&self.sys, i)
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn from_configs(configs: &[ProcessorConfig]) -> Result<Corpus, ConfigError> {
        Ok(Corpus { entries: configs.iter().cloned().map(CorpusEntry::new).collect::<Result<_, _>>()? })
    }

    pub fn builtin() -> Corpus {
        Corpus::from_configs(&presets()).expect("built-in presets are valid")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: LawId,
    pub statement: String,
    /// The finite domain actually enumerated.
    pub instantiation: String,
    pub systems: Vec<String>,
    pub instances: u64,
    pub violations: Vec<String>,
    /// Per-system remarks (not applicable, budget cut-offs).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Default)]
struct Tally {
    instances: u64,
    violations: Vec<String>,
    notes: Vec<String>,
    case_a: u64,
    case_b: u64,
}

impl Tally {
    fn violation(&mut self, entry: &CorpusEntry, msg: impl fmt::Display) {
        self.violations.push(format!("{}: {msg}", entry.name()));
    }

    fn note(&mut self, entry: &CorpusEntry, msg: impl fmt::Display) {
        self.notes.push(format!("{}: {msg}", entry.name()));
    }

    fn merge(&mut self, other: Tally) {
        self.instances += other.instances;
        self.violations.extend(other.violations);
        self.notes.extend(other.notes);
        self.case_a += other.case_a;
        self.case_b += other.case_b;
    }
}

/// Triples `(s, i, s2)` satisfying the specification: the system's own
/// step where it conforms, and the specification's successor.
fn spec_triples(entry: &CorpusEntry, states: &[State], alphabet: &[Instruction], mut f: impl FnMut(&State, &Instruction, &State)) {
    for s in states {
        for i in alphabet {
            let mut next = s.clone();
            entry.sys.apply(&mut next, i);
            if spec_holds(&entry.spec, s, i, &next).unwrap_or(false) {
                f(s, i, &next);
            }
            if let Ok(succ) = entry.spec.successor(s, i) {
                f(s, i, &succ);
            }
        }
    }
}

fn reachable(entry: &CorpusEntry, b: &LawBudgets, alphabet: &[Instruction]) -> Result<Vec<State>, String> {
    let inits = entry.all_inits(b)?;
    enumerate_reachable(&entry.sys, &inits, alphabet, b.state_depth, b.max_states)
        .map(|set| set.into_iter().collect())
        .map_err(|e| e.to_string())
}

fn frame_law(entry: &CorpusEntry, b: &LawBudgets, class: InstrClass) -> Tally {
    let mut t = Tally::default();
    let alphabet = entry.alphabet();
    let states = match reachable(entry, b, &alphabet) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let m = &entry.map;
    let guarded: Vec<Loc> =
        if class == InstrClass::Original { m.duplicates().collect() } else { m.originals().collect() };
    let mine: Vec<Instruction> = alphabet.iter().copied().filter(|i| classify_instr(m, i) == class).collect();
    spec_triples(entry, &states, &mine, |s, i, s2| {
        t.instances += 1;
        if let Some(l) = guarded.iter().find(|&&l| s.get(l) != s2.get(l)) {
            t.violation(entry, format!("{} changed {l} from {:?}", entry.fmt(i), s.arch.0));
        }
    });
    t
}

fn congruence_law(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    let alphabet = entry.alphabet();
    let states = match reachable(entry, b, &alphabet) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let mut seen: HashMap<(u8, Value, Value), Value> = HashMap::new();
    spec_triples(entry, &states, &alphabet, |s, i, s2| {
        t.instances += 1;
        let key = (i.opcode.0, s.get(i.ins.0), s.get(i.ins.1));
        let out = s2.get(i.out);
        let first = *seen.entry(key).or_insert(out);
        if first != out {
            t.violation(entry, format!("opcode {} on inputs {:?} gave {first} and {out}", i.opcode.0, (key.1, key.2)));
        }
    });
    t
}

/// Both pairwise laws over original/duplicate instruction pairs. Triples
/// are grouped by the antecedent's key so every pair of matching triples is
/// covered without enumerating pairs.
fn pair_law(entry: &CorpusEntry, b: &LawBudgets, whole_state: bool) -> Tally {
    let mut t = Tally::default();
    let alphabet = entry.alphabet();
    let states = match reachable(entry, b, &alphabet) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let m = &entry.map;
    let originals: Vec<Loc> = m.originals().collect();
    let present: BTreeSet<Instruction> = alphabet.iter().copied().collect();
    let pairs: Vec<(Instruction, Instruction)> = alphabet
        .iter()
        .filter(|i| classify_instr(m, i) == InstrClass::Original)
        .filter_map(|i| dup_instr(m, i).ok().filter(|d| present.contains(d)).map(|d| (*i, d)))
        .collect();
    let orig_instrs: Vec<Instruction> = pairs.iter().map(|p| p.0).collect();
    let dup_instrs: Vec<Instruction> = pairs.iter().map(|p| p.1).collect();
    let to_orig: HashMap<Instruction, Instruction> = pairs.iter().map(|&(o, d)| (d, o)).collect();

    // Key: the original instruction and the antecedent's projected values.
    // Value: projected outputs and how many triples produced them.
    let project = |s: &State, locs: &mut dyn Iterator<Item = Loc>| -> Vec<Value> { locs.map(|l| s.get(l)).collect() };
    let mut left: HashMap<(Instruction, Vec<Value>), (Vec<Value>, u64)> = HashMap::new();
    spec_triples(entry, &states, &orig_instrs, |s0, i, s1| {
        let (key, val) = if whole_state {
            (project(s0, &mut originals.iter().copied()), project(s1, &mut originals.iter().copied()))
        } else {
            (vec![s0.get(i.ins.0), s0.get(i.ins.1)], vec![s1.get(i.out)])
        };
        let e = left.entry((*i, key)).or_insert((val.clone(), 0));
        e.1 += 1;
        if e.0 != val {
            t.violation(entry, format!("{} is not functional on its antecedent", entry.fmt(i)));
        }
    });
    spec_triples(entry, &states, &dup_instrs, |s0, d, s1| {
        let i = to_orig[d];
        let dupd = |l: Loc| m.dup(l).expect("original location");
        let (key, val) = if whole_state {
            (
                project(s0, &mut originals.iter().map(|&l| dupd(l))),
                project(s1, &mut originals.iter().map(|&l| dupd(l))),
            )
        } else {
            (vec![s0.get(d.ins.0), s0.get(d.ins.1)], vec![s1.get(d.out)])
        };
        if let Some((expected, count)) = left.get(&(i, key)) {
            t.instances += count;
            if *expected != val {
                t.violation(
                    entry,
                    format!("{} and {} disagree: {:?} vs {:?}", entry.fmt(&i), entry.fmt(d), expected, val),
                );
            }
        }
    });
    t
}

fn prop1(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    let inits = match entry.consistent_inits(&entry.map, b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let alphabet = entry.alphabet();
    for depth in 0..=b.prop1_depth {
        let cfg = OracleConfig { depth, alphabet: Some(alphabet.clone()), max_states: b.max_states };
        let report = match find_bugs(&entry.sys, &entry.spec, &inits, &cfg) {
            Ok(r) if r.complete => r,
            Ok(_) => {
                t.note(entry, format!("oracle budget exhausted at depth {depth}"));
                break;
            }
            Err(e) => {
                t.violation(entry, e);
                break;
            }
        };
        let cex = bounded_counterexample(&entry.sys, &entry.spec, &inits, &alphabet, depth);
        t.instances += 1;
        match (&cex, report.is_empty()) {
            (None, true) => {}
            (Some((_, path)), false) => {
                let last = path.last().expect("counterexamples are nonempty");
                if !report.bugs.iter().any(|bug| bug.instr == *last) {
                    t.violation(entry, format!("depth {depth}: {} missing from the oracle", entry.fmt(last)));
                }
            }
            (Some(_), true) => t.violation(entry, format!("depth {depth}: oracle empty but a violating path exists")),
            (None, false) => t.violation(entry, format!("depth {depth}: oracle reports bugs no path reaches")),
        }
    }
    t
}

fn for_each_sequence(alphabet: &[Instruction], n: usize, f: &mut dyn FnMut(&[Instruction])) {
    let mut idx = vec![0usize; n];
    let mut seq: Vec<Instruction> = vec![alphabet[0]; n];
    loop {
        for (k, &j) in idx.iter().enumerate() {
            seq[k] = alphabet[j];
        }
        f(&seq);
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < alphabet.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Orders of `n` originals and `n` duplicates in which each duplicate
/// follows its original; `true` marks an original.
fn ballot_orders(n: usize) -> Vec<Vec<bool>> {
    fn go(n: usize, o: usize, d: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if o == n && d == n {
            out.push(cur.clone());
            return;
        }
        if o < n {
            cur.push(true);
            go(n, o + 1, d, cur, out);
            cur.pop();
        }
        if d < o {
            cur.push(false);
            go(n, o, d + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, 0, 0, &mut Vec::new(), &mut out);
    out
}

fn lemma2(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    let m = &entry.map;
    let inits = match entry.consistent_inits(m, b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let alphabet = entry.originals();
    if alphabet.is_empty() {
        t.note(entry, "no original instructions");
        return t;
    }
    let strict = entry.config.declares_correct();
    let mut nonconforming = 0u64;
    for n in 1..=b.lemma2_bound {
        let orders = ballot_orders(n);
        for_each_sequence(&alphabet, n, &mut |sigma| {
            let dups = dup_seq(m, sigma).expect("originals");
            for order in &orders {
                let standard = order.iter().take(n).all(|&o| o);
                let (mut oi, mut di) = (0, 0);
                let seq: Vec<Instruction> = order
                    .iter()
                    .map(|&o| {
                        if o {
                            oi += 1;
                            sigma[oi - 1]
                        } else {
                            di += 1;
                            dups[di - 1]
                        }
                    })
                    .collect();
                for s0 in &inits {
                    let trace = run(&entry.sys, s0, &seq).expect("valid");
                    let bad_step = (0..seq.len()).find(|&j| {
                        !spec_holds(&entry.spec, &trace.states[j], &seq[j], &trace.states[j + 1]).unwrap_or(false)
                    });
                    if let Some(j) = bad_step {
                        nonconforming += 1;
                        if strict && nonconforming <= 5 {
                            t.violation(
                                entry,
                                format!("step {} ({}) violates the spec from {:?}", j + 1, entry.fmt(&seq[j]), s0.arch.0),
                            );
                        }
                        continue;
                    }
                    t.instances += 1;
                    let s = &trace.states;
                    if standard {
                        for (o, d) in m.pairs() {
                            if s[0].get(d) != s[n].get(d) {
                                t.violation(entry, format!("duplicate {d} moved during the original half"));
                            }
                            if s[n].get(o) != s[2 * n].get(o) {
                                t.violation(entry, format!("original {o} moved during the duplicate half"));
                            }
                        }
                    }
                    if !qed_consistent(m, trace.last()) {
                        let names: Vec<String> = seq.iter().map(|i| entry.fmt(i)).collect();
                        t.violation(entry, format!("conforming test {names:?} ends inconsistent"));
                    }
                }
            }
        });
    }
    if strict && nonconforming > 5 {
        t.violation(entry, format!("{} more nonconforming traces", nonconforming - 5));
    }
    t
}

fn search_config(entry: &CorpusEntry, b: &LawBudgets, bound: usize, families: Vec<Family>) -> SearchConfig {
    SearchConfig {
        bound,
        families,
        alphabet: entry.focus.clone(),
        inits: entry.inits.clone(),
        max_nops: b.max_nops,
        max_tests: 400_000_000,
        max_states: b.max_states,
        init_budget: b.init_budget,
    }
}

/// Confirms a failing test against the oracle: the states the test visits
/// are within the oracle's depth from the recorded initial states.
fn confirm_failure(entry: &CorpusEntry, b: &LawBudgets, test: &QedTest, init: &State) -> Result<Option<Bug>, String> {
    let alphabet: Vec<Instruction> =
        test.instructions().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let (inits, depth) = if test.family == Family::HardReset {
        let k = test.meta.prefix_len.unwrap_or(test.len() / 2 - 1);
        let trace = run_steps(&entry.sys, init, &test.steps).map_err(|e| e.to_string())?;
        let reset = State::initial(trace.states[k - 1].arch.clone());
        (vec![init.clone(), reset], k - 1)
    } else {
        (vec![init.clone()], test.len().saturating_sub(1))
    };
    let cfg = OracleConfig { depth, alphabet: Some(alphabet), max_states: b.max_states };
    let report = find_bugs(&entry.sys, &entry.spec, &inits, &cfg).map_err(|e| e.to_string())?;
    Ok(report.bugs.into_iter().next())
}

fn lemma3(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    let cfg = search_config(entry, b, b.search_bound, supported_families(&entry.sys));
    let result = match bmc_search(&entry.sys, &entry.map, &cfg) {
        Ok(r) => r,
        Err(e) => {
            t.violation(entry, format!("search error: {e}"));
            return t;
        }
    };
    match &result.outcome {
        SearchOutcome::NoFailure { complete: false, reason, .. } => {
            t.note(entry, format!("search incomplete: {}", reason.as_deref().unwrap_or("budget")))
        }
        SearchOutcome::NoFailure { .. } => t.note(entry, format!("no failing test up to bound {}", cfg.bound)),
        SearchOutcome::Failure { test, init, .. } => {
            t.instances += 1;
            match confirm_failure(entry, b, test, init) {
                Ok(Some(bug)) => t.note(
                    entry,
                    format!("{:?} test of length {} confirmed by {}", test.family, test.len(), entry.fmt(&bug.instr)),
                ),
                Ok(None) => t.violation(entry, format!("spurious {:?} counterexample of length {}", test.family, test.len())),
                Err(e) => t.violation(entry, format!("oracle error: {e}")),
            }
        }
    }
    t
}

fn candidate_maps(entry: &CorpusEntry) -> Vec<DupMap> {
    let mut maps = vec![entry.map.clone()];
    if entry.sys.locations() <= 8 {
        maps.extend(DupMap::enumerate_all(entry.sys.locations()).into_iter().filter(|m| *m != entry.map));
    }
    maps
}

fn lemma4(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    if !entry.injected() {
        return t;
    }
    let alphabet = entry.alphabet();
    let all_inits = match entry.all_inits(b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let cfg = OracleConfig { depth: b.oracle_depth, alphabet: Some(alphabet.clone()), max_states: b.max_states };
    let bugs = match find_bugs(&entry.sys, &entry.spec, &all_inits, &cfg) {
        Ok(r) => r.bugs,
        Err(e) => {
            t.violation(entry, e);
            return t;
        }
    };
    let maps = candidate_maps(entry);
    let mut per_map_inits: Vec<Option<Vec<State>>> = vec![None; maps.len()];
    let mut unconstructed = 0;
    for bug in &bugs {
        let mut built = false;
        for (mi, m) in maps.iter().enumerate() {
            if classify_instr(m, &bug.instr) != InstrClass::Duplicate {
                continue;
            }
            let inits = per_map_inits[mi].get_or_insert_with(|| entry.consistent_inits(m, b).unwrap_or_default());
            let connectors: Vec<Instruction> =
                alphabet.iter().copied().filter(|i| classify_instr(m, i) == InstrClass::Original).collect();
            let test = match build_bug_specific_test(
                &entry.sys,
                &entry.spec,
                m,
                bug,
                b.connector_depth,
                inits,
                Some(&connectors),
            ) {
                Ok(Some(test)) => test,
                Ok(None) => continue,
                Err(e) => {
                    t.violation(entry, format!("constructor error for {}: {e}", entry.fmt(&bug.instr)));
                    continue;
                }
            };
            built = true;
            let init = test.meta.init.clone().expect("constructed tests record their initial state");
            let (lx, ly) = test.meta.roles.expect("constructed tests record their roles");
            match test.meta.case {
                Some(BugCase::A) => t.case_a += 1,
                Some(BugCase::B) => t.case_b += 1,
                None => {}
            }
            match run_qed_test(&entry.sys, m, &test, &init) {
                Ok(v) if v.failed() && v.has_mismatch(lx, ly) => {}
                Ok(v) if v.failed() => t.violation(
                    entry,
                    format!("test for {} failed but ({lx}, {ly}) stayed consistent", entry.fmt(&bug.instr)),
                ),
                Ok(_) => t.violation(entry, format!("bug-specific test for {} passed", entry.fmt(&bug.instr))),
                Err(e) => t.violation(entry, e),
            }
            break;
        }
        if !built {
            unconstructed += 1;
        }
    }
    if unconstructed > 0 {
        t.note(entry, format!("{unconstructed} of {} bugs have no bug-specific test within the budgets", bugs.len()));
    }
    t
}

fn lemma5(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    if entry.sys.soft_reset_opcode().is_none() {
        t.note(entry, "no soft-reset instruction");
        return t;
    }
    let alphabet = entry.alphabet();
    let all_inits = match entry.all_inits(b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    if single_instruction_bug_over(&entry.sys, &entry.spec, &all_inits, &alphabet).is_some() {
        t.note(entry, "not single-instruction correct");
        return t;
    }
    let m = &entry.map;
    let inits = match entry.consistent_inits(m, b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let prefix = match find_bug_prefix(&entry.sys, &entry.spec, m, &inits, &entry.originals(), b.prefix_len) {
        Ok(Some(p)) => p,
        Ok(None) => {
            t.note(entry, format!("no bug prefix up to length {}", b.prefix_len));
            return t;
        }
        Err(e) => {
            t.violation(entry, e);
            return t;
        }
    };
    let (s0, prefix) = prefix;
    t.instances += 1;
    match build_soft_reset_test(&entry.sys, &entry.spec, m, &prefix, &s0) {
        Ok(test) => match run_qed_test(&entry.sys, m, &test, &s0) {
            Ok(v) if v.failed() => {
                t.note(entry, format!("k = {} soft-reset test fails", prefix.len()));
            }
            Ok(_) => t.violation(entry, format!("soft-reset test for k = {} passed", prefix.len())),
            Err(e) => t.violation(entry, e),
        },
        Err(e) => t.violation(entry, e),
    }
    t
}

fn thm2(entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    let mut t = Tally::default();
    if !supported_families(&entry.sys).contains(&Family::HardReset) {
        t.note(entry, "no hard-reset support");
        return t;
    }
    let alphabet = entry.alphabet();
    let inits = match entry.all_inits(b) {
        Ok(s) => s,
        Err(e) => {
            t.note(entry, format!("skipped: {e}"));
            return t;
        }
    };
    let si_correct = single_instruction_bug_over(&entry.sys, &entry.spec, &inits, &alphabet).is_none();
    let mut cfg = search_config(entry, b, b.hard_reset_bound, vec![Family::HardReset]);
    cfg.alphabet = Some(alphabet.clone());
    let search = match bmc_search(&entry.sys, &entry.map, &cfg) {
        Ok(r) => r,
        Err(e) => {
            t.violation(entry, format!("search error: {e}"));
            return t;
        }
    };
    if !search.is_complete() {
        t.note(entry, "hard-reset search incomplete");
        return t;
    }
    let first_failing_k = search.failure().map(|(test, _, _)| test.meta.prefix_len.unwrap_or(0));
    for k in 2..=b.hard_reset_bound {
        let lhs = si_correct && first_failing_k.is_none_or(|f| f > k);
        let cfg = OracleConfig { depth: k - 1, alphabet: Some(alphabet.clone()), max_states: b.max_states };
        let report = match find_bugs(&entry.sys, &entry.spec, &inits, &cfg) {
            Ok(r) if r.complete => r,
            Ok(_) => {
                t.note(entry, format!("oracle budget exhausted at depth {}", k - 1));
                break;
            }
            Err(e) => {
                t.violation(entry, e);
                break;
            }
        };
        t.instances += 1;
        if lhs != report.is_empty() {
            t.violation(
                entry,
                format!(
                    "k = {k}: single-instruction correct {si_correct}, first failing hard-reset k {first_failing_k:?}, oracle bugs {}",
                    report.bugs.len()
                ),
            );
        }
    }
    t
}

fn check_entry(law: LawId, entry: &CorpusEntry, b: &LawBudgets) -> Tally {
    match law {
        LawId::Eq2 => frame_law(entry, b, InstrClass::Original),
        LawId::Eq3 => frame_law(entry, b, InstrClass::Duplicate),
        LawId::Eq4 => congruence_law(entry, b),
        LawId::Cor1 => pair_law(entry, b, false),
        LawId::Lemma1 => pair_law(entry, b, true),
        LawId::Prop1 => prop1(entry, b),
        LawId::Lemma2 => lemma2(entry, b),
        LawId::Lemma3 => lemma3(entry, b),
        LawId::Lemma4A | LawId::Lemma4B => lemma4(entry, b),
        LawId::Lemma5 => lemma5(entry, b),
        LawId::Thm2 => thm2(entry, b),
        LawId::Thm1 => {
            let mut t = lemma3(entry, b);
            t.merge(lemma4(entry, b));
            t
        }
    }
}

fn instantiation(law: LawId, b: &LawBudgets) -> String {
    match law {
        LawId::Eq2 | LawId::Eq3 | LawId::Eq4 | LawId::Cor1 | LawId::Lemma1 => {
            format!("all states reachable within {} steps x all instructions", b.state_depth)
        }
        LawId::Prop1 => format!("QED-consistent initial states, depths 0..={}", b.prop1_depth),
        LawId::Lemma2 => {
            format!("standard and interleaved tests with n <= {} from every QED-consistent initial state", b.lemma2_bound)
        }
        LawId::Lemma3 => format!("search over all supported families, bound {}", b.search_bound),
        LawId::Lemma4A | LawId::Lemma4B | LawId::Thm1 => format!(
            "oracle depth {}, connector depth {}, default and alternative dup maps",
            b.oracle_depth, b.connector_depth
        ),
        LawId::Lemma5 => format!("minimal bug prefixes up to length {}", b.prefix_len),
        LawId::Thm2 => format!("hard-reset tests with 2 <= k <= {}, oracle depth k-1", b.hard_reset_bound),
    }
}

/// Checks one law over every corpus system.
pub fn check_law(law: LawId, corpus: &Corpus, budgets: &LawBudgets) -> LawReport {
    let tallies: Vec<Tally> = corpus.entries.par_iter().map(|e| check_entry(law, e, budgets)).collect();
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }
    let mut instances = total.instances;
    match law {
        LawId::Lemma4A => instances = total.case_a,
        LawId::Lemma4B => instances = total.case_b,
        LawId::Thm1 => instances += total.case_a + total.case_b,
        _ => {}
    }
    if matches!(law, LawId::Lemma4A | LawId::Lemma4B) && instances == 0 {
        total.violations.push("no constructed instance in the corpus".to_string());
    }
    LawReport {
        law,
        statement: law.statement().to_string(),
        instantiation: instantiation(law, budgets),
        systems: corpus.entries.iter().map(|e| e.name().to_string()).collect(),
        instances,
        violations: total.violations,
        notes: total.notes,
    }
}

pub fn check_all(corpus: &Corpus, budgets: &LawBudgets) -> Vec<LawReport> {
    LawId::ALL.iter().map(|&law| check_law(law, corpus, budgets)).collect()
}

/// The initial state a trace starts from, rendered for messages.
pub fn describe_state(s: &State) -> String {
    format!("{:?}@{}", s.arch.0, s.narch.0)
}

//! QED-consistency, QED tests and their verdicts.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dup::{classify_instr, dup_seq, DupError, DupMap, InstrClass};
use crate::model::{
    enumerate_assignments, run_steps, ArchState, InitStrategy, Instruction, Loc, ModelError, Path, State, Step,
    TransitionSystem,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QedError {
    #[error("initial state is not QED-consistent")]
    NotConsistent,
    #[error("state is not an initial state")]
    NotInitial,
    #[error("sequence is not a well-formed {0:?} test")]
    Malformed(Family),
    #[error("hard-reset test does not reset to its initial state")]
    WrongResetTarget,
    #[error("dup map covers {map} locations but the system has {system}")]
    MapMismatch { map: usize, system: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dup(#[from] DupError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Standard,
    Interleaved,
    Extended,
    SoftReset,
    HardReset,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Standard, Family::Interleaved, Family::Extended, Family::SoftReset, Family::HardReset];

    pub fn name(self) -> &'static str {
        match self {
            Family::Standard => "standard",
            Family::Interleaved => "interleaved",
            Family::Extended => "extended",
            Family::SoftReset => "soft_reset",
            Family::HardReset => "hard_reset",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL.into_iter().find(|f| f.name() == norm)
    }
}

/// Which location-preservation requirements a bug-specific test meets:
/// `A` for a corrupted output, `B` for a corrupted duplicate location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugCase {
    A,
    B,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestMeta {
    /// Length of the original half (or of the bug prefix for reset tests).
    pub original_len: usize,
    /// Bug-prefix size `k` for soft- and hard-reset tests.
    pub prefix_len: Option<usize>,
    /// Required initial state, when the construction fixes one.
    pub init: Option<State>,
    /// `(l_x, l_y)` expected to end up inconsistent.
    pub roles: Option<(Loc, Loc)>,
    pub case: Option<BugCase>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QedTest {
    pub steps: Vec<Step>,
    pub family: Family,
    pub meta: TestMeta,
}

impl QedTest {
    /// `sigma :: dup(sigma)`.
    pub fn standard(m: &DupMap, originals: &[Instruction]) -> Result<QedTest, DupError> {
        let dups = dup_seq(m, originals)?;
        let steps = originals.iter().chain(&dups).copied().map(Step::Exec).collect();
        Ok(QedTest {
            steps,
            family: Family::Standard,
            meta: TestMeta { original_len: originals.len(), ..TestMeta::default() },
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total order used for minimality: length first, then lexicographic
    /// over the per-step encodings.
    pub fn order(&self, other: &QedTest) -> Ordering {
        order_steps(&self.steps, &other.steps)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.steps.iter().filter_map(Step::instruction)
    }
}

pub fn order_steps(a: &[Step], b: &[Step]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// An original location and its duplicate holding different values.
    Pair { original: Loc, duplicate: Loc },
    /// A location whose value differs between the two compared states of a
    /// hard-reset test.
    Location { loc: Loc },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub trace: Path,
    /// Present iff the test failed.
    pub witness: Option<Witness>,
    /// Every inconsistent pair (or differing location), ascending.
    pub mismatches: Vec<Witness>,
}

impl Verdict {
    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }

    pub fn has_mismatch(&self, original: Loc, duplicate: Loc) -> bool {
        self.mismatches.contains(&Witness::Pair { original, duplicate })
    }
}

/// `s(l) = s(d(l))` for every original `l`.
pub fn qed_consistent(m: &DupMap, s: &State) -> bool {
    m.pairs().all(|(o, d)| s.get(o) == s.get(d))
}

/// The dual formulation over duplicate locations.
pub fn qed_consistent_dual(m: &DupMap, s: &State) -> bool {
    m.duplicates().all(|d| s.get(d) == s.get(m.undup(d).expect("duplicate has a preimage")))
}

/// Inconsistent `(l, d(l))` pairs, ascending by `l`.
pub fn inconsistent_pairs(m: &DupMap, s: &State) -> Vec<(Loc, Loc)> {
    m.pairs().filter(|&(o, d)| s.get(o) != s.get(d)).collect()
}

/// Picks the reported pair: the one containing the output of the latest
/// instruction that wrote into any inconsistent pair, else the least `l`.
fn pick_pair_witness(m: &DupMap, pairs: &[(Loc, Loc)], steps: &[Step]) -> Option<Witness> {
    let by_write = steps.iter().rev().filter_map(Step::instruction).find_map(|i| {
        let o = if m.is_original(i.out) { i.out } else { m.undup(i.out)? };
        pairs.iter().find(|(po, _)| *po == o).copied()
    });
    by_write.or_else(|| pairs.first().copied()).map(|(original, duplicate)| Witness::Pair { original, duplicate })
}

/// QED-consistent initial states: values chosen freely on `O_L` (in
/// ascending location order) and mirrored onto `D_L`. `Explicit` states
/// are taken as full architectural states and must already be consistent.
pub fn consistent_initial_states(
    sys: &TransitionSystem,
    m: &DupMap,
    strategy: &InitStrategy,
    budget: usize,
) -> Result<Vec<State>, QedError> {
    if m.locations() != sys.locations() {
        return Err(QedError::MapMismatch { map: m.locations(), system: sys.locations() });
    }
    if let InitStrategy::Explicit { states } = strategy {
        return states
            .iter()
            .map(|a| {
                let s = State::initial(ArchState(a.clone()));
                sys.validate_state(&s)?;
                if !qed_consistent(m, &s) {
                    return Err(QedError::NotConsistent);
                }
                Ok(s)
            })
            .collect();
    }
    let originals: Vec<Loc> = m.originals().collect();
    let assignments = enumerate_assignments(sys.values(), originals.len(), strategy, budget)?;
    Ok(assignments
        .into_iter()
        .map(|vals| {
            let mut arch = ArchState::zeros(sys.locations());
            for (&o, v) in originals.iter().zip(vals) {
                arch.set(o, v);
                arch.set(m.dup(o).expect("original"), v);
            }
            State::initial(arch)
        })
        .collect())
}

/// Executes `t` from `s0` and judges the final state. Reset-free families
/// and soft-reset tests pass iff the final state is QED-consistent;
/// hard-reset tests compare the states after the two executions of the
/// buggy position.
pub fn run_qed_test(sys: &TransitionSystem, m: &DupMap, t: &QedTest, s0: &State) -> Result<Verdict, QedError> {
    if t.family == Family::HardReset {
        return hard_reset_verdict(sys, t, s0);
    }
    if m.locations() != sys.locations() {
        return Err(QedError::MapMismatch { map: m.locations(), system: sys.locations() });
    }
    if !s0.is_initial() {
        return Err(QedError::NotInitial);
    }
    if !qed_consistent(m, s0) {
        return Err(QedError::NotConsistent);
    }
    let trace = run_steps(sys, s0, &t.steps)?;
    Ok(consistency_verdict(m, trace))
}

pub(crate) fn consistency_verdict(m: &DupMap, trace: Path) -> Verdict {
    let pairs = inconsistent_pairs(m, trace.last());
    let witness = pick_pair_witness(m, &pairs, &trace.steps);
    Verdict {
        outcome: if pairs.is_empty() { Outcome::Pass } else { Outcome::Fail },
        witness,
        mismatches: pairs.into_iter().map(|(original, duplicate)| Witness::Pair { original, duplicate }).collect(),
        trace,
    }
}

/// Verdict for `p :: i_R :: p[..k-1] :: i_r :: p[k]`: fails iff the states
/// after positions `k` and `2k+2` differ architecturally.
pub(crate) fn hard_reset_verdict(sys: &TransitionSystem, t: &QedTest, mu: &State) -> Result<Verdict, QedError> {
    let k = hard_reset_prefix_len(sys, t).ok_or(QedError::Malformed(Family::HardReset))?;
    if !mu.is_initial() {
        return Err(QedError::NotInitial);
    }
    match &t.steps[k] {
        Step::HardReset(target) if *target == mu.arch => {}
        _ => return Err(QedError::WrongResetTarget),
    }
    let trace = run_steps(sys, mu, &t.steps)?;
    let diff = trace.states[k].arch.diff(&trace.states[2 * k + 2].arch);
    Ok(Verdict {
        outcome: if diff.is_empty() { Outcome::Pass } else { Outcome::Fail },
        witness: diff.first().map(|&loc| Witness::Location { loc }),
        mismatches: diff.into_iter().map(|loc| Witness::Location { loc }).collect(),
        trace,
    })
}

/// `k` if `t` has the hard-reset shape, with `k >= 2`.
pub(crate) fn hard_reset_prefix_len(sys: &TransitionSystem, t: &QedTest) -> Option<usize> {
    let n = t.steps.len();
    if n < 6 || n % 2 != 0 {
        return None;
    }
    let k = (n - 2) / 2;
    let s = &t.steps;
    let shape = matches!(s[k], Step::HardReset(_))
        && s[..k].iter().all(|x| matches!(x, Step::Exec(_)))
        && s[k + 1..2 * k] == s[..k - 1]
        && matches!(s[2 * k], Step::Exec(i) if Some(i.opcode) == sys.soft_reset_opcode())
        && s[2 * k + 1] == s[k - 1];
    shape.then_some(k)
}

fn exec_only(seq: &[Step]) -> Option<Vec<Instruction>> {
    seq.iter().map(|s| s.instruction().copied()).collect()
}

fn is_standard(m: &DupMap, seq: &[Instruction]) -> bool {
    if seq.is_empty() || seq.len() % 2 != 0 {
        return false;
    }
    let (orig, dups) = seq.split_at(seq.len() / 2);
    orig.iter().all(|i| classify_instr(m, i) == InstrClass::Original)
        && dup_seq(m, orig).is_ok_and(|d| d == dups)
}

fn is_interleaved(m: &DupMap, seq: &[Instruction]) -> bool {
    let mut origs = Vec::new();
    let mut dups = Vec::new();
    for (pos, i) in seq.iter().enumerate() {
        match classify_instr(m, i) {
            InstrClass::Original => origs.push((pos, *i)),
            InstrClass::Duplicate => dups.push((pos, *i)),
            InstrClass::Mixed => return false,
        }
    }
    if origs.is_empty() || origs.len() != dups.len() {
        return false;
    }
    let sigma: Vec<Instruction> = origs.iter().map(|&(_, i)| i).collect();
    let Ok(expected) = dup_seq(m, &sigma) else { return false };
    origs
        .iter()
        .zip(&dups)
        .zip(&expected)
        .all(|(((po, _), (pd, d)), e)| pd > po && d == e)
}

fn is_extended(sys: &TransitionSystem, m: &DupMap, seq: &[Instruction]) -> bool {
    let nop_positions: Vec<usize> = (0..seq.len()).filter(|&k| sys.is_nop_form(&seq[k])).collect();
    if nop_positions.len() > 16 {
        return false;
    }
    (0u32..(1 << nop_positions.len())).any(|mask| {
        let kept: Vec<Instruction> = seq
            .iter()
            .enumerate()
            .filter(|(k, _)| nop_positions.iter().position(|p| p == k).is_none_or(|bit| mask & (1 << bit) == 0))
            .map(|(_, i)| *i)
            .collect();
        is_standard(m, &kept)
    })
}

fn is_soft_reset(sys: &TransitionSystem, m: &DupMap, seq: &[Instruction]) -> bool {
    let Ok(ir) = sys.soft_reset() else { return false };
    if seq.len() % 3 != 0 || seq.len() < 6 {
        return false;
    }
    let k = seq.len() / 3;
    let (prefix, tail) = seq.split_at(k);
    let Ok(dups) = dup_seq(m, prefix) else { return false };
    tail.chunks(2).zip(&dups).all(|(pair, d)| pair[0] == ir && pair[1] == *d)
}

/// Structural membership of `seq` in a test family.
pub fn is_qed_test(sys: &TransitionSystem, m: &DupMap, seq: &[Step], family: Family) -> bool {
    if family == Family::HardReset {
        let t = QedTest { steps: seq.to_vec(), family, meta: TestMeta::default() };
        return hard_reset_prefix_len(sys, &t).is_some();
    }
    let Some(instrs) = exec_only(seq) else { return false };
    match family {
        Family::Standard => is_standard(m, &instrs),
        Family::Interleaved => is_interleaved(m, &instrs),
        Family::Extended => is_extended(sys, m, &instrs),
        Family::SoftReset => is_soft_reset(sys, m, &instrs),
        Family::HardReset => unreachable!(),
    }
}

//! The abstract specification relation, violation classification and the
//! brute-force bug oracle.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    enumerate_reachable, Instruction, Loc, ModelError, OpcodeId, State, Step, TransitionSystem, Value,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("opcode {0} has no specification function")]
    MissingOpcode(u8),
    #[error("hard-reset steps are not covered by the specification")]
    HardReset,
    #[error("the triple satisfies the specification")]
    NotAViolation,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `f_op : V^2 -> V` as a lookup table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpcodeSpec {
    values: u16,
    table: Vec<Value>,
}

impl OpcodeSpec {
    pub fn from_fn(values: u16, f: impl Fn(Value, Value) -> Value) -> Self {
        let v = values as usize;
        let mut table = Vec::with_capacity(v * v);
        for a in 0..v {
            for b in 0..v {
                table.push(f(a as Value, b as Value));
            }
        }
        OpcodeSpec { values, table }
    }

    pub fn eval(&self, a: Value, b: Value) -> Value {
        self.table[a as usize * self.values as usize + b as usize]
    }
}

/// The relation `S` induced by one specification function per opcode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecRelation {
    specs: Vec<Option<OpcodeSpec>>,
}

impl SpecRelation {
    pub fn new(specs: Vec<Option<OpcodeSpec>>) -> Self {
        SpecRelation { specs }
    }

    pub fn function(&self, op: OpcodeId) -> Result<&OpcodeSpec, SpecError> {
        self.specs.get(op.index()).and_then(|s| s.as_ref()).ok_or(SpecError::MissingOpcode(op.0))
    }

    /// `f_op(s(in1), s(in2))`.
    pub fn expected_output(&self, s: &State, i: &Instruction) -> Result<Value, SpecError> {
        Ok(self.function(i.opcode)?.eval(s.get(i.ins.0), s.get(i.ins.1)))
    }

    /// The unique architectural successor the specification allows; the
    /// non-architectural part is copied from `s`.
    pub fn successor(&self, s: &State, i: &Instruction) -> Result<State, SpecError> {
        let mut next = s.clone();
        next.arch.set(i.out, self.expected_output(s, i)?);
        Ok(next)
    }
}

/// `S(s, i, s2)`: every non-output location is unchanged and the output
/// holds `f_op` of the inputs. Only architectural parts are compared.
pub fn spec_holds(spec: &SpecRelation, s: &State, i: &Instruction, s2: &State) -> Result<bool, SpecError> {
    let expected = spec.expected_output(s, i)?;
    if s2.get(i.out) != expected {
        return Ok(false);
    }
    Ok(s.arch.0.iter().zip(&s2.arch.0).enumerate().all(|(l, (a, b))| l == i.out.index() || a == b))
}

pub fn spec_holds_step(spec: &SpecRelation, s: &State, step: &Step, s2: &State) -> Result<bool, SpecError> {
    match step {
        Step::Exec(i) => spec_holds(spec, s, i, s2),
        Step::HardReset(_) => Err(SpecError::HardReset),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    TypeA,
    TypeB { bad_locations: Vec<Loc> },
    Both { bad_locations: Vec<Loc> },
}

impl ViolationKind {
    pub fn is_type_a(&self) -> bool {
        matches!(self, ViolationKind::TypeA | ViolationKind::Both { .. })
    }

    pub fn bad_locations(&self) -> &[Loc] {
        match self {
            ViolationKind::TypeA => &[],
            ViolationKind::TypeB { bad_locations } | ViolationKind::Both { bad_locations } => bad_locations,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ViolationKind::TypeA => "A",
            ViolationKind::TypeB { .. } => "B",
            ViolationKind::Both { .. } => "A+B",
        }
    }
}

/// Which clause of the specification a failing triple breaks.
pub fn classify_violation(
    spec: &SpecRelation,
    s: &State,
    i: &Instruction,
    s2: &State,
) -> Result<ViolationKind, SpecError> {
    let type_a = s2.get(i.out) != spec.expected_output(s, i)?;
    let bad: Vec<Loc> = s.arch.diff(&s2.arch).into_iter().filter(|&l| l != i.out).collect();
    match (type_a, bad.is_empty()) {
        (false, true) => Err(SpecError::NotAViolation),
        (true, true) => Ok(ViolationKind::TypeA),
        (false, false) => Ok(ViolationKind::TypeB { bad_locations: bad }),
        (true, false) => Ok(ViolationKind::Both { bad_locations: bad }),
    }
}

/// `<i_b, T>` restricted to the explored states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bug {
    pub instr: Instruction,
    pub triggers: BTreeSet<State>,
}

impl Bug {
    /// Violation kinds over all trigger states, deduplicated.
    pub fn kinds(&self, sys: &TransitionSystem, spec: &SpecRelation) -> BTreeSet<ViolationKind> {
        self.triggers
            .iter()
            .filter_map(|t| {
                let mut next = t.clone();
                sys.apply(&mut next, &self.instr);
                classify_violation(spec, t, &self.instr, &next).ok()
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub depth: usize,
    /// Instructions explored; the system's full alphabet when `None`.
    pub alphabet: Option<Vec<Instruction>>,
    pub max_states: usize,
}

impl OracleConfig {
    pub fn new(depth: usize) -> Self {
        OracleConfig { depth, alphabet: None, max_states: 4_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    /// One entry per failing instruction, ordered by instruction.
    pub bugs: Vec<Bug>,
    pub depth: usize,
    pub states_explored: usize,
    /// False when the state budget cut the exploration short; `bugs` then
    /// covers only a prefix of the reachable set.
    pub complete: bool,
}

impl OracleReport {
    pub fn is_empty(&self) -> bool {
        self.bugs.is_empty()
    }
}

/// Every instruction that violates `S` in some state reachable from
/// `inits` within `cfg.depth` instructions.
pub fn find_bugs(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    inits: &[State],
    cfg: &OracleConfig,
) -> Result<OracleReport, SpecError> {
    let alphabet = cfg.alphabet.clone().unwrap_or_else(|| sys.alphabet());
    for i in &alphabet {
        spec.function(i.opcode)?;
    }
    let (states, complete) = match enumerate_reachable(sys, inits, &alphabet, cfg.depth, cfg.max_states) {
        Ok(set) => (set.into_iter().collect::<Vec<_>>(), true),
        Err(ModelError::Budget { .. }) => {
            // Fall back to the largest depth that fits.
            let mut best = Vec::new();
            for d in 0..cfg.depth {
                match enumerate_reachable(sys, inits, &alphabet, d, cfg.max_states) {
                    Ok(set) => best = set.into_iter().collect(),
                    Err(_) => break,
                }
            }
            (best, false)
        }
        Err(e) => return Err(e.into()),
    };
    let violations: Vec<(Instruction, State)> = states
        .par_iter()
        .flat_map_iter(|s| {
            let alphabet = &alphabet;
            alphabet.iter().filter_map(move |i| {
                let mut next = s.clone();
                sys.apply(&mut next, i);
                match spec_holds(spec, s, i, &next) {
                    Ok(false) => Some((*i, s.clone())),
                    _ => None,
                }
            })
        })
        .collect();
    let mut grouped: BTreeMap<Instruction, BTreeSet<State>> = BTreeMap::new();
    for (i, s) in violations {
        grouped.entry(i).or_default().insert(s);
    }
    Ok(OracleReport {
        bugs: grouped.into_iter().map(|(instr, triggers)| Bug { instr, triggers }).collect(),
        depth: cfg.depth,
        states_explored: states.len(),
        complete,
    })
}

/// Every instruction satisfies `S` from every state in `inits`.
pub fn single_instruction_correct(sys: &TransitionSystem, spec: &SpecRelation, inits: &[State]) -> bool {
    single_instruction_bug(sys, spec, inits).is_none()
}

/// The first `(state, instruction)` pair (in input order) violating `S`.
pub fn single_instruction_bug(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    inits: &[State],
) -> Option<(State, Instruction)> {
    single_instruction_bug_over(sys, spec, inits, &sys.alphabet())
}

/// [`single_instruction_bug`] restricted to `alphabet`.
pub fn single_instruction_bug_over(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    inits: &[State],
    alphabet: &[Instruction],
) -> Option<(State, Instruction)> {
    inits
        .par_iter()
        .enumerate()
        .filter_map(|(k, s)| {
            alphabet.iter().find_map(|i| {
                let mut next = s.clone();
                sys.apply(&mut next, i);
                match spec_holds(spec, s, i, &next) {
                    Ok(true) => None,
                    _ => Some((k, s.clone(), *i)),
                }
            })
        })
        .min_by_key(|(k, _, _)| *k)
        .map(|(_, s, i)| (s, i))
}

/// Independent bounded-correctness check by depth-first path enumeration
/// (no state deduplication). Returns the first violating path found.
pub fn bounded_counterexample(
    sys: &TransitionSystem,
    spec: &SpecRelation,
    inits: &[State],
    alphabet: &[Instruction],
    depth: usize,
) -> Option<(State, Vec<Instruction>)> {
    fn dfs(
        sys: &TransitionSystem,
        spec: &SpecRelation,
        s: &State,
        alphabet: &[Instruction],
        remaining: usize,
        prefix: &mut Vec<Instruction>,
    ) -> bool {
        for i in alphabet {
            let mut next = s.clone();
            sys.apply(&mut next, i);
            prefix.push(*i);
            if !spec_holds(spec, s, i, &next).unwrap_or(false) {
                return true;
            }
            if remaining > 0 && dfs(sys, spec, &next, alphabet, remaining - 1, prefix) {
                return true;
            }
            prefix.pop();
        }
        false
    }
    inits.iter().find_map(|s0| {
        let mut prefix = Vec::new();
        dfs(sys, spec, s0, alphabet, depth, &mut prefix).then(|| (s0.clone(), prefix))
    })
}

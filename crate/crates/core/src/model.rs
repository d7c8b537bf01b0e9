//! Processors as finite transition systems.
//!
//! A state pairs an architectural part (one value per location) with a
//! non-architectural part. For the systems built here the non-architectural
//! part is a bounded window of recently executed `(opcode, output)` entries,
//! packed into a single integer so that the initial element `n0` is index 0.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Element of the value domain `Z_|V|`.
pub type Value = u8;

/// Largest supported value domain.
pub const MAX_VALUES: u16 = 256;
/// Largest supported location count.
pub const MAX_LOCATIONS: u16 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Loc(pub u8);

impl Loc {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpcodeId(pub u8);

impl OpcodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Regular,
    Nop,
    SoftReset,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub id: OpcodeId,
    pub name: String,
    pub role: Role,
}

/// `(opcode, out, (in1, in2))`. The derived ordering is the lexicographic
/// order on `(opcode id, out id, in1 id, in2 id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: OpcodeId,
    pub out: Loc,
    pub ins: (Loc, Loc),
}

impl Instruction {
    pub fn new(opcode: OpcodeId, out: Loc, in1: Loc, in2: Loc) -> Self {
        Instruction { opcode, out, ins: (in1, in2) }
    }

    /// `(op, l, (l, l))`.
    pub fn self_addressed(opcode: OpcodeId, loc: Loc) -> Self {
        Instruction::new(opcode, loc, loc, loc)
    }

    pub fn locations(&self) -> [Loc; 3] {
        [self.out, self.ins.0, self.ins.1]
    }

    pub fn map_locations(&self, mut f: impl FnMut(Loc) -> Loc) -> Instruction {
        Instruction { opcode: self.opcode, out: f(self.out), ins: (f(self.ins.0), f(self.ins.1)) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchState(pub Vec<Value>);

impl ArchState {
    pub fn zeros(locations: usize) -> Self {
        ArchState(vec![0; locations])
    }

    pub fn get(&self, loc: Loc) -> Value {
        self.0[loc.index()]
    }

    pub fn set(&mut self, loc: Loc, v: Value) {
        self.0[loc.index()] = v;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Locations whose values differ, ascending.
    pub fn diff(&self, other: &ArchState) -> Vec<Loc> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| Loc(i as u8))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NarchState(pub u32);

impl NarchState {
    pub const INITIAL: NarchState = NarchState(0);

    pub fn is_initial(self) -> bool {
        self == Self::INITIAL
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub arch: ArchState,
    pub narch: NarchState,
}

impl State {
    pub fn initial(arch: ArchState) -> Self {
        State { arch, narch: NarchState::INITIAL }
    }

    pub fn get(&self, loc: Loc) -> Value {
        self.arch.get(loc)
    }

    pub fn is_initial(&self) -> bool {
        self.narch.is_initial()
    }
}

/// One element of an executable sequence. Hard resets are a family of
/// instructions indexed by their target initial state, so they are kept
/// apart from the `opcode x L x L^2` instruction set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Exec(Instruction),
    HardReset(ArchState),
}

impl Step {
    pub fn instruction(&self) -> Option<&Instruction> {
        match self {
            Step::Exec(i) => Some(i),
            Step::HardReset(_) => None,
        }
    }
}

impl From<Instruction> for Step {
    fn from(i: Instruction) -> Self {
        Step::Exec(i)
    }
}

/// Pattern for one slot of the history window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotPattern {
    /// Matches any slot, including an empty one.
    Any,
    /// Matches any slot that holds an executed instruction.
    Executed,
    /// Matches a slot holding this opcode.
    Op(OpcodeId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Trigger {
    /// Most recent slot first.
    pub history: Vec<SlotPattern>,
    pub opcode: Option<OpcodeId>,
    pub out: Option<Loc>,
    pub in1: Option<Loc>,
    pub in2: Option<Loc>,
    /// Fires only if an input of the current instruction is the output of
    /// the immediately preceding one.
    pub reads_previous_output: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Effect {
    /// Output gets `f_op(inputs) + delta`.
    CorruptOutput { delta: Value },
    /// A non-output location is overwritten.
    Stomp { loc: Loc, value: Value },
    Both { delta: Value, loc: Loc, value: Value },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Injection {
    pub name: String,
    pub trigger: Trigger,
    pub effect: Effect,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Semantics {
    /// Row-major `|V| x |V|` table.
    Table(Vec<Value>),
    Nop,
    SoftReset,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("location {loc} out of range (system has {locations} locations)")]
    LocationOutOfRange { loc: u8, locations: usize },
    #[error("opcode {opcode} out of range (system has {opcodes} opcodes)")]
    OpcodeOutOfRange { opcode: u8, opcodes: usize },
    #[error("state has {got} locations, expected {expected}")]
    StateShape { got: usize, expected: usize },
    #[error("value {value} outside the domain of size {values}")]
    ValueOutOfRange { value: Value, values: u16 },
    #[error("non-architectural state {0} is not a member of the system")]
    UnknownNarch(u32),
    #[error("system does not support {0}")]
    Unsupported(&'static str),
    #[error("hard-reset target must be an initial state")]
    NotInitial,
    #[error("state budget of {budget} exceeded after {visited} states")]
    Budget { visited: usize, budget: usize },
}

/// A finite processor model `(V, L, S_na, n0, opcodes, delta)`.
///
/// Instances are immutable once built and can be shared read-only across
/// worker threads.
#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub(crate) name: String,
    pub(crate) values: u16,
    pub(crate) locations: u16,
    pub(crate) opcodes: Vec<Opcode>,
    pub(crate) semantics: Vec<Semantics>,
    pub(crate) history: usize,
    pub(crate) injections: Vec<Injection>,
    pub(crate) hard_reset: bool,
    narch_base: u32,
    narch_count: u32,
}

impl TransitionSystem {
    pub(crate) fn new(
        name: String,
        values: u16,
        locations: u16,
        opcodes: Vec<Opcode>,
        semantics: Vec<Semantics>,
        history: usize,
        injections: Vec<Injection>,
        hard_reset: bool,
    ) -> Option<Self> {
        let narch_base = 1 + opcodes.len() as u32 * locations as u32;
        let narch_count = narch_base.checked_pow(history as u32)?;
        Some(TransitionSystem {
            name,
            values,
            locations,
            opcodes,
            semantics,
            history,
            injections,
            hard_reset,
            narch_base,
            narch_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `|V|`.
    pub fn values(&self) -> u16 {
        self.values
    }

    /// `|L|`.
    pub fn locations(&self) -> usize {
        self.locations as usize
    }

    pub fn opcodes(&self) -> &[Opcode] {
        &self.opcodes
    }

    pub fn opcode(&self, id: OpcodeId) -> Option<&Opcode> {
        self.opcodes.get(id.index())
    }

    pub fn opcode_by_name(&self, name: &str) -> Option<OpcodeId> {
        self.opcodes.iter().find(|o| o.name.eq_ignore_ascii_case(name)).map(|o| o.id)
    }

    pub fn history_len(&self) -> usize {
        self.history
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    pub fn narch_count(&self) -> u32 {
        self.narch_count
    }

    pub fn supports_hard_reset(&self) -> bool {
        self.hard_reset
    }

    fn role_opcode(&self, role: Role) -> Option<OpcodeId> {
        self.opcodes.iter().find(|o| o.role == role).map(|o| o.id)
    }

    pub fn nop_opcode(&self) -> Option<OpcodeId> {
        self.role_opcode(Role::Nop)
    }

    pub fn soft_reset_opcode(&self) -> Option<OpcodeId> {
        self.role_opcode(Role::SoftReset)
    }

    /// The designated NOP, `(NOP, l0, (l0, l0))`.
    pub fn canonical_nop(&self) -> Option<Instruction> {
        self.nop_opcode().map(|op| Instruction::self_addressed(op, Loc(0)))
    }

    /// Every instruction the oracle and the searches range over: all
    /// regular-opcode instructions plus the self-addressed forms of the
    /// NOP and soft-reset opcodes. Sorted.
    pub fn alphabet(&self) -> Vec<Instruction> {
        let n = self.locations as u8;
        let mut out = Vec::new();
        for op in &self.opcodes {
            match op.role {
                Role::Regular => {
                    for o in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                out.push(Instruction::new(op.id, Loc(o), Loc(a), Loc(b)));
                            }
                        }
                    }
                }
                Role::Nop | Role::SoftReset => {
                    for l in 0..n {
                        out.push(Instruction::self_addressed(op.id, Loc(l)));
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Instructions whose execution never changes the architectural state:
    /// NOP and soft-reset opcodes in any addressing, and self-moves
    /// `(op, l, (l, l))` of regular opcodes that are the identity on the
    /// diagonal and are not touched by any injection.
    pub fn is_nop_form(&self, i: &Instruction) -> bool {
        match self.semantics.get(i.opcode.index()) {
            Some(Semantics::Nop) | Some(Semantics::SoftReset) => true,
            Some(Semantics::Table(table)) => {
                let self_move = i.out == i.ins.0 && i.out == i.ins.1;
                let v = self.values as usize;
                self_move
                    && (0..v).all(|a| table[a * v + a] as usize == a)
                    && !self
                        .injections
                        .iter()
                        .any(|inj| inj.trigger.opcode.is_none_or(|op| op == i.opcode))
            }
            None => false,
        }
    }

    pub fn validate_instruction(&self, i: &Instruction) -> Result<(), ModelError> {
        if i.opcode.index() >= self.opcodes.len() {
            return Err(ModelError::OpcodeOutOfRange { opcode: i.opcode.0, opcodes: self.opcodes.len() });
        }
        for l in i.locations() {
            if l.index() >= self.locations() {
                return Err(ModelError::LocationOutOfRange { loc: l.0, locations: self.locations() });
            }
        }
        Ok(())
    }

    pub fn validate_arch(&self, arch: &ArchState) -> Result<(), ModelError> {
        if arch.len() != self.locations() {
            return Err(ModelError::StateShape { got: arch.len(), expected: self.locations() });
        }
        if let Some(&value) = arch.0.iter().find(|&&v| v as u16 >= self.values) {
            return Err(ModelError::ValueOutOfRange { value, values: self.values });
        }
        Ok(())
    }

    pub fn validate_state(&self, s: &State) -> Result<(), ModelError> {
        self.validate_arch(&s.arch)?;
        if s.narch.0 >= self.narch_count {
            return Err(ModelError::UnknownNarch(s.narch.0));
        }
        Ok(())
    }

    pub fn validate_step(&self, step: &Step) -> Result<(), ModelError> {
        match step {
            Step::Exec(i) => self.validate_instruction(i),
            Step::HardReset(target) => {
                if !self.hard_reset {
                    return Err(ModelError::Unsupported("hard reset"));
                }
                self.validate_arch(target)
            }
        }
    }

    /// Decoded history window, most recent first. `None` marks an empty slot.
    pub fn history(&self, narch: NarchState) -> Vec<Option<(OpcodeId, Loc)>> {
        let mut code = narch.0;
        (0..self.history)
            .map(|_| {
                let digit = code % self.narch_base;
                code /= self.narch_base;
                self.decode_slot(digit)
            })
            .collect()
    }

    fn decode_slot(&self, digit: u32) -> Option<(OpcodeId, Loc)> {
        if digit == 0 {
            return None;
        }
        let d = digit - 1;
        let l = self.locations as u32;
        Some((OpcodeId((d / l) as u8), Loc((d % l) as u8)))
    }

    fn slot(&self, narch: NarchState, depth: usize) -> Option<(OpcodeId, Loc)> {
        if depth >= self.history {
            return None;
        }
        self.decode_slot((narch.0 / self.narch_base.pow(depth as u32)) % self.narch_base)
    }

    fn push_history(&self, narch: NarchState, i: &Instruction) -> NarchState {
        if self.history == 0 {
            return NarchState::INITIAL;
        }
        let code = 1 + i.opcode.0 as u32 * self.locations as u32 + i.out.0 as u32;
        let shifted = (narch.0 as u64 * self.narch_base as u64) % self.narch_count as u64;
        NarchState(shifted as u32 + code)
    }

    /// Whether `trigger` fires for `i` executed with history `narch`.
    pub fn trigger_fires(&self, trigger: &Trigger, narch: NarchState, i: &Instruction) -> bool {
        self.matches(trigger, narch, i)
    }

    fn matches(&self, trigger: &Trigger, narch: NarchState, i: &Instruction) -> bool {
        if trigger.opcode.is_some_and(|op| op != i.opcode)
            || trigger.out.is_some_and(|l| l != i.out)
            || trigger.in1.is_some_and(|l| l != i.ins.0)
            || trigger.in2.is_some_and(|l| l != i.ins.1)
        {
            return false;
        }
        for (depth, pat) in trigger.history.iter().enumerate() {
            let slot = self.slot(narch, depth);
            let ok = match pat {
                SlotPattern::Any => true,
                SlotPattern::Executed => slot.is_some(),
                SlotPattern::Op(op) => slot.is_some_and(|(o, _)| o == *op),
            };
            if !ok {
                return false;
            }
        }
        if trigger.reads_previous_output {
            match self.slot(narch, 0) {
                Some((_, prev_out)) if i.ins.0 == prev_out || i.ins.1 == prev_out => {}
                _ => return false,
            }
        }
        true
    }

    /// Applies an instruction in place. The instruction must be valid.
    pub fn apply(&self, s: &mut State, i: &Instruction) {
        match &self.semantics[i.opcode.index()] {
            Semantics::Table(table) => {
                let v = self.values as usize;
                let a = s.arch.get(i.ins.0) as usize;
                let b = s.arch.get(i.ins.1) as usize;
                let mut result = table[a * v + b];
                let mut stomps: [Option<(Loc, Value)>; 4] = [None; 4];
                let mut n_stomps = 0;
                for inj in &self.injections {
                    if !self.matches(&inj.trigger, s.narch, i) {
                        continue;
                    }
                    let (delta, stomp) = match inj.effect {
                        Effect::CorruptOutput { delta } => (delta, None),
                        Effect::Stomp { loc, value } => (0, Some((loc, value))),
                        Effect::Both { delta, loc, value } => (delta, Some((loc, value))),
                    };
                    result = ((result as u16 + delta as u16) % self.values) as Value;
                    if let Some((loc, value)) = stomp {
                        if loc != i.out && n_stomps < stomps.len() {
                            stomps[n_stomps] = Some((loc, value));
                            n_stomps += 1;
                        }
                    }
                }
                s.arch.set(i.out, result);
                for (loc, value) in stomps.iter().flatten() {
                    s.arch.set(*loc, *value);
                }
                s.narch = self.push_history(s.narch, i);
            }
            Semantics::Nop => s.narch = self.push_history(s.narch, i),
            Semantics::SoftReset => s.narch = NarchState::INITIAL,
        }
    }

    /// Applies a step in place. The step must be valid.
    pub fn apply_step(&self, s: &mut State, step: &Step) {
        match step {
            Step::Exec(i) => self.apply(s, i),
            Step::HardReset(target) => {
                s.arch.clone_from(target);
                s.narch = NarchState::INITIAL;
            }
        }
    }

    /// `delta(s, i)`.
    pub fn step(&self, s: &State, i: &Instruction) -> Result<State, ModelError> {
        self.validate_state(s)?;
        self.validate_instruction(i)?;
        let mut next = s.clone();
        self.apply(&mut next, i);
        Ok(next)
    }

    pub fn step_any(&self, s: &State, step: &Step) -> Result<State, ModelError> {
        self.validate_state(s)?;
        self.validate_step(step)?;
        let mut next = s.clone();
        self.apply_step(&mut next, step);
        Ok(next)
    }

    /// A hard-reset instruction targeting `target`, which must be initial.
    pub fn hard_reset_to(&self, target: &State) -> Result<Step, ModelError> {
        if !self.hard_reset {
            return Err(ModelError::Unsupported("hard reset"));
        }
        self.validate_state(target)?;
        if !target.is_initial() {
            return Err(ModelError::NotInitial);
        }
        Ok(Step::HardReset(target.arch.clone()))
    }

    /// The self-addressed soft-reset instruction at `l0`.
    pub fn soft_reset(&self) -> Result<Instruction, ModelError> {
        self.soft_reset_opcode()
            .map(|op| Instruction::self_addressed(op, Loc(0)))
            .ok_or(ModelError::Unsupported("soft reset"))
    }

    pub fn zero_state(&self) -> State {
        State::initial(ArchState::zeros(self.locations()))
    }
}

/// `s0, ..., sn` with `s(k+1) = delta(s(k), step(k+1))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub states: Vec<State>,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("a path always has a first state")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub fn run(sys: &TransitionSystem, s0: &State, seq: &[Instruction]) -> Result<Path, ModelError> {
    let steps: Vec<Step> = seq.iter().copied().map(Step::Exec).collect();
    run_steps(sys, s0, &steps)
}

pub fn run_steps(sys: &TransitionSystem, s0: &State, steps: &[Step]) -> Result<Path, ModelError> {
    sys.validate_state(s0)?;
    for st in steps {
        sys.validate_step(st)?;
    }
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(s0.clone());
    let mut cur = s0.clone();
    for st in steps {
        sys.apply_step(&mut cur, st);
        states.push(cur.clone());
    }
    Ok(Path { states, steps: steps.to_vec() })
}

/// All states reachable from `inits` by at most `depth` instructions drawn
/// from `alphabet`.
pub fn enumerate_reachable(
    sys: &TransitionSystem,
    inits: &[State],
    alphabet: &[Instruction],
    depth: usize,
    max_states: usize,
) -> Result<BTreeSet<State>, ModelError> {
    for s in inits {
        sys.validate_state(s)?;
    }
    for i in alphabet {
        sys.validate_instruction(i)?;
    }
    let mut seen: HashSet<State> = HashSet::new();
    let mut frontier: Vec<State> = Vec::new();
    for s in inits {
        if seen.insert(s.clone()) {
            frontier.push(s.clone());
        }
    }
    if seen.len() > max_states {
        return Err(ModelError::Budget { visited: seen.len(), budget: max_states });
    }
    for _ in 0..depth {
        if frontier.is_empty() {
            break;
        }
        let successors: Vec<State> = frontier
            .par_iter()
            .flat_map_iter(|s| {
                alphabet.iter().map(move |i| {
                    let mut n = s.clone();
                    sys.apply(&mut n, i);
                    n
                })
            })
            .collect();
        frontier.clear();
        for n in successors {
            if !seen.contains(&n) {
                seen.insert(n.clone());
                frontier.push(n);
                if seen.len() > max_states {
                    return Err(ModelError::Budget { visited: seen.len(), budget: max_states });
                }
            }
        }
    }
    Ok(seen.into_iter().collect())
}

/// How initial architectural states are chosen when exhaustive
/// enumeration is too large.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum InitStrategy {
    Exhaustive,
    Zero,
    /// The zero state followed by `count - 1` pseudo-random states.
    Sample {
        count: usize,
        #[serde(default)]
        seed: u64,
    },
    Explicit {
        states: Vec<Vec<Value>>,
    },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::Exhaustive
    }
}

/// Enumerates assignments to `free` locations (in order) and lets `expand`
/// turn each assignment into a full architectural state. Exhaustive
/// enumeration follows the odometer order with `free[0]` most significant.
pub(crate) fn enumerate_assignments(
    values: u16,
    free: usize,
    strategy: &InitStrategy,
    budget: usize,
) -> Result<Vec<Vec<Value>>, ModelError> {
    match strategy {
        InitStrategy::Exhaustive => {
            let total = (values as u128).checked_pow(free as u32).unwrap_or(u128::MAX);
            if total > budget as u128 {
                return Err(ModelError::Budget { visited: 0, budget });
            }
            let mut out = Vec::with_capacity(total as usize);
            let mut cur = vec![0 as Value; free];
            for _ in 0..total {
                out.push(cur.clone());
                for slot in cur.iter_mut().rev() {
                    if (*slot as u16) + 1 < values {
                        *slot += 1;
                        break;
                    }
                    *slot = 0;
                }
            }
            Ok(out)
        }
        InitStrategy::Zero => Ok(vec![vec![0; free]]),
        InitStrategy::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::with_capacity(*count);
            if *count > 0 {
                out.push(vec![0; free]);
            }
            while out.len() < *count {
                out.push((0..free).map(|_| rng.gen_range(0..values) as Value).collect());
            }
            Ok(out)
        }
        InitStrategy::Explicit { states } => Ok(states.clone()),
    }
}

/// Initial states `S_arch x {n0}` chosen by `strategy`.
pub fn initial_states(
    sys: &TransitionSystem,
    strategy: &InitStrategy,
    budget: usize,
) -> Result<Vec<State>, ModelError> {
    let assignments = enumerate_assignments(sys.values, sys.locations(), strategy, budget)?;
    assignments
        .into_iter()
        .map(|a| {
            let arch = ArchState(a);
            sys.validate_arch(&arch)?;
            Ok(State::initial(arch))
        })
        .collect()
}

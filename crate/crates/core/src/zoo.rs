//! Concrete processors built from declarative configs: a correct reference
//! machine derived from per-opcode expressions, with optional bug
//! injections, a NOP opcode, soft reset and hard reset support.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dup::{make_dup_map, DupMap, DupMapError};
use crate::model::{
    Effect, InitStrategy, Injection, Instruction, Loc, ModelError, Opcode, OpcodeId, Role, Semantics, SlotPattern, State, Step,
    TransitionSystem, Trigger, Value, MAX_LOCATIONS, MAX_VALUES,
};
use crate::qed::Family;
use crate::spec::{OpcodeSpec, SpecRelation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("value domain size {0} must be between 2 and 256")]
    Values(u16),
    #[error("location count {0} must be even and between 2 and 256")]
    Locations(u16),
    #[error("config declares no regular opcodes")]
    NoOpcodes,
    #[error("duplicate opcode name `{0}`")]
    DuplicateOpcode(String),
    #[error("opcode `{name}`: {message}")]
    Expression { name: String, message: String },
    #[error("injection `{injection}`: {message}")]
    Injection { injection: String, message: String },
    #[error("history length {0} is too large for this system")]
    History(usize),
    #[error("dup map: {0}")]
    DupMap(#[from] DupMapError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpcodeConfig {
    pub name: String,
    /// Specification function over inputs `a` and `b`, evaluated mod `|V|`.
    pub expr: String,
    /// What the hardware computes instead, when it differs from `expr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DupMapConfig {
    /// `O_L = {0..n/2}`, `d(k) = k + n/2`.
    #[default]
    Halves,
    /// `O_L = {0, 2, ...}`, `d(k) = k + 1`.
    Parity,
    Pairs { pairs: Vec<(u8, u8)> },
}

impl DupMapConfig {
    pub fn build(&self, locations: usize) -> Result<DupMap, DupMapError> {
        match self {
            DupMapConfig::Halves => DupMap::halves(locations),
            DupMapConfig::Parity => DupMap::parity(locations),
            DupMapConfig::Pairs { pairs } => {
                let originals: Vec<Loc> = pairs.iter().map(|&(o, _)| Loc(o)).collect();
                let mapping: Vec<(Loc, Loc)> = pairs.iter().map(|&(o, d)| (Loc(o), Loc(d))).collect();
                make_dup_map(locations, &originals, &mapping)
            }
        }
    }
}

/// When an injection fires. History entries are most-recent first; each is
/// an opcode name, `"*"` (anything, including an empty slot) or `"?"` (any
/// executed instruction).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opcode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in1: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in2: Option<u8>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reads_previous_output: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectConfig {
    TypeA { delta: Value },
    TypeB { location: u8, value: Value },
    Both { delta: Value, location: u8, value: Value },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugInjection {
    pub name: String,
    pub when: TriggerConfig,
    pub effect: EffectConfig,
}

fn default_values() -> u16 {
    8
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessorConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_values")]
    pub values: u16,
    pub locations: u16,
    pub opcodes: Vec<OpcodeConfig>,
    /// Length of the opcode-history window kept as non-architectural state.
    #[serde(default)]
    pub history: usize,
    #[serde(default)]
    pub nop: bool,
    #[serde(default)]
    pub soft_reset: bool,
    #[serde(default)]
    pub hard_reset: bool,
    #[serde(default)]
    pub dup_map: DupMapConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<BugInjection>,
    #[serde(default, skip_serializing_if = "SearchSection::is_empty")]
    pub search: SearchSection,
}

/// Per-system search defaults; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<Family>>,
    /// Original instructions in text form, e.g. `"MUL l15 l12 l12"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inits: Option<InitStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nops: Option<usize>,
}

impl SearchSection {
    pub fn is_empty(&self) -> bool {
        *self == SearchSection::default()
    }

    pub fn parsed_alphabet(&self, sys: &TransitionSystem) -> Result<Option<Vec<Instruction>>, String> {
        self.alphabet
            .as_ref()
            .map(|list| list.iter().map(|t| parse_instruction(sys, t)).collect())
            .transpose()
    }
}

/// `OP lOUT lIN1 lIN2`; the `l` prefixes and commas are optional, and a
/// single location stands for a self-addressed form.
pub fn parse_instruction(sys: &TransitionSystem, text: &str) -> Result<Instruction, String> {
    let mut parts = text.split(|c: char| c.is_whitespace() || c == ',').filter(|p| !p.is_empty());
    let name = parts.next().ok_or_else(|| "empty instruction".to_string())?;
    let opcode = sys.opcode_by_name(name).ok_or_else(|| format!("unknown opcode `{name}`"))?;
    let locs = parts
        .map(|p| {
            let digits = p.strip_prefix(['l', 'L']).unwrap_or(p);
            digits.parse::<u8>().map(Loc).map_err(|_| format!("bad location `{p}` in `{text}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let i = match locs.as_slice() {
        [l] => Instruction::self_addressed(opcode, *l),
        [o, a, b] => Instruction::new(opcode, *o, *a, *b),
        _ => return Err(format!("`{text}` needs one or three locations")),
    };
    sys.validate_instruction(&i).map_err(|e| e.to_string())?;
    Ok(i)
}

pub fn format_instruction(sys: &TransitionSystem, i: &Instruction) -> String {
    let name = sys.opcode(i.opcode).map(|o| o.name.as_str()).unwrap_or("?");
    format!("{name} {} {} {}", i.out, i.ins.0, i.ins.1)
}

impl ProcessorConfig {
    /// The same machine with every injection and implementation override
    /// removed.
    pub fn reference_twin(&self) -> ProcessorConfig {
        let mut cfg = self.clone();
        cfg.injections.clear();
        for op in &mut cfg.opcodes {
            op.implementation = None;
        }
        cfg
    }

    /// No bug injections: the machine is declared correct with respect to
    /// its specification. An `implementation` that disagrees with `expr`
    /// then shows up as a specification mismatch rather than as a bug.
    pub fn declares_correct(&self) -> bool {
        self.injections.is_empty()
    }

    pub fn dup_map(&self) -> Result<DupMap, DupMapError> {
        self.dup_map.build(self.locations as usize)
    }
}

mod expr {
    //! `a`, `b`, integer literals, `+ - * & | ^`, unary minus, parentheses.

    #[derive(Debug, Clone)]
    pub enum Expr {
        A,
        B,
        Lit(i64),
        Neg(Box<Expr>),
        Bin(char, Box<Expr>, Box<Expr>),
    }

    impl Expr {
        pub fn eval(&self, a: i64, b: i64, modulus: i64) -> i64 {
            let v = match self {
                Expr::A => a,
                Expr::B => b,
                Expr::Lit(n) => *n,
                Expr::Neg(e) => -e.eval(a, b, modulus),
                Expr::Bin(op, l, r) => {
                    let (x, y) = (l.eval(a, b, modulus), r.eval(a, b, modulus));
                    match op {
                        '+' => x + y,
                        '-' => x - y,
                        '*' => x * y,
                        '&' => x & y,
                        '|' => x | y,
                        '^' => x ^ y,
                        _ => unreachable!("parser only builds known operators"),
                    }
                }
            };
            v.rem_euclid(modulus)
        }
    }

    struct Parser<'a> {
        src: &'a [u8],
        pos: usize,
    }

    fn precedence(op: u8) -> Option<u8> {
        match op {
            b'|' => Some(1),
            b'^' => Some(2),
            b'&' => Some(3),
            b'+' | b'-' => Some(4),
            b'*' => Some(5),
            _ => None,
        }
    }

    impl Parser<'_> {
        fn skip_ws(&mut self) {
            while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.skip_ws();
            self.src.get(self.pos).copied()
        }

        fn binary(&mut self, min_prec: u8) -> Result<Expr, String> {
            let mut lhs = self.unary()?;
            while let Some(op) = self.peek() {
                let Some(prec) = precedence(op) else { break };
                if prec < min_prec {
                    break;
                }
                self.pos += 1;
                let rhs = self.binary(prec + 1)?;
                lhs = Expr::Bin(op as char, Box::new(lhs), Box::new(rhs));
            }
            Ok(lhs)
        }

        fn unary(&mut self) -> Result<Expr, String> {
            match self.peek() {
                Some(b'-') => {
                    self.pos += 1;
                    Ok(Expr::Neg(Box::new(self.unary()?)))
                }
                Some(b'(') => {
                    self.pos += 1;
                    let e = self.binary(0)?;
                    if self.peek() != Some(b')') {
                        return Err(format!("expected `)` at offset {}", self.pos));
                    }
                    self.pos += 1;
                    Ok(e)
                }
                Some(b'a') => {
                    self.pos += 1;
                    Ok(Expr::A)
                }
                Some(b'b') => {
                    self.pos += 1;
                    Ok(Expr::B)
                }
                Some(c) if c.is_ascii_digit() => {
                    let start = self.pos;
                    while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
                    text.parse().map(Expr::Lit).map_err(|e| format!("bad literal `{text}`: {e}"))
                }
                Some(c) => Err(format!("unexpected `{}` at offset {}", c as char, self.pos)),
                None => Err("unexpected end of expression".to_string()),
            }
        }
    }

    pub fn parse(src: &str) -> Result<Expr, String> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.binary(0)?;
        if let Some(c) = p.peek() {
            return Err(format!("unexpected `{}` at offset {}", c as char, p.pos));
        }
        Ok(e)
    }
}

/// Compiles an expression over `a`, `b` into a `|V| x |V|` table.
pub fn compile_expression(src: &str, values: u16) -> Result<Vec<Value>, String> {
    let e = expr::parse(src)?;
    let m = values as i64;
    let mut table = Vec::with_capacity((values as usize).pow(2));
    for a in 0..m {
        for b in 0..m {
            table.push(e.eval(a, b, m) as Value);
        }
    }
    Ok(table)
}

fn parse_slot(sys_ops: &[Opcode], s: &str) -> Option<SlotPattern> {
    match s.trim() {
        "*" => Some(SlotPattern::Any),
        "?" => Some(SlotPattern::Executed),
        name => sys_ops.iter().find(|o| o.name.eq_ignore_ascii_case(name)).map(|o| SlotPattern::Op(o.id)),
    }
}

/// Builds the transition system and its (injection-free) specification.
pub fn build_system(cfg: &ProcessorConfig) -> Result<(TransitionSystem, SpecRelation), ConfigError> {
    if !(2..=MAX_VALUES).contains(&cfg.values) {
        return Err(ConfigError::Values(cfg.values));
    }
    if !(2..=MAX_LOCATIONS).contains(&cfg.locations) || cfg.locations % 2 != 0 {
        return Err(ConfigError::Locations(cfg.locations));
    }
    if cfg.opcodes.is_empty() {
        return Err(ConfigError::NoOpcodes);
    }
    let mut names = HashSet::new();
    let mut opcodes = Vec::new();
    let mut semantics = Vec::new();
    let mut specs = Vec::new();
    for op in &cfg.opcodes {
        if !names.insert(op.name.to_ascii_uppercase()) {
            return Err(ConfigError::DuplicateOpcode(op.name.clone()));
        }
        let err = |message: String| ConfigError::Expression { name: op.name.clone(), message };
        let spec_table = compile_expression(&op.expr, cfg.values).map_err(err)?;
        let impl_table = match &op.implementation {
            Some(src) => compile_expression(src, cfg.values).map_err(err)?,
            None => spec_table.clone(),
        };
        let id = OpcodeId(opcodes.len() as u8);
        opcodes.push(Opcode { id, name: op.name.clone(), role: Role::Regular });
        semantics.push(Semantics::Table(impl_table));
        let v = cfg.values as usize;
        specs.push(Some(OpcodeSpec::from_fn(cfg.values, |a, b| spec_table[a as usize * v + b as usize])));
    }
    for (enabled, name, role, sem) in [
        (cfg.nop, "NOP", Role::Nop, Semantics::Nop),
        (cfg.soft_reset, "SRST", Role::SoftReset, Semantics::SoftReset),
    ] {
        if !enabled {
            continue;
        }
        if !names.insert(name.to_string()) {
            return Err(ConfigError::DuplicateOpcode(name.to_string()));
        }
        let id = OpcodeId(opcodes.len() as u8);
        opcodes.push(Opcode { id, name: name.to_string(), role });
        semantics.push(sem);
        // Self-addressed forms leave every location as it was.
        specs.push(Some(OpcodeSpec::from_fn(cfg.values, |a, _| a)));
    }
    if opcodes.len() > 255 {
        return Err(ConfigError::NoOpcodes);
    }

    let mut injections = Vec::new();
    for inj in &cfg.injections {
        let err = |message: String| ConfigError::Injection { injection: inj.name.clone(), message };
        let loc = |l: u8| -> Result<Loc, ConfigError> {
            if (l as u16) < cfg.locations {
                Ok(Loc(l))
            } else {
                Err(err(format!("location {l} out of range")))
            }
        };
        let w = &inj.when;
        if w.history.len() > cfg.history {
            return Err(err(format!(
                "history pattern of length {} exceeds the window of {}",
                w.history.len(),
                cfg.history
            )));
        }
        if w.reads_previous_output && cfg.history == 0 {
            return Err(err("reads_previous_output needs a history window".to_string()));
        }
        let history = w
            .history
            .iter()
            .map(|s| parse_slot(&opcodes, s).ok_or_else(|| err(format!("unknown opcode `{s}` in history"))))
            .collect::<Result<Vec<_>, _>>()?;
        let opcode = match &w.opcode {
            Some(name) => {
                let op = opcodes
                    .iter()
                    .find(|o| o.name.eq_ignore_ascii_case(name))
                    .ok_or_else(|| err(format!("unknown opcode `{name}`")))?;
                if op.role != Role::Regular {
                    return Err(err(format!("`{name}` is not a regular opcode")));
                }
                Some(op.id)
            }
            None => None,
        };
        let check_value = |v: Value| {
            if (v as u16) < cfg.values {
                Ok(v)
            } else {
                Err(err(format!("value {v} outside the domain")))
            }
        };
        let effect = match inj.effect {
            EffectConfig::TypeA { delta } => Effect::CorruptOutput { delta: check_value(delta)? },
            EffectConfig::TypeB { location, value } => Effect::Stomp { loc: loc(location)?, value: check_value(value)? },
            EffectConfig::Both { delta, location, value } => {
                Effect::Both { delta: check_value(delta)?, loc: loc(location)?, value: check_value(value)? }
            }
        };
        let trigger = Trigger {
            history,
            opcode,
            out: w.out.map(loc).transpose()?,
            in1: w.in1.map(loc).transpose()?,
            in2: w.in2.map(loc).transpose()?,
            reads_previous_output: w.reads_previous_output,
        };
        injections.push(Injection { name: inj.name.clone(), trigger, effect });
    }

    cfg.dup_map()?;
    let sys = TransitionSystem::new(
        cfg.name.clone(),
        cfg.values,
        cfg.locations,
        opcodes,
        semantics,
        cfg.history,
        injections,
        cfg.hard_reset,
    )
    .ok_or(ConfigError::History(cfg.history))?;
    Ok((sys, SpecRelation::new(specs)))
}

pub fn soft_reset_instr(sys: &TransitionSystem) -> Result<Instruction, ModelError> {
    sys.soft_reset()
}

pub fn hard_reset_instr(sys: &TransitionSystem, target: &State) -> Result<Step, ModelError> {
    sys.hard_reset_to(target)
}

fn op(name: &str, expr: &str) -> OpcodeConfig {
    OpcodeConfig { name: name.to_string(), expr: expr.to_string(), implementation: None }
}

fn toy_base(name: &str, description: &str) -> ProcessorConfig {
    ProcessorConfig {
        name: name.to_string(),
        description: Some(description.to_string()),
        values: 4,
        locations: 4,
        opcodes: vec![op("ADD", "a + b"), op("MUL", "a * b"), op("MOV", "a")],
        history: 1,
        nop: true,
        soft_reset: true,
        hard_reset: true,
        dup_map: DupMapConfig::Halves,
        injections: Vec::new(),
        search: SearchSection::default(),
    }
}

fn injection(name: &str, when: TriggerConfig, effect: EffectConfig) -> BugInjection {
    BugInjection { name: name.to_string(), when, effect }
}

fn back_to_back(prev: &str, cur: &str) -> TriggerConfig {
    TriggerConfig { history: vec![prev.to_string()], opcode: Some(cur.to_string()), ..TriggerConfig::default() }
}

/// The built-in processor corpus, reference machine first.
pub fn presets() -> Vec<ProcessorConfig> {
    let toy4 = toy_base("toy4", "Reference machine: |V|=4, |L|=4, ADD/MUL/MOV, one-entry history.");

    let mut mulmul4 = toy_base("mulmul4", "Second of two back-to-back MULs adds 1 to its result.");
    mulmul4.injections.push(injection(
        "back-to-back MUL",
        back_to_back("MUL", "MUL"),
        EffectConfig::TypeA { delta: 1 },
    ));

    let mut stomp4 = toy_base("stomp4", "Second of two back-to-back ADDs also clears l3.");
    stomp4.injections.push(injection(
        "ADD after ADD clears l3",
        back_to_back("ADD", "ADD"),
        EffectConfig::TypeB { location: 3, value: 0 },
    ));

    let mut fwd4 = toy_base("fwd4", "An ADD that consumes the previous instruction's result gets a stale-by-one value.");
    fwd4.injections.push(injection(
        "forwarding path off by one",
        TriggerConfig { opcode: Some("ADD".into()), reads_previous_output: true, ..TriggerConfig::default() },
        EffectConfig::TypeA { delta: 1 },
    ));

    let mut both4 = toy_base("both4", "ADD right after MUL is off by one and clears l3.");
    both4.injections.push(injection(
        "ADD after MUL",
        back_to_back("MUL", "ADD"),
        EffectConfig::Both { delta: 1, location: 3, value: 0 },
    ));

    let mut si4 = toy_base("si4", "MUL writing l3 is off by two in every state, including initial ones.");
    si4.injections.push(injection(
        "MUL into l3",
        TriggerConfig { opcode: Some("MUL".into()), out: Some(3), ..TriggerConfig::default() },
        EffectConfig::TypeA { delta: 2 },
    ));

    let mut deep4 = toy_base("deep4", "MUL preceded by MUL then ADD is off by one; needs a two-entry history.");
    deep4.history = 2;
    deep4.injections.push(injection(
        "MUL after MUL, ADD",
        TriggerConfig {
            history: vec!["ADD".into(), "MUL".into()],
            opcode: Some("MUL".into()),
            ..TriggerConfig::default()
        },
        EffectConfig::TypeA { delta: 1 },
    ));

    let mut addwrong4 = toy_base("addwrong4", "Every ADD computes a + b + 1, in every state.");
    addwrong4.injections.push(injection(
        "ADD off by one",
        TriggerConfig { opcode: Some("ADD".into()), ..TriggerConfig::default() },
        EffectConfig::TypeA { delta: 1 },
    ));

    let ridecore = ProcessorConfig {
        name: "ridecore-lite".to_string(),
        description: Some("|V|=16, |L|=32 register machine whose second back-to-back MUL corrupts its output.".into()),
        values: 16,
        locations: 32,
        opcodes: vec![op("ADD", "a + b"), op("MUL", "a * b"), op("MOV", "a")],
        history: 1,
        nop: true,
        soft_reset: true,
        hard_reset: true,
        dup_map: DupMapConfig::Halves,
        injections: vec![injection("back-to-back MUL", back_to_back("MUL", "MUL"), EffectConfig::TypeA { delta: 1 })],
        search: SearchSection {
            bound: Some(3),
            families: None,
            alphabet: Some(vec!["ADD l12 l4 l15".into(), "MUL l15 l12 l12".into()]),
            inits: Some(InitStrategy::Sample { count: 8, seed: 0 }),
            max_nops: None,
        },
    };

    vec![toy4, mulmul4, stomp4, fwd4, both4, si4, deep4, addwrong4, ridecore]
}

pub fn preset(name: &str) -> Option<ProcessorConfig> {
    presets().into_iter().find(|c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_states, run, ArchState, InitStrategy, NarchState};
    use crate::spec::{find_bugs, single_instruction_correct, spec_holds, OracleConfig};

    fn built(name: &str) -> (TransitionSystem, SpecRelation) {
        build_system(&preset(name).unwrap()).unwrap()
    }

    fn ins(sys: &TransitionSystem, op: &str, o: u8, a: u8, b: u8) -> Instruction {
        Instruction::new(sys.opcode_by_name(op).unwrap(), Loc(o), Loc(a), Loc(b))
    }

    #[test]
    fn expressions_compile_mod_v() {
        assert_eq!(compile_expression("a + b", 4).unwrap()[3 * 4 + 2], 1);
        assert_eq!(compile_expression("a - b", 4).unwrap()[1 * 4 + 2], 3);
        assert_eq!(compile_expression("(a + 1) * b", 8).unwrap()[2 * 8 + 3], 1);
        assert_eq!(compile_expression("a ^ b & 3", 8).unwrap()[5 * 8 + 6], 5 ^ (6 & 3));
        assert_eq!(compile_expression("-a", 4).unwrap()[4], 3);
        assert!(compile_expression("a +", 4).is_err());
        assert!(compile_expression("a + c", 4).is_err());
        assert!(compile_expression("(a", 4).is_err());
    }

    #[test]
    fn config_errors() {
        let mut cfg = preset("toy4").unwrap();
        cfg.locations = 5;
        assert_eq!(build_system(&cfg).unwrap_err(), ConfigError::Locations(5));
        let mut cfg = preset("toy4").unwrap();
        cfg.opcodes[0].expr = "a / b".into();
        assert!(matches!(build_system(&cfg).unwrap_err(), ConfigError::Expression { .. }));
        let mut cfg = preset("mulmul4").unwrap();
        cfg.injections[0].when.opcode = Some("DIV".into());
        assert!(matches!(build_system(&cfg).unwrap_err(), ConfigError::Injection { .. }));
        let mut cfg = preset("mulmul4").unwrap();
        cfg.injections[0].when.history = vec!["MUL".into(), "MUL".into()];
        assert!(matches!(build_system(&cfg).unwrap_err(), ConfigError::Injection { .. }));
        let mut cfg = preset("toy4").unwrap();
        cfg.opcodes.push(op("add", "a"));
        assert_eq!(build_system(&cfg).unwrap_err(), ConfigError::DuplicateOpcode("add".into()));
    }

    #[test]
    fn toy4_add_step() {
        let (sys, _) = built("toy4");
        let s = State::initial(ArchState(vec![1, 2, 0, 0]));
        let next = sys.step(&s, &ins(&sys, "ADD", 0, 0, 1)).unwrap();
        assert_eq!(next.arch.0, vec![3, 2, 0, 0]);
    }

    #[test]
    fn mov_self_move_keeps_arch() {
        let (sys, _) = built("toy4");
        let s = State::initial(ArchState(vec![3, 1, 2, 0]));
        let next = sys.step(&s, &ins(&sys, "MOV", 0, 0, 0)).unwrap();
        assert_eq!(next.arch, s.arch);
        assert!(!next.is_initial());
    }

    #[test]
    fn mulmul_corrupts_second_mul() {
        let (sys, spec) = built("mulmul4");
        let s0 = State::initial(ArchState(vec![2, 3, 0, 0]));
        let mul = ins(&sys, "MUL", 1, 0, 0);
        let p = run(&sys, &s0, &[ins(&sys, "MUL", 2, 1, 1), mul]).unwrap();
        let before = &p.states[1];
        let after = p.last();
        assert_eq!(after.get(Loc(1)), (2 * 2 + 1) % 4);
        assert!(!spec_holds(&spec, before, &mul, after).unwrap());
    }

    #[test]
    fn soft_reset_clears_history_and_hides_mulmul() {
        let (sys, _) = built("mulmul4");
        let ir = soft_reset_instr(&sys).unwrap();
        let s0 = State::initial(ArchState(vec![2, 3, 0, 0]));
        let mul = ins(&sys, "MUL", 1, 0, 0);
        let p = run(&sys, &s0, &[ins(&sys, "MUL", 2, 1, 1), ir, mul]).unwrap();
        assert!(p.states[2].is_initial());
        assert_eq!(p.states[2].arch, p.states[1].arch);
        assert_eq!(p.last().get(Loc(1)), 0);
        // Fixed point on n0.
        assert_eq!(sys.step(&s0, &ir).unwrap(), s0);
    }

    #[test]
    fn hard_reset_lands_on_target() {
        let (sys, _) = built("toy4");
        let t1 = State::initial(ArchState(vec![1, 1, 1, 1]));
        let t2 = State::initial(ArchState(vec![2, 0, 2, 0]));
        let r1 = hard_reset_instr(&sys, &t1).unwrap();
        let r2 = hard_reset_instr(&sys, &t2).unwrap();
        let s = State { arch: ArchState(vec![3, 3, 3, 3]), narch: NarchState(5) };
        assert_eq!(sys.step_any(&s, &r1).unwrap(), t1);
        let twice = sys.step_any(&sys.step_any(&s, &r1).unwrap(), &r2).unwrap();
        assert_eq!(twice, t2);
        let add = ins(&sys, "ADD", 0, 0, 1);
        let via_reset = sys.step(&sys.step_any(&s, &r1).unwrap(), &add).unwrap();
        assert_eq!(via_reset, sys.step(&t1, &add).unwrap());
        let not_initial = State { arch: ArchState(vec![0; 4]), narch: NarchState(3) };
        assert_eq!(hard_reset_instr(&sys, &not_initial).unwrap_err(), ModelError::NotInitial);
    }

    #[test]
    fn resets_unsupported_when_disabled() {
        let mut cfg = preset("toy4").unwrap();
        cfg.soft_reset = false;
        cfg.hard_reset = false;
        let (sys, _) = build_system(&cfg).unwrap();
        assert_eq!(soft_reset_instr(&sys).unwrap_err(), ModelError::Unsupported("soft reset"));
        assert!(hard_reset_instr(&sys, &sys.zero_state()).is_err());
    }

    #[test]
    fn stomp_clears_l3() {
        let (sys, spec) = built("stomp4");
        let s0 = State::initial(ArchState(vec![1, 2, 1, 2]));
        let p = run(&sys, &s0, &[ins(&sys, "ADD", 0, 0, 1), ins(&sys, "ADD", 2, 2, 3)]).unwrap();
        assert_eq!(p.last().get(Loc(3)), 0);
        let kind = crate::spec::classify_violation(&spec, &p.states[1], &ins(&sys, "ADD", 2, 2, 3), p.last()).unwrap();
        assert_eq!(kind, crate::spec::ViolationKind::TypeB { bad_locations: vec![Loc(3)] });
    }

    #[test]
    fn nop_forms_preserve_arch_exhaustively() {
        for name in ["toy4", "mulmul4", "stomp4", "fwd4"] {
            let (sys, _) = built(name);
            let inits = initial_states(&sys, &InitStrategy::Exhaustive, 1 << 20).unwrap();
            let reach = crate::model::enumerate_reachable(&sys, &inits, &sys.alphabet(), 1, 1 << 22).unwrap();
            let nops: Vec<Instruction> = sys.alphabet().into_iter().filter(|i| sys.is_nop_form(i)).collect();
            assert!(nops.len() >= 8, "{name}");
            for s in &reach {
                for n in &nops {
                    assert_eq!(sys.step(s, n).unwrap().arch, s.arch, "{name}");
                }
            }
        }
    }

    #[test]
    fn reference_twins_differ_only_on_triggers() {
        for cfg in presets().into_iter().filter(|c| c.locations == 4 && !c.injections.is_empty()) {
            let (sys, _) = build_system(&cfg).unwrap();
            let (twin, _) = build_system(&cfg.reference_twin()).unwrap();
            let inits = initial_states(&sys, &InitStrategy::Exhaustive, 1 << 20).unwrap();
            let reach = crate::model::enumerate_reachable(&sys, &inits, &sys.alphabet(), 2, 1 << 22).unwrap();
            for s in &reach {
                for i in &sys.alphabet() {
                    let fires = sys.injections().iter().any(|inj| sys.trigger_fires(&inj.trigger, s.narch, i));
                    let a = sys.step(s, i).unwrap();
                    let b = twin.step(s, i).unwrap();
                    if a.arch != b.arch {
                        assert!(fires, "{}: {:?} differs without a trigger", cfg.name, i);
                    }
                    assert_eq!(a.narch, b.narch);
                }
            }
        }
    }

    #[test]
    fn reference_is_correct_and_si_correct() {
        let (sys, spec) = built("toy4");
        let inits = initial_states(&sys, &InitStrategy::Exhaustive, 1 << 20).unwrap();
        assert!(single_instruction_correct(&sys, &spec, &inits));
        for depth in 0..=3 {
            assert!(find_bugs(&sys, &spec, &inits, &OracleConfig::new(depth)).unwrap().is_empty());
        }
    }

    #[test]
    fn presets_round_trip_through_json() {
        for cfg in presets() {
            let json = serde_json::to_string_pretty(&cfg).unwrap();
            let back: ProcessorConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(cfg, back);
            build_system(&back).unwrap();
        }
    }
}

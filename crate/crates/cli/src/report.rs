//! Serializable reports and their text renderings.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value as Json};
use sqed_core::bmc::supported_families;
use sqed_core::laws::{LawBudgets, LawReport};
use sqed_core::model::{InitStrategy, Path};
use sqed_core::spec::OracleReport as CoreOracleReport;
use sqed_core::zoo::format_instruction;
use sqed_core::{
    Family, Loc, SearchConfig, SearchOutcome, SearchResult, Step, TransitionSystem, Witness,
};

use crate::config::Loaded;
use crate::Common;

#[derive(Serialize)]
pub struct Manifest {
    pub subcommand: &'static str,
    pub config: Json,
    pub system: Option<String>,
    /// Seed of the sampled initial states; `null` when none are sampled.
    pub seed: Option<u64>,
    pub budgets: Json,
    pub format: &'static str,
}

fn describe_inits(inits: &InitStrategy) -> String {
    match inits {
        InitStrategy::Exhaustive => "exhaustive".into(),
        InitStrategy::Zero => "zero".into(),
        InitStrategy::Sample { count, seed } => format!("sample(count {count}, seed {seed})"),
        InitStrategy::Explicit { states } => format!("explicit({} states)", states.len()),
    }
}

impl Manifest {
    fn single(subcommand: &'static str, common: &Common, loaded: &Loaded, budgets: Json) -> Self {
        Manifest {
            subcommand,
            config: Json::String(common.config.clone()),
            system: Some(loaded.entry.name().to_string()),
            seed: loaded.seed,
            budgets,
            format: if common.json { "json" } else { "text" },
        }
    }

    pub fn for_check(common: &Common, loaded: &Loaded, cfg: &SearchConfig) -> Self {
        let budgets = json!({
            "bound": cfg.bound,
            "families": cfg.families,
            "max_nops": cfg.max_nops,
            "max_tests": cfg.max_tests,
            "max_states": cfg.max_states,
            "init_budget": cfg.init_budget,
            "inits": describe_inits(&cfg.inits),
        });
        Manifest::single("check", common, loaded, budgets)
    }

    pub fn for_oracle(common: &Common, loaded: &Loaded, depth: usize, max_states: usize) -> Self {
        let budgets = json!({
            "depth": depth,
            "max_states": max_states,
            "inits": describe_inits(&loaded.entry.inits),
        });
        Manifest::single("oracle", common, loaded, budgets)
    }

    fn render_text(&self, out: &mut String) {
        let system = self.system.as_deref().unwrap_or("corpus");
        let config = match &self.config {
            Json::String(s) => s.clone(),
            other => other.to_string(),
        };
        let _ = writeln!(out, "sqed {}: {system} (config {config})", self.subcommand);
        if let Json::Object(map) = &self.budgets {
            let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}={}", compact(v))).collect();
            let _ = writeln!(out, "  budgets: {}", parts.join(" "));
        }
        match self.seed {
            Some(seed) => {
                let _ = writeln!(out, "  seed: {seed}");
            }
            None => {
                let _ = writeln!(out, "  seed: none (no sampled states)");
            }
        }
    }
}

fn compact(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        Json::Array(items) => items.iter().map(compact).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

pub fn step_text(sys: &TransitionSystem, step: &Step) -> String {
    match step {
        Step::Exec(i) => format_instruction(sys, i),
        Step::HardReset(target) => {
            let vals: Vec<String> = target.0.iter().map(|v| v.to_string()).collect();
            format!("HRESET [{}]", vals.join(" "))
        }
    }
}

#[derive(Serialize)]
pub struct Change {
    pub loc: Loc,
    pub from: u8,
    pub to: u8,
}

#[derive(Serialize)]
pub struct TraceStep {
    pub index: usize,
    pub step: String,
    pub changes: Vec<Change>,
}

fn trace_steps(sys: &TransitionSystem, trace: &Path) -> Vec<TraceStep> {
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, step)| {
            let (before, after) = (&trace.states[k], &trace.states[k + 1]);
            TraceStep {
                index: k + 1,
                step: step_text(sys, step),
                changes: before
                    .arch
                    .diff(&after.arch)
                    .into_iter()
                    .map(|loc| Change { loc, from: before.get(loc), to: after.get(loc) })
                    .collect(),
            }
        })
        .collect()
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessOut {
    Pair { original: Loc, duplicate: Loc, values: (u8, u8) },
    Location { loc: Loc, values: (u8, u8) },
}

impl WitnessOut {
    fn new(w: &Witness, trace: &Path, prefix_len: Option<usize>) -> Self {
        let last = trace.last();
        match *w {
            Witness::Pair { original, duplicate } => {
                WitnessOut::Pair { original, duplicate, values: (last.get(original), last.get(duplicate)) }
            }
            Witness::Location { loc } => {
                let k = prefix_len.unwrap_or(0);
                WitnessOut::Location { loc, values: (trace.states[k].get(loc), last.get(loc)) }
            }
        }
    }

    fn text(&self) -> String {
        match self {
            WitnessOut::Pair { original, duplicate, values } => {
                format!("{original} = {}, {duplicate} = {}", values.0, values.1)
            }
            WitnessOut::Location { loc, values } => {
                format!("{loc} = {} after the prefix, {} after re-execution", values.0, values.1)
            }
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckResult {
    NoFailure {
        bound: usize,
        explored_length: usize,
        complete: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Failure {
        family: Family,
        length: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        prefix_len: Option<usize>,
        test: Vec<String>,
        /// The test in structured form, replayable as-is.
        steps: Vec<Step>,
        init: Vec<u8>,
        witness: Option<WitnessOut>,
        mismatches: Vec<WitnessOut>,
    },
}

#[derive(Serialize)]
pub struct Stats {
    pub tests_executed: u64,
    pub states_visited: u64,
}

#[derive(Serialize)]
pub struct CheckReport {
    pub manifest: Manifest,
    pub result: CheckResult,
    pub stats: Stats,
    pub trace: Option<Vec<TraceStep>>,
}

impl CheckReport {
    pub fn new(manifest: Manifest, sys: &TransitionSystem, r: &SearchResult) -> Self {
        let stats = Stats { tests_executed: r.stats.tests_executed, states_visited: r.stats.states_visited };
        let (result, trace) = match &r.outcome {
            SearchOutcome::NoFailure { bound, explored_length, complete, reason } => (
                CheckResult::NoFailure {
                    bound: *bound,
                    explored_length: *explored_length,
                    complete: *complete,
                    reason: reason.clone(),
                },
                None,
            ),
            SearchOutcome::Failure { test, verdict, init } => {
                let prefix_len = test.meta.prefix_len;
                let witness = verdict.witness.as_ref().map(|w| WitnessOut::new(w, &verdict.trace, prefix_len));
                let result = CheckResult::Failure {
                    family: test.family,
                    length: test.len(),
                    prefix_len: test.meta.prefix_len,
                    test: test.steps.iter().map(|s| step_text(sys, s)).collect(),
                    steps: test.steps.clone(),
                    init: init.arch.0.clone(),
                    witness,
                    mismatches: verdict
                        .mismatches
                        .iter()
                        .map(|w| WitnessOut::new(w, &verdict.trace, prefix_len))
                        .collect(),
                };
                (result, Some(trace_steps(sys, &verdict.trace)))
            }
        };
        CheckReport { manifest, result, stats, trace }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.manifest.render_text(&mut out);
        match &self.result {
            CheckResult::NoFailure { bound, explored_length, complete, reason } => {
                if *complete {
                    let _ = writeln!(out, "NO FAILURE up to bound {bound} (all tests up to length {explored_length})");
                } else {
                    let _ = writeln!(
                        out,
                        "INCOMPLETE: no failure among tests up to length {explored_length}; {}",
                        reason.as_deref().unwrap_or("budget exhausted")
                    );
                }
            }
            CheckResult::Failure { family, length, init, witness, mismatches, .. } => {
                let _ = writeln!(out, "FAILURE: {} test of length {length}", family.name());
                let vals: Vec<String> = init.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "  initial state: [{}]", vals.join(" "));
                let width = self
                    .trace
                    .iter()
                    .flatten()
                    .map(|s| s.step.len())
                    .max()
                    .unwrap_or(4);
                let _ = writeln!(out, "  {:>3}  {:<width$}  changes", "#", "step");
                for s in self.trace.iter().flatten() {
                    let changes = if s.changes.is_empty() {
                        "(none)".to_string()
                    } else {
                        s.changes.iter().map(|c| format!("{}: {} -> {}", c.loc, c.from, c.to)).collect::<Vec<_>>().join(", ")
                    };
                    let _ = writeln!(out, "  {:>3}  {:<width$}  {changes}", s.index, s.step);
                }
                if let Some(w) = witness {
                    let _ = writeln!(out, "  witness: {}", w.text());
                }
                if mismatches.len() > 1 {
                    let others: Vec<String> = mismatches.iter().map(|m| m.text()).collect();
                    let _ = writeln!(out, "  all mismatches: {}", others.join("; "));
                }
            }
        }
        let _ = writeln!(
            out,
            "  tests executed: {}, states visited: {}",
            self.stats.tests_executed, self.stats.states_visited
        );
        out
    }
}

#[derive(Serialize)]
pub struct BugRow {
    pub instruction: String,
    pub triggers: usize,
    pub kinds: Vec<String>,
    pub bad_locations: Vec<Loc>,
}

#[derive(Serialize)]
pub struct OracleReport {
    pub manifest: Manifest,
    pub depth: usize,
    pub complete: bool,
    pub states_explored: usize,
    pub bugs: Vec<BugRow>,
}

impl OracleReport {
    pub fn new(manifest: Manifest, loaded: &Loaded, r: &CoreOracleReport) -> Self {
        let e = &loaded.entry;
        let bugs = r
            .bugs
            .iter()
            .map(|b| {
                let kinds = b.kinds(&e.sys, &e.spec);
                let mut bad: Vec<Loc> = kinds.iter().flat_map(|k| k.bad_locations().iter().copied()).collect();
                bad.sort();
                bad.dedup();
                BugRow {
                    instruction: format_instruction(&e.sys, &b.instr),
                    triggers: b.triggers.len(),
                    kinds: kinds.iter().map(|k| k.label().to_string()).collect(),
                    bad_locations: bad,
                }
            })
            .collect();
        OracleReport { manifest, depth: r.depth, complete: r.complete, states_explored: r.states_explored, bugs }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.manifest.render_text(&mut out);
        let _ = writeln!(
            out,
            "{} failing instructions within depth {} ({} states explored{})",
            self.bugs.len(),
            self.depth,
            self.states_explored,
            if self.complete { "" } else { ", INCOMPLETE" }
        );
        if !self.bugs.is_empty() {
            let width = self.bugs.iter().map(|b| b.instruction.len()).max().unwrap_or(0).max(11);
            let _ = writeln!(out, "  {:<width$}  {:>8}  kind", "instruction", "triggers");
            for b in &self.bugs {
                let mut kind = b.kinds.join("/");
                if !b.bad_locations.is_empty() {
                    let locs: Vec<String> = b.bad_locations.iter().map(|l| l.to_string()).collect();
                    let _ = write!(kind, " (corrupts {})", locs.join(", "));
                }
                let _ = writeln!(out, "  {:<width$}  {:>8}  {kind}", b.instruction, b.triggers);
            }
        }
        out
    }
}

#[derive(Serialize)]
pub struct LawsReport {
    pub manifest: Manifest,
    pub passed: bool,
    pub laws: Vec<LawReport>,
}

impl LawsReport {
    pub fn new(configs: &[String], budgets: &LawBudgets, laws: Vec<LawReport>) -> Self {
        let config = if configs.is_empty() { Json::String("builtin corpus".into()) } else { json!(configs) };
        LawsReport {
            manifest: Manifest {
                subcommand: "laws",
                config,
                system: None,
                seed: None,
                budgets: serde_json::to_value(budgets).expect("budgets serialize"),
                format: "json",
            },
            passed: laws.iter().all(|l| l.passed()),
            laws,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.manifest.render_text(&mut out);
        for r in &self.laws {
            let status = if r.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status} {:<8} {:>14} instances  {}", r.law.name(), r.instances, r.statement);
            let _ = writeln!(out, "     over {} systems: {}", r.systems.len(), r.instantiation);
            for v in &r.violations {
                let _ = writeln!(out, "     violation: {v}");
            }
        }
        let failed = self.laws.iter().filter(|l| !l.passed()).count();
        let _ = writeln!(out, "{} of {} laws passed", self.laws.len() - failed, self.laws.len());
        out
    }
}

#[derive(Serialize)]
pub struct OpcodeRow {
    pub name: String,
    pub role: String,
    pub expr: Option<String>,
}

#[derive(Serialize)]
pub struct DescribeReport {
    pub name: String,
    pub description: Option<String>,
    pub values: u16,
    pub locations: usize,
    pub history: usize,
    pub opcodes: Vec<OpcodeRow>,
    pub dup_pairs: Vec<(Loc, Loc)>,
    pub injections: Vec<String>,
    pub families: Vec<Family>,
    pub alphabet_size: usize,
    pub focus: Option<Vec<String>>,
    pub inits: String,
}

impl DescribeReport {
    pub fn new(loaded: &Loaded) -> Self {
        let e = &loaded.entry;
        let exprs = &e.config.opcodes;
        let opcodes = e
            .sys
            .opcodes()
            .iter()
            .map(|o| OpcodeRow {
                name: o.name.clone(),
                role: serde_json::to_value(o.role)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                expr: exprs.iter().find(|c| c.name == o.name).map(|c| c.expr.clone()),
            })
            .collect();
        DescribeReport {
            name: e.name().to_string(),
            description: e.config.description.clone(),
            values: e.sys.values(),
            locations: e.sys.locations(),
            history: e.sys.history_len(),
            opcodes,
            dup_pairs: e.map.pairs().collect(),
            injections: e.config.injections.iter().map(|i| i.name.clone()).collect(),
            families: supported_families(&e.sys),
            alphabet_size: e.sys.alphabet().len(),
            focus: e.focus.as_ref().map(|f| f.iter().map(|i| format_instruction(&e.sys, i)).collect()),
            inits: describe_inits(&e.inits),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: |V|={} |L|={} history {}", self.name, self.values, self.locations, self.history);
        if let Some(d) = &self.description {
            let _ = writeln!(out, "  {d}");
        }
        for o in &self.opcodes {
            let line = format!("  opcode {:<5} {:<10} {}", o.name, o.role, o.expr.as_deref().unwrap_or(""));
            let _ = writeln!(out, "{}", line.trim_end());
        }
        let pairs: Vec<String> = self.dup_pairs.iter().map(|(o, d)| format!("{o}->{d}")).collect();
        let _ = writeln!(out, "  dup map: {}", pairs.join(" "));
        if self.injections.is_empty() {
            let _ = writeln!(out, "  injections: none");
        }
        for i in &self.injections {
            let _ = writeln!(out, "  injection: {i}");
        }
        let fams: Vec<&str> = self.families.iter().map(|f| f.name()).collect();
        let _ = writeln!(out, "  families: {}", fams.join(", "));
        let _ = writeln!(out, "  instructions: {}", self.alphabet_size);
        if let Some(f) = &self.focus {
            let _ = writeln!(out, "  search alphabet: {}", f.join("; "));
        }
        let _ = writeln!(out, "  initial states: {}", self.inits);
        out
    }
}

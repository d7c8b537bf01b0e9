//! Symbolic quick error detection over finite transition systems.
//!
//! The crate models processors as deterministic transition systems over a
//! finite value domain, duplicates instruction streams onto a disjoint half
//! of the locations, checks QED consistency of the result and searches for
//! failing tests. An independent brute-force oracle against an abstract
//! specification relation backs every search result.

pub mod bmc;
pub mod dup;
pub mod laws;
pub mod model;
pub mod qed;
pub mod spec;
pub mod zoo;

pub use bmc::{bmc_search, bmc_search_maps, SearchConfig, SearchError, SearchOutcome, SearchResult, SearchStats};
pub use dup::{classify_instr, dup_instr, dup_seq, undup_instr, DupMap, InstrClass};
pub use laws::{check_all, check_law, Corpus, LawBudgets, LawId, LawReport};
pub use model::{ArchState, InitStrategy, Instruction, Loc, NarchState, OpcodeId, State, Step, TransitionSystem, Value};
pub use qed::{qed_consistent, run_qed_test, Family, Outcome, QedTest, Verdict, Witness};
pub use spec::{find_bugs, spec_holds, Bug, OracleConfig, OracleReport, SpecRelation, ViolationKind};
pub use zoo::{build_system, preset, presets, ProcessorConfig};

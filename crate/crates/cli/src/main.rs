mod config;
mod report;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqed_core::bmc::supported_families;
use sqed_core::laws::{check_law, Corpus, CorpusEntry, LawBudgets, LawId};
use sqed_core::model::initial_states;
use sqed_core::spec::OracleConfig;
use sqed_core::{bmc_search, find_bugs, Family, SearchConfig, SearchOutcome};

use crate::config::load_config;
use crate::report::{CheckReport, DescribeReport, LawsReport, Manifest, OracleReport};

/// Exit statuses shared by every subcommand.
const EXIT_OK: u8 = 0;
const EXIT_COUNTEREXAMPLE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sqed", version, about = "Symbolic quick error detection workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Processor config file, or `builtin:NAME` for a built-in corpus system.
    #[arg(long)]
    config: String,
    /// Emit a machine-readable JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for sampled initial states; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for the shortest failing QED test.
    Check {
        #[command(flatten)]
        common: Common,
        /// Original-half length (bug-prefix size for reset families).
        #[arg(long)]
        bound: Option<usize>,
        /// Test family to search; repeat for several. Defaults to all the
        /// system supports.
        #[arg(long = "family", value_parser = parse_family)]
        families: Vec<Family>,
        #[arg(long)]
        max_nops: Option<usize>,
        /// Upper bound on (test, initial state) executions.
        #[arg(long, default_value_t = 400_000_000)]
        max_tests: u64,
    },
    /// Enumerate specification violations reachable within a depth.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 4_000_000)]
        max_states: usize,
    },
    /// Check the framework's laws over a corpus.
    Laws {
        /// Corpus members; the built-in corpus when omitted.
        #[arg(long)]
        config: Vec<String>,
        /// Law to check; repeat for several. All laws when omitted.
        #[arg(long = "law", value_parser = parse_law)]
        laws: Vec<LawId>,
        /// Search bound for the search-based laws.
        #[arg(long)]
        bound: Option<usize>,
        /// Oracle depth for the bug-specific laws.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a processor config.
    Describe {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        format!("unknown family `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_law(s: &str) -> Result<LawId, String> {
    LawId::parse(s).ok_or_else(|| {
        let names: Vec<&str> = LawId::ALL.iter().map(|l| l.name()).collect();
        format!("unknown law `{s}` (expected one of {})", names.join(", "))
    })
}

fn init_pool(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn emit<T: serde::Serialize>(json: bool, report: &T, text: impl FnOnce() -> String) -> anyhow::Result<()> {
    let body = if json { serde_json::to_string_pretty(report)? + "\n" } else { text() };
    let mut out = std::io::stdout().lock();
    match out.write_all(body.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_check(
    common: &Common,
    bound: Option<usize>,
    families: Vec<Family>,
    max_nops: Option<usize>,
    max_tests: u64,
) -> anyhow::Result<u8> {
    let loaded = load_config(&common.config, common.seed)?;
    let CorpusEntry { config: cfg, sys, map, inits, focus: alphabet, .. } = &loaded.entry;
    let families = if !families.is_empty() {
        families
    } else {
        cfg.search.families.clone().unwrap_or_else(|| supported_families(sys))
    };
    let search = SearchConfig {
        bound: bound.or(cfg.search.bound).unwrap_or(2),
        families,
        alphabet: alphabet.clone(),
        inits: inits.clone(),
        max_nops: max_nops.or(cfg.search.max_nops).unwrap_or(2),
        max_tests,
        ..SearchConfig::new(1, &[])
    };
    let result = bmc_search(sys, map, &search)?;
    let code = match &result.outcome {
        SearchOutcome::Failure { .. } => EXIT_COUNTEREXAMPLE,
        SearchOutcome::NoFailure { complete: true, .. } => EXIT_OK,
        SearchOutcome::NoFailure { complete: false, .. } => EXIT_INCOMPLETE,
    };
    let manifest = Manifest::for_check(common, &loaded, &search);
    let report = CheckReport::new(manifest, sys, &result);
    emit(common.json, &report, || report.render_text())?;
    Ok(code)
}

fn cmd_oracle(common: &Common, depth: usize, max_states: usize) -> anyhow::Result<u8> {
    let loaded = load_config(&common.config, common.seed)?;
    let e = &loaded.entry;
    let all_inits = initial_states(&e.sys, &e.inits, 1 << 20)?;
    let alphabet = e.focus.is_some().then(|| e.alphabet());
    let cfg = OracleConfig { depth, alphabet, max_states };
    let report = find_bugs(&e.sys, &e.spec, &all_inits, &cfg)?;
    let code = if !report.is_empty() {
        EXIT_COUNTEREXAMPLE
    } else if report.complete {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    };
    let manifest = Manifest::for_oracle(common, &loaded, depth, max_states);
    let out = OracleReport::new(manifest, &loaded, &report);
    emit(common.json, &out, || out.render_text())?;
    Ok(code)
}

fn cmd_laws(
    configs: &[String],
    laws: Vec<LawId>,
    bound: Option<usize>,
    depth: Option<usize>,
    json: bool,
) -> anyhow::Result<u8> {
    let corpus = if configs.is_empty() {
        Corpus::builtin()
    } else {
        let cfgs = configs
            .iter()
            .map(|c| load_config(c, None).map(|l| l.entry.config))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Corpus::from_configs(&cfgs)?
    };
    let mut budgets = LawBudgets::default();
    if let Some(b) = bound {
        budgets.search_bound = b;
    }
    if let Some(d) = depth {
        budgets.oracle_depth = d;
    }
    let laws = if laws.is_empty() { LawId::ALL.to_vec() } else { laws };
    let reports: Vec<_> = laws.iter().map(|&l| check_law(l, &corpus, &budgets)).collect();
    let code = if reports.iter().all(|r| r.passed()) { EXIT_OK } else { EXIT_COUNTEREXAMPLE };
    let out = LawsReport::new(configs, &budgets, reports);
    emit(json, &out, || out.render_text())?;
    Ok(code)
}

fn cmd_describe(common: &Common) -> anyhow::Result<u8> {
    let loaded = load_config(&common.config, common.seed)?;
    let out = DescribeReport::new(&loaded);
    emit(common.json, &out, || out.render_text())?;
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Check { common, bound, families, max_nops, max_tests } => {
            init_pool(common.jobs)?;
            cmd_check(&common, bound, families, max_nops, max_tests)
        }
        Command::Oracle { common, depth, max_states } => {
            init_pool(common.jobs)?;
            cmd_oracle(&common, depth, max_states)
        }
        Command::Laws { config, laws, bound, depth, json, jobs } => {
            init_pool(jobs)?;
            cmd_laws(&config, laws, bound, depth, json)
        }
        Command::Describe { common } => cmd_describe(&common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

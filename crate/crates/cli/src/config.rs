use std::path::Path;

use anyhow::{anyhow, Context};
use sqed_core::laws::CorpusEntry;
use sqed_core::model::InitStrategy;
use sqed_core::zoo::{preset, presets, ProcessorConfig};

pub struct Loaded {
    pub entry: CorpusEntry,
    /// Seed of the sampled initial states, when sampling is in use.
    pub seed: Option<u64>,
}

/// Parses a config document, reporting the offending field and position.
pub fn parse_config(text: &str, origin: &str) -> anyhow::Result<ProcessorConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            anyhow!("{origin}: {inner}")
        } else {
            anyhow!("{origin}: field `{path}`: {inner}")
        }
    })
}

pub fn load_config(source: &str, seed: Option<u64>) -> anyhow::Result<Loaded> {
    let mut cfg = match source.strip_prefix("builtin:") {
        Some(name) => preset(name).ok_or_else(|| {
            let names: Vec<String> = presets().into_iter().map(|c| c.name).collect();
            anyhow!("no built-in system `{name}` (available: {})", names.join(", "))
        })?,
        None => {
            let text = std::fs::read_to_string(Path::new(source))
                .with_context(|| format!("cannot read config `{source}`"))?;
            parse_config(&text, source)?
        }
    };
    if let Some(seed) = seed {
        if let Some(InitStrategy::Sample { seed: s, .. }) = cfg.search.inits.as_mut() {
            *s = seed;
        }
    }
    let seed = match &cfg.search.inits {
        Some(InitStrategy::Sample { seed, .. }) => Some(*seed),
        _ => None,
    };
    let entry = CorpusEntry::new(cfg).with_context(|| format!("invalid config `{source}`"))?;
    Ok(Loaded { entry, seed })
}

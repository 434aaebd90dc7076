//! Runs generation, corpus assembly, wiki ingestion and scheduling from a
//! single [`RunConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::RunConfig;
use crate::corpus::{build_corpus, ingest_wiki, Corpus, TemplatePack, CORPUS_META_FILE, CPT_FILE, SFT_FILE, TEST_FILE, WIKI_FILE};
use crate::error::Result;
use crate::io::{json_bytes, jsonl_bytes, sha256_hex, Staging};
use crate::persona::{generate_population, split_pools, NamePools, Person, PoolsFile};
use crate::schedule::build_manifest;
use crate::warning::Warning;

pub const PEOPLE_FILE: &str = "people.jsonl";
pub const POOLS_FILE: &str = "pools.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CORPUS_DIR: &str = "corpus";
pub const MANIFEST_DIR: &str = "manifests";

pub fn name_pools(cfg: &RunConfig) -> Result<NamePools> {
    match &cfg.paths.names {
        Some(dir) => NamePools::from_dir(dir),
        None => Ok(NamePools::bundled()),
    }
}

pub fn template_pack(cfg: &RunConfig) -> Result<TemplatePack> {
    match &cfg.paths.templates {
        Some(dir) => TemplatePack::from_dir(dir),
        None => Ok(TemplatePack::bundled()),
    }
}

pub fn people(cfg: &RunConfig) -> Result<(Vec<Person>, PoolsFile)> {
    cfg.validate()?;
    let persons = generate_population(cfg.seed, cfg.population, &name_pools(cfg)?)?;
    let pools = split_pools(cfg.seed, &persons, cfg.pool_sizes)?;
    Ok((
        persons,
        PoolsFile {
            seed: cfg.seed,
            sizes: cfg.pool_sizes,
            pools,
        },
    ))
}

/// Staged outputs with the SHA-256 of every file, keyed by path relative to
/// the output root.
pub struct PipelineOutput {
    pub staging: Staging,
    pub digests: BTreeMap<String, String>,
    pub warnings: Vec<Warning>,
}

struct Outputs<'a> {
    root: &'a Path,
    staging: Staging,
    digests: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn put(&mut self, rel: &str, bytes: Vec<u8>) -> Result<()> {
        self.digests.insert(rel.to_owned(), sha256_hex(&bytes));
        self.staging.add_bytes(self.root.join(rel), &bytes)
    }
}

/// Builds every artifact a config describes under `out`, staged but not yet
/// committed.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<PipelineOutput> {
    let (persons, pools) = people(cfg)?;
    let corpus: Corpus = build_corpus(&persons, &pools.pools, &cfg.corpus_config(), &template_pack(cfg)?, cfg.seed)?;
    let mut o = Outputs {
        root: out,
        staging: Staging::new(),
        digests: BTreeMap::new(),
    };
    let mut warnings = Vec::new();

    o.put(CONFIG_FILE, cfg.canonical_json())?;
    o.put(PEOPLE_FILE, jsonl_bytes(&persons))?;
    o.put(POOLS_FILE, json_bytes(&pools))?;
    let corpus_file = |f: &str| format!("{CORPUS_DIR}/{f}");
    o.put(&corpus_file(CPT_FILE), jsonl_bytes(&corpus.cpt))?;
    o.put(&corpus_file(SFT_FILE), jsonl_bytes(&corpus.sft))?;
    o.put(&corpus_file(TEST_FILE), jsonl_bytes(&corpus.test))?;
    o.put(&corpus_file(CORPUS_META_FILE), json_bytes(&corpus.meta))?;
    if let Some(wiki) = &cfg.paths.wiki {
        let (samples, w) = ingest_wiki(wiki, cfg.wiki_quota, cfg.seed)?;
        warnings.extend(w);
        o.put(&corpus_file(WIKI_FILE), jsonl_bytes(&samples))?;
    }
    for spec in &cfg.variants {
        let m = build_manifest(spec, &corpus.meta, &corpus.sft)?;
        o.put(&format!("{MANIFEST_DIR}/{}.json", spec.name), json_bytes(&m))?;
    }
    Ok(PipelineOutput {
        staging: o.staging,
        digests: o.digests,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::PoolSizes;
    use crate::schedule::{Replaced, Setting, VariantSpec};

    fn small() -> RunConfig {
        let mut cfg = RunConfig::new(5);
        cfg.population = 30;
        cfg.pool_sizes = PoolSizes { known: 10, test: 10, unknown: 10 };
        let mut v = VariantSpec::baseline("b_unk", Setting::Qa, 1);
        v.replaced = Some(Replaced::Type(crate::corpus::KType::B));
        v.unknown_fraction = 50;
        cfg.variants = vec![VariantSpec::baseline("base", Setting::Qa, 1), v];
        cfg
    }

    #[test]
    fn runs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let a = run(&small(), dir.path()).unwrap();
        let b = run(&small(), dir.path()).unwrap();
        assert_eq!(a.digests, b.digests);
        assert!(a.digests.contains_key("manifests/b_unk.json"));
        let written = a.staging.commit().unwrap();
        assert_eq!(written.len(), a.digests.len());
        let bytes = std::fs::read(dir.path().join(POOLS_FILE)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.digests[POOLS_FILE]);
    }
}

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cpt::{build_cpt_corpus, RephraseSchedule, TestSubgroup};
use super::tasks::{build_cr_pairing, build_qa, build_reasoning, split_reasoning_qa, ReasoningParams};
use super::templates::TemplatePack;
use super::{sort_by_id, KType, Sample, TaskKind};
use crate::error::{Error, Result};
use crate::io::{read_json, read_jsonl, Staging};
use crate::persona::{KnowledgeClass, KnowledgePools, Person};
use crate::rng::SeedTree;

pub const CPT_FILE: &str = "cpt.jsonl";
pub const SFT_FILE: &str = "sft.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const WIKI_FILE: &str = "wiki.jsonl";
pub const CORPUS_META_FILE: &str = "corpus.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    #[serde(default)]
    pub schedule: RephraseSchedule,
    #[serde(default)]
    pub reasoning: ReasoningParams,
}

/// Everything the scheduler needs to know about how a corpus was built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub toolkit_version: String,
    pub seed: u64,
    pub config: CorpusConfig,
    pub pools: KnowledgePools,
    /// Known persons whose facts are used for reasoning tasks.
    pub reasoning_ids: Vec<u32>,
    /// Known persons whose facts are used for QA in the reasoning setting.
    pub qa_ids: Vec<u32>,
    pub test_subgroups: Vec<TestSubgroup>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub cpt: Vec<Sample>,
    pub sft: Vec<Sample>,
    pub test: Vec<Sample>,
    pub meta: CorpusMeta,
}

fn reasoning_for_pool(
    tree: &SeedTree,
    label: &str,
    members: &[&Person],
    params: &ReasoningParams,
    classes: &HashMap<u32, KnowledgeClass>,
) -> Result<Vec<Sample>> {
    let by_id: HashMap<u32, &Person> = members.iter().map(|p| (p.id, *p)).collect();
    let mut out = Vec::new();
    for ktype in KType::ATTRIBUTES {
        let pair_seed = tree.child(&format!("cr-pairing/{label}")).seed();
        let pairs = build_cr_pairing(members, ktype, pair_seed)?;
        let cr: Vec<Sample> = pairs
            .par_iter()
            .map(|(a, b)| build_reasoning(TaskKind::CR, ktype, by_id[a], Some(by_id[b]), params, classes))
            .collect::<Result<_>>()?;
        out.extend(cr);
        for kind in [TaskKind::SR, TaskKind::NR] {
            let v: Vec<Sample> = members
                .par_iter()
                .map(|p| build_reasoning(kind, ktype, p, None, params, classes))
                .collect::<Result<_>>()?;
            out.extend(v);
        }
    }
    Ok(out)
}

fn qa_for(members: &[&Person], class: KnowledgeClass) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(members.len() * 4);
    for ktype in KType::ATTRIBUTES {
        for p in members {
            out.push(build_qa(p, ktype, class)?);
        }
    }
    Ok(out)
}

/// Builds the CPT, SFT and test splits.
///
/// SFT holds QA for every known and unknown person, reasoning for the
/// reasoning share of the known pool, and reasoning for every unknown person.
/// The test split holds QA and reasoning for every test person.
pub fn build_corpus(
    persons: &[Person],
    pools: &KnowledgePools,
    config: &CorpusConfig,
    templates: &TemplatePack,
    seed: u64,
) -> Result<Corpus> {
    let tree = SeedTree::new(seed);
    let classes = pools.class_index();
    let index: HashMap<u32, &Person> = persons.iter().map(|p| (p.id, p)).collect();
    let members = |ids: &[u32]| -> Result<Vec<&Person>> {
        ids.iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidSpec(format!("pool references missing person {id}")))
            })
            .collect()
    };

    let cpt = build_cpt_corpus(persons, pools, &config.schedule, templates, tree.child("cpt").seed())?;
    let (reasoning_ids, qa_ids) = split_reasoning_qa(&pools.known, tree.child("reasoning-qa").seed())?;

    let known = members(&pools.known)?;
    let unknown = members(&pools.unknown)?;
    let test = members(&pools.test)?;
    let params = &config.reasoning;

    let mut sft = qa_for(&known, KnowledgeClass::Known)?;
    sft.extend(qa_for(&unknown, KnowledgeClass::Unknown)?);
    sft.extend(reasoning_for_pool(&tree, "known", &members(&reasoning_ids)?, params, &classes)?);
    if unknown.len() >= 2 {
        sft.extend(reasoning_for_pool(&tree, "unknown", &unknown, params, &classes)?);
    }
    let mut test_samples = qa_for(&test, KnowledgeClass::Test)?;
    if test.len() >= 2 {
        test_samples.extend(reasoning_for_pool(&tree, "test", &test, params, &classes)?);
    }
    sort_by_id(&mut sft);
    sort_by_id(&mut test_samples);

    Ok(Corpus {
        cpt: cpt.samples,
        sft,
        test: test_samples,
        meta: CorpusMeta {
            toolkit_version: crate::VERSION.to_owned(),
            seed,
            config: config.clone(),
            pools: pools.clone(),
            reasoning_ids,
            qa_ids,
            test_subgroups: cpt.test_subgroups,
        },
    })
}

impl Corpus {
    pub fn stage_files(&self, dir: &Path, staging: &mut Staging) -> Result<()> {
        staging.add_jsonl(dir.join(CPT_FILE), &self.cpt)?;
        staging.add_jsonl(dir.join(SFT_FILE), &self.sft)?;
        staging.add_jsonl(dir.join(TEST_FILE), &self.test)?;
        staging.add_json(dir.join(CORPUS_META_FILE), &self.meta)
    }
}

pub fn load_meta(dir: &Path) -> Result<CorpusMeta> {
    read_json(&dir.join(CORPUS_META_FILE))
}

pub fn load_sft(dir: &Path) -> Result<Vec<Sample>> {
    read_jsonl(&dir.join(SFT_FILE))
}

/// Test samples plus the wiki set when one has been ingested into `dir`.
pub fn load_test(dir: &Path) -> Result<Vec<Sample>> {
    let mut v: Vec<Sample> = read_jsonl(&dir.join(TEST_FILE))?;
    let wiki = dir.join(WIKI_FILE);
    if wiki.exists() {
        v.extend(read_jsonl::<Sample>(&wiki)?);
    }
    Ok(v)
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::templates::{fill, SentenceKind, TemplatePack};
use super::{sort_by_id, KType, Sample, Stage, TaskKind};
use crate::error::{Error, Result};
use crate::persona::{aux_tables, AuxKind, KnowledgeClass, KnowledgePools, Person};
use crate::rng::SeedTree;

/// How many rephrasings each fact receives in continued pre-training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RephraseSchedule {
    pub known_count: usize,
    /// One entry per test subgroup; the test pool is cut into this many
    /// near-equal groups.
    pub test_subgroup_counts: Vec<usize>,
    pub aux_count: usize,
}

impl Default for RephraseSchedule {
    fn default() -> Self {
        Self {
            known_count: 50,
            test_subgroup_counts: (1..=10).map(|i| 5 * i).collect(),
            aux_count: 50,
        }
    }
}

impl RephraseSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.known_count == 0 || self.aux_count == 0 {
            return Err(Error::InvalidSpec("rephrase counts must be at least 1".into()));
        }
        if self.test_subgroup_counts.is_empty() || self.test_subgroup_counts.contains(&0) {
            return Err(Error::InvalidSpec(
                "test subgroup counts must be non-empty and at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn max_count(&self) -> usize {
        self.test_subgroup_counts
            .iter()
            .copied()
            .chain([self.known_count, self.aux_count])
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSubgroup {
    pub rephrase_count: usize,
    pub person_ids: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct CptCorpus {
    pub samples: Vec<Sample>,
    pub test_subgroups: Vec<TestSubgroup>,
}

const BIO_SENTENCES: [SentenceKind; 4] = [
    SentenceKind::Birth,
    SentenceKind::Death,
    SentenceKind::Major,
    SentenceKind::University,
];

/// Renders `count` distinct biographies of one person. Each sentence family
/// walks its own seeded permutation of templates, so variant `j` uses a
/// different birth sentence from every other variant.
fn biographies(tree: &SeedTree, p: &Person, count: usize, templates: &TemplatePack, class: KnowledgeClass) -> Vec<Sample> {
    let name = p.full_name();
    let values = [
        p.birth_year.to_string(),
        p.death_year.to_string(),
        p.major.clone(),
        p.university.clone(),
    ];
    let perms: Vec<Vec<usize>> = BIO_SENTENCES
        .iter()
        .map(|&kind| {
            let idx: Vec<usize> = (0..templates.family(kind).len()).collect();
            tree.shuffled(&format!("cpt/bio/{kind:?}"), p.id as u64, &idx)
        })
        .collect();
    (0..count)
        .map(|j| {
            let text = BIO_SENTENCES
                .iter()
                .zip(&perms)
                .zip(&values)
                .map(|((&kind, perm), value)| fill(&templates.family(kind)[perm[j]], &name, value, Some(p.gender)))
                .collect::<Vec<_>>()
                .join(" ");
            Sample::new(
                Stage::Cpt,
                TaskKind::BIO,
                KType::NONE,
                String::new(),
                text,
                String::new(),
                vec![p.id],
                class,
            )
        })
        .collect()
}

/// Biographies for known and test persons plus rephrased auxiliary facts.
/// Unknown persons never appear. Output is sorted by sample id.
pub fn build_cpt_corpus(
    persons: &[Person],
    pools: &KnowledgePools,
    schedule: &RephraseSchedule,
    templates: &TemplatePack,
    seed: u64,
) -> Result<CptCorpus> {
    schedule.validate()?;
    let available = templates.min_family_len();
    if schedule.max_count() > available {
        return Err(Error::TemplateShortage(format!(
            "schedule needs {} distinct variants per sentence, template pack has {available}",
            schedule.max_count()
        )));
    }
    let tree = SeedTree::new(seed);
    let by_id = |id: u32| {
        persons
            .get(id as usize)
            .filter(|p| p.id == id)
            .or_else(|| persons.iter().find(|p| p.id == id))
            .ok_or_else(|| Error::InvalidSpec(format!("pool references missing person {id}")))
    };

    let groups = schedule.test_subgroup_counts.len();
    let shuffled = tree.shuffled("cpt/test-subgroups", 0, &pools.test);
    let n = shuffled.len();
    let test_subgroups: Vec<TestSubgroup> = schedule
        .test_subgroup_counts
        .iter()
        .enumerate()
        .map(|(g, &count)| {
            let mut ids = shuffled[g * n / groups..(g + 1) * n / groups].to_vec();
            ids.sort_unstable();
            TestSubgroup {
                rephrase_count: count,
                person_ids: ids,
            }
        })
        .collect();

    let mut jobs: Vec<(&Person, usize, KnowledgeClass)> = Vec::new();
    for &id in &pools.known {
        jobs.push((by_id(id)?, schedule.known_count, KnowledgeClass::Known));
    }
    for g in &test_subgroups {
        for &id in &g.person_ids {
            jobs.push((by_id(id)?, g.rephrase_count, KnowledgeClass::Test));
        }
    }
    let mut samples: Vec<Sample> = jobs
        .par_iter()
        .flat_map_iter(|&(p, count, class)| biographies(&tree, p, count, templates, class))
        .collect();

    for (i, fact) in aux_tables().iter().enumerate() {
        let kind = match fact.kind {
            AuxKind::MajorField => SentenceKind::AuxMajor,
            AuxKind::UniversityCountry => SentenceKind::AuxUniversity,
        };
        let family = templates.family(kind);
        let idx: Vec<usize> = (0..family.len()).collect();
        let perm = tree.shuffled("cpt/aux", i as u64, &idx);
        for &t in perm.iter().take(schedule.aux_count) {
            samples.push(Sample::new(
                Stage::Cpt,
                TaskKind::AUX,
                KType::NONE,
                String::new(),
                fill(&family[t], &fact.key, &fact.value, None),
                String::new(),
                Vec::new(),
                KnowledgeClass::Known,
            ));
        }
    }
    sort_by_id(&mut samples);
    Ok(CptCorpus { samples, test_subgroups })
}

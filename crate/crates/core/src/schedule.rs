//! Training-order manifests for every experiment variant.
//!
//! A manifest is the fully expanded training sequence: one entry per sample
//! per pass, in the exact order a trainer must consume them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{CorpusMeta, KType, Sample, TaskId, TaskKind, WIKI_TEST_SET};
use crate::error::{Error, Result};
use crate::persona::KnowledgeClass;
use crate::rng::SeedTree;

pub const UNKNOWN_FRACTIONS: [u32; 7] = [0, 5, 10, 20, 50, 80, 100];
pub const PATCH_RATIOS: [u32; 3] = [5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Fine-tuning on the four QA tasks of every known person.
    Qa,
    /// Fine-tuning on the 12 reasoning tasks of the reasoning share of the
    /// known pool plus QA for the remaining share.
    Reasoning,
}

/// What a replacement variant swaps for unknown knowledge: a whole QA type
/// (`"B"`) or a single reasoning task (`"M_SR"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Replaced {
    Type(KType),
    Task(TaskId),
}

impl Replaced {
    fn task(self) -> TaskId {
        match self {
            Replaced::Type(k) => TaskId::new(k, TaskKind::QA),
            Replaced::Task(t) => t,
        }
    }
}

impl fmt::Display for Replaced {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Replaced::Type(k) => f.write_str(k.as_str()),
            Replaced::Task(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for Replaced {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains('_') {
            let t: TaskId = s.parse().map_err(|_| Error::InvalidSpec(format!("unknown task `{s}`")))?;
            if !t.kind.is_reasoning() {
                return Err(Error::InvalidSpec(format!(
                    "`{s}`: QA replacements are written as the bare type"
                )));
            }
            Ok(Replaced::Task(t))
        } else {
            let k: KType = s.parse()?;
            Ok(Replaced::Type(k))
        }
    }
}

impl Serialize for Replaced {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Replaced {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[default]
    KeepKnown,
    RemoveKnown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    AllTypes,
    MissingOne(KType),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchMode {
    /// All main epochs first, then the patch repeated `patch_epochs` times.
    #[default]
    GlobalTail,
    /// Every epoch ends with one pass over the patch.
    PerEpochTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    /// Patch size as a percentage of the per-epoch sample budget.
    pub ratio: u32,
    pub coverage: Coverage,
    #[serde(default)]
    pub mode: PatchMode,
    /// Defaults to the variant's `epochs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_epochs: Option<u32>,
}

/// How a patch variant's samples are ordered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    PatchTail,
    /// The same samples as the patch variant, shuffled every epoch.
    Shuffled,
}

fn default_epochs() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    /// Inferred from `replaced` when absent; defaults to `qa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced: Option<Replaced>,
    #[serde(default)]
    pub unknown_fraction: u32,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchSpec>,
    #[serde(default)]
    pub order: Order,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    pub seed: u64,
}

impl VariantSpec {
    /// The all-known baseline.
    pub fn baseline(name: impl Into<String>, setting: Setting, seed: u64) -> Self {
        Self {
            name: name.into(),
            setting: Some(setting),
            replaced: None,
            unknown_fraction: 0,
            strategy: Strategy::KeepKnown,
            patch: None,
            order: Order::PatchTail,
            epochs: default_epochs(),
            seed,
        }
    }

    pub fn effective_setting(&self) -> Setting {
        match (self.setting, self.replaced) {
            (Some(s), _) => s,
            (None, Some(Replaced::Task(_))) => Setting::Reasoning,
            _ => Setting::Qa,
        }
    }

    pub fn patch_epochs(&self) -> u32 {
        self.patch.and_then(|p| p.patch_epochs).unwrap_or(self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(format!("variant `{}`: {m}", self.name)));
        if self.patch.is_some() && self.replaced.is_some() {
            return bad("patch and replaced are mutually exclusive".into());
        }
        if !UNKNOWN_FRACTIONS.contains(&self.unknown_fraction) {
            return bad(format!("unknown_fraction {} not in {UNKNOWN_FRACTIONS:?}", self.unknown_fraction));
        }
        if self.unknown_fraction > 0 && self.replaced.is_none() {
            return bad("unknown_fraction needs a replaced type or task".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let Some(p) = self.patch {
            if !PATCH_RATIOS.contains(&p.ratio) {
                return bad(format!("patch ratio {} not in {PATCH_RATIOS:?}", p.ratio));
            }
            if p.patch_epochs == Some(0) {
                return bad("patch_epochs must be at least 1".into());
            }
            if matches!(p.coverage, Coverage::MissingOne(KType::NONE)) {
                return bad("missing_one needs an attribute type".into());
            }
        } else if self.order == Order::Shuffled {
            return bad("shuffled order applies to patch variants only".into());
        }
        if matches!(self.replaced, Some(Replaced::Type(KType::NONE))) {
            return bad("replaced type must be B, D, M or U".into());
        }
        if self.setting == Some(Setting::Qa) && matches!(self.replaced, Some(Replaced::Task(_))) {
            return bad("reasoning-task replacement needs the reasoning setting".into());
        }
        Ok(())
    }
}

/// `(position, sample_id, epoch)`. Patch passes of a global tail continue the
/// epoch count after the main epochs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry(pub usize, pub String, pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub variant: VariantSpec,
    /// Samples per epoch.
    pub budget: usize,
    pub toolkit_version: String,
    pub entries: Vec<Entry>,
}

impl Manifest {
    fn new(variant: VariantSpec, budget: usize, ids: Vec<(String, u32)>) -> Self {
        Self {
            variant,
            budget,
            toolkit_version: crate::VERSION.to_owned(),
            entries: ids.into_iter().enumerate().map(|(i, (id, e))| Entry(i, id, e)).collect(),
        }
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.1.as_str())
    }

    /// Sorted multiset of sample ids.
    pub fn id_multiset(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.sample_ids().collect();
        v.sort_unstable();
        v
    }
}

fn sorted_by_id<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Vec<&'a Sample> {
    let mut v: Vec<&Sample> = samples.into_iter().collect();
    v.sort_unstable_by(|a, b| a.id.cmp(&b.id));
    v
}

fn percent_of(n: usize, pct: u32) -> usize {
    (n * pct as usize + 50) / 100
}

fn epoch_passes(tree: &SeedTree, ids: &[&str], epochs: u32, purpose: &str, epoch_offset: u32) -> Vec<(String, u32)> {
    let mut out = Vec::with_capacity(ids.len() * epochs as usize);
    for e in 0..epochs {
        for id in tree.shuffled(purpose, e as u64, ids) {
            out.push((id.to_owned(), e + epoch_offset));
        }
    }
    out
}

/// Each epoch is an independent seeded permutation of `samples`.
pub fn make_shuffled_baseline(samples: &[Sample], epochs: u32, seed: u64) -> Result<Manifest> {
    let spec = VariantSpec {
        name: "shuffled".into(),
        epochs,
        ..VariantSpec::baseline("shuffled", Setting::Qa, seed)
    };
    shuffled_manifest(spec, &samples.iter().collect::<Vec<_>>())
}

fn shuffled_manifest(spec: VariantSpec, samples: &[&Sample]) -> Result<Manifest> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to schedule".into()));
    }
    if spec.epochs == 0 {
        return Err(Error::InvalidSpec("epochs must be at least 1".into()));
    }
    let ids: Vec<&str> = sorted_by_id(samples.iter().copied()).iter().map(|s| s.id.as_str()).collect();
    let tree = SeedTree::new(spec.seed);
    let entries = epoch_passes(&tree, &ids, spec.epochs, "epoch", 0);
    Ok(Manifest::new(spec, ids.len(), entries))
}

/// Swaps `unknown_fraction` percent of the replaced type or task for items
/// built from unknown persons.
///
/// Items are ranked by sample id: the lowest-ranked known items are the ones
/// replaced and the lowest-ranked unknown candidates are the ones added, so
/// a 10% variant contains the 5% variant's unknown items. Under `KeepKnown`
/// the remaining known items stay and the type keeps its size; under
/// `RemoveKnown` they are dropped. Everything outside the replaced group is
/// untouched.
pub fn make_replacement_variant(spec: &VariantSpec, base: &[Sample], unknown_pool: &[Sample]) -> Result<Manifest> {
    spec.validate()?;
    let replaced = spec
        .replaced
        .ok_or_else(|| Error::InvalidSpec(format!("variant `{}` replaces nothing", spec.name)))?;
    let target = replaced.task();
    let (group, rest): (Vec<&Sample>, Vec<&Sample>) = base.iter().partition(|s| s.task() == target);
    if group.is_empty() {
        return Err(Error::InvalidSpec(format!("base data has no {target} items")));
    }
    let group = sorted_by_id(group);
    let n_unknown = percent_of(group.len(), spec.unknown_fraction);
    let candidates = sorted_by_id(
        unknown_pool
            .iter()
            .filter(|s| s.task() == target && s.knowledge_class == KnowledgeClass::Unknown),
    );
    if candidates.len() < n_unknown {
        return Err(Error::Shortage(format!(
            "{target}: need {n_unknown} unknown items, pool has {}",
            candidates.len()
        )));
    }

    let mut chosen = rest;
    if spec.unknown_fraction == 0 {
        chosen.extend(group);
    } else {
        if spec.strategy == Strategy::KeepKnown {
            chosen.extend(&group[n_unknown..]);
        }
        chosen.extend(&candidates[..n_unknown]);
    }
    shuffled_manifest(spec.clone(), &chosen)
}

/// Groups by task and deals items round-robin (tasks in order, ids ascending
/// within a task) until `n` are taken.
fn round_robin<'a>(samples: &[&'a Sample], n: usize) -> Vec<&'a Sample> {
    let mut groups: BTreeMap<TaskId, Vec<&Sample>> = BTreeMap::new();
    for s in sorted_by_id(samples.iter().copied()) {
        groups.entry(s.task()).or_default().push(s);
    }
    let groups: Vec<Vec<&Sample>> = groups.into_values().collect();
    let mut out = Vec::with_capacity(n);
    let mut round = 0;
    while out.len() < n {
        let before = out.len();
        for g in &groups {
            if out.len() == n {
                break;
            }
            if let Some(s) = g.get(round) {
                out.push(*s);
            }
        }
        if out.len() == before {
            break;
        }
        round += 1;
    }
    out
}

/// Picks the main (unknown) and patch (known) sample sets of a patch variant.
/// The per-epoch budget equals `unknown.len()`; the patch takes
/// `ratio` percent of it and the same number of unknown items is dropped.
pub fn knownpatch_selection<'a>(
    patch: &PatchSpec,
    unknown: &'a [Sample],
    known: &'a [Sample],
) -> Result<(Vec<&'a Sample>, Vec<&'a Sample>)> {
    if let Some(s) = unknown.iter().find(|s| s.knowledge_class != KnowledgeClass::Unknown) {
        return Err(Error::InvalidSpec(format!("main data item {} is not unknown", s.id)));
    }
    if let Some(s) = known.iter().find(|s| s.knowledge_class != KnowledgeClass::Known) {
        return Err(Error::InvalidSpec(format!("patch candidate {} is not known", s.id)));
    }
    if let Coverage::MissingOne(k) = patch.coverage {
        if let Some(s) = known.iter().find(|s| s.ktype == k) {
            return Err(Error::Coverage(format!(
                "patch candidates include {} item {} although type {} is excluded",
                s.task(),
                s.id,
                k.as_str()
            )));
        }
    }
    let budget = unknown.len();
    let n_patch = percent_of(budget, patch.ratio);
    if known.len() < n_patch {
        return Err(Error::Shortage(format!(
            "patch needs {n_patch} known items, {} available",
            known.len()
        )));
    }
    let known_refs: Vec<&Sample> = known.iter().collect();
    let patch_items = round_robin(&known_refs, n_patch);
    let unknown_refs: Vec<&Sample> = unknown.iter().collect();
    let dropped: HashSet<&str> = round_robin(&unknown_refs, n_patch).iter().map(|s| s.id.as_str()).collect();
    let main: Vec<&Sample> = sorted_by_id(unknown.iter().filter(|s| !dropped.contains(s.id.as_str())));
    Ok((main, patch_items))
}

/// Main data first, a small all-known patch last.
///
/// With `global_tail` the last `patch size × patch_epochs` entries are the
/// patch and everything before is unknown. With `per_epoch_tail` each epoch
/// ends with one shuffled pass over the patch.
pub fn make_knownpatch_manifest(spec: &VariantSpec, unknown: &[Sample], known: &[Sample]) -> Result<Manifest> {
    spec.validate()?;
    let patch = spec
        .patch
        .ok_or_else(|| Error::InvalidSpec(format!("variant `{}` has no patch", spec.name)))?;
    let (main, patch_items) = knownpatch_selection(&patch, unknown, known)?;
    if spec.order == Order::Shuffled {
        let all: Vec<&Sample> = main.iter().chain(&patch_items).copied().collect();
        return shuffled_manifest(spec.clone(), &all);
    }
    let budget = main.len() + patch_items.len();
    let main_ids: Vec<&str> = main.iter().map(|s| s.id.as_str()).collect();
    let patch_ids: Vec<&str> = sorted_by_id(patch_items.iter().copied()).iter().map(|s| s.id.as_str()).collect();
    let tree = SeedTree::new(spec.seed);
    let entries = match patch.mode {
        PatchMode::GlobalTail => {
            let mut v = epoch_passes(&tree, &main_ids, spec.epochs, "epoch", 0);
            v.extend(epoch_passes(&tree, &patch_ids, spec.patch_epochs(), "patch-pass", spec.epochs));
            v
        }
        PatchMode::PerEpochTail => {
            let mut v = Vec::new();
            for e in 0..spec.epochs {
                for id in tree.shuffled("epoch", e as u64, &main_ids) {
                    v.push((id.to_owned(), e));
                }
                for id in tree.shuffled("patch-pass", e as u64, &patch_ids) {
                    v.push((id.to_owned(), e));
                }
            }
            v
        }
    };
    Ok(Manifest::new(spec.clone(), budget, entries))
}

/// SFT inputs of one setting: the all-known base data and the unknown items
/// that can stand in for it.
pub struct SettingData<'a> {
    pub base: Vec<&'a Sample>,
    pub unknown: Vec<&'a Sample>,
}

pub fn setting_data<'a>(setting: Setting, meta: &CorpusMeta, sft: &'a [Sample]) -> SettingData<'a> {
    let qa_ids: HashSet<u32> = meta.qa_ids.iter().copied().collect();
    let base = sft
        .iter()
        .filter(|s| s.knowledge_class == KnowledgeClass::Known)
        .filter(|s| match setting {
            Setting::Qa => s.task_kind == TaskKind::QA,
            Setting::Reasoning => {
                s.task_kind.is_reasoning() || (s.task_kind == TaskKind::QA && s.person_ids.iter().all(|p| qa_ids.contains(p)))
            }
        })
        .collect();
    let unknown = sft
        .iter()
        .filter(|s| s.knowledge_class == KnowledgeClass::Unknown)
        .filter(|s| setting == Setting::Reasoning || s.task_kind == TaskKind::QA)
        .collect();
    SettingData { base, unknown }
}

/// For every task in `base`, the same number of unknown items (lowest ids
/// first).
pub fn unknown_mirror<'a>(base: &[&Sample], unknown: &[&'a Sample]) -> Result<Vec<&'a Sample>> {
    let mut need: BTreeMap<TaskId, usize> = BTreeMap::new();
    for s in base {
        *need.entry(s.task()).or_default() += 1;
    }
    let mut by_task: HashMap<TaskId, Vec<&Sample>> = HashMap::new();
    for s in sorted_by_id(unknown.iter().copied()) {
        by_task.entry(s.task()).or_default().push(s);
    }
    let mut out = Vec::new();
    for (task, n) in need {
        let avail = by_task.get(&task).map_or(&[][..], Vec::as_slice);
        if avail.len() < n {
            return Err(Error::Shortage(format!(
                "{task}: need {n} unknown items, pool has {}",
                avail.len()
            )));
        }
        out.extend(&avail[..n]);
    }
    Ok(out)
}

/// Builds the manifest a spec describes from a corpus' SFT split.
pub fn build_manifest(spec: &VariantSpec, meta: &CorpusMeta, sft: &[Sample]) -> Result<Manifest> {
    spec.validate()?;
    let data = setting_data(spec.effective_setting(), meta, sft);
    if let Some(patch) = spec.patch {
        let unknown: Vec<Sample> = unknown_mirror(&data.base, &data.unknown)?.into_iter().cloned().collect();
        let known: Vec<Sample> = data
            .base
            .iter()
            .filter(|s| !matches!(patch.coverage, Coverage::MissingOne(k) if s.ktype == k))
            .map(|s| (*s).clone())
            .collect();
        return make_knownpatch_manifest(spec, &unknown, &known);
    }
    if spec.replaced.is_some() {
        let base: Vec<Sample> = data.base.iter().map(|s| (*s).clone()).collect();
        let unknown: Vec<Sample> = data.unknown.iter().map(|s| (*s).clone()).collect();
        return make_replacement_variant(spec, &base, &unknown);
    }
    shuffled_manifest(spec.clone(), &data.base)
}

/// Checks positions, id resolution and, for global-tail patch manifests, the
/// known-suffix / unknown-prefix composition.
pub fn check_manifest(manifest: &Manifest, samples: &HashMap<&str, &Sample>) -> Result<()> {
    for (i, e) in manifest.entries.iter().enumerate() {
        if e.0 != i {
            return Err(Error::InvalidSpec(format!("entry {i} has position {}", e.0)));
        }
        if !samples.contains_key(e.1.as_str()) {
            return Err(Error::MissingSample(e.1.clone()));
        }
    }
    let v = &manifest.variant;
    if let (Some(p), Order::PatchTail) = (v.patch, v.order) {
        if p.mode == PatchMode::GlobalTail {
            let tail = percent_of(manifest.budget, p.ratio) * v.patch_epochs() as usize;
            let split = manifest.entries.len().checked_sub(tail).ok_or_else(|| {
                Error::InvalidSpec("manifest shorter than its patch tail".into())
            })?;
            for (i, e) in manifest.entries.iter().enumerate() {
                let class = samples[e.1.as_str()].knowledge_class;
                let want = if i < split { KnowledgeClass::Unknown } else { KnowledgeClass::Known };
                if class != want {
                    return Err(Error::InvalidSpec(format!(
                        "position {i}: expected {want:?}, found {class:?}"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestGroup {
    STQA,
    DTQA,
    STSR,
    STDR,
    DTDR,
    WIKI,
    #[serde(rename = "SAME_TYPE_TEST")]
    SameTypeTest,
    OTHER,
}

impl TestGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            TestGroup::STQA => "STQA",
            TestGroup::DTQA => "DTQA",
            TestGroup::STSR => "STSR",
            TestGroup::STDR => "STDR",
            TestGroup::DTDR => "DTDR",
            TestGroup::WIKI => "WIKI",
            TestGroup::SameTypeTest => "SAME_TYPE_TEST",
            TestGroup::OTHER => "OTHER",
        }
    }
}

impl fmt::Display for TestGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relates a test set to what a variant replaced (or patched).
pub fn test_group_of(variant: &VariantSpec, test_set_id: &str) -> Result<TestGroup> {
    if test_set_id == WIKI_TEST_SET {
        return Ok(TestGroup::WIKI);
    }
    let t: TaskId = test_set_id.parse()?;
    Ok(match (variant.replaced, variant.patch) {
        (Some(Replaced::Type(k)), _) => match (t.kind, t.ktype == k) {
            (TaskKind::QA, true) => TestGroup::STQA,
            (TaskKind::QA, false) => TestGroup::DTQA,
            _ => TestGroup::OTHER,
        },
        (Some(Replaced::Task(r)), _) => match (t.kind, t.ktype == r.ktype) {
            (TaskKind::QA, true) => TestGroup::STQA,
            (TaskKind::QA, false) => TestGroup::DTQA,
            (_, true) if t == r => TestGroup::STSR,
            (_, true) => TestGroup::STDR,
            (_, false) => TestGroup::DTDR,
        },
        (None, Some(p)) => match p.coverage {
            Coverage::AllTypes => TestGroup::SameTypeTest,
            Coverage::MissingOne(k) if t.ktype == k => TestGroup::SameTypeTest,
            Coverage::MissingOne(_) => TestGroup::OTHER,
        },
        (None, None) => TestGroup::OTHER,
    })
}

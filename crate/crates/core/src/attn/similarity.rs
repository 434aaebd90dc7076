use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, TaskId, TaskKind};
use crate::error::{Error, Result};
use crate::schedule::{test_group_of, Replaced, Setting, TestGroup, VariantSpec};
use crate::warning::Warning;

/// Lowercased alphanumeric runs; every other character separates tokens.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Share of `b`'s tokens (with multiplicity) that occur anywhere in `a`.
pub fn context_similarity(a: &str, b: &str) -> Result<f64> {
    let tb = tokenize(b);
    if tb.is_empty() {
        return Err(Error::Empty("similarity target has no tokens".into()));
    }
    let ta: HashSet<String> = tokenize(a).into_iter().collect();
    let hits = tb.iter().filter(|t| ta.contains(*t)).count();
    Ok(hits as f64 / tb.len() as f64)
}

/// Mean similarity of the anchor against every context of a group. Contexts
/// without tokens are skipped with a warning.
pub fn group_similarity(anchor: &str, group: &[&str]) -> Result<(f64, Vec<Warning>)> {
    let mut warnings = Vec::new();
    let mut scores = Vec::with_capacity(group.len());
    for (i, c) in group.iter().enumerate() {
        match context_similarity(anchor, c) {
            Ok(s) => scores.push(s),
            Err(Error::Empty(_)) => warnings.push(Warning::new("empty_context", format!("group context {i} has no tokens"))),
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(Error::Empty("no scorable contexts in group".into()));
    }
    Ok((scores.iter().sum::<f64>() / scores.len() as f64, warnings))
}

pub const SIMILARITY_GROUPS: [TestGroup; 5] =
    [TestGroup::STSR, TestGroup::STQA, TestGroup::DTQA, TestGroup::STDR, TestGroup::DTDR];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Anchor tasks averaged over.
    pub anchors: Vec<String>,
    pub persons: usize,
    /// Group → mean similarity, averaged over persons then anchors.
    pub groups: BTreeMap<String, f64>,
    /// Anchor → group → mean similarity over persons.
    pub per_anchor: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Contextual similarity between each anchor task and the task groups defined
/// relative to it.
///
/// Comparisons are made per person: the anchor context of a person is scored
/// against that person's own contexts in each group, so differences reflect
/// the task formats rather than who the item is about. Items are keyed by
/// their first person id.
pub fn corpus_similarity(samples: &[Sample], anchors: &[TaskId]) -> Result<(SimilarityReport, Vec<Warning>)> {
    if anchors.is_empty() {
        return Err(Error::Empty("no anchor tasks".into()));
    }
    let mut by_person: BTreeMap<u32, HashMap<TaskId, Vec<String>>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.task_kind == TaskKind::QA || s.task_kind.is_reasoning()) {
        if let Some(&p) = s.person_ids.first() {
            by_person.entry(p).or_default().entry(s.task()).or_default().push(s.context());
        }
    }

    let mut warnings = Vec::new();
    let mut per_anchor = BTreeMap::new();
    let mut persons_used = 0;
    for &anchor in anchors {
        if !anchor.kind.is_reasoning() {
            return Err(Error::InvalidSpec(format!("anchor {anchor} is not a reasoning task")));
        }
        let mut spec = VariantSpec::baseline("similarity", Setting::Reasoning, 0);
        spec.replaced = Some(Replaced::Task(anchor));
        let mut sums: BTreeMap<TestGroup, (f64, usize)> = BTreeMap::new();
        let mut persons = 0;
        for tasks in by_person.values() {
            let Some(anchor_ctx) = tasks.get(&anchor).and_then(|v| v.first()) else { continue };
            persons += 1;
            let mut grouped: BTreeMap<TestGroup, Vec<&str>> = BTreeMap::new();
            for (task, ctxs) in tasks {
                let g = test_group_of(&spec, &task.to_string())?;
                grouped.entry(g).or_default().extend(ctxs.iter().map(String::as_str));
            }
            for (g, ctxs) in grouped {
                let (s, w) = group_similarity(anchor_ctx, &ctxs)?;
                warnings.extend(w);
                let e = sums.entry(g).or_default();
                e.0 += s;
                e.1 += 1;
            }
        }
        if persons == 0 {
            return Err(Error::Empty(format!("no items for anchor {anchor}")));
        }
        persons_used = persons_used.max(persons);
        per_anchor.insert(
            anchor.to_string(),
            sums.into_iter()
                .filter(|(g, _)| SIMILARITY_GROUPS.contains(g))
                .map(|(g, (s, n))| (g.as_str().to_owned(), s / n as f64))
                .collect::<BTreeMap<String, f64>>(),
        );
    }

    let mut groups = BTreeMap::new();
    for g in SIMILARITY_GROUPS {
        let vals: Vec<f64> = per_anchor.values().filter_map(|m: &BTreeMap<String, f64>| m.get(g.as_str()).copied()).collect();
        if !vals.is_empty() {
            groups.insert(g.as_str().to_owned(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok((
        SimilarityReport {
            anchors: anchors.iter().map(TaskId::to_string).collect(),
            persons: persons_used,
            groups,
            per_anchor,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(context_similarity("alpha gamma", "alpha beta").unwrap(), 0.5);
        assert_eq!(context_similarity("x y", "x x").unwrap(), 1.0);
        let s = "Question: When was Ann Li born?\nAnswer: 1974";
        assert_eq!(context_similarity(s, s).unwrap(), 1.0);
        assert!(context_similarity("a", " ,.; ").is_err());
        assert_eq!(tokenize("Zhejiang-University, 1974!"), vec!["zhejiang", "university", "1974"]);
    }

    #[test]
    fn group_examples() {
        let (s, w) = group_similarity("a b", &["a b"]).unwrap();
        assert_eq!((s, w.len()), (1.0, 0));
        let (s, w) = group_similarity("a b", &["a c", "..."]).unwrap();
        assert_eq!((s, w.len()), (0.5, 1));
        assert!(group_similarity("a", &["!!"]).is_err());
    }
}

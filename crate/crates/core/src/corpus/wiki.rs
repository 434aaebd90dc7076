use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sort_by_id, KType, Sample, Stage, TaskKind};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::persona::KnowledgeClass;
use crate::rng::SeedTree;
use crate::warning::Warning;

/// One line of the wiki input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiRecord {
    pub question: String,
    pub answers: Vec<String>,
    pub subset: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WikiQuota {
    /// Take up to this many questions from every subset.
    PerSubset(usize),
    /// Spread this total as evenly as possible over the subsets (subsets in
    /// name order receive the remainder first).
    Total(usize),
}

impl Default for WikiQuota {
    fn default() -> Self {
        WikiQuota::Total(1000)
    }
}

/// Samples a subset-balanced external test set from a JSONL file of
/// [`WikiRecord`]s. Subsets smaller than their quota are taken whole and
/// reported as a shortage warning.
pub fn ingest_wiki(path: &Path, quota: WikiQuota, seed: u64) -> Result<(Vec<Sample>, Vec<Warning>)> {
    let records: Vec<WikiRecord> = read_jsonl(path)?;
    let mut warnings = Vec::new();
    if records.is_empty() {
        warnings.push(Warning::new("wiki_empty", format!("{} has no records", path.display())));
        return Ok((Vec::new(), warnings));
    }

    let mut subsets: BTreeMap<&str, Vec<Sample>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let answers: Vec<String> = r.answers.iter().map(|a| a.trim().to_owned()).filter(|a| !a.is_empty()).collect();
        if r.question.trim().is_empty() || answers.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "record needs a question and at least one answer".into(),
            });
        }
        let mut s = Sample::new(
            Stage::Test,
            TaskKind::QA,
            KType::NONE,
            r.question.trim().to_owned(),
            answers[0].clone(),
            String::new(),
            Vec::new(),
            KnowledgeClass::External,
        );
        s.aliases = answers[1..].to_vec();
        if !seen.insert(s.id.clone()) {
            warnings.push(Warning::new("wiki_duplicate", format!("line {}: duplicate question skipped", i + 1)));
            continue;
        }
        subsets.entry(r.subset.as_str()).or_default().push(s);
    }

    let k = subsets.len();
    let tree = SeedTree::new(seed);
    let mut out = Vec::new();
    for (g, (name, mut items)) in subsets.into_iter().enumerate() {
        let want = match quota {
            WikiQuota::PerSubset(n) => n,
            WikiQuota::Total(t) => t / k + usize::from(g < t % k),
        };
        if items.len() < want {
            warnings.push(Warning::new(
                "wiki_shortage",
                format!("subset {name}: wanted {want}, only {} available", items.len()),
            ));
        }
        sort_by_id(&mut items);
        let picked = tree.shuffled(&format!("wiki/{name}"), 0, &items);
        out.extend(picked.into_iter().take(want));
    }
    sort_by_id(&mut out);
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write_records(dir: &Path, subsets: &[(&str, usize)]) -> std::path::PathBuf {
        let mut text = String::new();
        for (name, n) in subsets {
            for i in 0..*n {
                let r = WikiRecord {
                    question: format!("Question {i} of {name}?"),
                    answers: vec![format!("answer{i}"), format!("alias{i}")],
                    subset: (*name).into(),
                };
                writeln!(text, "{}", serde_json::to_string(&r).unwrap()).unwrap();
            }
        }
        let p = dir.join("wiki_in.jsonl");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn balanced_sample() {
        let dir = tempfile::tempdir().unwrap();
        let subsets: Vec<(String, usize)> = (0..10).map(|i| (format!("P{i}"), 150)).collect();
        let refs: Vec<(&str, usize)> = subsets.iter().map(|(s, n)| (s.as_str(), *n)).collect();
        let p = write_records(dir.path(), &refs);
        let (s, w) = ingest_wiki(&p, WikiQuota::PerSubset(100), 1).unwrap();
        assert_eq!(s.len(), 1000);
        assert!(w.is_empty());
        assert!(s.iter().all(|x| x.knowledge_class == KnowledgeClass::External && x.ktype == KType::NONE));
        assert_eq!(s[0].aliases.len(), 1);
        let (t, _) = ingest_wiki(&p, WikiQuota::Total(1000), 1).unwrap();
        assert_eq!(t, s);
        let (again, _) = ingest_wiki(&p, WikiQuota::PerSubset(100), 1).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn shortage_takes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_records(dir.path(), &[("P17", 3)]);
        let (s, w) = ingest_wiki(&p, WikiQuota::PerSubset(100), 1).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, "wiki_shortage");
    }

    #[test]
    fn empty_file_warns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.jsonl");
        std::fs::write(&p, "").unwrap();
        let (s, w) = ingest_wiki(&p, WikiQuota::default(), 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(w[0].code, "wiki_empty");
    }

    #[test]
    fn parse_error_has_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(&p, "{\"question\":\"q\",\"answers\":[\"a\"],\"subset\":\"s\"}\n{\"question\":1}\n").unwrap();
        match ingest_wiki(&p, WikiQuota::default(), 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}

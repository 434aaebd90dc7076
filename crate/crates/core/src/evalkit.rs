//! Exact-match scoring, Known/Unknown categorization and grouped
//! relative-accuracy reports.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, TaskKind, ANSWER_MARKER};
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::scalar::{mean, Scalar};
use crate::schedule::{test_group_of, TestGroup, VariantSpec};
use crate::warning::Warning;

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub output: String,
}

/// The final answer of a model output. Reasoning outputs yield the text after
/// the last answer marker, or `None` when there is no marker. QA outputs are
/// taken whole.
pub fn parse_final_answer(output: &str, kind: TaskKind) -> Option<&str> {
    if kind.is_reasoning() {
        output.rfind(ANSWER_MARKER).map(|i| output[i + ANSWER_MARKER.len()..].trim())
    } else {
        Some(output.trim())
    }
}

/// Trim-only, case-sensitive equality.
pub fn exact_match(pred: &str, gold: &str) -> bool {
    pred.trim() == gold.trim()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knowledge {
    Known,
    Unknown,
}

pub const CATEGORIZATION_TRIALS: usize = 5;

/// Known iff at least one of the five few-shot trials was answered correctly.
pub fn categorize_knowledge(results: &[bool]) -> Result<Knowledge> {
    if results.len() != CATEGORIZATION_TRIALS {
        return Err(Error::Arity {
            expected: CATEGORIZATION_TRIALS,
            got: results.len(),
        });
    }
    Ok(if results.iter().any(|&r| r) {
        Knowledge::Known
    } else {
        Knowledge::Unknown
    })
}

fn qa_block(question: &str, answer: &str) -> String {
    format!("Question: {question}\nAnswer: {answer}\n\n")
}

/// `trials` prompts of `k` exemplars each, followed by the target question.
///
/// Exemplars are drawn without replacement from `pool` after removing every
/// sample that mentions one of the target's persons, so no exemplar leaks the
/// answer and no exemplar repeats across trials.
pub fn build_fewshot_prompts(target: &Sample, pool: &[Sample], k: usize, trials: usize, seed: u64) -> Result<Vec<String>> {
    let persons: HashSet<u32> = target.person_ids.iter().copied().collect();
    let mut eligible: Vec<&Sample> = pool
        .iter()
        .filter(|s| s.id != target.id && !s.person_ids.iter().any(|p| persons.contains(p)))
        .collect();
    let need = k * trials;
    if eligible.len() < need {
        return Err(Error::Shortage(format!(
            "few-shot pool for {}: need {need} exemplars, {} eligible",
            target.id,
            eligible.len()
        )));
    }
    eligible.sort_unstable_by(|a, b| a.id.cmp(&b.id));
    let mut rng = SeedTree::new(seed).stream(&format!("fewshot/{}", target.id));
    let (chosen, _) = eligible.partial_shuffle(&mut rng, need);
    let tail = format!("Question: {}\nAnswer:", target.question);
    Ok((0..trials)
        .map(|t| {
            let mut p: String = chosen[t * k..(t + 1) * k]
                .iter()
                .map(|s| qa_block(&s.question, &s.answer))
                .collect();
            p.push_str(&tail);
            p
        })
        .collect())
}

/// A categorization prompt; models answer it under `prompt_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewshotPrompt {
    pub prompt_id: String,
    pub sample_id: String,
    pub trial: usize,
    pub prompt: String,
}

pub fn fewshot_prompt_id(sample_id: &str, trial: usize) -> String {
    format!("{sample_id}#{trial}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Categorized {
    pub sample_id: String,
    pub knowledge: Knowledge,
    pub correct_trials: usize,
}

/// Categorizes every target from predictions keyed by
/// [`fewshot_prompt_id`]. Each target must have exactly five trial outputs.
pub fn categorize_predictions(targets: &[Sample], preds: &[Prediction]) -> Result<Vec<Categorized>> {
    let by_id: HashMap<&str, &str> = preds.iter().map(|p| (p.sample_id.as_str(), p.output.as_str())).collect();
    targets
        .iter()
        .map(|s| {
            let outcomes: Vec<bool> = (0..CATEGORIZATION_TRIALS)
                .filter_map(|t| by_id.get(fewshot_prompt_id(&s.id, t).as_str()))
                .map(|out| sample_correct(s, out))
                .collect();
            let knowledge = categorize_knowledge(&outcomes)?;
            Ok(Categorized {
                sample_id: s.id.clone(),
                knowledge,
                correct_trials: outcomes.iter().filter(|&&c| c).count(),
            })
        })
        .collect()
}

fn sample_correct(s: &Sample, output: &str) -> bool {
    match parse_final_answer(output, s.task_kind) {
        Some(ans) => s.gold_answers().any(|g| exact_match(ans, g)),
        None => false,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCount {
    pub correct: usize,
    pub total: usize,
}

/// Per-test accuracies of one model, as written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub toolkit_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantSpec>,
    pub per_test: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, TestCount>,
    pub parse_failures: usize,
    pub missing_predictions: usize,
}

/// Scores predictions against a test corpus. Test samples without a
/// prediction count as incorrect and are reported in a warning; predictions
/// for unknown sample ids are an error.
pub fn score(test: &[Sample], preds: &[Prediction]) -> Result<(ScoreReport, Vec<Warning>)> {
    let index: HashMap<&str, &Sample> = test.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut outputs: HashMap<&str, &str> = HashMap::with_capacity(preds.len());
    for p in preds {
        if !index.contains_key(p.sample_id.as_str()) {
            return Err(Error::MissingSample(p.sample_id.clone()));
        }
        if outputs.insert(&p.sample_id, &p.output).is_some() {
            return Err(Error::InvalidSpec(format!("duplicate prediction for {}", p.sample_id)));
        }
    }

    // (test set, correct, parse failure, missing)
    let graded: Vec<(String, bool, bool, bool)> = test
        .par_iter()
        .map(|s| match outputs.get(s.id.as_str()) {
            None => (s.test_set_id(), false, false, true),
            Some(out) => {
                let parsed = parse_final_answer(out, s.task_kind);
                let ok = parsed.is_some_and(|a| s.gold_answers().any(|g| exact_match(a, g)));
                (s.test_set_id(), ok, parsed.is_none(), false)
            }
        })
        .collect();

    let mut counts: BTreeMap<String, TestCount> = BTreeMap::new();
    let (mut parse_failures, mut missing) = (0, 0);
    for (set, ok, failed, absent) in graded {
        let c = counts.entry(set).or_default();
        c.total += 1;
        c.correct += usize::from(ok);
        parse_failures += usize::from(failed);
        missing += usize::from(absent);
    }
    let per_test = counts
        .iter()
        .map(|(k, c)| (k.clone(), c.correct as f64 / c.total as f64))
        .collect();
    let mut warnings = Vec::new();
    if missing > 0 {
        warnings.push(Warning::new(
            "missing_predictions",
            format!("{missing} test samples have no prediction and were scored incorrect"),
        ));
    }
    if parse_failures > 0 {
        warnings.push(Warning::new(
            "parse_failures",
            format!("{parse_failures} reasoning outputs lack the answer marker"),
        ));
    }
    Ok((
        ScoreReport {
            toolkit_version: crate::VERSION.to_owned(),
            variant: None,
            per_test,
            counts,
            parse_failures,
            missing_predictions: missing,
        },
        warnings,
    ))
}

/// Accuracies of one fine-tuned model.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantAccuracy<T> {
    pub id: String,
    /// Needed when groups are derived from what the variant replaced.
    pub spec: Option<VariantSpec>,
    pub acc: BTreeMap<String, T>,
}

/// How test sets are assigned to report groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grouping {
    /// Group each variant's tests by their relation to the variant's spec,
    /// keeping only the listed groups.
    Derived(Vec<TestGroup>),
    /// The same test → group map for every variant.
    Fixed(BTreeMap<String, String>),
}

impl Grouping {
    pub fn qa() -> Self {
        Grouping::Derived(vec![TestGroup::STQA, TestGroup::DTQA, TestGroup::WIKI])
    }

    pub fn reasoning() -> Self {
        Grouping::Derived(vec![
            TestGroup::STSR,
            TestGroup::STDR,
            TestGroup::DTDR,
            TestGroup::STQA,
            TestGroup::DTQA,
            TestGroup::WIKI,
        ])
    }

    pub fn patch() -> Self {
        Grouping::Derived(vec![TestGroup::SameTypeTest, TestGroup::OTHER, TestGroup::WIKI])
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "qa" => Some(Self::qa()),
            "reasoning" => Some(Self::reasoning()),
            "patch" => Some(Self::patch()),
            _ => None,
        }
    }

    fn group_of(&self, variant: &VariantAccuracy<impl Scalar>, test: &str) -> Result<Option<String>> {
        match self {
            Grouping::Fixed(map) => Ok(map.get(test).cloned()),
            Grouping::Derived(keep) => {
                let spec = variant.spec.as_ref().ok_or_else(|| {
                    Error::InvalidSpec(format!("variant `{}` has no spec to derive groups from", variant.id))
                })?;
                let g = test_group_of(spec, test)?;
                Ok(keep.contains(&g).then(|| g.as_str().to_owned()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary<T> {
    pub mean_delta_pct: T,
    /// Sample standard deviation of the per-variant means over √n; zero when
    /// only one variant contributes.
    pub stderr_pct: T,
    pub n_variants: usize,
    pub single_variant: bool,
    /// Mean delta of each variant over its member tests.
    pub per_variant: BTreeMap<String, T>,
    /// Raw per-test deltas of each variant.
    pub deltas: BTreeMap<String, BTreeMap<String, T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub baseline_id: String,
    /// Baseline accuracy per test set.
    pub per_test: BTreeMap<String, T>,
    pub variants: Vec<String>,
    pub groups: BTreeMap<String, GroupSummary<T>>,
}

fn check_accuracies<T: Scalar>(who: &str, acc: &BTreeMap<String, T>) -> Result<()> {
    for (t, &a) in acc {
        if !(a >= T::zero() && a <= T::one()) {
            return Err(Error::Range(format!("{who}: accuracy of {t} is {a}, outside [0, 1]")));
        }
    }
    Ok(())
}

fn stderr<T: Scalar>(xs: &[T], m: T) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let n = T::count(xs.len());
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (n - T::one());
    var.sqrt() / n.sqrt()
}

/// Relative change of every variant against the baseline, averaged per group.
///
/// Tests and variants are processed in sorted order, so the result does not
/// depend on the order of the inputs. Tests whose baseline accuracy is zero
/// are excluded with a warning.
pub fn aggregate_report<T: Scalar>(
    baseline_id: &str,
    baseline: &BTreeMap<String, T>,
    variants: &[VariantAccuracy<T>],
    grouping: &Grouping,
) -> Result<(EvalReport<T>, Vec<Warning>)> {
    if variants.is_empty() {
        return Err(Error::Empty("no variant accuracies".into()));
    }
    check_accuracies(baseline_id, baseline)?;
    let mut sorted: Vec<&VariantAccuracy<T>> = variants.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for w in sorted.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::InvalidSpec(format!("variant `{}` listed twice", w[0].id)));
        }
    }
    let tests: BTreeSet<&String> = baseline.keys().collect();
    for v in &sorted {
        check_accuracies(&v.id, &v.acc)?;
        let vt: BTreeSet<&String> = v.acc.keys().collect();
        if vt != tests {
            let diff: Vec<&&String> = vt.symmetric_difference(&tests).collect();
            return Err(Error::IdMismatch(format!(
                "variant `{}` and baseline cover different test sets: {diff:?}",
                v.id
            )));
        }
    }

    let mut warnings = Vec::new();
    let zero: BTreeSet<&String> = baseline.iter().filter(|(_, &a)| a == T::zero()).map(|(t, _)| t).collect();
    for t in &zero {
        warnings.push(Warning::new(
            "zero_baseline",
            format!("baseline accuracy on {t} is zero; test excluded from deltas"),
        ));
    }

    let hundred = T::lit(100.0);
    let mut deltas: BTreeMap<String, BTreeMap<String, BTreeMap<String, T>>> = BTreeMap::new();
    for v in &sorted {
        for (t, &acc_v) in &v.acc {
            if zero.contains(t) {
                continue;
            }
            let Some(group) = grouping.group_of(*v, t)? else { continue };
            let acc_b = baseline[t];
            let d = hundred * (acc_v - acc_b) / acc_b;
            deltas.entry(group).or_default().entry(v.id.clone()).or_default().insert(t.clone(), d);
        }
    }

    let groups = deltas
        .into_iter()
        .map(|(g, by_variant)| {
            let per_variant: BTreeMap<String, T> = by_variant
                .iter()
                .map(|(v, ds)| (v.clone(), mean(&ds.values().copied().collect::<Vec<_>>()).unwrap_or_default()))
                .collect();
            let means: Vec<T> = per_variant.values().copied().collect();
            let m = mean(&means).unwrap_or_default();
            let summary = GroupSummary {
                mean_delta_pct: m,
                stderr_pct: stderr(&means, m),
                n_variants: means.len(),
                single_variant: means.len() == 1,
                per_variant,
                deltas: by_variant,
            };
            (g, summary)
        })
        .collect();

    Ok((
        EvalReport {
            baseline_id: baseline_id.to_owned(),
            per_test: baseline.clone(),
            variants: sorted.iter().map(|v| v.id.clone()).collect(),
            groups,
        },
        warnings,
    ))
}

/// One row per group: `group,mean_delta_pct,stderr_pct,n_variants` followed
/// by one column per variant.
pub fn report_csv<T: Scalar>(report: &EvalReport<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["group".to_owned(), "mean_delta_pct".into(), "stderr_pct".into(), "n_variants".into()];
    header.extend(report.variants.iter().cloned());
    let csv_err = |e: csv::Error| Error::InvalidSpec(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for (g, s) in &report.groups {
        let mut row = vec![g.clone(), s.mean_delta_pct.to_string(), s.stderr_pct.to_string(), s.n_variants.to_string()];
        row.extend(
            report
                .variants
                .iter()
                .map(|v| s.per_variant.get(v).map(T::to_string).unwrap_or_default()),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidSpec(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

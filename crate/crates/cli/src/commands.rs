use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use biopatch_core::attn::{
    corpus_similarity, entity_attention, layer_profile, relative_attention_change, select_window, LayerWindow,
};
use biopatch_core::config::RunConfig;
use biopatch_core::corpus::{
    build_corpus as assemble, ingest_wiki as ingest, load_meta, load_sft, load_test, KType, Sample, TaskId, TaskKind,
    WikiQuota, WIKI_FILE,
};
use biopatch_core::evalkit::{
    aggregate_report, build_fewshot_prompts, categorize_predictions, fewshot_prompt_id, report_csv, score as score_all,
    FewshotPrompt, Grouping, Knowledge, Prediction, ScoreReport, VariantAccuracy, CATEGORIZATION_TRIALS,
};
use biopatch_core::io::{json_bytes, read_json, read_jsonl, Staging};
use biopatch_core::persona::{KnowledgeClass, Person, PoolSizes, PoolsFile};
use biopatch_core::pipeline::{self, PEOPLE_FILE, POOLS_FILE};
use biopatch_core::schedule::{build_manifest, VariantSpec};
use biopatch_core::{AttentionDump, Warning};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::{
    AttnDelta, AttnProfile, AttnScore, BuildCorpus, Categorize, GenPeople, IngestWiki, Pipeline, Report, Schedule,
    Score, Similarity,
};

fn warn_all(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("{w}");
    }
}

fn commit(staging: Staging) -> Result<()> {
    staging.commit()?;
    Ok(())
}

/// Writes JSON to `out`, or to stdout when no path is given.
fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => {
            let mut s = Staging::new();
            s.add_json(p, value)?;
            commit(s)
        }
        None => {
            print!("{}", String::from_utf8(json_bytes(value))?);
            Ok(())
        }
    }
}

fn pool_sizes(a: &GenPeople) -> Result<PoolSizes> {
    match (a.known, a.test, a.unknown) {
        (None, None, None) => {
            let third = a.n / 3;
            let rem = a.n % 3;
            Ok(PoolSizes {
                known: third + usize::from(rem > 0),
                test: third + usize::from(rem > 1),
                unknown: third,
            })
        }
        (Some(known), Some(test), Some(unknown)) => Ok(PoolSizes { known, test, unknown }),
        _ => bail!("give all of --known, --test and --unknown, or none"),
    }
}

pub fn gen_people(a: GenPeople, cfg: Option<&RunConfig>) -> Result<()> {
    let cfg = match cfg {
        Some(c) => c.clone(),
        None => {
            let mut c = RunConfig::new(a.seed);
            c.population = a.n;
            c.pool_sizes = pool_sizes(&a)?;
            c.paths.names = a.names.clone();
            c
        }
    };
    let (persons, pools) = pipeline::people(&cfg)?;
    let mut s = Staging::new();
    s.add_jsonl(a.out.join(PEOPLE_FILE), &persons)?;
    s.add_json(a.out.join(POOLS_FILE), &pools)?;
    commit(s)
}

pub fn build_corpus(a: BuildCorpus, cfg: Option<&RunConfig>) -> Result<()> {
    let persons: Vec<Person> = read_jsonl(&a.people.join(PEOPLE_FILE))?;
    let pools: PoolsFile = read_json(&a.people.join(POOLS_FILE))?;
    let (seed, corpus_cfg, templates) = match cfg {
        Some(c) => (c.seed, c.corpus_config(), pipeline::template_pack(c)?),
        None => {
            let mut c = RunConfig::new(a.seed.unwrap_or(pools.seed));
            c.paths.templates = a.templates.clone();
            (c.seed, c.corpus_config(), pipeline::template_pack(&c)?)
        }
    };
    let corpus = assemble(&persons, &pools.pools, &corpus_cfg, &templates, seed)?;
    let mut s = Staging::new();
    corpus.stage_files(&a.out, &mut s)?;
    commit(s)
}

pub fn ingest_wiki(a: IngestWiki, cfg: Option<&RunConfig>) -> Result<()> {
    let (quota, seed) = match cfg {
        Some(c) => (c.wiki_quota, c.seed),
        None => {
            let q = match (a.per_subset, a.total) {
                (Some(n), _) => WikiQuota::PerSubset(n),
                (None, Some(n)) => WikiQuota::Total(n),
                (None, None) => WikiQuota::default(),
            };
            (q, a.seed)
        }
    };
    let (samples, warnings) = ingest(&a.input, quota, seed)?;
    warn_all(&warnings);
    let mut s = Staging::new();
    s.add_jsonl(a.out.join(WIKI_FILE), &samples)?;
    commit(s)
}

pub fn schedule(a: Schedule) -> Result<()> {
    let spec: VariantSpec = read_json(&a.variant)?;
    spec.validate()?;
    let meta = load_meta(&a.corpus)?;
    let sft = load_sft(&a.corpus)?;
    let manifest = build_manifest(&spec, &meta, &sft)?;
    emit(Some(&a.out), &manifest)
}

pub fn score(a: Score) -> Result<()> {
    let spec = a
        .variant
        .as_deref()
        .map(|p| -> Result<VariantSpec> {
            let s: VariantSpec = read_json(p)?;
            s.validate()?;
            Ok(s)
        })
        .transpose()?;
    let test = load_test(&a.test)?;
    let preds: Vec<Prediction> = read_jsonl(&a.pred)?;
    let (mut report, warnings) = score_all(&test, &preds)?;
    warn_all(&warnings);
    report.variant = spec;
    emit(Some(&a.out), &report)
}

fn qa_of(samples: &[Sample], class: KnowledgeClass) -> Vec<Sample> {
    samples
        .iter()
        .filter(|s| s.task_kind == TaskKind::QA && s.knowledge_class == class)
        .cloned()
        .collect()
}

/// Targets are the test persons' QA items; exemplars are known QA items of
/// the same knowledge type.
pub fn categorize(a: Categorize) -> Result<()> {
    let targets = qa_of(&load_test(&a.corpus)?, KnowledgeClass::Test);
    let known = qa_of(&load_sft(&a.corpus)?, KnowledgeClass::Known);
    let mut pools: HashMap<KType, Vec<Sample>> = HashMap::new();
    for s in known {
        pools.entry(s.ktype).or_default().push(s);
    }
    match &a.pred {
        None => {
            let prompts: Vec<Vec<FewshotPrompt>> = targets
                .par_iter()
                .map(|t| {
                    let pool = pools.get(&t.ktype).map_or(&[][..], Vec::as_slice);
                    let ps = build_fewshot_prompts(t, pool, a.k, CATEGORIZATION_TRIALS, a.seed)?;
                    Ok(ps
                        .into_iter()
                        .enumerate()
                        .map(|(trial, prompt)| FewshotPrompt {
                            prompt_id: fewshot_prompt_id(&t.id, trial),
                            sample_id: t.id.clone(),
                            trial,
                            prompt,
                        })
                        .collect())
                })
                .collect::<biopatch_core::Result<_>>()?;
            let flat: Vec<FewshotPrompt> = prompts.into_iter().flatten().collect();
            let mut s = Staging::new();
            s.add_jsonl(&a.out, &flat)?;
            commit(s)
        }
        Some(pred) => {
            let preds: Vec<Prediction> = read_jsonl(pred)?;
            let cats = categorize_predictions(&targets, &preds)?;
            let known = cats.iter().filter(|c| c.knowledge == Knowledge::Known).count();
            let mut s = Staging::new();
            s.add_jsonl(&a.out, &cats)?;
            commit(s)?;
            println!("{}", json!({ "known": known, "unknown": cats.len() - known }));
            Ok(())
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn report(a: Report) -> Result<()> {
    let baseline: ScoreReport = read_json(&a.baseline)?;
    let variants = a
        .variants
        .iter()
        .map(|p| -> Result<VariantAccuracy<f64>> {
            let r: ScoreReport = read_json(p)?;
            Ok(VariantAccuracy {
                id: r.variant.as_ref().map_or_else(|| stem(p), |v| v.name.clone()),
                spec: r.variant,
                acc: r.per_test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grouping = match Grouping::named(&a.grouping) {
        Some(g) => g,
        None => {
            let map: BTreeMap<String, String> = read_json(Path::new(&a.grouping))
                .with_context(|| format!("grouping `{}` is neither qa/reasoning/patch nor a JSON map", a.grouping))?;
            Grouping::Fixed(map)
        }
    };
    let baseline_id = baseline.variant.as_ref().map_or_else(|| stem(&a.baseline), |v| v.name.clone());
    let (report, warnings) = aggregate_report(&baseline_id, &baseline.per_test, &variants, &grouping)?;
    warn_all(&warnings);
    let mut s = Staging::new();
    s.add_json(&a.out, &report)?;
    s.add_bytes(a.out.with_extension("csv"), report_csv(&report)?.as_bytes())?;
    commit(s)
}

pub fn attn_score(a: AttnScore) -> Result<()> {
    let window: LayerWindow = a.window.parse()?;
    let dump = AttentionDump::read(&a.dump)?;
    let scores = dump
        .meta
        .instances
        .iter()
        .map(|i| Ok(json!({ "sample_id": i.sample_id, "score": entity_attention::<f64>(&dump, &i.sample_id, window)? })))
        .collect::<biopatch_core::Result<Vec<_>>>()?;
    let mean = if scores.is_empty() {
        None
    } else {
        Some(scores.iter().map(|s| s["score"].as_f64().unwrap_or(0.0)).sum::<f64>() / scores.len() as f64)
    };
    emit(a.out.as_deref(), &json!({ "window": window, "mean": mean, "instances": scores }))
}

pub fn attn_profile(a: AttnProfile) -> Result<()> {
    let dump = AttentionDump::read(&a.dump)?;
    let profile = layer_profile::<f64>(&dump)?;
    let means: Vec<f64> = profile.iter().map(|s| s.mean).collect();
    let window = select_window(&means, a.threshold)?;
    emit(
        a.out.as_deref(),
        &json!({ "threshold": a.threshold, "selected_window": window, "profile": profile }),
    )
}

pub fn attn_delta(a: AttnDelta) -> Result<()> {
    let window: LayerWindow = a.window.parse()?;
    let base = AttentionDump::read(&a.base)?;
    let variant = AttentionDump::read(&a.variant)?;
    let pct = relative_attention_change::<f64>(&variant, &base, window)?;
    emit(
        a.out.as_deref(),
        &json!({ "window": window, "instances": base.meta.instances.len(), "relative_change_pct": pct }),
    )
}

pub fn similarity(a: Similarity) -> Result<()> {
    let anchors: Vec<TaskId> = if a.anchor == "all" {
        TaskId::reasoning()
    } else {
        vec![a.anchor.parse().map_err(|_| anyhow!("anchor `{}` is not a task such as M_SR", a.anchor))?]
    };
    let test = load_test(&a.corpus)?;
    let (report, warnings) = corpus_similarity(&test, &anchors)?;
    warn_all(&warnings);
    emit(a.out.as_deref(), &report)
}

pub fn pipeline(a: Pipeline, cfg: Option<&RunConfig>) -> Result<()> {
    let cfg = cfg.ok_or_else(|| anyhow!("pipeline needs --config"))?;
    let out = a
        .out
        .or_else(|| cfg.paths.out.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set paths.out"))?;
    let result = pipeline::run(cfg, &out)?;
    warn_all(&result.warnings);
    commit(result.staging)?;
    print!("{}", String::from_utf8(json_bytes(&result.digests))?);
    Ok(())
}

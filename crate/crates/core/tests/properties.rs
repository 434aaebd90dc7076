use std::collections::{BTreeMap, HashSet};

use biopatch_core::attn::{context_similarity, entity_attention, select_window, AttentionDump, LayerWindow};
use biopatch_core::corpus::{KType, Sample, Stage, TaskKind};
use biopatch_core::evalkit::{aggregate_report, categorize_knowledge, exact_match, Grouping, Knowledge, VariantAccuracy};
use biopatch_core::persona::{generate_population, split_pools, KnowledgeClass, NamePools, PoolSizes};
use biopatch_core::schedule::{
    make_knownpatch_manifest, make_replacement_variant, make_shuffled_baseline, Coverage, PatchMode, PatchSpec,
    Replaced, Setting, Strategy, VariantSpec,
};
use proptest::prelude::*;

fn qa(ktype: KType, i: usize, class: KnowledgeClass) -> Sample {
    Sample::new(
        Stage::Sft,
        TaskKind::QA,
        ktype,
        format!("Q {ktype:?} {class:?} {i}?"),
        format!("A{i}"),
        String::new(),
        vec![i as u32],
        class,
    )
}

fn samples(per_type: usize, class: KnowledgeClass) -> Vec<Sample> {
    KType::ATTRIBUTES.iter().flat_map(|&k| (0..per_type).map(move |i| qa(k, i, class))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn population_ranges_and_pool_partition(seed in any::<u64>(), third in 2usize..40) {
        let n = third * 3;
        let persons = generate_population(seed, n, &NamePools::bundled()).unwrap();
        prop_assert_eq!(persons.len(), n);
        let names: HashSet<String> = persons.iter().map(|p| p.full_name()).collect();
        prop_assert_eq!(names.len(), n);
        for p in &persons {
            prop_assert!((1800..=1980).contains(&p.birth_year));
            prop_assert!(p.death_year - p.birth_year >= 30);
            prop_assert!(p.death_year <= (p.birth_year + 100).min(2020));
        }
        let pools = split_pools(seed, &persons, PoolSizes { known: third, test: third, unknown: third }).unwrap();
        let mut all: Vec<u32> = [&pools.known, &pools.test, &pools.unknown].iter().flat_map(|v| v.iter().copied()).collect();
        all.sort_unstable();
        let want: Vec<u32> = persons.iter().map(|p| p.id).collect();
        prop_assert_eq!(all, want);
    }

    #[test]
    fn shuffled_baseline_is_per_epoch_permutation(seed in any::<u64>(), per_type in 1usize..20, epochs in 1u32..4) {
        let base = samples(per_type, KnowledgeClass::Known);
        let m = make_shuffled_baseline(&base, epochs, seed).unwrap();
        prop_assert_eq!(m.entries.len(), base.len() * epochs as usize);
        let want: HashSet<&str> = base.iter().map(|s| s.id.as_str()).collect();
        for e in 0..epochs {
            let got: Vec<&str> = m.entries.iter().filter(|x| x.2 == e).map(|x| x.1.as_str()).collect();
            prop_assert_eq!(got.len(), base.len());
            prop_assert_eq!(got.into_iter().collect::<HashSet<_>>(), want.clone());
        }
        prop_assert_eq!(make_shuffled_baseline(&base, epochs, seed).unwrap(), m);
    }

    #[test]
    fn replacement_keeps_budget(seed in any::<u64>(), per_type in 1usize..30, f_idx in 0usize..7, remove in any::<bool>()) {
        let f = [0u32, 5, 10, 20, 50, 80, 100][f_idx];
        let base = samples(per_type, KnowledgeClass::Known);
        let pool = samples(per_type, KnowledgeClass::Unknown);
        let strategy = if remove { Strategy::RemoveKnown } else { Strategy::KeepKnown };
        let spec = VariantSpec {
            replaced: Some(Replaced::Type(KType::M)),
            unknown_fraction: f,
            strategy,
            ..VariantSpec::baseline("r", Setting::Qa, seed)
        };
        let m = make_replacement_variant(&spec, &base, &pool).unwrap();
        let n_unk = (per_type * f as usize + 50) / 100;
        // a zero fraction is the identity variant
        let budget = if remove && f > 0 { base.len() - per_type + n_unk } else { base.len() };
        prop_assert_eq!(m.budget, budget);
        prop_assert_eq!(m.entries.len(), budget * 3);
    }

    #[test]
    fn patch_tail_is_known_and_covering(seed in any::<u64>(), per_type in 5usize..40, r_idx in 0usize..3, miss in 0usize..5) {
        let ratio = [5u32, 10, 20][r_idx];
        let coverage = if miss == 4 { Coverage::AllTypes } else { Coverage::MissingOne(KType::ATTRIBUTES[miss]) };
        let unknown = samples(per_type, KnowledgeClass::Unknown);
        let known: Vec<Sample> = samples(per_type, KnowledgeClass::Known)
            .into_iter()
            .filter(|s| coverage != Coverage::MissingOne(s.ktype))
            .collect();
        let spec = VariantSpec {
            patch: Some(PatchSpec { ratio, coverage, mode: PatchMode::GlobalTail, patch_epochs: None }),
            ..VariantSpec::baseline("p", Setting::Qa, seed)
        };
        let m = make_knownpatch_manifest(&spec, &unknown, &known).unwrap();
        let p = (unknown.len() * ratio as usize + 50) / 100;
        prop_assert_eq!(m.budget, unknown.len());
        let split = m.entries.len() - p * spec.patch_epochs() as usize;
        let known_ids: HashSet<&str> = known.iter().map(|s| s.id.as_str()).collect();
        for (i, e) in m.entries.iter().enumerate() {
            prop_assert_eq!(i >= split, known_ids.contains(e.1.as_str()));
        }
        let tail_types: HashSet<KType> = m.entries[split..]
            .iter()
            .map(|e| known.iter().find(|s| s.id == e.1).unwrap().ktype)
            .collect();
        let expected = match coverage {
            Coverage::AllTypes => 4,
            Coverage::MissingOne(_) => 3,
        };
        prop_assert_eq!(tail_types.len(), expected.min(p));
    }

    #[test]
    fn aggregation_ignores_variant_order(
        base in prop::collection::vec(0.05f64..1.0, 4),
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..6),
        rot in 0usize..6,
    ) {
        let tests = ["B_QA", "D_QA", "M_QA", "wiki"];
        let acc = |v: &[f64]| -> BTreeMap<String, f64> { tests.iter().map(|t| t.to_string()).zip(v.iter().copied()).collect() };
        let kinds = ["B", "D", "M"];
        let variants: Vec<VariantAccuracy<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut spec = VariantSpec::baseline(format!("v{i}"), Setting::Qa, 0);
                spec.replaced = Some(kinds[i % 3].parse().unwrap());
                spec.unknown_fraction = 50;
                VariantAccuracy { id: spec.name.clone(), spec: Some(spec), acc: acc(r) }
            })
            .collect();
        let mut rotated = variants.clone();
        rotated.rotate_left(rot % variants.len());
        let (a, _) = aggregate_report("b", &acc(&base), &variants, &Grouping::qa()).unwrap();
        let (b, _) = aggregate_report("b", &acc(&base), &rotated, &Grouping::qa()).unwrap();
        for (k, g) in &a.groups {
            let h = &b.groups[k];
            prop_assert!((g.mean_delta_pct - h.mean_delta_pct).abs() < 1e-9);
            prop_assert!((g.stderr_pct - h.stderr_pct).abs() < 1e-9);
            prop_assert!(g.stderr_pct >= 0.0);
        }
    }

    #[test]
    fn similarity_bounded_and_reflexive(a in "[a-z ]{0,40}[a-z]", b in "[a-z ]{0,40}[a-z]") {
        prop_assert_eq!(context_similarity(&a, &a).unwrap(), 1.0);
        let x = context_similarity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn exact_match_reflexive_and_symmetric(a in "[ A-Za-z0-9]{0,12}", b in "[ A-Za-z0-9]{0,12}") {
        prop_assert!(exact_match(&a, &a));
        prop_assert_eq!(exact_match(&a, &b), exact_match(&b, &a));
    }

    #[test]
    fn categorization_is_monotone(bits in prop::collection::vec(any::<bool>(), 5), flip in 0usize..5) {
        let before = categorize_knowledge(&bits).unwrap();
        let mut more = bits.clone();
        more[flip] = true;
        let after = categorize_knowledge(&more).unwrap();
        if before == Knowledge::Known {
            prop_assert_eq!(after, Knowledge::Known);
        }
        prop_assert_eq!(before == Knowledge::Known, bits.iter().any(|&b| b));
    }

    #[test]
    fn entity_attention_linear_and_span_monotone(
        rows in prop::collection::vec(prop::collection::vec(0.0f32..1.0, 6), 4),
        lo in 0usize..5,
        scale in 0.1f32..1.0,
    ) {
        let norm: Vec<f32> = rows
            .iter()
            .flat_map(|r| {
                let s: f32 = r.iter().sum::<f32>() + 1.0;
                r.iter().map(move |v| v / s)
            })
            .collect();
        let scaled: Vec<f32> = norm.iter().map(|v| v * scale).collect();
        let w = LayerWindow::new(0, 3).unwrap();
        let narrow = AttentionDump::from_blocks(4, vec![("x".into(), (lo, lo + 1), norm.clone())]).unwrap();
        let wide = AttentionDump::from_blocks(4, vec![("x".into(), (lo, 6), norm)]).unwrap();
        let small = AttentionDump::from_blocks(4, vec![("x".into(), (lo, lo + 1), scaled)]).unwrap();
        let n: f64 = entity_attention(&narrow, "x", w).unwrap();
        let v: f64 = entity_attention(&wide, "x", w).unwrap();
        let s: f64 = entity_attention(&small, "x", w).unwrap();
        prop_assert!(v + 1e-9 >= n);
        prop_assert!((s - n * scale as f64).abs() < 1e-5);
    }

    #[test]
    fn selected_window_meets_threshold(profile in prop::collection::vec(0.0f64..1.0, 1..30), thr in 0.0f64..=1.0) {
        let w = select_window(&profile, thr).unwrap();
        let max = profile.iter().copied().fold(f64::MIN, f64::max);
        prop_assert!(w.lo <= w.hi && w.hi < profile.len());
        prop_assert!(profile[w.lo..=w.hi].iter().all(|&v| v >= thr * max));
    }

    #[test]
    fn dump_round_trip_bit_exact(vals in prop::collection::vec(0.0f32..1.0, 1..10), layers in 1usize..5) {
        let s: f32 = vals.iter().sum::<f32>() + 0.5;
        let row: Vec<f32> = vals.iter().map(|v| v / s).collect();
        let blob: Vec<f32> = (0..layers).flat_map(|_| row.clone()).collect();
        let d = AttentionDump::from_blocks(layers, vec![("s".into(), (0, row.len()), blob)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        let back = AttentionDump::read(dir.path()).unwrap();
        prop_assert_eq!(&back.meta, &d.meta);
        let bits = |x: &AttentionDump| x.blob.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&d));
    }
}

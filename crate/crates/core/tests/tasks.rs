mod common;

use std::collections::BTreeSet;

use convmol::chat::FixedBackend;
use convmol::dialogue::{read_jsonl_records, to_jsonl};
use convmol::smiles::{canonical, parse};
use convmol::tasks::{
    corrupt_spans, dual_augment, generate_pretrain, make_mapping_records, make_prompt,
    make_spatial_records, prefix_matches, reconstruct, smiles_tokens, span_corrupt, EntityRef,
    PretrainSources, TaskConfig, TaskError, TaskKind, TaskRecord, ENTITY_SEPARATOR,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toks(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn entity(mention: &str, smiles: &str) -> EntityRef {
    EntityRef {
        mention: mention.into(),
        smiles: smiles.into(),
        name: mention.into(),
    }
}

#[test]
fn span_corruption_round_trips_1000_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = common::corpus();
    for case in 0..1000 {
        let tokens = smiles_tokens(&corpus[case % corpus.len()]);
        if tokens.len() < 2 {
            continue;
        }
        let ratio = [0.15, 0.3, 0.5, 0.9][case % 4];
        let (input, target) = span_corrupt(&tokens, &mut rng, ratio, 3.0);
        assert_eq!(
            reconstruct(&input, &target).as_ref(),
            Some(&tokens),
            "case {case}"
        );
        // sentinels appear once each, in order, in both halves
        let sent = |v: &[String]| {
            v.iter()
                .filter(|t| {
                    t.starts_with('<')
                        && t.ends_with('>')
                        && t[1..t.len() - 1].parse::<usize>().is_ok()
                })
                .cloned()
                .collect::<Vec<_>>()
        };
        assert_eq!(sent(&input), sent(&target));
        for (i, s) in sent(&input).iter().enumerate() {
            assert_eq!(s, &format!("<{i}>"));
        }
        let masked = target.len() - sent(&target).len();
        let expected = ((tokens.len() as f64 * ratio).round() as usize).min(tokens.len() - 1);
        assert_eq!(masked, expected);
    }
}

#[test]
fn direct_span() {
    let (i, t) = corrupt_spans(&toks(&["a", "b", "c", "d"]), &[(1, 2)]);
    assert_eq!((i, t), (toks(&["a", "<0>", "d"]), toks(&["<0>", "b", "c"])));
}

#[test]
fn spatial_targets_rederive() {
    let corpus = common::corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in corpus.iter().take(100) {
        let g = parse(s).unwrap();
        common::check_spatial(&make_spatial_records(&g, &mut rng, 0.15), g.atom_count());
    }
}

#[test]
fn twenty_atoms_three_records() {
    let g = parse("CCCCCCCCCCCCCCCCCCCC").unwrap();
    assert_eq!(g.atom_count(), 20);
    let recs = make_spatial_records(&g, &mut ChaCha8Rng::seed_from_u64(0), 0.15);
    assert_eq!(recs.len(), 3);
}

#[test]
fn mapping_examples() {
    let recs = make_mapping_records(
        "ethanol in water",
        &[entity("ethanol", "CCO"), entity("water", "O")],
    );
    assert_eq!(recs[0].task, TaskKind::MapText2Smiles);
    assert_eq!(recs[0].target, "CCO O");
    assert_eq!(recs.len(), 3);
    assert!(make_mapping_records("nothing here", &[]).is_empty());
    let recs = make_mapping_records(
        "water and water",
        &[entity("water", "O"), entity("water", "O")],
    );
    assert_eq!(recs[0].target, "O O");
}

#[test]
fn dual_augment_examples() {
    let backend = FixedBackend {
        id: "stub".into(),
        smiles: vec!["C".into()],
        description: "A stub description.".into(),
    };
    let pool = toks(&["CCO", "c1ccccc1", "CC(=O)O"]);
    let (pairs, stats) = dual_augment(&pool, &backend, &[]).unwrap();
    assert_eq!(pairs.len(), 3);
    assert_eq!(stats.produced, 3);
    assert!(pairs
        .iter()
        .all(|p| p.meta.get("augmented").map(String::as_str) == Some("true")));
    assert!(dual_augment(&[], &backend, &[]).unwrap().0.is_empty());

    let refs = vec![
        ("r1".to_string(), "OCC".to_string()),
        ("r2".to_string(), "CCN".to_string()),
        ("r3".to_string(), "C1=CC=CC=C1".to_string()),
    ];
    let canon = |s: &str| canonical(&parse(s).unwrap());
    let pool_set: BTreeSet<String> = pool.iter().map(|s| canon(s)).collect();
    let expected: Vec<String> = refs
        .iter()
        .filter(|(_, s)| pool_set.contains(&canon(s)))
        .map(|(id, _)| id.clone())
        .collect();
    match dual_augment(&pool, &backend, &refs) {
        Err(TaskError::Overlap { ids }) => assert_eq!(ids, expected),
        other => panic!("expected overlap, got {other:?}"),
    }
}

fn pretrain_sources() -> PretrainSources {
    let d = common::data_dir();
    PretrainSources {
        text: Some(d.join("texts.txt")),
        smiles: Some(d.join("molecules.smi")),
        properties: Some(d.join("properties.jsonl")),
        lexicon: Some(d.join("lexicon.jsonl")),
        pairs: Some(d.join("toy_pairs.jsonl")),
    }
}

#[test]
fn all_sources_cover_every_prefix_family() {
    let recs = generate_pretrain(&pretrain_sources(), &TaskConfig::default(), 1).unwrap();
    let kinds: BTreeSet<TaskKind> = recs.iter().map(|r| r.task).collect();
    assert_eq!(kinds.len(), 7, "{kinds:?}");
    for p in [
        "Fill:",
        "Spatial:",
        "Name to SMILES:",
        "SMILES to name:",
        "Text to SMILES:",
        "Predict Solubility:",
    ] {
        assert!(recs.iter().any(|r| r.prefix == p), "{p}");
    }
    assert!(recs.iter().all(|r| prefix_matches(r.task, &r.prefix)));
}

#[test]
fn smiles_only_source() {
    let sources = PretrainSources {
        smiles: Some(common::data_dir().join("molecules.smi")),
        ..PretrainSources::default()
    };
    let recs = generate_pretrain(&sources, &TaskConfig::default(), 1).unwrap();
    assert!(recs
        .iter()
        .all(|r| matches!(r.task, TaskKind::MlmSmiles | TaskKind::Spatial)));
}

#[test]
fn pretrain_is_deterministic_and_round_trips() {
    let a = generate_pretrain(&pretrain_sources(), &TaskConfig::default(), 5).unwrap();
    let b = generate_pretrain(&pretrain_sources(), &TaskConfig::default(), 5).unwrap();
    assert_eq!(to_jsonl(&a), to_jsonl(&b));
    let c = generate_pretrain(&pretrain_sources(), &TaskConfig::default(), 6).unwrap();
    assert_ne!(to_jsonl(&a), to_jsonl(&c));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    std::fs::write(&path, to_jsonl(&a)).unwrap();
    let back: Vec<TaskRecord> = read_jsonl_records(&path).unwrap();
    assert_eq!(back, a);
}

#[test]
fn missing_source_is_an_error() {
    let sources = PretrainSources {
        text: Some("/nope/texts.txt".into()),
        ..PretrainSources::default()
    };
    assert!(generate_pretrain(&sources, &TaskConfig::default(), 0).is_err());
}

#[test]
fn pair_prompts_never_leak_answers() {
    let recs = generate_pretrain(&pretrain_sources(), &TaskConfig::default(), 2).unwrap();
    let prompts: Vec<&TaskRecord> = recs
        .iter()
        .filter(|r| r.meta.get("source").map(String::as_str) == Some("pairs"))
        .collect();
    assert!(!prompts.is_empty());
    let mut excluded_something = false;
    for r in prompts {
        let answer = canonical(&parse(&r.target).unwrap());
        assert!(
            !common::prompt_entity_canonicals(&r.input).contains(&answer),
            "{}",
            r.input
        );
        excluded_something |= !r.input.contains(ENTITY_SEPARATOR);
    }
    assert!(excluded_something);
}

proptest! {
    #[test]
    fn reconstruction_holds_for_all_seeds(seed in any::<u64>(), n in 2usize..60, ratio in 0.01f64..0.99, mean in 1.0f64..6.0) {
        let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let (input, target) = span_corrupt(&tokens, &mut ChaCha8Rng::seed_from_u64(seed), ratio, mean);
        prop_assert_eq!(reconstruct(&input, &target), Some(tokens));
    }

    #[test]
    fn prompt_excludes_answers(ans in prop::sample::select(vec!["CCO", "OCC", "c1ccccc1", "CC(=O)O", "O"])) {
        let ents = vec![entity("ethanol", "CCO"), entity("benzene", "C1=CC=CC=C1"), entity("water", "O")];
        let p = make_prompt("Some text.", &ents, &[ans.to_string()]);
        let a = canonical(&parse(ans).unwrap());
        prop_assert!(!common::prompt_entity_canonicals(&p).contains(&a));
        let kept = ents.iter().filter(|e| canonical(&parse(&e.smiles).unwrap()) != a).count();
        prop_assert_eq!(common::prompt_entity_canonicals(&p).len(), kept);
    }
}

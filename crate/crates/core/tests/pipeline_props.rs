mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use ees_core::eval::{generate_fixture, Evaluator, ACTION_LEXICON};
use ees_core::graph::{Direction, EdgeLabel, EntityType, Graph, NodeId, NodeKind};
use ees_core::ingest::{
    build_graph, build_graph_from_reader, EesRecord, RecordContext, RecordEntity, RecordEvent, RecordScene,
};
use ees_core::normalize_name;
use ees_core::pipeline::{
    match_scenes, retrieve_context, CandidateScene, MatchConfig, MatchMode, Providers, SimilarityMode,
    TypeNormalizer,
};
use ees_core::similarity::{cosine, EmbeddingProvider, LexiconExtractor, ReferenceEmbedder};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const RAW_TYPES: &[&str] = &["Person", "person", "Character", "Company", "Place", "Item", "Widget"];
const REC_NAMES: &[&str] = &["Ann", "Bob", "Cat", " Ann ", "Dan"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Defect {
    None,
    NoContext,
    NoEvents,
    EmptyScene,
    UnknownParticipant,
}

fn random_record<R: Rng>(r: &mut R, i: usize) -> (EesRecord, Defect) {
    let defect = match r.random_range(0..10) {
        0 => Defect::NoContext,
        1 => Defect::NoEvents,
        2 => Defect::EmptyScene,
        3 => Defect::UnknownParticipant,
        _ => Defect::None,
    };
    let mut entities: Vec<RecordEntity> = Vec::new();
    for _ in 0..r.random_range(1..=3) {
        let e = RecordEntity {
            name: REC_NAMES.choose(r).unwrap().to_string(),
            entity_type: RAW_TYPES.choose(r).unwrap().to_string(),
        };
        let key = (normalize_name(&e.name), e.entity_type.clone());
        if !entities.iter().any(|x| (normalize_name(&x.name), x.entity_type.clone()) == key) {
            entities.push(e);
        }
    }
    let names: Vec<String> = entities.iter().map(|e| e.name.clone()).collect();
    let mut events = Vec::new();
    for _ in 0..r.random_range(1..=3) {
        let n = r.random_range(1..=names.len());
        events.push(RecordEvent {
            entity_names: names.choose_multiple(r, n).cloned().collect(),
            action: r.random_bool(0.5).then(|| ACTIONS.choose(r).unwrap().to_string()),
            description: TEXTS.choose(r).unwrap().to_string(),
        });
    }
    match defect {
        Defect::NoEvents => events.clear(),
        Defect::UnknownParticipant => events[0].entity_names.push("Nobody".into()),
        _ => {}
    }
    let record = EesRecord {
        record_id: format!("r{i}"),
        entities,
        events,
        scene: RecordScene {
            description: if defect == Defect::EmptyScene { "  ".into() } else { TEXTS.choose(r).unwrap().to_string() },
            location: None,
            time: None,
        },
        context: (defect != Defect::NoContext).then(|| RecordContext {
            context_id: format!("c{}", r.random_range(0..8)),
            description: "background".into(),
            time: None,
            location: None,
        }),
    };
    (record, defect)
}

/// Expected node/edge/rejection counts, computed from the records alone.
fn counting_oracle(records: &[(EesRecord, Defect)], normalizer: &TypeNormalizer) -> (usize, usize, BTreeMap<String, usize>) {
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    let mut entities: HashSet<(EntityType, String)> = HashSet::new();
    let (mut events, mut scenes, mut participates) = (0, 0, 0);
    let mut contexts: HashSet<String> = HashSet::new();
    let mut context_entities: HashSet<(String, EntityType, String)> = HashSet::new();
    let mut context_other = 0;
    for (rec, defect) in records {
        let rule = match defect {
            Defect::NoContext => Some("missing_context"),
            Defect::NoEvents => Some("no_events"),
            Defect::EmptyScene => Some("non_empty"),
            Defect::UnknownParticipant => Some("unknown_entity"),
            Defect::None => None,
        };
        if let Some(rule) = rule {
            *rejections.entry(rule.into()).or_default() += 1;
            continue;
        }
        let keys: Vec<(EntityType, String)> = rec
            .entities
            .iter()
            .map(|e| (normalizer.normalize(&e.entity_type), normalize_name(&e.name)))
            .collect();
        let distinct: BTreeSet<_> = keys.iter().cloned().collect();
        entities.extend(distinct.iter().cloned());
        for ev in &rec.events {
            let wanted: HashSet<String> = ev.entity_names.iter().map(|n| normalize_name(n)).collect();
            participates += distinct.iter().filter(|(_, n)| wanted.contains(n)).count();
        }
        events += rec.events.len();
        scenes += 1;
        let ctx = rec.context.as_ref().unwrap().context_id.clone();
        contexts.insert(ctx.clone());
        for (t, n) in &distinct {
            context_entities.insert((ctx.clone(), *t, n.clone()));
        }
        context_other += rec.events.len() + 1;
    }
    let nodes = entities.len() + events + scenes + contexts.len();
    let edges = participates + events + context_entities.len() + context_other;
    (nodes, edges, rejections)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ingest_counts_match_oracle(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<(EesRecord, Defect)> = (0..100).map(|i| random_record(&mut r, i)).collect();
        let normalizer = TypeNormalizer::default();
        let (graph, report) = build_graph(records.iter().map(|(rec, _)| rec), &normalizer);
        let (nodes, edges, rejections) = counting_oracle(&records, &normalizer);
        prop_assert_eq!(report.read, 100);
        prop_assert_eq!(report.rejected, rejections.values().sum::<usize>());
        prop_assert_eq!(report.accepted + report.rejected, 100);
        prop_assert_eq!(&report.error_counts, &rejections);
        prop_assert_eq!((report.nodes, report.edges), (nodes, edges));
        prop_assert_eq!((graph.node_count(), graph.edge_count()), (nodes, edges));
        prop_assert!(graph.check_invariants().is_empty());
    }

    #[test]
    fn match_scenes_matches_sort_oracle(picks in proptest::collection::vec(0..TEXTS.len(), 0..12), q in 0..TEXTS.len(), k in 1usize..8) {
        let candidates: Vec<CandidateScene> = picks
            .iter()
            .enumerate()
            .map(|(i, &t)| CandidateScene { id: NodeId(100 - i as u64), context_text: TEXTS[t].into() })
            .collect();
        let config = MatchConfig { k_scenes: k, ..MatchConfig::default() };
        let got = match_scenes(TEXTS[q], &candidates, &config, &ReferenceEmbedder).unwrap();
        let query = ReferenceEmbedder.embed(TEXTS[q]).unwrap();
        let mut expected: Vec<(NodeId, f64)> = candidates
            .iter()
            .map(|c| (c.id, cosine(&query, &ReferenceEmbedder.embed(&c.context_text).unwrap()).unwrap()))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        expected.truncate(k);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn retrieve_context_matches_brute_force(seed in any::<u64>(), mode in 0..3usize) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut r, 150);
        let mode = [MatchMode::Es, MatchMode::Ee, MatchMode::Ees][mode];
        let similarity = if mode == MatchMode::Es { SimilarityMode::Semantic } else { SimilarityMode::SemanticAction };
        let config = MatchConfig::default().with_modes(mode, similarity);
        let entities = ids_of_kind(&g, NodeKind::Entity);
        let n = r.random_range(1..=entities.len().min(4));
        let matched: Vec<NodeId> = entities.choose_multiple(&mut r, n).copied().collect();
        let mut scored = |kind| -> Vec<(NodeId, f64)> {
            let pool = ids_of_kind(&g, kind);
            let n = r.random_range(0..=pool.len().min(5));
            pool.choose_multiple(&mut r, n).map(|&id| (id, r.random_range(-1.0..=1.0))).collect()
        };
        let top_events = scored(NodeKind::Event);
        let top_scenes = scored(NodeKind::Scene);

        let got = retrieve_context(&g, &matched, &top_events, &top_scenes, &config).unwrap();
        let expected = brute_force(&g, &matched, &top_events, &top_scenes, mode);
        prop_assert_eq!(got.ranked.len(), expected.len());
        for (a, (id, total)) in got.ranked.iter().zip(&expected) {
            prop_assert_eq!(a.id, *id);
            prop_assert!((a.total - total).abs() < 1e-12);
        }
    }
}

fn brute_force(
    g: &Graph,
    matched: &[NodeId],
    top_events: &[(NodeId, f64)],
    top_scenes: &[(NodeId, f64)],
    mode: MatchMode,
) -> Vec<(NodeId, f64)> {
    let use_events = mode != MatchMode::Es;
    let use_scenes = mode != MatchMode::Ee;
    let ev_ids: Vec<NodeId> = if use_events { top_events.iter().map(|p| p.0).collect() } else { vec![] };
    let sc_ids: Vec<NodeId> = if use_scenes { top_scenes.iter().map(|p| p.0).collect() } else { vec![] };
    let best = |linked: &[NodeId], scores: &[(NodeId, f64)]| {
        scores
            .iter()
            .filter(|(id, _)| linked.contains(id))
            .map(|p| p.1)
            .reduce(f64::max)
            .unwrap_or(0.0)
    };
    let mut out: Vec<(NodeId, f64)> = oracle_contexts(g, [matched, &ev_ids, &sc_ids])
        .into_iter()
        .map(|c| {
            let linked = g.neighbors(c, EdgeLabel::ContextOf, Direction::Out).unwrap();
            let overlap = matched.iter().filter(|m| linked.contains(m)).count() as f64 / matched.len() as f64;
            let mut parts = vec![overlap];
            if use_events {
                parts.push(best(&linked, top_events));
            }
            if use_scenes {
                parts.push(best(&linked, top_scenes));
            }
            (c, parts.iter().sum::<f64>() / parts.len() as f64)
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

#[test]
fn reader_counts_malformed_lines() {
    let fixture = generate_fixture(5, 1).unwrap();
    let mut text = fixture.corpus_jsonl();
    text.push_str("{not json\n\n{\"record_id\":\"x\",\"colour\":1}\n");
    let (graph, report) = build_graph_from_reader(text.as_bytes(), &TypeNormalizer::default()).unwrap();
    assert_eq!(report.rejected, 2);
    assert_eq!(report.error_counts.get("malformed"), Some(&2));
    assert_eq!(report.accepted, fixture.corpus.len());
    let last = report.rejections.last().unwrap();
    assert_eq!(last.line, Some(fixture.corpus.len() + 3));
    assert_eq!(graph.contexts().count(), 5);
}

#[test]
fn parallel_evaluation_matches_sequential() {
    let fixture = generate_fixture(20, 3).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, _) = build_graph(fixture.corpus.iter(), &normalizer);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let evaluator = Evaluator::new(&graph, &normalizer, Providers::new(&ReferenceEmbedder, &extractor));
    let queries = fixture.queries();
    let config = MatchConfig::default();
    let sequential = evaluator.with_jobs(1).evaluate(&queries, &config).unwrap();
    assert_eq!(evaluator.with_jobs(0).evaluate(&queries, &config).unwrap(), sequential);
    assert_eq!(evaluator.with_jobs(3).evaluate(&queries, &config).unwrap(), sequential);
}

#[test]
fn missing_gold_is_reported_not_fatal() {
    let fixture = generate_fixture(4, 2).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, _) = build_graph(fixture.corpus.iter(), &normalizer);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let evaluator = Evaluator::new(&graph, &normalizer, Providers::new(&ReferenceEmbedder, &extractor));
    let mut q = fixture.verbatim[0].clone();
    q.gold_context_id = "no-such-context".into();
    let report = evaluator.evaluate(&[q], &MatchConfig::default()).unwrap();
    assert!(report.rows[0].gold_missing);
    assert_eq!(report.match_rate, 0.0);
}

#[test]
fn scene_stage_does_not_hurt_on_fixture() {
    let fixture = generate_fixture(50, 42).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, _) = build_graph(fixture.corpus.iter(), &normalizer);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let evaluator = Evaluator::new(&graph, &normalizer, Providers::new(&ReferenceEmbedder, &extractor)).with_jobs(0);
    let rows = evaluator.run_ablation(&fixture.queries(), &MatchConfig::default()).unwrap();
    let hit1 = |mode| {
        rows.iter()
            .find(|r| r.method == mode && r.similarity == SimilarityMode::SemanticAction)
            .unwrap()
            .report
            .hit_at_1
    };
    assert!(hit1(MatchMode::Ees) >= hit1(MatchMode::Ee));
    for row in &rows {
        let m = &row.report;
        assert!(m.hit_at_1 <= m.hit_at_2 && m.hit_at_2 <= m.match_rate && m.match_rate <= 1.0);
    }
}

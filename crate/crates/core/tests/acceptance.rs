//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion reports a single PASS/FAIL line; exits non-zero on any failure.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ees_core::eval::{generate_fixture, Evaluator, ABLATION_GRID, ACTION_LEXICON};
use ees_core::graph::{ContextLinks, EntityType, Graph, NodeId, NodeKind};
use ees_core::ingest::{build_graph, EesRecord, RecordEntity, RecordEvent, RecordScene};
use ees_core::pipeline::{run_pipeline, MatchConfig, MatchMode, Providers, SimilarityMode, TypeNormalizer};
use ees_core::query::{
    build_context_query, build_entity_query, build_event_scene_query, build_events_query, build_scenes_query, parse,
    run,
};
use ees_core::similarity::{
    cosine, event_score, top_k, CountingEmbedder, Embedding, LexiconExtractor, ReferenceEmbedder,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cosine_oracle() {
    let start = Instant::now();
    let mut r = rng(1);
    for _ in 0..1000 {
        let dim = r.random_range(2..=512);
        let a: Vec<f64> = (0..dim).map(|_| r.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| r.random_range(-10.0..10.0)).collect();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let expected = dot / (na * nb);
        let got = cosine(&Embedding::new(a).unwrap(), &Embedding::new(b).unwrap()).unwrap();
        assert!((got - expected).abs() <= 1e-9, "dim {dim}: {got} vs {expected}");
    }
    let u = Embedding::new(vec![1.0, 2.0, 2.0]).unwrap();
    let v = Embedding::new(vec![2.0, 1.0, 2.0]).unwrap();
    assert_eq!(cosine(&u, &v).unwrap(), 8.0 / 9.0);
    assert!(start.elapsed() < Duration::from_secs(1), "took {:?}", start.elapsed());
}

fn event_score_linearity() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let (sa, ss, w1) = (r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0), r.random_range(0.0..=1.0));
        let w2 = 1.0 - w1;
        let got = event_score(sa, ss, w1, w2).unwrap();
        assert!((got - (w1 * sa + w2 * ss)).abs() <= 1e-12);
        assert_eq!(event_score(sa, ss, 1.0, 0.0).unwrap(), sa);
        assert_eq!(event_score(sa, ss, 0.0, 1.0).unwrap(), ss);
    }
}

fn top_k_oracle() {
    let mut r = rng(3);
    for _ in 0..500 {
        let n = r.random_range(0..40);
        let mut scored: Vec<(u64, f64)> = (0..n as u64)
            .map(|id| (id, f64::from(r.random_range(0..6u8)) / 5.0))
            .collect();
        scored.shuffle(&mut r);
        let k = r.random_range(0..=n + 3);
        let mut expected = scored.clone();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        expected.truncate(k);
        assert_eq!(top_k(&scored, k), expected);
    }
}

fn assert_round_trip(q: &str) {
    assert_eq!(parse(q).unwrap().render(), q);
}

fn query_equivalence() {
    let mut r = rng(4);
    for _ in 0..100 {
        let g = random_graph(&mut r, 200);
        assert!(g.node_count() <= 200);
        let entities = ids_of_kind(&g, NodeKind::Entity);
        let events = ids_of_kind(&g, NodeKind::Event);
        let scenes = ids_of_kind(&g, NodeKind::Scene);

        let wanted: Vec<(String, EntityType)> = (0..r.random_range(1..4))
            .map(|_| (NAMES.choose(&mut r).unwrap().to_string(), *EntityType::ALL.choose(&mut r).unwrap()))
            .collect();
        let q1 = build_entity_query(&wanted).unwrap();
        assert_round_trip(&q1);
        let t1 = run(&q1, &g).unwrap();
        assert_eq!(t1.rows, oracle_entities(&g, &wanted), "{q1}");

        let entity_ids = pick(&mut r, &entities);
        let q2 = build_event_scene_query(&entity_ids).unwrap();
        assert_round_trip(&q2.events_query);
        let (ev_table, sc_table, sc_query) = q2.execute(&g).unwrap();
        assert_eq!(ev_table.rows, oracle_events(&g, &entity_ids));
        let found_events = ev_table.first_column_ids();
        assert_eq!(sc_table.rows, oracle_scenes(&g, &found_events));
        if let Some(q) = sc_query {
            assert_round_trip(&q);
        }
        let event_ids = pick(&mut r, &events);
        let q2b = build_scenes_query(&event_ids).unwrap();
        assert_round_trip(&q2b);
        assert_eq!(run(&q2b, &g).unwrap().rows, oracle_scenes(&g, &event_ids));
        assert_round_trip(&build_events_query(&event_ids).unwrap());

        let lists: [Vec<NodeId>; 3] = [
            maybe_pick(&mut r, &entities),
            maybe_pick(&mut r, &events),
            maybe_pick(&mut r, &scenes),
        ];
        if lists.iter().all(Vec::is_empty) {
            continue;
        }
        let q3 = build_context_query(&lists[0], &lists[1], &lists[2]).unwrap();
        for part in &q3.parts {
            assert_round_trip(part);
        }
        assert_eq!(
            q3.execute(&g).unwrap(),
            oracle_contexts(&g, [&lists[0], &lists[1], &lists[2]])
        );
    }
}

fn sample<T: Clone>(r: &mut ChaCha8Rng, pool: &[T], n: impl rand::distr::uniform::SampleRange<usize>) -> Vec<T> {
    let n = r.random_range(n);
    pool.choose_multiple(r, n).cloned().collect()
}

fn pick(r: &mut ChaCha8Rng, pool: &[NodeId]) -> Vec<NodeId> {
    let n = r.random_range(1..=pool.len().min(5));
    pool.choose_multiple(r, n).copied().collect()
}

fn maybe_pick(r: &mut ChaCha8Rng, pool: &[NodeId]) -> Vec<NodeId> {
    if r.random_bool(0.3) {
        Vec::new()
    } else {
        pick(r, pool)
    }
}

fn planted_fixture() {
    let start = Instant::now();
    let fixture = generate_fixture(50, 42).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, report) = build_graph(fixture.corpus.iter(), &normalizer);
    assert_eq!(report.rejected, 0);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let evaluator = Evaluator::new(&graph, &normalizer, Providers::new(&ReferenceEmbedder, &extractor)).with_jobs(0);
    let config = MatchConfig::default();
    assert_eq!((config.mode, config.similarity), (MatchMode::Ees, SimilarityMode::SemanticAction));

    let verbatim = evaluator.evaluate(&fixture.verbatim, &config).unwrap();
    assert_eq!((verbatim.match_rate, verbatim.hit_at_1), (1.0, 1.0));
    let perturbed = evaluator.evaluate(&fixture.perturbed, &config).unwrap();
    assert_eq!(perturbed.match_rate, 1.0);
    let all = evaluator.evaluate(&fixture.queries(), &config).unwrap();
    assert!(all.hit_at_1 <= all.hit_at_2 && all.hit_at_2 <= all.match_rate);
    assert!(start.elapsed() < Duration::from_secs(30), "took {:?}", start.elapsed());
}

fn ablation_structure() {
    let fixture = generate_fixture(12, 5).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, _) = build_graph(fixture.corpus.iter(), &normalizer);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let event_embedder = CountingEmbedder::new(ReferenceEmbedder);
    let scene_embedder = CountingEmbedder::new(ReferenceEmbedder);
    let providers = Providers {
        events: &event_embedder,
        scenes: &scene_embedder,
        extractor: &extractor,
    };
    let evaluator = Evaluator::new(&graph, &normalizer, providers);
    let queries = fixture.queries();
    let base = MatchConfig::default();

    let rows = evaluator.run_ablation(&queries, &base).unwrap();
    let layout: Vec<(MatchMode, SimilarityMode)> = rows.iter().map(|r| (r.method, r.similarity)).collect();
    let expected = vec![
        (MatchMode::Es, SimilarityMode::Semantic),
        (MatchMode::Ee, SimilarityMode::Semantic),
        (MatchMode::Ee, SimilarityMode::Action),
        (MatchMode::Ee, SimilarityMode::SemanticAction),
        (MatchMode::Ees, SimilarityMode::Semantic),
        (MatchMode::Ees, SimilarityMode::Action),
        (MatchMode::Ees, SimilarityMode::SemanticAction),
    ];
    assert_eq!(layout, expected);
    assert_eq!(ABLATION_GRID.to_vec(), expected);

    for (mode, similarity) in ABLATION_GRID {
        event_embedder.reset();
        scene_embedder.reset();
        evaluator.evaluate(&queries, &base.clone().with_modes(mode, similarity)).unwrap();
        if mode == MatchMode::Es {
            assert_eq!(event_embedder.calls(), 0, "ES made event-stage embedding calls");
            assert!(scene_embedder.calls() > 0);
        } else {
            assert!(event_embedder.calls() > 0);
        }
    }
}

fn metric_arithmetic() {
    let normalizer = TypeNormalizer::default();
    let corpus = read_records("hand_corpus.jsonl");
    let queries = read_queries("hand_queries.jsonl");
    assert_eq!(queries.len(), 10);
    let (graph, report) = build_graph(corpus.iter(), &normalizer);
    assert_eq!(report.rejected, 0);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let evaluator = Evaluator::new(&graph, &normalizer, Providers::new(&ReferenceEmbedder, &extractor));
    let m = evaluator.evaluate(&queries, &MatchConfig::default()).unwrap();
    assert_eq!((m.match_rate, m.hit_at_1, m.hit_at_2), (0.9, 0.6, 0.8), "{}", m.rows_tsv());
}

fn big_graph(r: &mut ChaCha8Rng) -> Graph {
    let mut g = Graph::new();
    let pool: Vec<char> = "abcxyz \t\n\r\\\"é漢".chars().collect();
    let noisy = |r: &mut ChaCha8Rng, prefix: String| -> String {
        let tail: String = (0..r.random_range(0..8)).map(|_| *pool.choose(r).unwrap()).collect();
        format!("{prefix}{tail}")
    };
    let entities: Vec<NodeId> = (0..250)
        .map(|i| {
            let name = noisy(r, format!("e{i}"));
            g.upsert_entity(*EntityType::ALL.choose(r).unwrap(), &name).unwrap()
        })
        .collect();
    let events: Vec<NodeId> = (0..250)
        .map(|i| {
            let who: Vec<NodeId> = sample(r, &entities, 1..4);
            let action = if r.random_bool(0.3) { String::new() } else { noisy(r, "act".into()) };
            g.insert_event(&who, &action, &noisy(r, format!("event {i}"))).unwrap()
        })
        .collect();
    let scenes: Vec<NodeId> = (0..250)
        .map(|i| {
            let members: Vec<NodeId> = sample(r, &events, 0..3);
            let loc = r.random_bool(0.5).then(|| noisy(r, "loc".into()));
            g.insert_scene(&members, loc.as_deref(), None, &noisy(r, format!("scene {i}"))).unwrap()
        })
        .collect();
    for i in 0..250 {
        let links = ContextLinks {
            entities: sample(r, &entities, 1..4),
            events: sample(r, &events, 1..3),
            scenes: sample(r, &scenes, 1..3),
        };
        let time = r.random_bool(0.5).then(|| noisy(r, "t".into()));
        g.insert_context(&format!("ctx-{i}"), &noisy(r, "desc".into()), time.as_deref(), None, &links)
            .unwrap();
    }
    g
}

fn snapshot_round_trip() {
    let g = big_graph(&mut rng(8));
    assert_eq!(g.node_count(), 1000);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.snap"), dir.path().join("b.snap"));
    g.save_snapshot(&a).unwrap();
    g.save_snapshot(&b).unwrap();
    let (bytes_a, bytes_b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(bytes_a, bytes_b);
    let loaded = Graph::load_snapshot(&a).unwrap();
    assert_eq!(loaded.nodes(), g.nodes());
    assert!(loaded.edges().eq(g.edges()));
    assert_eq!(loaded.to_snapshot_string().into_bytes(), bytes_a);
}

fn candidate_monotonicity() {
    let mut r = rng(9);
    let normalizer = TypeNormalizer::default();
    let extractor = LexiconExtractor::new(["speech", "march", "vote", "launch", "dance"]);
    let providers = Providers::new(&ReferenceEmbedder, &extractor);
    let mut non_trivial = 0;
    for i in 0..50 {
        let g = random_graph(&mut r, 120);
        let entity_nodes: Vec<_> = ids_of_kind(&g, NodeKind::Entity)
            .into_iter()
            .map(|id| g.entity(id).unwrap().clone())
            .collect();
        let chosen: Vec<_> = sample(&mut r, &entity_nodes, 1..=3);
        let record = EesRecord {
            record_id: format!("q{i}"),
            entities: chosen
                .iter()
                .map(|e| RecordEntity {
                    name: e.name.clone(),
                    entity_type: e.entity_type.to_string(),
                })
                .collect(),
            events: vec![RecordEvent {
                entity_names: vec![chosen[0].name.clone()],
                action: None,
                description: TEXTS.choose(&mut r).unwrap().to_string(),
            }],
            scene: RecordScene {
                description: TEXTS.choose(&mut r).unwrap().to_string(),
                location: None,
                time: None,
            },
            context: None,
        };
        let k = r.random_range(1..=3);
        let config = MatchConfig {
            k_events: k,
            k_scenes: k,
            ..MatchConfig::default()
        };
        let candidates = |mode| -> BTreeSet<NodeId> {
            let c = config.clone().with_modes(mode, SimilarityMode::SemanticAction);
            run_pipeline(&record, &g, &c, &normalizer, &providers).unwrap().ranked_ids().into_iter().collect()
        };
        let ees = candidates(MatchMode::Ees);
        let ee = candidates(MatchMode::Ee);
        let matched = run_pipeline(&record, &g, &config, &normalizer, &providers).unwrap().matched_entities;
        let entity_only: BTreeSet<NodeId> =
            build_context_query(&matched, &[], &[]).unwrap().execute(&g).unwrap().into_iter().collect();
        assert!(ees.is_subset(&ee), "graph {i}: EES {ees:?} not within EE {ee:?}");
        assert!(ee.is_subset(&entity_only), "graph {i}: EE {ee:?} not within entity-only {entity_only:?}");
        if ees.len() < entity_only.len() {
            non_trivial += 1;
        }
    }
    assert!(non_trivial > 0, "no graph exercised a strict narrowing");
}

fn scale_invariance() {
    let fixture = generate_fixture(50, 42).unwrap();
    let normalizer = TypeNormalizer::default();
    let (graph, _) = build_graph(fixture.corpus.iter(), &normalizer);
    let extractor = LexiconExtractor::new(ACTION_LEXICON.iter().copied());
    let scaled = Scaled(ReferenceEmbedder, 3.0);
    let plain = Providers::new(&ReferenceEmbedder, &extractor);
    let tripled = Providers::new(&scaled, &extractor);
    let ids = |v: &[(NodeId, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
    for (mode, similarity) in ABLATION_GRID {
        let config = MatchConfig::default().with_modes(mode, similarity);
        for q in fixture.queries() {
            let a = run_pipeline(&q.record, &graph, &config, &normalizer, &plain).unwrap();
            let b = run_pipeline(&q.record, &graph, &config, &normalizer, &tripled).unwrap();
            assert_eq!(ids(&a.top_events), ids(&b.top_events), "{} {mode}/{similarity} {:?} {:?}", q.query_id(), a.top_events, b.top_events);
            assert_eq!(ids(&a.top_scenes), ids(&b.top_scenes), "{} {mode}/{similarity}", q.query_id());
            assert_eq!(a.ranked_ids(), b.ranked_ids(), "{} {mode}/{similarity}", q.query_id());
        }
    }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("cosine matches dot/norm oracle", cosine_oracle),
        ("event score is linear in its weights", event_score_linearity),
        ("top_k matches full-sort oracle", top_k_oracle),
        ("query execution matches brute-force enumeration", query_equivalence),
        ("planted fixture end-to-end", planted_fixture),
        ("ablation grid layout and ES event-stage calls", ablation_structure),
        ("hand-counted metric arithmetic", metric_arithmetic),
        ("snapshot round trip and deterministic save", snapshot_round_trip),
        ("candidate sets narrow EES within EE within entity-only", candidate_monotonicity),
        ("rankings invariant to embedding scale", scale_invariance),
    ];
    panic::set_hook(Box::new(|info| eprintln!("    {info}")));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let ok = panic::catch_unwind(AssertUnwindSafe(check)).is_ok();
        failed += usize::from(!ok);
        println!(
            "{} [{:>2}] {name} ({:.2?})",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

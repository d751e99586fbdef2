"""Group-to-subspec retrieval and assertion-to-point scoring."""

import numpy as np
import pytest

from coverassert.mapping import (GroupIntent,
                                 build_group_intents, compute_match_degree,
                                 cosine, dump_mapping, jaccard, match_groups,
                                 match_points, run_mapping, score_pair)
from coverassert.semantic import (Provider, ProviderConfig,
                                  build_intent_records, offline_embedding,
                                  offline_intent)
from coverassert.specmodel import parse_spec_data, embed_spec
from coverassert.sva import DEFAULT_EXCLUSIONS, ingest_assertions

from oracles import oracle_best_point

DIM = 64


def test_jaccard_conventions():
    assert jaccard([], []) == 0.0
    assert jaccard(["a"], []) == 0.0
    assert jaccard(["a", "b"], ["a", "b"]) == 1.0
    assert jaccard(["a", "b"], ["b", "c"]) == pytest.approx(1 / 3)


def test_cosine_conventions():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
    assert cosine(np.ones(3), np.ones(3)) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(-1.0)


def test_score_pair_bounds_and_clamp():
    u = np.array([1.0, 0.0])
    v = np.array([-1.0, 0.0])  # cosine -1 must clamp to 0
    s = score_pair(u, ["a"], v, ["a"], alpha=0.6)
    assert s == pytest.approx(0.4)
    full = score_pair(u, ["a"], u, ["a"], alpha=0.6)
    assert full == pytest.approx(1.0)
    for alpha in (0.0, 0.3, 1.0):
        got = score_pair(u, ["a", "b"], v, ["b", "c"], alpha)
        assert 0.0 <= got <= 1.0


def _spec_with_embeddings():
    spec = parse_spec_data({
        "schema": "spec/v1",
        "design": "d",
        "subspecs": [
            {"id": "s1", "title": "Unit one", "signals": ["go", "ack"],
             "description": "go and ack handshake",
             "points": [
                 {"id": "p1", "text": "go implies ack", "signals": ["ack", "go"]},
                 {"id": "p2", "text": "ack eventually drops", "signals": ["ack"]},
             ]},
            {"id": "s2", "title": "Unit two", "signals": ["busy"],
             "description": "busy flag behaviour",
             "points": [
                 {"id": "p3", "text": "busy stays low", "signals": ["busy"]},
             ]},
        ],
    })
    embed_spec(spec, Provider(ProviderConfig(embed_dim=DIM)))
    return spec


def test_match_groups_argmax_and_tie_breaks():
    spec = _spec_with_embeddings()
    g_near_s1 = GroupIntent(group_id=0, description="",
                            signals=["go", "ack"],
                            embedding=spec.subspecs[0].embedding.copy())
    result = match_groups([g_near_s1], spec.subspecs)
    assert result == {0: "s1"}
    # exact cosine tie: jaccard decides
    tied = GroupIntent(group_id=1, description="", signals=["busy"],
                       embedding=np.zeros(DIM))
    assert match_groups([tied], spec.subspecs) == {1: "s2"}
    # cosine and jaccard both tie: lexicographically smaller id wins
    bare = GroupIntent(group_id=2, description="", signals=[],
                       embedding=np.zeros(DIM))
    assert match_groups([bare], spec.subspecs) == {2: "s1"}


def test_match_points_threshold_and_coverage():
    spec = _spec_with_embeddings()
    assertions = ingest_assertions(
        [("a1", "assert property (go |-> ack);")], DEFAULT_EXCLUSIONS)
    records, _ = build_intent_records(assertions, ProviderConfig(embed_dim=DIM))
    sub = spec.subspecs[0]
    got, audit = match_points(assertions, records, sub, alpha=0.6, sigma=0.5)
    assert len(got) == 1
    aid, pid, score = got[0]
    assert (aid, pid) == ("a1", "p1")
    assert score >= 0.5
    assert sub.points[0].covered_by == {"a1"}
    assert len(audit) == len(sub.points)
    # a hopeless sigma suppresses the assignment but not the audit rows
    sub.points[0].covered_by.clear()
    got2, audit2 = match_points(assertions, records, sub, alpha=0.6, sigma=0.999)
    assert got2 == []
    assert len(audit2) == len(sub.points)


def test_exact_and_disjoint_scores():
    point_text = "implication: [go] implies [ack]"
    intent = offline_embedding(point_text, DIM)
    exact = score_pair(intent, ["ack", "go"], offline_embedding(point_text, DIM),
                       ["ack", "go"], alpha=0.6)
    assert exact == pytest.approx(1.0, abs=1e-12)
    other = offline_embedding("totally unrelated words qqq zzz", DIM)
    disjoint = score_pair(intent, ["ack", "go"], other, ["busy"], alpha=0.6)
    # hashed bags of disjoint token sets share no buckets here
    assert disjoint == 0.0


def test_match_points_agrees_with_brute_force():
    rng = np.random.default_rng(9)
    names = [f"s{k}" for k in range(8)]
    for _ in range(25):
        n_points = int(rng.integers(1, 6))
        point_vecs = [rng.standard_normal(DIM) for _ in range(n_points)]
        point_sigs = [sorted(rng.choice(names, size=rng.integers(0, 4),
                                        replace=False).tolist())
                      for _ in range(n_points)]
        intent_vec = rng.standard_normal(DIM)
        a_sigs = sorted(rng.choice(names, size=rng.integers(0, 4),
                                   replace=False).tolist())
        alpha = float(rng.uniform(0.0, 1.0))
        idx, score = oracle_best_point(intent_vec, a_sigs,
                                       list(zip(point_vecs, point_sigs)), alpha)
        # mirror through the library scoring
        lib = [score_pair(intent_vec, a_sigs, v, s, alpha)
               for v, s in zip(point_vecs, point_sigs)]
        assert int(np.argmax(lib)) == idx
        assert lib[idx] == pytest.approx(score, abs=1e-12)


def test_compute_match_degree_counts_points():
    spec = _spec_with_embeddings()
    spec.subspecs[0].points[0].covered_by.add("a1")
    degrees, uncovered = compute_match_degree(spec.subspecs)
    assert degrees == {"s1": 0.5, "s2": 0.0}
    assert uncovered == {"s1": ["p2"], "s2": ["p3"]}


def test_run_mapping_and_dump():
    spec = _spec_with_embeddings()
    assertions = ingest_assertions(
        [("a1", "assert property (go |-> ack);"),
         ("a2", "assert property (busy |-> !busy);")], DEFAULT_EXCLUSIONS)
    provider = Provider(ProviderConfig(embed_dim=DIM))
    records, _ = build_intent_records(assertions, provider)
    result = run_mapping(assertions, records, [0, 1], spec, provider)
    assert result.group_to_subspec[0] == "s1"
    assert result.group_to_subspec[1] == "s2"
    assert ("a1", "p1") in {(a, p) for a, p, _ in result.point_assignments}
    doc = dump_mapping(result)
    assert doc["schema"] == "mapping/v1"
    assert set(doc["group_to_subspec"]) == {"0", "1"}
    assert doc["scores"]  # full audit grid is preserved


def test_group_intents_offline_description_joins_members():
    assertions = ingest_assertions(
        [("a1", "assert property (go |-> ack);"),
         ("a2", "assert property (ack |-> !go);")], DEFAULT_EXCLUSIONS)
    provider = Provider(ProviderConfig(embed_dim=DIM))
    records, _ = build_intent_records(assertions, provider)
    groups = build_group_intents(assertions, records, [0, 0], provider)
    assert len(groups) == 1
    g = groups[0]
    assert g.members == ["a1", "a2"]
    assert g.description == "; ".join(r.intent_text for r in records)
    assert g.signals == ["ack", "go"]
    assert np.allclose(np.linalg.norm(g.embedding), 1.0)

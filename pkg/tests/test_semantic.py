"""Intent canonicalization, hashed embeddings, provider behaviour."""

import numpy as np
import pytest

import coverassert.semantic as semantic
from coverassert.errors import (DimensionMismatch, EmptyInput,
                                MalformedProviderReply, ProviderUnavailable)
from coverassert.semantic import (Provider, ProviderConfig,
                                  build_intent_records, offline_embedding,
                                  offline_intent)
from coverassert.sva import DEFAULT_EXCLUSIONS, ingest_assertions


def test_offline_intent_implication_shape():
    text = "assert property (a |-> b);"
    assert offline_intent(text, ["a", "b"]) == "implication: [a] implies [b]"


def test_offline_intent_strips_clocking_and_label():
    text = "chk: assert property (@(posedge clk) (a && b) |=> ##1 c);"
    assert offline_intent(text, ["a", "b", "c"]) == \
        "implication: [(a && b)] implies [##1 c]"


def test_offline_intent_disable_iff_dropped():
    text = "assert property (@(posedge clk) disable iff (rst) a |-> b);"
    assert offline_intent(text, ["a", "b"]) == "implication: [a] implies [b]"


def test_offline_intent_non_implication_lists_signals():
    text = "cover property (a ##1 b);"
    assert offline_intent(text, ["a", "b"]) == \
        "property: [a ##1 b]; signals: [a, b]"


def test_offline_intent_unparsable():
    got = offline_intent('assert property (x == "GO);', [])
    assert got.startswith("unparsed: [")


def test_offline_embedding_is_unit_and_deterministic():
    v1 = offline_embedding("go implies ack", 64)
    v2 = offline_embedding("go implies ack", 64)
    assert np.array_equal(v1, v2)
    assert abs(np.linalg.norm(v1) - 1.0) < 1e-12
    # bag of tokens: order does not matter
    v3 = offline_embedding("ack implies go", 64)
    assert np.array_equal(np.sort(np.abs(v1)), np.sort(np.abs(v3)))
    assert abs(float(np.dot(v1, v3)) - 1.0) < 1e-12


def test_offline_embedding_empty_text_is_basis_vector():
    v = offline_embedding("", 32)
    assert v[0] == 1.0
    assert np.linalg.norm(v) == 1.0


def test_provider_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig(mode="magic")
    with pytest.raises(ValueError):
        ProviderConfig(embed_dim=4)
    with pytest.raises(ValueError):
        ProviderConfig(mode="live")  # endpoint required


def test_embed_batch_rejects_empty():
    p = Provider(ProviderConfig())
    with pytest.raises(EmptyInput):
        p.embed_batch([])
    with pytest.raises(EmptyInput):
        p.embed_batch(["ok", ""])


def test_build_intent_records_offline():
    assertions = ingest_assertions(
        [("a1", "assert property (a |-> b);"),
         ("a2", "cover property (c ##1 d);")], DEFAULT_EXCLUSIONS)
    records, matrix = build_intent_records(assertions, ProviderConfig(embed_dim=64))
    assert [r.assertion_id for r in records] == ["a1", "a2"]
    assert matrix.shape == (2, 64)
    assert not records[0].fallback
    assert np.array_equal(records[1].embedding, matrix[1])


def test_cache_round_trip(tmp_path):
    cfg = ProviderConfig(embed_dim=64, cache_path=str(tmp_path))
    p1 = Provider(cfg)
    m1 = p1.embed_batch(["alpha beta", "gamma"])
    assert p1.stats["cache_hits"] == 0
    assert list(tmp_path.glob("*.json"))
    p2 = Provider(cfg)
    m2 = p2.embed_batch(["alpha beta", "gamma"])
    assert p2.stats["cache_hits"] == 2
    assert np.allclose(m1, m2, atol=1e-12)
    # rows read from cache stay unit length despite serialization rounding
    assert np.allclose(np.linalg.norm(m2, axis=1), 1.0, atol=1e-12)


class _FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        return self._payload


def _live_provider(**kw):
    cfg = ProviderConfig(mode="live", endpoint="http://unit.test/v1",
                         model_name="m-test", embed_dim=16, **kw)
    return Provider(cfg, sleep=lambda _d: None)


def test_live_embed_batch(monkeypatch):
    def fake_post(url, json=None, headers=None, timeout=None):
        rows = [{"embedding": [float(i + 1)] * 16} for i in range(len(json["input"]))]
        return _FakeResponse(200, {"data": rows})

    monkeypatch.setattr(semantic.requests, "post", fake_post)
    p = _live_provider()
    out = p.embed_batch(["one", "two"])
    assert out.shape == (2, 16)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0)
    assert p.stats["backend_calls"] == 1


def test_live_retry_then_fallback(monkeypatch):
    calls = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append(url)
        return _FakeResponse(503, {})

    monkeypatch.setattr(semantic.requests, "post", fake_post)
    p = _live_provider(max_attempts=3)
    out = p.embed_batch(["alpha"])
    assert len(calls) == 3  # capped retries
    assert p.stats["fallbacks"] == 1
    # the fallback row equals the offline vector for the same text
    assert np.allclose(out[0], offline_embedding("alpha", 16))


def test_live_describe_fallback_flag(monkeypatch):
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _FakeResponse(500, {}))
    p = _live_provider()
    assertion = ingest_assertions(
        [("a1", "assert property (a |-> b);")], DEFAULT_EXCLUSIONS)[0]
    text, flagged = p.describe(assertion)
    assert flagged
    assert text == "implication: [a] implies [b]"


def test_live_dimension_mismatch_is_fatal(monkeypatch):
    monkeypatch.setattr(
        semantic.requests, "post",
        lambda *a, **k: _FakeResponse(200, {"data": [{"embedding": [1.0] * 8}]}))
    p = _live_provider()
    with pytest.raises(DimensionMismatch):
        p.embed_batch(["alpha"])


def test_live_malformed_reply_is_fatal(monkeypatch):
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _FakeResponse(200, {"nope": []}))
    p = _live_provider()
    with pytest.raises(MalformedProviderReply):
        p.embed_batch(["alpha"])


def test_live_non_retryable_status_raises(monkeypatch):
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _FakeResponse(401, {}))
    p = _live_provider()
    assertion = ingest_assertions(
        [("a1", "assert property (a |-> b);")], DEFAULT_EXCLUSIONS)[0]
    # a 4xx is not retried and not silently absorbed for chat: the
    # describe path treats it like exhaustion and falls back
    text, flagged = p.describe(assertion)
    assert flagged


def test_api_key_is_read_from_environment(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(headers or {})
        return _FakeResponse(200, {"data": [{"embedding": [1.0] * 16}]})

    monkeypatch.setattr(semantic.requests, "post", fake_post)
    monkeypatch.setenv("COVERASSERT_API_KEY", "sk-unit-test")
    _live_provider().embed_batch(["alpha"])
    assert seen.get("Authorization") == "Bearer sk-unit-test"

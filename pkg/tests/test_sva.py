"""Assertion ingestion and signal extraction."""

import pytest

from coverassert.errors import DuplicateId, SchemaViolation
from coverassert.sva import (DEFAULT_EXCLUSIONS, count_syntax_correct,
                             dump_assertions, extract_signals,
                             ingest_assertions, parse_assertion_rows)


def test_extract_signals_sorted_unique():
    sigs, ok = extract_signals(
        "assert property (@(posedge clk) (b && a && b) |-> a);",
        DEFAULT_EXCLUSIONS)
    assert sigs == ["a", "b"]
    assert ok


def test_extract_drops_keywords_system_calls_and_exclusions():
    sigs, ok = extract_signals(
        "assert property (@(posedge clk) disable iff (rst) "
        "$rose(req) |-> ##[1:3] ack);",
        DEFAULT_EXCLUSIONS)
    assert sigs == ["ack", "req"]
    assert ok


def test_extract_unbalanced_is_not_syntax_ok():
    sigs, ok = extract_signals("assert property (a |-> (b);", DEFAULT_EXCLUSIONS)
    assert not ok
    assert "a" in sigs and "b" in sigs  # tokens are still readable


def test_extract_tokenize_failure_yields_empty():
    sigs, ok = extract_signals('assert property (x == "GO);', DEFAULT_EXCLUSIONS)
    assert sigs == []
    assert not ok


def test_extract_requires_assert_property_shape():
    _, ok = extract_signals("assert (a |-> b);", DEFAULT_EXCLUSIONS)
    assert not ok
    _, ok2 = extract_signals("cover property (a ##1 b);", DEFAULT_EXCLUSIONS)
    assert ok2


def test_ingest_preserves_order_and_iteration():
    rows = [("a1", "assert property (a |-> b);"),
            ("a2", "assert property (c |-> d);", 3)]
    out = ingest_assertions(rows, DEFAULT_EXCLUSIONS)
    assert [a.id for a in out] == ["a1", "a2"]
    assert out[0].origin_iteration == 0
    assert out[1].origin_iteration == 3


def test_ingest_rejects_duplicate_ids():
    rows = [("a1", "assert property (a |-> b);"),
            ("a1", "assert property (c |-> d);")]
    with pytest.raises(DuplicateId):
        ingest_assertions(rows, DEFAULT_EXCLUSIONS)


def test_syntax_correct_never_exceeds_total():
    rows = [("a1", "assert property (a |-> b);"),
            ("a2", "assert property (c |-> d;"),  # unbalanced
            ("a3", "assert sequence (a ##1 b);")]  # wrong directive shape
    out = ingest_assertions(rows, DEFAULT_EXCLUSIONS)
    s = count_syntax_correct(out)
    assert s == 1
    assert s <= len(out)


def test_parse_rows_accepts_bare_array_and_envelope():
    bare = [{"id": "a", "text": "assert property (x |-> y);"}]
    env = {"schema": "assertions/v1", "assertions": bare}
    assert parse_assertion_rows(bare) == [("a", "assert property (x |-> y);", 0)]
    assert parse_assertion_rows(env) == parse_assertion_rows(bare)


def test_parse_rows_schema_errors_carry_pointers():
    with pytest.raises(SchemaViolation) as err:
        parse_assertion_rows([{"id": "a"}])
    assert "text" in str(err.value)
    with pytest.raises(SchemaViolation):
        parse_assertion_rows({"schema": "assertions/v2", "assertions": []})
    with pytest.raises(SchemaViolation):
        parse_assertion_rows([{"id": 7, "text": "x"}])


def test_dump_round_trips_through_parse():
    rows = [("a1", "assert property (a |-> b);"),
            ("a2", "cover property (c ##1 d);")]
    out = ingest_assertions(rows, DEFAULT_EXCLUSIONS)
    dumped = dump_assertions(out)
    assert dumped["schema"] == "assertions/v1"
    again = parse_assertion_rows(dumped)
    assert [(r[0], r[1]) for r in again] == rows
    entry = dumped["assertions"][0]
    assert entry["signals"] == ["a", "b"]
    assert entry["syntax_ok"] is True

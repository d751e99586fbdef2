"""Assertion ingestion: lexical validation and referenced-signal extraction.

Each assertion is reduced to its ordered signal set.  Keywords, temporal
operators, system functions, and numeric literals never count as signals,
and ubiquitous infrastructure names (clocks, resets) are excluded through a
configurable list so they do not drag every assertion toward one ancestor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DuplicateId, SchemaViolation
from .jsonio import load_json
from .rtl_ast import VERILOG_KEYWORDS, Token, TokenizeFailure, tokenize

# default ubiquitous-signal exclusions; override via configuration
DEFAULT_EXCLUSIONS = frozenset({"clk", "clock", "rst", "rst_n", "reset"})

_SVA_EXTRA_KEYWORDS = frozenset(
    """
    until until_with s_until s_until_with within intersect throughout
    first_match strong weak nexttime s_nexttime eventually s_eventually
    matched triggered accept_on reject_on sync_accept_on sync_reject_on
    expect restrict implies
    """.split()
)

SVA_KEYWORDS = VERILOG_KEYWORDS | _SVA_EXTRA_KEYWORDS

_PAIRS = {")": "(", "]": "[", "}": "{"}


@dataclass
class Assertion:
    id: str
    text: str
    signals: list[str] = field(default_factory=list)
    origin_iteration: int = 0
    syntax_ok: bool = False


def _balanced(tokens: Sequence[Token]) -> bool:
    stack: list[str] = []
    for tok in tokens:
        if tok.type != "PUNCT":
            continue
        if tok.text in "([{":
            stack.append(tok.text)
        elif tok.text in ")]}":
            if not stack or stack[-1] != _PAIRS[tok.text]:
                return False
            stack.pop()
    return not stack


def _strip_label(tokens: list[Token]) -> tuple[str | None, list[Token]]:
    if (len(tokens) >= 2 and tokens[0].type == "IDENT"
            and tokens[0].text not in SVA_KEYWORDS
            and tokens[1].type == "PUNCT" and tokens[1].text == ":"):
        return tokens[0].text, tokens[2:]
    return None, tokens


def _check_syntax(tokens: list[Token]) -> bool:
    """Structural check only: balanced delimiters plus a recognized shape."""
    _, body = _strip_label(tokens)
    if not body:
        return False
    if not _balanced(body):
        return False
    if body[0].type == "IDENT" and body[0].text in ("assert", "assume", "cover"):
        if len(body) < 3:
            return False
        if not (body[1].type == "IDENT" and body[1].text == "property"):
            return False
        if not (body[2].type == "PUNCT" and body[2].text == "("):
            return False
    # bare sequence/property expressions pass on balance alone
    return True


def extract_signals(text: str,
                    exclusions: frozenset[str] | set[str] = DEFAULT_EXCLUSIONS,
                    ) -> tuple[list[str], bool]:
    """Return (sorted unique signal names, syntax_ok) for one assertion."""
    try:
        tokens = tokenize(text)
    except TokenizeFailure:
        return [], False
    _, body = _strip_label(tokens)
    seen: set[str] = set()
    for tok in body:
        if tok.type != "IDENT":
            continue
        name = tok.text
        if name in SVA_KEYWORDS or name.startswith("$"):
            continue
        if name in exclusions:
            continue
        seen.add(name)
    return sorted(seen), _check_syntax(tokens)


def ingest_assertions(raw: Iterable[tuple],
                      exclusions: frozenset[str] | set[str] = DEFAULT_EXCLUSIONS,
                      ) -> list[Assertion]:
    """Build Assertion records from (id, text) or (id, text, iteration) rows.

    Every row yields one Assertion even when its text does not tokenize;
    such rows come back with empty signals and syntax_ok=False.  Duplicate
    ids are a caller error and raise.
    """
    out: list[Assertion] = []
    seen_ids: set[str] = set()
    for row in raw:
        if len(row) == 2:
            aid, text = row
            iteration = 0
        else:
            aid, text, iteration = row
        if aid in seen_ids:
            raise DuplicateId(aid)
        seen_ids.add(aid)
        signals, ok = extract_signals(text, exclusions)
        out.append(Assertion(id=aid, text=text, signals=signals,
                             origin_iteration=iteration, syntax_ok=ok))
    return out


def count_syntax_correct(assertions: Sequence[Assertion]) -> int:
    return sum(1 for a in assertions if a.syntax_ok)


# ---------------------------------------------------------------------------
# file schema assertions/v1

def parse_assertion_rows(data: object, where: str = "") -> list[tuple[str, str, int]]:
    """Validate assertions/v1 payload (bare array or wrapped object)."""
    base = where or "/"
    if isinstance(data, dict):
        schema = data.get("schema", "assertions/v1")
        if schema != "assertions/v1":
            raise SchemaViolation(base + "schema", f"unsupported schema {schema!r}")
        items = data.get("assertions")
        base = base.rstrip("/") + "/assertions/"
    else:
        items = data
    if not isinstance(items, list):
        raise SchemaViolation(base.rstrip("/") or "/", "expected an array of assertions")
    rows: list[tuple[str, str, int]] = []
    for i, item in enumerate(items):
        ptr = f"{base}{i}"
        if not isinstance(item, dict):
            raise SchemaViolation(ptr, "expected an object")
        aid = item.get("id")
        text = item.get("text")
        if not isinstance(aid, str) or not aid:
            raise SchemaViolation(ptr + "/id", "id must be a non-empty string")
        if not isinstance(text, str) or not text:
            raise SchemaViolation(ptr + "/text", "text must be a non-empty string")
        iteration = item.get("iteration", 0)
        if not isinstance(iteration, int) or isinstance(iteration, bool) or iteration < 0:
            raise SchemaViolation(ptr + "/iteration",
                                  "iteration must be a non-negative integer")
        rows.append((aid, text, iteration))
    return rows


def load_assertions_file(path: str,
                         exclusions: frozenset[str] | set[str] = DEFAULT_EXCLUSIONS,
                         ) -> list[Assertion]:
    rows = parse_assertion_rows(load_json(path))
    return ingest_assertions(rows, exclusions)


def dump_assertions(assertions: Sequence[Assertion]) -> dict:
    """Normalized re-dump, schema assertions/v1."""
    return {
        "schema": "assertions/v1",
        "assertions": [
            {
                "id": a.id,
                "text": a.text,
                "iteration": a.origin_iteration,
                "signals": list(a.signals),
                "syntax_ok": a.syntax_ok,
            }
            for a in assertions
        ],
    }

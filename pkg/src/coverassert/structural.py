"""Structural features over the RTL trees.

Two views per assertion: a pairwise distance matrix built from lowest common
ancestors of the referenced signals' nodes, and a per-assertion path vector
encoding root-to-node kind sequences.  Signals that occur in different trees
get a fixed penalty that strictly exceeds any same-tree distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rtl_ast import AstIndex, SyntaxNode, node_path
from .sva import Assertion


def default_penalty(index: AstIndex) -> float:
    # strictly exceeds any same-tree distance, which is bounded by 2*max_depth
    return float(2 * index.max_depth + 1)


def lca_distance(s: SyntaxNode, t: SyntaxNode, penalty: float) -> float:
    """Edge count through the lowest common ancestor; cross-tree -> penalty."""
    if s is t:
        return 0.0
    a: SyntaxNode | None = s
    b: SyntaxNode | None = t
    da, db = s.depth, t.depth
    while a is not None and b is not None and a.depth > b.depth:
        a = a.parent
    while a is not None and b is not None and b.depth > a.depth:
        b = b.parent
    while a is not None and b is not None and a is not b:
        a = a.parent
        b = b.parent
    if a is None or b is None or a is not b:
        return float(penalty)
    return float((da - a.depth) + (db - a.depth))


def structurally_unknown(assertions: Sequence[Assertion]) -> list[int]:
    """Indices whose signal set is empty; their SD rows are penalty-filled."""
    return [i for i, a in enumerate(assertions) if not a.signals]


def sd_matrix(assertions: Sequence[Assertion], index: AstIndex,
              penalty: float) -> np.ndarray:
    """SD[i][j]: mean over signal pairs of the minimal node-pair distance.

    The min ranges over all occurrences of the two names.  Names missing
    from the index contribute penalty to every pairing they appear in, and
    an assertion with no signals at all gets a penalty-filled row/column.
    """
    n = len(assertions)
    sd = np.zeros((n, n), dtype=float)
    cache: dict[tuple[str, str], float] = {}

    def name_min(v: str, u: str) -> float:
        key = (v, u) if v <= u else (u, v)
        hit = cache.get(key)
        if hit is not None:
            return hit
        nodes_v = index.signal_map.get(v)
        nodes_u = index.signal_map.get(u)
        if not nodes_v or not nodes_u:
            best = float(penalty)
        else:
            best = min(lca_distance(x, y, penalty)
                       for x in nodes_v for y in nodes_u)
        cache[key] = best
        return best

    for i in range(n):
        si = assertions[i].signals
        for j in range(i, n):
            sj = assertions[j].signals
            if not si or not sj:
                val = float(penalty)
            else:
                total = 0.0
                for v in si:
                    for u in sj:
                        total += name_min(v, u)
                val = total / (len(si) * len(sj))
            sd[i, j] = val
            sd[j, i] = val
    return sd


def representative_node(nodes: Sequence[SyntaxNode]) -> SyntaxNode:
    # minimal depth, then earliest span, then file id, for a stable choice
    return min(nodes, key=lambda n: (n.depth, n.span[0], n.file_id))


def path_codes(node: SyntaxNode) -> list[int]:
    # +1 keeps 0 reserved for padding
    return [1 + int(step.kind) for step in node_path(node)]


def path_matrix(assertions: Sequence[Assertion],
                index: AstIndex) -> tuple[np.ndarray, int]:
    """Concatenated root-to-node kind codes per assertion, zero-padded."""
    rows: list[list[int]] = []
    for a in assertions:
        row: list[int] = []
        for name in a.signals:
            nodes = index.signal_map.get(name)
            if not nodes:
                continue
            row.extend(path_codes(representative_node(nodes)))
        rows.append(row)
    d_max = max((len(r) for r in rows), default=0)
    d_max = max(d_max, 1)
    q = np.zeros((len(assertions), d_max), dtype=int)
    for i, row in enumerate(rows):
        q[i, : len(row)] = row
    return q, d_max


@dataclass
class StructuralFeatures:
    sd: np.ndarray
    q: np.ndarray
    d_max: int
    penalty: float
    unknown: list[int]


def compute_structural_features(assertions: Sequence[Assertion],
                                index: AstIndex,
                                penalty: float | None = None,
                                ) -> StructuralFeatures:
    if penalty is None:
        penalty = default_penalty(index)
    sd = sd_matrix(assertions, index, penalty)
    q, d_max = path_matrix(assertions, index)
    return StructuralFeatures(sd=sd, q=q, d_max=d_max, penalty=float(penalty),
                              unknown=structurally_unknown(assertions))


# ---------------------------------------------------------------------------
# debug dumps (schema features/v1)

def dump_sd(ids: Sequence[str], features: StructuralFeatures) -> dict:
    return {
        "schema": "features/v1",
        "kind": "sd",
        "ids": list(ids),
        "penalty": features.penalty,
        "rows": [[float(x) for x in row] for row in features.sd],
    }


def dump_q(ids: Sequence[str], features: StructuralFeatures) -> dict:
    return {
        "schema": "features/v1",
        "kind": "q",
        "ids": list(ids),
        "d_max": features.d_max,
        "rows": [[int(x) for x in row] for row in features.q],
    }

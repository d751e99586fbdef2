"""Matching assertion groups to spec sub-units and assertions to points.

Group-level matching is pure vector retrieval with a signal-overlap tie
break.  Point-level matching blends embedding similarity with signal-set
Jaccard; a point stays covered once any assertion has claimed it, which
keeps coverage monotone across feedback iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .semantic import IntentRecord, Provider, ProviderConfig, _as_provider, _load_prompt
from .specmodel import SpecSet, SubSpec
from .sva import Assertion

DEFAULT_ALPHA = 0.6
DEFAULT_SIGMA = 0.5


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass
class GroupIntent:
    group_id: int
    description: str
    signals: list[str]
    embedding: np.ndarray
    members: list[str] = field(default_factory=list)


@dataclass
class MappingResult:
    group_to_subspec: dict[int, str]
    point_assignments: list[tuple[str, str, float]]
    match_degree: dict[str, float]
    uncovered: dict[str, list[str]]
    audit_scores: list[dict] = field(default_factory=list)


def build_group_intents(assertions: Sequence[Assertion],
                        intents: Sequence[IntentRecord],
                        labels: Sequence[int],
                        provider: Provider | ProviderConfig) -> list[GroupIntent]:
    """One intent per group; offline text concatenates member intents."""
    prov = _as_provider(provider)
    by_id = {r.assertion_id: r for r in intents}
    groups: dict[int, list[Assertion]] = {}
    for a, lab in zip(assertions, labels):
        groups.setdefault(int(lab), []).append(a)
    out: list[GroupIntent] = []
    descriptions: list[str] = []
    for gid in sorted(groups):
        members = sorted(groups[gid], key=lambda a: a.id)
        member_intents = [by_id[a.id].intent_text for a in members]
        if prov.config.mode == "offline":
            description = "; ".join(member_intents)
        else:
            lines = "\n".join(f"{a.id}: {t}" for a, t in zip(members, member_intents))
            prompt = _load_prompt("group.txt").replace("{members}", lines)
            carrier = Assertion(id=f"group:{gid}", text=prompt, signals=[])
            description, _ = prov.describe(carrier)
        signals = sorted(set().union(*[set(a.signals) for a in members]))
        out.append(GroupIntent(group_id=gid, description=description,
                               signals=signals, embedding=np.array([]),
                               members=[a.id for a in members]))
        descriptions.append(description)
    matrix = prov.embed_batch(descriptions)
    for gi, row in zip(out, matrix):
        gi.embedding = row
    return out


def match_groups(groups: Sequence[GroupIntent],
                 subspecs: Sequence[SubSpec]) -> dict[int, str]:
    """Argmax cosine per group; ties fall to signal Jaccard, then id."""
    if not groups or not subspecs:
        raise ValueError("need at least one group and one subspec")
    result: dict[int, str] = {}
    for g in groups:
        best_id: str | None = None
        best_cos = best_jac = 0.0
        for sub in subspecs:
            assert sub.embedding is not None
            c = cosine(g.embedding, sub.embedding)
            j = jaccard(g.signals, sub.signals)
            if (best_id is None or c > best_cos
                    or (c == best_cos and j > best_jac)
                    or (c == best_cos and j == best_jac and sub.id < best_id)):
                best_id, best_cos, best_jac = sub.id, c, j
        assert best_id is not None
        result[g.group_id] = best_id
    return result


def score_pair(intent_embedding: np.ndarray, assertion_signals: Sequence[str],
               point_embedding: np.ndarray, point_signals: Sequence[str],
               alpha: float) -> float:
    # negative cosine is clamped so signal overlap can never be cancelled
    sim = max(0.0, min(1.0, cosine(intent_embedding, point_embedding)))
    return alpha * sim + (1.0 - alpha) * jaccard(assertion_signals, point_signals)


def match_points(assertions: Sequence[Assertion],
                 intents: Sequence[IntentRecord],
                 subspec: SubSpec,
                 alpha: float = DEFAULT_ALPHA,
                 sigma: float = DEFAULT_SIGMA,
                 ) -> tuple[list[tuple[str, str, float]], list[dict]]:
    """Assign each assertion to its best point when the score clears sigma."""
    by_id = {r.assertion_id: r for r in intents}
    assignments: list[tuple[str, str, float]] = []
    audit: list[dict] = []
    for a in assertions:
        record = by_id[a.id]
        best_idx = -1
        best_score = -1.0
        for idx, point in enumerate(subspec.points):
            assert point.embedding is not None
            s = score_pair(record.embedding, a.signals,
                           point.embedding, point.signals, alpha)
            audit.append({"assertion_id": a.id, "point_id": point.id,
                          "score": s})
            if s > best_score:
                best_idx, best_score = idx, s
        if best_idx >= 0 and best_score >= sigma:
            point = subspec.points[best_idx]
            point.covered_by.add(a.id)
            assignments.append((a.id, point.id, best_score))
    return assignments, audit


def compute_match_degree(subspecs: Sequence[SubSpec],
                         ) -> tuple[dict[str, float], dict[str, list[str]]]:
    degrees: dict[str, float] = {}
    uncovered: dict[str, list[str]] = {}
    for sub in subspecs:
        covered = sum(1 for p in sub.points if p.covered_by)
        degrees[sub.id] = covered / len(sub.points)
        uncovered[sub.id] = [p.id for p in sub.points if not p.covered_by]
    return degrees, uncovered


def run_mapping(assertions: Sequence[Assertion],
                intents: Sequence[IntentRecord],
                labels: Sequence[int],
                spec: SpecSet,
                provider: Provider | ProviderConfig,
                alpha: float = DEFAULT_ALPHA,
                sigma: float = DEFAULT_SIGMA) -> MappingResult:
    group_intents = build_group_intents(assertions, intents, labels, provider)
    group_to_subspec = match_groups(group_intents, spec.subspecs)
    by_subspec: dict[str, list[Assertion]] = {}
    for a, lab in zip(assertions, labels):
        sid = group_to_subspec[int(lab)]
        by_subspec.setdefault(sid, []).append(a)
    assignments: list[tuple[str, str, float]] = []
    audit: list[dict] = []
    for sub in spec.subspecs:
        members = by_subspec.get(sub.id, [])
        if not members:
            continue
        got, scores = match_points(members, intents, sub, alpha, sigma)
        assignments.extend(got)
        audit.extend(scores)
    degrees, uncovered = compute_match_degree(spec.subspecs)
    return MappingResult(group_to_subspec=group_to_subspec,
                         point_assignments=assignments,
                         match_degree=degrees,
                         uncovered=uncovered,
                         audit_scores=audit)


def dump_mapping(result: MappingResult) -> dict:
    """Serialized result, schema mapping/v1."""
    return {
        "schema": "mapping/v1",
        "group_to_subspec": {str(k): v for k, v in result.group_to_subspec.items()},
        "point_assignments": [
            {"assertion_id": a, "point_id": p, "score": s}
            for a, p, s in result.point_assignments
        ],
        "match_degree": dict(result.match_degree),
        "uncovered": {k: list(v) for k, v in result.uncovered.items()},
        "scores": list(result.audit_scores),
    }

"""Feature fusion and constrained clustering.

Semantic vectors are grouped by density first; the resulting labels become a
one-hot block appended to a PCA projection of the structural path matrix.
Final groups come from average-linkage agglomeration over the fused rows,
with merges forbidden between assertions whose structural distance exceeds
the cannot-link threshold, and the group count chosen by silhouette sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SingleCluster

NOISE = -1
_UNDEFINED = -2


@dataclass
class FusionConfig:
    tau: float = 15.0
    dbscan_eps: float | None = None  # None: data-derived default
    dbscan_min_pts: int = 2
    pca_dims: int = 20
    evr_floor: float = 0.97
    k_range: tuple[int, int] | None = None  # None: resolved by the caller

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.dbscan_eps is not None and self.dbscan_eps <= 0:
            raise ValueError("dbscan_eps must be positive")
        if self.dbscan_min_pts < 1:
            raise ValueError("dbscan_min_pts must be >= 1")
        if self.pca_dims < 1:
            raise ValueError("pca_dims must be >= 1")
        if not (0.0 < self.evr_floor <= 1.0):
            raise ValueError("evr_floor must be in (0, 1]")


@dataclass
class ClusterResult:
    labels: np.ndarray
    k: int
    fused: np.ndarray
    silhouette: float
    semantic_labels: np.ndarray
    evr: float = 1.0
    pca_dims_used: int = 0
    infeasible_k: bool = False
    degenerate_pca: bool = False


# ---------------------------------------------------------------------------
# cosine DBSCAN

def cosine_distances(points: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = points / safe[:, None]
    sim = unit @ unit.T
    # zero vectors have similarity 0 to everything but themselves
    zero = norms == 0.0
    if zero.any():
        sim[zero, :] = 0.0
        sim[:, zero] = 0.0
        sim[np.ix_(zero, zero)] = np.eye(int(zero.sum()))
    np.clip(sim, -1.0, 1.0, out=sim)
    dist = 1.0 - sim
    np.fill_diagonal(dist, 0.0)
    return dist


def default_eps(points: np.ndarray) -> float:
    """Median over points of the 10th percentile of their distance rows."""
    n = points.shape[0]
    if n < 2:
        return 0.5
    dist = cosine_distances(points)
    per_point = []
    for i in range(n):
        row = np.delete(dist[i], i)
        per_point.append(np.percentile(row, 10))
    eps = float(np.median(per_point))
    return eps if eps > 0.0 else 0.5


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering on cosine distance, expansion in index order."""
    n = points.shape[0]
    dist = cosine_distances(points)
    labels = np.full(n, _UNDEFINED, dtype=int)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNDEFINED:
            continue
        neighbors = np.flatnonzero(dist[i] <= eps)
        if len(neighbors) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = [j for j in neighbors if j != i]
        pos = 0
        while pos < len(queue):
            j = queue[pos]
            pos += 1
            if labels[j] == NOISE:
                labels[j] = cluster  # border point adopted by first core
            if labels[j] != _UNDEFINED:
                continue
            labels[j] = cluster
            j_neighbors = np.flatnonzero(dist[j] <= eps)
            if len(j_neighbors) >= min_pts:
                for m in j_neighbors:
                    if labels[m] == _UNDEFINED or labels[m] == NOISE:
                        queue.append(int(m))
        cluster += 1
    return labels


# ---------------------------------------------------------------------------
# PCA over the standardized path matrix

@dataclass
class PcaResult:
    projected: np.ndarray
    evr: float
    dims: int
    degenerate: bool = False


def standardize_columns(q: np.ndarray) -> np.ndarray:
    x = np.asarray(q, dtype=float)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    out = x - mean
    nonzero = std > 0.0
    out[:, nonzero] /= std[nonzero]
    out[:, ~nonzero] = 0.0
    return out


def pca_project(q: np.ndarray, dims: int) -> PcaResult:
    """Project the column-standardized matrix onto its top components.

    Component signs are fixed so each component's largest-magnitude entry
    is positive.  Identical rows make variance (and evr) undefined; that
    case returns a zero projection flagged degenerate with evr pinned to 1.
    """
    n, width = q.shape
    if n < 2:
        raise ValueError("need at least 2 rows for a projection")
    if dims < 1 or dims > min(n - 1, width):
        raise ValueError(f"dims={dims} out of range for {n}x{width} input")
    x = standardize_columns(q)
    total = float((x * x).sum())
    if total == 0.0:
        return PcaResult(projected=np.zeros((n, dims)), evr=1.0, dims=dims,
                         degenerate=True)
    _, singular, vt = np.linalg.svd(x, full_matrices=False)
    components = vt[:dims].copy()
    for r in range(components.shape[0]):
        peak = int(np.argmax(np.abs(components[r])))
        if components[r, peak] < 0:
            components[r] = -components[r]
    projected = x @ components.T
    power = singular ** 2
    evr = float(power[:dims].sum() / power.sum())
    return PcaResult(projected=projected, evr=evr, dims=dims)


def pca_with_floor(q: np.ndarray, dims: int, evr_floor: float) -> PcaResult:
    """Escalate dims one at a time until evr clears the floor or caps out."""
    n, width = q.shape
    cap = min(n - 1, width)
    dims = max(1, min(dims, cap))
    while True:
        result = pca_project(q, dims)
        if result.evr >= evr_floor or dims >= cap:
            return result
        dims += 1


# ---------------------------------------------------------------------------
# fusion

def fuse(semantic_labels: Sequence[int], projected: np.ndarray) -> np.ndarray:
    """Append a one-hot block for semantic labels to the projection.

    Non-noise labels get one column each in first-appearance order; every
    noise point gets its own singleton column so unrelated outliers are
    never merged by the encoding.
    """
    labels = list(semantic_labels)
    n = len(labels)
    if projected.shape[0] != n:
        raise ValueError("labels and projection disagree on N")
    column_of: dict[int, int] = {}
    assignments: list[int] = []
    next_col = 0
    for lab in labels:
        if lab == NOISE:
            assignments.append(next_col)
            next_col += 1
        else:
            if lab not in column_of:
                column_of[lab] = next_col
                next_col += 1
            assignments.append(column_of[lab])
    one_hot = np.zeros((n, next_col), dtype=float)
    for i, col in enumerate(assignments):
        one_hot[i, col] = 1.0
    return np.hstack([projected, one_hot])


# ---------------------------------------------------------------------------
# silhouette

def silhouette(points: np.ndarray, labels: Sequence[int]) -> float:
    """Mean of (b-a)/max(a,b) on Euclidean distance; singletons score 0."""
    labels = np.asarray(labels)
    distinct = sorted(set(int(x) for x in labels))
    if len(distinct) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    members = {c: np.flatnonzero(labels == c) for c in distinct}
    scores = np.zeros(len(labels))
    for i in range(len(labels)):
        own = members[int(labels[i])]
        if len(own) == 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (len(own) - 1)
        b = min(dist[i, members[c]].mean() for c in distinct if c != int(labels[i]))
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return float(scores.mean())


# ---------------------------------------------------------------------------
# constrained agglomerative clustering

def _canonical(assignment: list[int]) -> np.ndarray:
    """Relabel cluster ids by first appearance to 0..k-1."""
    mapping: dict[int, int] = {}
    out = np.empty(len(assignment), dtype=int)
    for i, c in enumerate(assignment):
        if c not in mapping:
            mapping[c] = len(mapping)
        out[i] = mapping[c]
    return out


def final_cluster(fused: np.ndarray, sd: np.ndarray,
                  cfg: FusionConfig) -> ClusterResult:
    """Average-linkage agglomeration under the cannot-link constraint.

    Pairs with sd strictly above tau may never share a group.  The merge
    sequence is recorded level by level and the group count in k_range
    with the best silhouette wins; when constraints stop merging before
    k_range is reachable, the smallest feasible count is returned flagged.
    """
    n = fused.shape[0]
    if n < 2:
        raise SingleCluster("need at least 2 assertions to form groups")
    if sd.shape != (n, n):
        raise ValueError("fused and sd disagree on N")
    forbidden = sd > cfg.tau
    diff = fused[:, None, :] - fused[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    lo, hi = cfg.k_range if cfg.k_range is not None else (2, max(2, n - 1))
    lo = max(2, lo)
    hi = max(lo, min(hi, n))

    # active clusters as member-index lists; assignment maps point -> cluster id
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    assignment = list(range(n))
    snapshots: dict[int, np.ndarray] = {n: _canonical(assignment)}

    def linkage(a: list[int], b: list[int]) -> float:
        return float(dist[np.ix_(a, b)].mean())

    def allowed(a: list[int], b: list[int]) -> bool:
        return not forbidden[np.ix_(a, b)].any()

    while len(clusters) > 1:
        best: tuple[float, int, int] | None = None
        ids = sorted(clusters)
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                ca, cb = ids[ai], ids[bi]
                if not allowed(clusters[ca], clusters[cb]):
                    continue
                cand = (linkage(clusters[ca], clusters[cb]), ca, cb)
                if best is None or cand < best:
                    best = cand
        if best is None:
            break  # constraints forbid all remaining merges
        _, ca, cb = best
        clusters[ca] = clusters[ca] + clusters[cb]
        del clusters[cb]
        for idx in clusters[ca]:
            assignment[idx] = ca
        snapshots[len(clusters)] = _canonical(assignment)

    min_feasible = min(snapshots)
    best_k = None
    best_score = None
    for k in range(lo, hi + 1):
        if k not in snapshots:
            continue
        score = silhouette(fused, snapshots[k])
        if best_score is None or score > best_score:
            best_k, best_score = k, score
    infeasible = best_k is None
    if infeasible:
        best_k = min_feasible
        labels = snapshots[best_k]
        best_score = silhouette(fused, labels) if best_k >= 2 else 0.0
    else:
        labels = snapshots[best_k]
    return ClusterResult(labels=labels, k=int(best_k), fused=fused,
                         silhouette=float(best_score),
                         semantic_labels=np.array([], dtype=int),
                         infeasible_k=infeasible)


# ---------------------------------------------------------------------------
# end-to-end fusion + clustering

def cluster_assertions(semantic_matrix: np.ndarray, sd: np.ndarray,
                       q: np.ndarray, cfg: FusionConfig) -> ClusterResult:
    n = semantic_matrix.shape[0]
    eps = cfg.dbscan_eps if cfg.dbscan_eps is not None else default_eps(semantic_matrix)
    semantic_labels = dbscan(semantic_matrix, eps, cfg.dbscan_min_pts)
    pca = pca_with_floor(q, cfg.pca_dims, cfg.evr_floor)
    fused = fuse(semantic_labels, pca.projected)
    result = final_cluster(fused, sd, cfg)
    result.semantic_labels = semantic_labels
    result.evr = pca.evr
    result.pca_dims_used = pca.dims
    result.degenerate_pca = pca.degenerate
    return result


def dump_clusters(ids: Sequence[str], result: ClusterResult) -> dict:
    """Debug dump, schema clusters/v1."""
    return {
        "schema": "clusters/v1",
        "ids": list(ids),
        "labels": [int(x) for x in result.labels],
        "k": result.k,
        "silhouette": result.silhouette,
        "semantic_labels": [int(x) for x in result.semantic_labels],
        "evr": result.evr,
        "pca_dims_used": result.pca_dims_used,
        "infeasible_k": result.infeasible_k,
    }

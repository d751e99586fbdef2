"""Single-pass orchestration: features, clustering, and mapping in order.

The feedback loop reruns this pass from scratch each iteration; assertion
counts stay small enough that incremental updates would only add risk.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import (NOISE, ClusterResult, FusionConfig, cluster_assertions)
from .errors import EmptyInput
from .mapping import DEFAULT_ALPHA, DEFAULT_SIGMA, MappingResult, run_mapping
from .rtl_ast import AstIndex
from .semantic import IntentRecord, Provider, ProviderConfig, _as_provider, build_intent_records
from .specmodel import SpecSet
from .structural import StructuralFeatures, compute_structural_features
from .sva import Assertion


@dataclass
class PipelineResult:
    assertions: list[Assertion]
    intents: list[IntentRecord]
    semantic_matrix: np.ndarray
    features: StructuralFeatures
    cluster: ClusterResult
    mapping: MappingResult


def default_k_range(n: int, num_subspecs: int) -> tuple[int, int]:
    hi = min(n - 1, 2 * num_subspecs)
    return (2, max(2, hi))


def run_pipeline(assertions: Sequence[Assertion], index: AstIndex,
                 spec: SpecSet, provider: Provider | ProviderConfig,
                 fusion: FusionConfig | None = None,
                 alpha: float = DEFAULT_ALPHA,
                 sigma: float = DEFAULT_SIGMA) -> PipelineResult:
    if not assertions:
        raise EmptyInput("no assertions to analyze")
    prov = _as_provider(provider)
    fusion = fusion if fusion is not None else FusionConfig()
    assertions = list(assertions)
    intents, semantic_matrix = build_intent_records(assertions, prov)
    features = compute_structural_features(assertions, index)
    n = len(assertions)
    if n >= 2:
        cfg = fusion
        if cfg.k_range is None:
            cfg = dataclasses.replace(
                cfg, k_range=default_k_range(n, len(spec.subspecs)))
        cluster = cluster_assertions(semantic_matrix, features.sd, features.q, cfg)
    else:
        # one assertion cannot be clustered; it forms the sole group
        cluster = ClusterResult(labels=np.zeros(1, dtype=int), k=1,
                                fused=np.zeros((1, 1)), silhouette=0.0,
                                semantic_labels=np.full(1, NOISE, dtype=int))
    mapping = run_mapping(assertions, intents, cluster.labels, spec, prov,
                          alpha, sigma)
    return PipelineResult(assertions=assertions, intents=intents,
                          semantic_matrix=semantic_matrix, features=features,
                          cluster=cluster, mapping=mapping)

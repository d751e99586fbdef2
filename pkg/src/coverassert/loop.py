"""Coverage-driven feedback loop.

Run the pipeline, find under-covered sub-units, hand them to a generator,
merge what comes back, and repeat until every match degree strictly
exceeds theta, the iteration cap is hit, or the generator runs dry.
A sub-unit sitting exactly at theta still triggers feedback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .clustering import FusionConfig
from .errors import GeneratorFailure, PipelineError
from .generators import GeneratorAdapter
from .mapping import DEFAULT_ALPHA, DEFAULT_SIGMA, MappingResult
from .pipeline import PipelineResult, run_pipeline
from .rtl_ast import AstIndex
from .semantic import Provider, ProviderConfig
from .specmodel import SpecSet, SubSpec
from .sva import (DEFAULT_EXCLUSIONS, Assertion, count_syntax_correct,
                  ingest_assertions)

DEFAULT_THETA = 0.85
DEFAULT_MAX_ITERATIONS = 5

TERMINATED_THRESHOLD = "threshold_met"
TERMINATED_MAX_ITERATIONS = "max_iterations"
TERMINATED_GENERATOR = "generator_exhausted"


@dataclass
class FeedbackPayload:
    iteration: int
    items: list[dict]

    def to_dict(self) -> dict:
        return {
            "schema": "payload/v1",
            "iteration": self.iteration,
            "items": self.items,
        }


@dataclass
class LoopState:
    iteration: int = 0
    assertions: list[Assertion] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    terminated_reason: str = ""


def build_payload(mapping_result: MappingResult, subspecs: Sequence[SubSpec],
                  theta: float) -> FeedbackPayload:
    """Sub-units not strictly above theta, worst coverage first."""
    gaps = [s for s in subspecs if mapping_result.match_degree[s.id] <= theta]
    gaps.sort(key=lambda s: (mapping_result.match_degree[s.id], s.id))
    items = []
    for sub in gaps:
        items.append({
            "subspec_id": sub.id,
            "subspec_description": sub.description,
            "uncovered_points": [
                {"point_id": p.id, "text": p.text, "signals": list(p.signals)}
                for p in sub.points
                if p.id in mapping_result.uncovered[sub.id]
            ],
        })
    return FeedbackPayload(iteration=0, items=items)


def _history_entry(iteration: int, added: int, assertions: Sequence[Assertion],
                   mapping_result: MappingResult) -> dict:
    degrees = dict(mapping_result.match_degree)
    return {
        "iteration": iteration,
        "added_count": added,
        "n": len(assertions),
        "syntax_correct_count": count_syntax_correct(assertions),
        "match_degrees": degrees,
        "min_degree": min(degrees.values()),
    }


def run_loop(spec: SpecSet, index: AstIndex,
             seed_assertions: Sequence[Assertion],
             generator: GeneratorAdapter,
             provider: Provider | ProviderConfig,
             fusion: FusionConfig | None = None,
             alpha: float = DEFAULT_ALPHA,
             sigma: float = DEFAULT_SIGMA,
             theta: float = DEFAULT_THETA,
             max_iterations: int = DEFAULT_MAX_ITERATIONS,
             exclusions: frozenset[str] | set[str] = DEFAULT_EXCLUSIONS,
             on_iteration: Callable[[int, PipelineResult, FeedbackPayload | None], None] | None = None,
             ) -> tuple[LoopState, PipelineResult]:
    """Iterate until coverage clears theta or progress stops.

    Iteration 0 analyzes the seeds; feedback iterations 1..max_iterations
    each run the generator once and reanalyze everything accumulated.
    Raises PipelineError with iteration context if an inner pass fails.
    """
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must be in (0, 1]")
    if max_iterations < 0:
        raise ValueError("max_iterations must be >= 0")

    def run(iteration: int, assertions: list[Assertion]) -> PipelineResult:
        try:
            return run_pipeline(assertions, index, spec, provider, fusion,
                                alpha, sigma)
        except Exception as exc:
            raise PipelineError(iteration, exc) from exc

    state = LoopState(assertions=list(seed_assertions))
    result = run(0, state.assertions)
    state.history.append(_history_entry(0, len(state.assertions),
                                        state.assertions, result.mapping))
    if on_iteration:
        on_iteration(0, result, None)
    seen_texts = {a.text for a in state.assertions}

    for k in range(1, max_iterations + 1):
        if min(result.mapping.match_degree.values()) > theta:
            state.terminated_reason = TERMINATED_THRESHOLD
            return state, result
        state.iteration = k
        payload = build_payload(result.mapping, spec.subspecs, theta)
        payload.iteration = k
        try:
            rows = generator.generate(payload)
        except GeneratorFailure:
            state.terminated_reason = TERMINATED_GENERATOR
            if on_iteration:
                on_iteration(k, result, payload)
            return state, result
        fresh: list[tuple[str, str, int]] = []
        used_ids = {a.id for a in state.assertions}
        for raw_id, text in rows:
            if text in seen_texts:
                continue  # exact-text duplicates are dropped, nothing else is
            seen_texts.add(text)
            aid = f"it{k}:{raw_id}"
            bump = 2
            while aid in used_ids:
                aid = f"it{k}:{raw_id}~{bump}"
                bump += 1
            used_ids.add(aid)
            fresh.append((aid, text, k))
        if not fresh:
            state.terminated_reason = TERMINATED_GENERATOR
            if on_iteration:
                on_iteration(k, result, payload)
            return state, result
        state.assertions.extend(ingest_assertions(fresh, exclusions))
        result = run(k, state.assertions)
        state.history.append(_history_entry(k, len(fresh), state.assertions,
                                            result.mapping))
        if on_iteration:
            on_iteration(k, result, payload)

    if min(result.mapping.match_degree.values()) > theta:
        state.terminated_reason = TERMINATED_THRESHOLD
    else:
        state.terminated_reason = TERMINATED_MAX_ITERATIONS
    return state, result


def dump_loop_state(state: LoopState) -> dict:
    """Exit state, schema loop-state/v1."""
    return {
        "schema": "loop-state/v1",
        "iteration": state.iteration,
        "terminated_reason": state.terminated_reason,
        "history": state.history,
        "n": len(state.assertions),
        "s": count_syntax_correct(state.assertions),
    }

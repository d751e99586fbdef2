"""Design-spec representation: sub-units with fine-grained functional points.

The offline structured file is the authoritative input for reproducible
runs; live mode can ask the provider to split raw prose into the same
shape.  Every sub-unit and point carries an embedding so mapping can do
vector retrieval against assertion groups.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MalformedProviderReply, SchemaViolation
from .jsonio import load_json
from .semantic import Provider, ProviderConfig, _as_provider, _load_prompt

_WORD_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")


@dataclass
class FunctionalPoint:
    id: str
    text: str
    signals: list[str]
    embedding: np.ndarray | None = None
    covered_by: set[str] = field(default_factory=set)


@dataclass
class SubSpec:
    id: str
    title: str
    signals: list[str]
    description: str
    points: list[FunctionalPoint]
    embedding: np.ndarray | None = None

    def embedding_text(self) -> str:
        sig = ", ".join(sorted(self.signals))
        return f"{self.title}\n{self.description}\nsignals: {sig}"


@dataclass
class SpecSet:
    design: str
    subspecs: list[SubSpec]

    def points(self) -> list[FunctionalPoint]:
        return [p for s in self.subspecs for p in s.points]


def _text_tokens(text: str) -> set[str]:
    return set(_WORD_RE.findall(text))


def _point_signals(text: str, subspec_signals: Sequence[str]) -> list[str]:
    # token intersection with the sub-unit's signal list, never free extraction
    tokens = _text_tokens(text)
    return sorted(s for s in subspec_signals if s in tokens)


# ---------------------------------------------------------------------------
# offline structured ingestion (schema spec/v1)

def _require(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise SchemaViolation(pointer, message)


def parse_spec_data(data: object) -> SpecSet:
    _require(isinstance(data, dict), "/", "spec document must be an object")
    assert isinstance(data, dict)
    schema = data.get("schema", "spec/v1")
    _require(schema == "spec/v1", "/schema", f"unsupported schema {schema!r}")
    design = data.get("design")
    _require(isinstance(design, str) and bool(design), "/design",
             "design must be a non-empty string")
    subs = data.get("subspecs")
    _require(isinstance(subs, list) and bool(subs), "/subspecs",
             "subspecs must be a non-empty array")
    assert isinstance(subs, list)
    seen_sub: set[str] = set()
    seen_point: set[str] = set()
    out: list[SubSpec] = []
    for i, entry in enumerate(subs):
        base = f"/subspecs/{i}"
        _require(isinstance(entry, dict), base, "expected an object")
        sid = entry.get("id")
        _require(isinstance(sid, str) and bool(sid), base + "/id",
                 "id must be a non-empty string")
        _require(sid not in seen_sub, base + "/id", f"duplicate subspec id {sid!r}")
        seen_sub.add(sid)
        title = entry.get("title")
        _require(isinstance(title, str) and bool(title), base + "/title",
                 "title must be a non-empty string")
        signals = entry.get("signals")
        _require(isinstance(signals, list) and
                 all(isinstance(s, str) and s for s in signals),
                 base + "/signals", "signals must be an array of names")
        description = entry.get("description")
        _require(isinstance(description, str) and bool(description),
                 base + "/description", "description must be a non-empty string")
        raw_points = entry.get("points")
        _require(isinstance(raw_points, list) and bool(raw_points),
                 base + "/points", "points must be a non-empty array")
        signals = sorted(set(signals))
        points: list[FunctionalPoint] = []
        for j, p in enumerate(raw_points):
            ptr = f"{base}/points/{j}"
            _require(isinstance(p, dict), ptr, "expected an object")
            pid = p.get("id")
            _require(isinstance(pid, str) and bool(pid), ptr + "/id",
                     "id must be a non-empty string")
            _require(pid not in seen_point, ptr + "/id",
                     f"duplicate point id {pid!r}")
            seen_point.add(pid)
            text = p.get("text")
            _require(isinstance(text, str) and bool(text), ptr + "/text",
                     "text must be a non-empty string")
            _require("\n" not in text, ptr + "/text",
                     "point text must be a single statement")
            if "signals" in p:
                psig = p["signals"]
                _require(isinstance(psig, list) and
                         all(isinstance(s, str) and s for s in psig),
                         ptr + "/signals", "signals must be an array of names")
                allowed = _text_tokens(text) | set(signals)
                for s in psig:
                    _require(s in allowed, ptr + "/signals",
                             f"signal {s!r} absent from point text and subspec signals")
                psig = sorted(set(psig))
            else:
                psig = _point_signals(text, signals)
            points.append(FunctionalPoint(id=pid, text=text, signals=psig))
        out.append(SubSpec(id=sid, title=title, signals=signals,
                           description=description, points=points))
    return SpecSet(design=design, subspecs=out)


def embed_spec(spec: SpecSet, provider: Provider | ProviderConfig) -> SpecSet:
    """Attach embeddings to every sub-unit and point, one batched call."""
    prov = _as_provider(provider)
    texts: list[str] = []
    for sub in spec.subspecs:
        texts.append(sub.embedding_text())
        texts.extend(p.text for p in sub.points)
    matrix = prov.embed_batch(texts)
    row = 0
    for sub in spec.subspecs:
        sub.embedding = matrix[row]
        row += 1
        for p in sub.points:
            p.embedding = matrix[row]
            row += 1
    return spec


def split_spec(spec_text: str,
               provider: Provider | ProviderConfig) -> list[SubSpec]:
    """Split raw spec text into sub-units, embedded and ready for mapping.

    Offline mode expects the pre-structured document; live mode asks the
    provider once, retries once with a repair prompt on a malformed reply,
    then gives up.
    """
    prov = _as_provider(provider)
    if prov.config.mode == "offline":
        try:
            data = json.loads(spec_text)
        except ValueError as exc:
            raise SchemaViolation("/", f"not valid JSON: {exc}") from None
        spec = parse_spec_data(data)
    else:
        spec = _split_live(spec_text, prov)
    embed_spec(spec, prov)
    return spec.subspecs


def _split_live(spec_text: str, prov: Provider) -> SpecSet:
    from .sva import Assertion  # chat path reuses the assertion-shaped call

    prompt = _load_prompt("split.txt").replace("{spec_text}", spec_text)
    carrier = Assertion(id="split", text=prompt, signals=[])
    reply, _ = prov.describe(carrier)
    try:
        return parse_spec_data(json.loads(_strip_fences(reply)))
    except (ValueError, SchemaViolation):
        repair = _load_prompt("repair.txt").replace("{previous_reply}", reply)
        carrier = Assertion(id="split-repair", text=repair, signals=[])
        reply, _ = prov.describe(carrier)
        try:
            return parse_spec_data(json.loads(_strip_fences(reply)))
        except ValueError as exc:
            raise MalformedProviderReply(f"split reply is not JSON: {exc}")


def _strip_fences(reply: str) -> str:
    text = reply.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines)
    return text


def extract_points(subspec: SubSpec,
                   provider: Provider | ProviderConfig) -> list[FunctionalPoint]:
    """Points of one sub-unit; offline they come verbatim from the file."""
    prov = _as_provider(provider)
    if subspec.points:
        return subspec.points
    if prov.config.mode == "offline":
        raise SchemaViolation(f"/subspecs/{subspec.id}/points",
                              "offline sub-units must carry their points")
    from .sva import Assertion

    prompt = (_load_prompt("points.txt")
              .replace("{title}", subspec.title)
              .replace("{description}", subspec.description)
              .replace("{signals}", ", ".join(sorted(subspec.signals))))
    carrier = Assertion(id=f"points:{subspec.id}", text=prompt, signals=[])
    reply, _ = prov.describe(carrier)
    try:
        items = json.loads(_strip_fences(reply))
    except ValueError as exc:
        raise MalformedProviderReply(f"points reply is not JSON: {exc}")
    if not isinstance(items, list) or not items:
        raise MalformedProviderReply("points reply must be a non-empty array")
    points: list[FunctionalPoint] = []
    for k, item in enumerate(items):
        if isinstance(item, str):
            text = item
        elif isinstance(item, dict) and isinstance(item.get("text"), str):
            text = item["text"]
        else:
            raise MalformedProviderReply(f"points reply item {k} has no text")
        points.append(FunctionalPoint(
            id=f"{subspec.id}-{k + 1}", text=text,
            signals=_point_signals(text, subspec.signals)))
    subspec.points = points
    return points


def load_spec_file(path: str, provider: Provider | ProviderConfig) -> SpecSet:
    data = load_json(path)
    spec = parse_spec_data(data)
    embed_spec(spec, provider)
    return spec


def dump_spec(spec: SpecSet) -> dict:
    """Normalized re-dump, schema spec/v1 (embeddings omitted)."""
    return {
        "schema": "spec/v1",
        "design": spec.design,
        "subspecs": [
            {
                "id": s.id,
                "title": s.title,
                "signals": list(s.signals),
                "description": s.description,
                "points": [
                    {"id": p.id, "text": p.text, "signals": list(p.signals)}
                    for p in s.points
                ],
            }
            for s in spec.subspecs
        ],
    }

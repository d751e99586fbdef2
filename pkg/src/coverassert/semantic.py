"""Per-assertion intent descriptions and their vector embeddings.

Two provider modes share one interface.  Live mode talks to an
OpenAI-compatible HTTP endpoint (chat for intent text, embeddings for
vectors) with retry and a deterministic offline fallback.  Offline mode is
fully local: a template canonicalization for intent text and a seeded
hash-bucket bag-of-tokens scheme for vectors.  Embeddings are cached on
disk keyed by model name and exact input text.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from .errors import (DimensionMismatch, EmptyInput, MalformedProviderReply,
                     ProviderUnavailable)
from .jsonio import load_json, sha256_text, write_json
from .rtl_ast import Token, TokenizeFailure, tokenize
from .sva import Assertion, _strip_label

_EMBED_SEED = "coverassert-embed-v1"
_TOKEN_RE = re.compile(r"[a-z0-9_]+")


@dataclass
class ProviderConfig:
    mode: str = "offline"  # "live" | "offline"
    endpoint: str = ""
    model_name: str = "offline-hash"
    embed_dim: int = 4096
    cache_path: str | None = None
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.mode not in ("live", "offline"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.embed_dim < 8:
            raise ValueError("embed_dim must be >= 8")
        if self.mode == "live" and not self.endpoint:
            raise ValueError("live mode requires an endpoint")


@dataclass
class IntentRecord:
    assertion_id: str
    intent_text: str
    embedding: np.ndarray
    fallback: bool = False


# ---------------------------------------------------------------------------
# offline intent canonicalization

def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _slice_source(text: str, tokens: Sequence[Token]) -> str:
    if not tokens:
        return ""
    return _collapse(text[tokens[0].start : tokens[-1].end])


def _matching_paren(tokens: Sequence[Token], open_idx: int) -> int:
    depth = 0
    for k in range(open_idx, len(tokens)):
        tok = tokens[k]
        if tok.type != "PUNCT":
            continue
        if tok.text in "([{":
            depth += 1
        elif tok.text in ")]}":
            depth -= 1
            if depth == 0:
                return k
    return -1


def offline_intent(text: str, signals: Sequence[str]) -> str:
    """Deterministic canonical description of one assertion."""
    try:
        tokens = tokenize(text)
    except TokenizeFailure:
        return f"unparsed: [{_collapse(text)}]"
    _, body = _strip_label(tokens)
    # unwrap "assert property ( ... ) ;"
    if (len(body) >= 3 and body[0].type == "IDENT"
            and body[0].text in ("assert", "assume", "cover")
            and body[1].type == "IDENT" and body[1].text == "property"
            and body[2].type == "PUNCT" and body[2].text == "("):
        close = _matching_paren(body, 2)
        if close > 2:
            body = body[3:close]
    elif body and body[-1].type == "PUNCT" and body[-1].text == ";":
        body = body[:-1]
    # drop a leading clocking event @(...)
    if (len(body) >= 2 and body[0].type == "PUNCT" and body[0].text == "@"
            and body[1].type == "PUNCT" and body[1].text == "("):
        close = _matching_paren(body, 1)
        if close > 0:
            body = body[close + 1 :]
    # drop "disable iff (...)"
    if (len(body) >= 3 and body[0].type == "IDENT" and body[0].text == "disable"
            and body[1].type == "IDENT" and body[1].text == "iff"
            and body[2].type == "PUNCT" and body[2].text == "("):
        close = _matching_paren(body, 2)
        if close > 0:
            body = body[close + 1 :]
    # top-level |-> or |=>
    depth = 0
    arrow = -1
    for k, tok in enumerate(body):
        if tok.type != "PUNCT":
            continue
        if tok.text in "([{":
            depth += 1
        elif tok.text in ")]}":
            depth -= 1
        elif (tok.text == "|" and depth == 0 and k + 2 < len(body)
              and body[k + 1].type == "PUNCT" and body[k + 1].text in "-="
              and body[k + 2].type == "PUNCT" and body[k + 2].text == ">"
              and body[k + 1].start == tok.end
              and body[k + 2].start == body[k + 1].end):
            arrow = k
            break
    if arrow >= 0:
        lhs = _slice_source(text, body[:arrow])
        rhs = _slice_source(text, body[arrow + 3 :])
        return f"implication: [{lhs}] implies [{rhs}]"
    sketch = _slice_source(text, body)
    return f"property: [{sketch}]; signals: [{', '.join(signals)}]"


# ---------------------------------------------------------------------------
# offline embedding

def _embed_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def offline_embedding(text: str, dim: int) -> np.ndarray:
    """Seeded hash-bucket bag of tokens, unit L2 norm.

    Accumulation is integer-only so the result is independent of token
    order and floating-point platform quirks.
    """
    counts = np.zeros(dim, dtype=np.int64)
    for token in _embed_tokens(text):
        digest = hashlib.sha256(f"{_EMBED_SEED}:{token}".encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "big") % dim
        sign = 1 if digest[8] % 2 == 0 else -1
        counts[bucket] += sign
    vec = counts.astype(float)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec = np.zeros(dim, dtype=float)
        vec[0] = 1.0
        return vec
    return vec / norm


def _normalize_row(row: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(row))
    if norm == 0.0:
        out = np.zeros_like(row)
        out[0] = 1.0
        return out
    return row / norm


# ---------------------------------------------------------------------------
# provider

def _load_prompt(name: str) -> str:
    return resources.files("coverassert").joinpath("prompts", name).read_text(
        encoding="utf-8")


class Provider:
    """Stateful wrapper around ProviderConfig with call statistics.

    stats keys: backend_calls (HTTP requests issued), cache_hits,
    fallbacks (records served by the offline path after live retries).
    """

    def __init__(self, config: ProviderConfig,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.sleep = sleep
        self.stats = {"backend_calls": 0, "cache_hits": 0, "fallbacks": 0}

    # --- cache ---

    def _cache_file(self, text: str) -> Path | None:
        if not self.config.cache_path:
            return None
        return Path(self.config.cache_path) / (sha256_text(text) + ".json")

    def _cache_get(self, kind: str, text: str):
        path = self._cache_file(text)
        if path is None or not path.exists():
            return None
        try:
            data = load_json(path)
        except (OSError, ValueError):
            return None
        entries = data.get("entries")
        if not isinstance(entries, dict):
            return None
        return entries.get(f"{kind}:{self.config.model_name}")

    def _cache_put(self, kind: str, text: str, value) -> None:
        path = self._cache_file(text)
        if path is None:
            return
        data = {"text": text, "entries": {}}
        if path.exists():
            try:
                old = load_json(path)
                if isinstance(old, dict) and isinstance(old.get("entries"), dict):
                    data["entries"] = old["entries"]
            except (OSError, ValueError):
                pass
        data["entries"][f"{kind}:{self.config.model_name}"] = value
        write_json(path, data)

    # --- HTTP with retry ---

    def _post(self, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = min(self.config.backoff_cap,
                            self.config.backoff_base * (2 ** (attempt - 1)))
                self.sleep(delay)
            try:
                headers = {}
                key = os.environ.get("COVERASSERT_API_KEY")
                if key:
                    headers["Authorization"] = f"Bearer {key}"
                self.stats["backend_calls"] += 1
                resp = requests.post(self.config.endpoint, json=payload,
                                     headers=headers,
                                     timeout=self.config.timeout)
                if resp.status_code >= 500:
                    last = ProviderUnavailable(f"server error {resp.status_code}")
                    continue
                if resp.status_code != 200:
                    raise ProviderUnavailable(
                        f"provider returned status {resp.status_code}")
                return resp.json()
            except (requests.RequestException, ValueError) as exc:
                last = exc
                continue
        raise ProviderUnavailable(f"provider unreachable: {last}")

    # --- intent ---

    def describe(self, assertion: Assertion) -> tuple[str, bool]:
        """Intent text plus a flag marking offline fallback after retries."""
        if not assertion.text:
            raise EmptyInput("assertion text is empty")
        if self.config.mode == "offline":
            return offline_intent(assertion.text, assertion.signals), False
        prompt = _load_prompt("intent.txt").replace("{assertion_text}", assertion.text)
        cached = self._cache_get("chat", prompt)
        if isinstance(cached, str):
            self.stats["cache_hits"] += 1
            return cached, False
        try:
            reply = self._post({
                "model": self.config.model_name,
                "messages": [{"role": "user", "content": prompt}],
            })
        except ProviderUnavailable:
            self.stats["fallbacks"] += 1
            return offline_intent(assertion.text, assertion.signals), True
        try:
            content = reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedProviderReply("chat reply missing choices[0].message.content")
        if not isinstance(content, str) or not content:
            raise MalformedProviderReply("chat reply content is not a non-empty string")
        self._cache_put("chat", prompt, content)
        return content, False

    # --- embeddings ---

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise EmptyInput("no texts to embed")
        for i, t in enumerate(texts):
            if not t:
                raise EmptyInput(f"text {i} is empty")
        dim = self.config.embed_dim
        out = np.zeros((len(texts), dim), dtype=float)
        misses: list[int] = []
        for i, t in enumerate(texts):
            cached = self._cache_get("embedding", t)
            if isinstance(cached, list) and len(cached) == dim:
                self.stats["cache_hits"] += 1
                out[i] = _normalize_row(np.asarray(cached, dtype=float))
            else:
                misses.append(i)
        if misses:
            fresh = self._embed_misses([texts[i] for i in misses])
            for i, row in zip(misses, fresh):
                row = _normalize_row(row)
                out[i] = row
                self._cache_put("embedding", texts[i], [float(x) for x in row])
        return out

    def _embed_misses(self, texts: list[str]) -> list[np.ndarray]:
        dim = self.config.embed_dim
        if self.config.mode == "offline":
            return [offline_embedding(t, dim) for t in texts]
        try:
            reply = self._post({"model": self.config.model_name, "input": texts})
        except ProviderUnavailable:
            self.stats["fallbacks"] += len(texts)
            return [offline_embedding(t, dim) for t in texts]
        data = reply.get("data") if isinstance(reply, dict) else None
        if not isinstance(data, list) or len(data) != len(texts):
            raise MalformedProviderReply(
                f"embedding reply has {0 if not isinstance(data, list) else len(data)} "
                f"rows for {len(texts)} inputs")
        out: list[np.ndarray] = []
        for k, item in enumerate(data):
            emb = item.get("embedding") if isinstance(item, dict) else None
            if not isinstance(emb, list):
                raise MalformedProviderReply(f"data[{k}] missing embedding array")
            if len(emb) != dim:
                raise DimensionMismatch(dim, len(emb))
            out.append(np.asarray(emb, dtype=float))
        return out


# ---------------------------------------------------------------------------
# module-level operations

def _as_provider(provider: Provider | ProviderConfig) -> Provider:
    return provider if isinstance(provider, Provider) else Provider(provider)


def describe_intent(assertion: Assertion,
                    provider: Provider | ProviderConfig) -> str:
    text, _ = _as_provider(provider).describe(assertion)
    return text


def embed_batch(texts: Sequence[str],
                provider: Provider | ProviderConfig) -> np.ndarray:
    return _as_provider(provider).embed_batch(texts)


def build_intent_records(assertions: Sequence[Assertion],
                         provider: Provider | ProviderConfig,
                         ) -> tuple[list[IntentRecord], np.ndarray]:
    """Describe and embed every assertion; returns (records, T matrix)."""
    if not assertions:
        raise EmptyInput("no assertions to describe")
    prov = _as_provider(provider)
    texts: list[str] = []
    flags: list[bool] = []
    for a in assertions:
        text, flagged = prov.describe(a)
        texts.append(text)
        flags.append(flagged)
    matrix = prov.embed_batch(texts)
    records = [
        IntentRecord(assertion_id=a.id, intent_text=t, embedding=matrix[i],
                     fallback=flags[i])
        for i, (a, t) in enumerate(zip(assertions, texts))
    ]
    return records, matrix

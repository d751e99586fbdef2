"""Generator adapters for the feedback loop.

External assertion generators stay behind one small contract:
generate(payload) -> list of (id, sva_text).  Three adapters ship here: a
scripted stub driven by a fixture table (tests, demos), a subprocess
bridge (payload JSON on stdin, assertions JSON on stdout), and a live
provider-backed generator.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path
from typing import Protocol, TYPE_CHECKING

from .errors import AdapterNotFound, GeneratorFailure, MalformedProviderReply
from .jsonio import dumps_canonical, load_json
from .semantic import Provider, ProviderConfig, _as_provider, _load_prompt
from .sva import parse_assertion_rows

if TYPE_CHECKING:
    from .loop import FeedbackPayload


class GeneratorAdapter(Protocol):
    def generate(self, payload: "FeedbackPayload") -> list[tuple[str, str]]: ...


class ScriptedStubGenerator:
    """Emits the fixture's assertion for every uncovered point it knows."""

    def __init__(self, table: dict[str, str]):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path: str) -> "ScriptedStubGenerator":
        data = load_json(path)
        if not isinstance(data, dict) or \
                not all(isinstance(v, str) for v in data.values()):
            raise GeneratorFailure(0, f"stub fixture {path} must map point ids to text")
        return cls(data)

    def generate(self, payload: "FeedbackPayload") -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        for item in payload.items:
            for point in item["uncovered_points"]:
                text = self.table.get(point["point_id"])
                if text is not None:
                    out.append((point["point_id"], text))
        return out


class SubprocessGenerator:
    """Runs an executable with the payload on stdin, assertions on stdout."""

    def __init__(self, command: str, timeout: float = 300.0):
        if not Path(command).exists():
            raise AdapterNotFound(f"generator executable not found: {command}")
        self.command = command
        self.timeout = timeout

    def generate(self, payload: "FeedbackPayload") -> list[tuple[str, str]]:
        stdin = dumps_canonical(payload.to_dict()) + "\n"
        try:
            proc = subprocess.run([self.command], input=stdin,
                                  capture_output=True, text=True,
                                  timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise GeneratorFailure(payload.iteration, str(exc))
        if proc.returncode != 0:
            raise GeneratorFailure(
                payload.iteration,
                f"exit {proc.returncode}: {proc.stderr.strip()[:500]}")
        try:
            rows = parse_assertion_rows(json.loads(proc.stdout))
        except Exception as exc:
            raise GeneratorFailure(payload.iteration,
                                   f"unparsable generator output: {exc}")
        return [(aid, text) for aid, text, _ in rows]


class LiveLLMGenerator:
    """Asks the live provider for one assertion per uncovered point."""

    def __init__(self, provider: Provider | ProviderConfig):
        self.provider = _as_provider(provider)

    def generate(self, payload: "FeedbackPayload") -> list[tuple[str, str]]:
        from .sva import Assertion

        body = dumps_canonical(payload.to_dict())
        prompt = _load_prompt("generate.txt").replace("{payload}", body)
        carrier = Assertion(id=f"generate:{payload.iteration}", text=prompt,
                            signals=[])
        reply, _ = self.provider.describe(carrier)
        try:
            return self._parse(reply)
        except MalformedProviderReply:
            repair = _load_prompt("repair.txt").replace("{previous_reply}", reply)
            carrier = Assertion(id=f"generate-repair:{payload.iteration}",
                                text=repair, signals=[])
            reply, _ = self.provider.describe(carrier)
            try:
                return self._parse(reply)
            except MalformedProviderReply as exc:
                raise GeneratorFailure(payload.iteration, str(exc))

    @staticmethod
    def _parse(reply: str) -> list[tuple[str, str]]:
        text = reply.strip()
        if text.startswith("```"):
            lines = [ln for ln in text.splitlines() if not ln.startswith("```")]
            text = "\n".join(lines)
        try:
            items = json.loads(text)
        except ValueError as exc:
            raise MalformedProviderReply(f"generator reply is not JSON: {exc}")
        if not isinstance(items, list):
            raise MalformedProviderReply("generator reply must be a JSON array")
        out: list[tuple[str, str]] = []
        for k, item in enumerate(items):
            if not isinstance(item, dict) or not isinstance(item.get("text"), str):
                raise MalformedProviderReply(f"generator reply item {k} has no text")
            aid = item.get("id")
            out.append((aid if isinstance(aid, str) and aid else f"gen{k + 1}",
                        item["text"]))
        return out

"""Generator adapters: scripted stub, subprocess bridge, live bridge."""

import json
import os
import stat

import pytest

import coverassert.semantic as semantic
from coverassert.errors import AdapterNotFound, GeneratorFailure
from coverassert.generators import (LiveLLMGenerator, ScriptedStubGenerator,
                                    SubprocessGenerator)
from coverassert.loop import FeedbackPayload
from coverassert.semantic import Provider, ProviderConfig


def _payload():
    return FeedbackPayload(iteration=1, items=[
        {"subspec_id": "s1", "subspec_description": "d",
         "uncovered_points": [
             {"point_id": "p1", "text": "t1", "signals": ["a"]},
             {"point_id": "p2", "text": "t2", "signals": ["b"]},
         ]},
        {"subspec_id": "s2", "subspec_description": "e",
         "uncovered_points": [
             {"point_id": "p3", "text": "t3", "signals": ["c"]},
         ]},
    ])


def test_stub_emits_known_points_in_payload_order():
    gen = ScriptedStubGenerator({"p3": "assert property (c);",
                                 "p1": "assert property (a);"})
    out = gen.generate(_payload())
    assert out == [("p1", "assert property (a);"),
                   ("p3", "assert property (c);")]


def test_stub_from_file_validates_shape(tmp_path):
    good = tmp_path / "stub.json"
    good.write_text(json.dumps({"p1": "assert property (a);"}))
    gen = ScriptedStubGenerator.from_file(str(good))
    assert gen.table == {"p1": "assert property (a);"}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(["not", "a", "table"]))
    with pytest.raises(GeneratorFailure):
        ScriptedStubGenerator.from_file(str(bad))


def _write_script(tmp_path, body):
    path = tmp_path / "gen.py"
    path.write_text("#!/usr/bin/env python3\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return str(path)


def test_subprocess_round_trip(tmp_path):
    script = _write_script(tmp_path, """
import json, sys
payload = json.loads(sys.stdin.read())
rows = []
for item in payload["items"]:
    for point in item["uncovered_points"]:
        rows.append({"id": "gen_" + point["point_id"],
                     "text": "assert property (x_%s);" % point["point_id"]})
print(json.dumps({"schema": "assertions/v1", "assertions": rows}))
""")
    gen = SubprocessGenerator(script, timeout=30.0)
    out = gen.generate(_payload())
    assert [aid for aid, _ in out] == ["gen_p1", "gen_p2", "gen_p3"]
    assert out[0][1] == "assert property (x_p1);"


def test_subprocess_nonzero_exit_is_failure(tmp_path):
    script = _write_script(tmp_path, "import sys; sys.exit(3)\n")
    gen = SubprocessGenerator(script, timeout=30.0)
    with pytest.raises(GeneratorFailure) as err:
        gen.generate(_payload())
    assert err.value.iteration == 1


def test_subprocess_garbage_output_is_failure(tmp_path):
    script = _write_script(tmp_path, "print('not json at all')\n")
    gen = SubprocessGenerator(script, timeout=30.0)
    with pytest.raises(GeneratorFailure):
        gen.generate(_payload())


def test_subprocess_missing_executable_rejected(tmp_path):
    with pytest.raises(AdapterNotFound):
        SubprocessGenerator(str(tmp_path / "nope"))


class _FakeResponse:
    def __init__(self, payload):
        self.status_code = 200
        self._payload = payload

    def json(self):
        return self._payload


def _chat_reply(content):
    return _FakeResponse({"choices": [{"message": {"content": content}}]})


def test_live_generator_parses_array(monkeypatch):
    reply = json.dumps([{"id": "g1", "text": "assert property (a);"},
                        {"text": "assert property (b);"}])
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _chat_reply(reply))
    cfg = ProviderConfig(mode="live", endpoint="http://unit.test", embed_dim=16)
    gen = LiveLLMGenerator(Provider(cfg, sleep=lambda _d: None))
    out = gen.generate(_payload())
    assert out[0] == ("g1", "assert property (a);")
    assert out[1][0] == "gen2"  # default id for unnamed rows


def test_live_generator_repair_then_failure(monkeypatch):
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _chat_reply("still not json"))
    cfg = ProviderConfig(mode="live", endpoint="http://unit.test", embed_dim=16)
    gen = LiveLLMGenerator(Provider(cfg, sleep=lambda _d: None))
    with pytest.raises(GeneratorFailure):
        gen.generate(_payload())


def test_live_generator_accepts_fenced_reply(monkeypatch):
    fenced = "```json\n" + json.dumps([{"text": "assert property (z);"}]) + "\n```"
    monkeypatch.setattr(semantic.requests, "post",
                        lambda *a, **k: _chat_reply(fenced))
    cfg = ProviderConfig(mode="live", endpoint="http://unit.test", embed_dim=16)
    gen = LiveLLMGenerator(Provider(cfg, sleep=lambda _d: None))
    out = gen.generate(_payload())
    assert out == [("gen1", "assert property (z);")]

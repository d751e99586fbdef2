"""Command-line interface.

Subcommands: analyze (single pass), loop (coverage-driven feedback),
report (re-render from stored artifacts), dump-ast and dump-features
(debug dumps).  Exit codes: 0 success, 1 error, 2 coverage gap.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .clustering import dump_clusters
from .config import RunConfig, apply_overrides, config_hash, load_config
from .errors import AdapterNotFound, CoverAssertError, LockHeld
from .generators import (LiveLLMGenerator, ScriptedStubGenerator,
                         SubprocessGenerator)
from .jsonio import sha256_file, write_json
from .loop import FeedbackPayload, dump_loop_state, run_loop
from .mapping import dump_mapping
from .pipeline import PipelineResult, run_pipeline
from .report import (build_report, emit_report, load_report, render_figures,
                     render_markdown, write_csv)
from .rtl_ast import dump_ast, parse_rtl
from .semantic import Provider
from .specmodel import load_spec_file
from .structural import compute_structural_features, dump_q, dump_sd
from .sva import dump_assertions, load_assertions_file

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GAP = 2

_RTL_SUFFIXES = (".v", ".sv")


def _rtl_sources(rtl_dir: str) -> list[tuple[str, str]]:
    root = Path(rtl_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"RTL directory not found: {rtl_dir}")
    files = sorted(p for p in root.iterdir()
                   if p.suffix in _RTL_SUFFIXES and p.is_file())
    if not files:
        raise FileNotFoundError(f"no .v/.sv files under {rtl_dir}")
    # file ids are basenames so artifacts do not embed machine paths
    return [(p.name, p.read_text(encoding="utf-8")) for p in files]


def _provenance(cfg: RunConfig) -> dict:
    hashes = {}
    root = Path(cfg.rtl_dir)
    if root.is_dir():
        for p in sorted(root.iterdir()):
            if p.suffix in _RTL_SUFFIXES and p.is_file():
                hashes[p.name] = sha256_file(p)
    for label, path in (("assertions", cfg.assertions_file),
                        ("spec", cfg.spec_file)):
        if Path(path).is_file():
            hashes[label] = sha256_file(path)
    return {"config_hash": config_hash(cfg), "input_hashes": hashes,
            "tool_version": __version__}


class _Lock:
    """Exclusive out_dir lock; concurrent runs on one out_dir are rejected."""

    def __init__(self, out_dir: str):
        self.path = Path(out_dir) / ".lock"

    def __enter__(self) -> "_Lock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockHeld(f"another run holds {self.path}") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc) -> None:
        try:
            self.path.unlink()
        except OSError:
            pass


def _load_common(cfg: RunConfig):
    provider = Provider(cfg.provider)
    index = parse_rtl(_rtl_sources(cfg.rtl_dir))
    exclusions = frozenset(cfg.exclusions)
    assertions = load_assertions_file(cfg.assertions_file, exclusions)
    spec = load_spec_file(cfg.spec_file, provider)
    return provider, index, assertions, spec, exclusions


def _write_pass_artifacts(out_dir: Path, result: PipelineResult) -> None:
    ids = [a.id for a in result.assertions]
    write_json(out_dir / "clusters.json", dump_clusters(ids, result.cluster))
    write_json(out_dir / "mapping.json", dump_mapping(result.mapping))
    write_json(out_dir / "assertions.json", dump_assertions(result.assertions))


def _gap_exit(report: dict, theta: float) -> int:
    return EXIT_GAP if report["global"]["min_degree"] <= theta else EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    with _Lock(cfg.out_dir):
        provider, index, assertions, spec, _ = _load_common(cfg)
        result = run_pipeline(assertions, index, spec, provider, cfg.fusion,
                              cfg.alpha, cfg.sigma)
        out = Path(cfg.out_dir)
        _write_pass_artifacts(out, result)
        report = build_report(spec, result, provenance=_provenance(cfg),
                              theta=cfg.theta)
        emit_report(report, out)
        print(f"report written to {out / 'report.md'}")
        return _gap_exit(report, cfg.theta)


def _make_adapter(path: str, provider: Provider):
    if path == "live":
        return LiveLLMGenerator(provider)
    p = Path(path)
    if not p.exists():
        raise AdapterNotFound(f"generator adapter not found: {path}")
    if p.suffix == ".json":
        return ScriptedStubGenerator.from_file(str(p))
    if os.access(p, os.X_OK):
        return SubprocessGenerator(str(p))
    raise AdapterNotFound(f"adapter {path} is neither a .json fixture "
                          "nor an executable")


def cmd_loop(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    with _Lock(cfg.out_dir):
        provider, index, assertions, spec, exclusions = _load_common(cfg)
        adapter = _make_adapter(args.adapter, provider)
        out = Path(cfg.out_dir)

        def on_iteration(k: int, result: PipelineResult,
                         payload: FeedbackPayload | None) -> None:
            it_dir = out / f"iter_{k}"
            it_dir.mkdir(parents=True, exist_ok=True)
            if payload is not None:
                write_json(it_dir / "payload.json", payload.to_dict())
            _write_pass_artifacts(it_dir, result)

        state, result = run_loop(
            spec, index, assertions, adapter, provider,
            fusion=cfg.fusion, alpha=cfg.alpha, sigma=cfg.sigma,
            theta=cfg.theta, max_iterations=cfg.max_iterations,
            exclusions=exclusions, on_iteration=on_iteration)
        write_json(out / "loop_state.json", dump_loop_state(state))
        _write_pass_artifacts(out, result)
        report = build_report(spec, result, state=state,
                              provenance=_provenance(cfg), theta=cfg.theta)
        emit_report(report, out)
        print(f"loop finished: {state.terminated_reason} "
              f"after iteration {state.iteration}")
        print(f"report written to {out / 'report.md'}")
        return _gap_exit(report, cfg.theta)


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    report = load_report(out)
    (out / "report.md").write_text(render_markdown(report), encoding="utf-8")
    write_csv(report, out / "coverage.csv")
    render_figures(report, out)
    print(f"report written to {out / 'report.md'}")
    return EXIT_OK


def cmd_dump_ast(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    index = parse_rtl(_rtl_sources(cfg.rtl_dir))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "ast.json", dump_ast(index))
    print(f"ast dump written to {out / 'ast.json'}")
    return EXIT_OK


def cmd_dump_features(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    index = parse_rtl(_rtl_sources(cfg.rtl_dir))
    assertions = load_assertions_file(cfg.assertions_file,
                                      frozenset(cfg.exclusions))
    features = compute_structural_features(assertions, index)
    ids = [a.id for a in assertions]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "sd.json", dump_sd(ids, features))
    write_json(out / "q.json", dump_q(ids, features))
    print(f"feature dumps written to {out}")
    return EXIT_OK


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    return apply_overrides(
        cfg,
        offline=getattr(args, "offline", False),
        theta=getattr(args, "theta", None),
        tau=getattr(args, "tau", None),
        alpha=getattr(args, "alpha", None),
        sigma=getattr(args, "sigma", None),
        max_iter=getattr(args, "max_iter", None),
        out=getattr(args, "out", None),
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="config/v1 JSON file")
    p.add_argument("--offline", action="store_true",
                   help="force the offline provider")
    p.add_argument("--theta", type=float, help="coverage termination threshold")
    p.add_argument("--tau", type=float, help="structural cannot-link threshold")
    p.add_argument("--alpha", type=float, help="semantic weight in point scores")
    p.add_argument("--sigma", type=float, help="point assignment threshold")
    p.add_argument("--max-iter", type=int, dest="max_iter",
                   help="feedback iteration cap")
    p.add_argument("--out", help="output directory override")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coverassert",
        description="Coverage-guided analysis of SystemVerilog assertions "
                    "against a design spec")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="single pass, no feedback")
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("loop", help="coverage-driven feedback loop")
    _add_config_flags(p)
    p.add_argument("--adapter", required=True,
                   help=".json stub fixture, executable, or 'live'")
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("report", help="re-render a stored report")
    p.add_argument("--out", required=True, help="directory of a prior run")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dump-ast", help="write the ast-dump/v1 debug file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump_ast)

    p = sub.add_parser("dump-features", help="write sd.json and q.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump_features)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except LockHeld as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except CoverAssertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

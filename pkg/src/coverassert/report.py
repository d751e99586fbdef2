"""Coverage report assembly and rendering.

One JSON document (schema report/v1) feeds three renderers: Markdown for
review, CSV for spreadsheets, and PNG figures for a quick visual read.
All three are byte-deterministic for identical inputs.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import __version__
from .errors import MissingArtifacts
from .jsonio import load_json, write_json
from .loop import LoopState
from .pipeline import PipelineResult
from .specmodel import SpecSet
from .sva import count_syntax_correct

_PNG_METADATA = {"Software": "coverassert"}


def build_report(spec: SpecSet, result: PipelineResult,
                 state: LoopState | None = None,
                 provenance: dict | None = None,
                 theta: float | None = None) -> dict:
    """Assemble the report/v1 document from a finished run."""
    subspecs = []
    for sub in spec.subspecs:
        covered = [p.id for p in sub.points if p.covered_by]
        uncovered = [p.id for p in sub.points if not p.covered_by]
        subspecs.append({
            "id": sub.id,
            "title": sub.title,
            "points_total": len(sub.points),
            "points_covered": len(covered),
            "match_degree": result.mapping.match_degree[sub.id],
            "covered": covered,
            "uncovered": uncovered,
        })
    degrees = [s["match_degree"] for s in subspecs]
    history = state.history if state is not None else [{
        "iteration": 0,
        "added_count": len(result.assertions),
        "n": len(result.assertions),
        "syntax_correct_count": count_syntax_correct(result.assertions),
        "match_degrees": dict(result.mapping.match_degree),
        "min_degree": min(degrees),
    }]
    report = {
        "schema": "report/v1",
        "design": spec.design,
        "subspecs": subspecs,
        "global": {
            "min_degree": min(degrees),
            "mean_degree": sum(degrees) / len(degrees),
            "n": len(result.assertions),
            "s": count_syntax_correct(result.assertions),
        },
        "history": history,
        "terminated_reason": state.terminated_reason if state else "",
        "provenance": dict(provenance or {}),
    }
    report["provenance"].setdefault("tool_version", __version__)
    if theta is not None:
        report["global"]["theta"] = theta
    return report


# ---------------------------------------------------------------------------
# Markdown

def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}%"


def render_markdown(report: dict) -> str:
    out = io.StringIO()
    g = report["global"]
    out.write(f"# Coverage report: {report['design']}\n\n")
    out.write(f"- assertions analyzed (N): {g['n']}\n")
    out.write(f"- syntax-correct (S): {g['s']}\n")
    out.write(f"- minimum match degree: {_pct(g['min_degree'])}\n")
    out.write(f"- mean match degree: {_pct(g['mean_degree'])}\n")
    if report.get("terminated_reason"):
        out.write(f"- loop termination: {report['terminated_reason']}\n")
    out.write("\n## Coverage by sub-unit\n\n")
    out.write("| Sub-unit | Title | Points | Covered | Match degree |\n")
    out.write("|---|---|---:|---:|---:|\n")
    for sub in report["subspecs"]:
        out.write(f"| {sub['id']} | {sub['title']} | {sub['points_total']} "
                  f"| {sub['points_covered']} | {_pct(sub['match_degree'])} |\n")
    gaps = [s for s in report["subspecs"] if s["uncovered"]]
    if gaps:
        out.write("\n## Uncovered points\n\n")
        for sub in gaps:
            out.write(f"- **{sub['id']}** ({sub['title']}): "
                      + ", ".join(sub["uncovered"]) + "\n")
    out.write("\n## Iteration timeline\n\n")
    out.write("| Iteration | Added | Total N | Syntax-correct | Min degree |\n")
    out.write("|---:|---:|---:|---:|---:|\n")
    for h in report["history"]:
        out.write(f"| {h['iteration']} | {h['added_count']} | {h['n']} "
                  f"| {h['syntax_correct_count']} | {_pct(h['min_degree'])} |\n")
    prov = report.get("provenance", {})
    if prov:
        out.write("\n## Provenance\n\n")
        for key in sorted(prov):
            value = prov[key]
            if isinstance(value, dict):
                out.write(f"- {key}:\n")
                for k2 in sorted(value):
                    out.write(f"  - {k2}: `{value[k2]}`\n")
            else:
                out.write(f"- {key}: `{value}`\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# CSV

def write_csv(report: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subspec_id", "title", "points_total",
                         "points_covered", "match_degree", "uncovered"])
        for sub in report["subspecs"]:
            writer.writerow([sub["id"], sub["title"], sub["points_total"],
                             sub["points_covered"],
                             f"{sub['match_degree']:.6f}",
                             ";".join(sub["uncovered"])])


# ---------------------------------------------------------------------------
# figures

def render_figures(report: dict, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [_coverage_figure(report, out_dir / "coverage_by_subspec.png")]
    if len(report["history"]) >= 1:
        written.append(_timeline_figure(report, out_dir / "iteration_timeline.png"))
    return written


def _coverage_figure(report: dict, path: Path) -> Path:
    subs = report["subspecs"]
    names = [s["id"] for s in subs]
    degrees = [s["match_degree"] for s in subs]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(subs) + 2.0), 3.5))
    ax.bar(range(len(subs)), degrees, color="#4878a8")
    theta = report["global"].get("theta")
    if theta is not None:
        ax.axhline(theta, color="#b04030", linestyle="--", linewidth=1.0,
                   label=f"threshold {theta:g}")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xticks(range(len(subs)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("match degree")
    ax.set_title(f"Coverage by sub-unit: {report['design']}")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def _timeline_figure(report: dict, path: Path) -> Path:
    history = report["history"]
    iters = [h["iteration"] for h in history]
    mins = [h["min_degree"] for h in history]
    added = [h["added_count"] for h in history]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(iters, mins, marker="o", color="#4878a8", label="min match degree")
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("iteration")
    ax.set_ylabel("min match degree")
    ax.set_xticks(iters)
    bars = ax.twinx()
    bars.bar(iters, added, width=0.3, alpha=0.3, color="#708050",
             label="assertions added")
    bars.set_ylabel("assertions added")
    theta = report["global"].get("theta")
    if theta is not None:
        ax.axhline(theta, color="#b04030", linestyle="--", linewidth=1.0)
    ax.set_title("Iteration timeline")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# emission

def emit_report(report: dict, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.md, coverage.csv, and the figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "markdown": out_dir / "report.md",
        "csv": out_dir / "coverage.csv",
    }
    write_json(paths["json"], report)
    paths["markdown"].write_text(render_markdown(report), encoding="utf-8")
    write_csv(report, paths["csv"])
    for fig_path in render_figures(report, out_dir):
        paths[fig_path.stem] = fig_path
    return paths


def load_report(out_dir: str | Path) -> dict:
    path = Path(out_dir) / "report.json"
    if not path.exists():
        raise MissingArtifacts(f"no report.json under {out_dir}")
    return load_json(path)

"""Evaluation report writers: line-delimited JSON, text table, figures.

``report.json`` is byte-reproducible for a fixed snapshot (golden-file
comparisons rely on that), so wall-clock latencies stay out of it; they are
rendered into the figures instead.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import EvalReport

FIGURE_DPI = 120


def report_json_lines(report: EvalReport) -> list[str]:
    summary = {
        "type": "summary",
        "map": report.mean_ap,
        "acr": report.acr,
        "pv": report.pv,
        "adpv": report.adpv,
        "queries": len(report.per_query_ap),
        "failures": report.failures,
        "depth": report.depth,
    }
    for k in sorted(report.hr):
        summary[f"hr@{k}"] = report.hr[k]
    lines = [json.dumps(summary, sort_keys=True)]
    for query, ap in report.per_query_ap:
        lines.append(json.dumps({"type": "query", "query": query, "ap": ap}, sort_keys=True))
    return lines


def report_text(report: EvalReport) -> str:
    rows = [
        ("queries", f"{len(report.per_query_ap)}"),
        ("failures", f"{report.failures}"),
        ("result depth", f"{report.depth}"),
        ("pv", f"{report.pv}"),
        ("adpv", f"{report.adpv}"),
        ("acr", f"{report.acr:.4f}"),
        ("map", f"{report.mean_ap:.4f}"),
    ]
    for k in sorted(report.hr):
        rows.append((f"hr@{k}", f"{report.hr[k]:.4f}"))
    width = max(len(name) for name, _ in rows)
    out = ["retrieval evaluation report", "=" * 27]
    out += [f"{name:<{width}}  {value:>10}" for name, value in rows]
    worst = sorted(report.per_query_ap, key=lambda qa: (qa[1], qa[0]))[:10]
    out += ["", "lowest-AP queries", "-" * 17]
    out += [f"{ap:8.4f}  {query}" for query, ap in worst]
    return "\n".join(out) + "\n"


def render_report_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Render metric figures as PNGs next to the delimited report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    labels = [f"HR@{k}" for k in sorted(report.hr)] + ["MAP", "ACR"]
    values = [report.hr[k] for k in sorted(report.hr)] + [report.mean_ap, report.acr]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("value")
    ax.set_title("retrieval metrics")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    path = out_dir / "metrics.png"
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist([ap for _, ap in report.per_query_ap], bins=20, range=(0, 1), color="#4878a8")
    ax.set_xlabel("average precision")
    ax.set_ylabel("queries")
    ax.set_title("per-query AP distribution")
    fig.tight_layout()
    path = out_dir / "ap_distribution.png"
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    paths.append(path)

    if report.latencies_ms:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.hist(report.latencies_ms, bins=30, color="#a85448")
        ax.set_xlabel("retrieve latency (ms)")
        ax.set_ylabel("queries")
        ax.set_title("end-to-end latency")
        fig.tight_layout()
        path = out_dir / "latency.png"
        fig.savefig(path, dpi=FIGURE_DPI)
        plt.close(fig)
        paths.append(path)
    return paths


def write_report(
    report: EvalReport, out_dir: str | Path, figures: bool = True
) -> dict[str, Path]:
    """Write report.json + report.txt (+ figures) into *out_dir*."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_json_lines(report)) + "\n")
    txt_path = out_dir / "report.txt"
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(report_text(report))
    paths = {"json": json_path, "txt": txt_path}
    if figures:
        for p in render_report_figures(report, out_dir):
            paths[p.stem] = p
    return paths

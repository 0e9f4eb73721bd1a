"""Report artifacts: JSON documents, delimited tables (CSV + Markdown), and
matplotlib figures rendered to files next to them."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_jsonl(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def write_csv(path, rows: list[dict], columns: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def write_markdown_table(path, rows: list[dict], columns: list[str], title: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if title:
        lines.append(f"# {title}")
        lines.append("")
    lines.append("| " + " | ".join(columns) + " |")
    lines.append("| " + " | ".join("---" for _ in columns) + " |")
    for row in rows:
        lines.append("| " + " | ".join(str(row.get(c, "")) for c in columns) + " |")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def render_bench_figure(rows: list[dict], path) -> Path:
    """Bar chart of mean runtime per configuration with speedup labels."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = [row["config"] for row in rows]
    runtimes = [row["mean_runtime_ms"] / 1000.0 for row in rows]
    speedups = [row["speedup"] for row in rows]

    fig, ax = plt.subplots(figsize=(8, 4.5))
    bars = ax.bar(labels, runtimes, color="#4878a8")
    for bar, speedup in zip(bars, speedups):
        ax.annotate(
            f"{speedup:.1f}x",
            xy=(bar.get_x() + bar.get_width() / 2, bar.get_height()),
            xytext=(0, 3),
            textcoords="offset points",
            ha="center",
            fontsize=9,
        )
    ax.set_ylabel("mean runtime per instance [s]")
    ax.set_title("Runtime by execution mode and cache tier")
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_study_figure(trials: list[dict], direction: str, path) -> Path:
    """Objective per trial plus the best-so-far envelope."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs, ys = [], []
    for trial in trials:
        if trial.get("objective") is None:
            continue
        xs.append(trial["id"])
        ys.append(trial["objective"])
    best_so_far = []
    best = None
    better = (lambda a, b: a > b) if direction == "maximize" else (lambda a, b: a < b)
    for y in ys:
        if best is None or better(y, best):
            best = y
        best_so_far.append(best)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.scatter(xs, ys, s=14, alpha=0.6, label="trial objective")
    ax.plot(xs, best_so_far, color="#c44e52", label="best so far")
    ax.set_xlabel("trial")
    ax.set_ylabel("objective")
    ax.set_title(f"Study progress ({direction})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

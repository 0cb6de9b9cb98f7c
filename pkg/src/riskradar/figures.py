"""Figure rendering for match reports.

Rendered next to the delimited report output: one histogram of all match
scores and one horizontal bar chart of ranked scores per risk. Headless
(Agg) on purpose; analysts consume the PNGs offline.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_report_figures(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """Render figures for report rows (as produced by matcher.report_rows).

    Returns the list of written paths; an empty report renders nothing.
    """
    out_dir = Path(out_dir)
    if not rows:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [_score_histogram(rows, out_dir)]
    by_risk: dict[str, list[dict]] = {}
    for row in rows:
        by_risk.setdefault(row["risk_id"], []).append(row)
    for risk_id in sorted(by_risk):
        written.append(_risk_bar_chart(risk_id, by_risk[risk_id], out_dir))
    return written


def _score_histogram(rows: list[dict], out_dir: Path) -> Path:
    scores = [row["score"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(scores, bins=20, range=(0.0, 1.0), color="steelblue", edgecolor="white")
    ax.set_xlabel("cosine score")
    ax.set_ylabel("matches")
    ax.set_title("Match score distribution")
    path = out_dir / "score_histogram.png"
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def _risk_bar_chart(risk_id: str, rows: list[dict], out_dir: Path) -> Path:
    rows = sorted(rows, key=lambda r: r["rank"])
    labels = [_shorten(r["headline"]) or r["url"] for r in rows]
    scores = [r["score"] for r in rows]
    height = max(2.0, 0.4 * len(rows) + 1.2)
    fig, ax = plt.subplots(figsize=(7, height))
    positions = range(len(rows))
    ax.barh(positions, scores, color="darkseagreen")
    ax.set_yticks(list(positions))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("cosine score")
    ax.set_title(f"Top matches for {risk_id}")
    path = out_dir / f"matches_{_safe_name(risk_id)}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def _shorten(text: str, limit: int = 48) -> str:
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _safe_name(risk_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in risk_id)

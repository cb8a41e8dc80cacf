"""The four chart layouts and the public render entry point.

Output is deterministic: the Agg backend, a pinned svg hash salt, and
suppressed date metadata make repeated renders of the same input
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ntvplots"

import matplotlib.pyplot as plt

from .frames import Frame, FrameError, load_frame, series


@dataclass(frozen=True)
class ChartSpec:
    key_col: str
    x_col: str
    y_col: str
    x_label: str
    y_label: str
    log_y: bool
    key_labels: dict = field(default_factory=dict)


CHARTS = {
    "fig5a": ChartSpec(
        "arch", "delay_variation", "word_error_rate",
        "delay variation", "word error rate", log_y=True,
    ),
    "fig5b": ChartSpec(
        "arch", "delay_variation", "median_pdet",
        "delay variation", "median detection probability", log_y=False,
    ),
    "fig5c": ChartSpec(
        "arch", "delay_variation", "std_pdet",
        "delay variation", "std of detection probability", log_y=True,
    ),
    "fig6": ChartSpec(
        "diversity", "L", "variance",
        "ensemble size L", "ensemble output variance", log_y=False,
        key_labels={0: "uniform precision", 1: "diverse precision"},
    ),
}

KINDS = tuple(CHARTS)


def build_figure(frame: Frame, kind: str):
    """Draw one chart into a fresh Figure; the caller owns closing it."""
    spec = CHARTS[kind]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key, xs, ys in series(frame, spec.key_col, spec.x_col, spec.y_col):
        ax.plot(xs, ys, marker="o", label=str(spec.key_labels.get(key, key)))
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.grid(True, which="both", alpha=0.3)
    if ax.lines:
        ax.legend()
    fig.tight_layout()
    return fig


def _stable_metadata(out_path) -> dict | None:
    # svg and pdf writers stamp a creation date unless told otherwise.
    suffix = Path(out_path).suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None


def render(results_path, kind: str, out_path) -> None:
    if kind not in CHARTS:
        raise FrameError(f"unknown chart kind {kind!r}, expected one of {', '.join(CHARTS)}")
    frame = load_frame(results_path, kind)
    fig = build_figure(frame, kind)
    try:
        fig.savefig(out_path, dpi=150, metadata=_stable_metadata(out_path))
    finally:
        plt.close(fig)

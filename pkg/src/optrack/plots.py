"""Figure-ready series and rendered figures from a run's metrics.

The derived CSVs are the primary artifact (any plotting tool can reproduce
the figures from them); the PNGs rendered alongside are a convenience and use
the non-interactive backend so everything stays headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["log_downsample", "write_series", "export_plotdata"]


def log_downsample(ts: np.ndarray, max_points: int = 2000) -> np.ndarray:
    """Indices of approximately log-spaced samples of a time column."""
    k = ts.size
    if k <= max_points:
        return np.arange(k)
    idx = np.unique(np.geomspace(1, k, max_points).astype(int) - 1)
    if idx[-1] != k - 1:
        idx = np.append(idx, k - 1)
    return idx


def write_series(path, t, values, name: str) -> None:
    lines = [f"t,{name}"]
    lines.extend(f"{int(tt)},{repr(float(v))}" for tt, v in zip(t, values))
    Path(path).write_text("\n".join(lines) + "\n")


def export_plotdata(columns: dict, out_dir, max_points: int = 2000, render: bool = True) -> list:
    """Write the figure-ready series (and figures) for a metrics table.

    ``columns`` is the dict returned by ``read_metrics_csv``.  Emits
    avg_regret.csv, consensus.csv and tracking_error.csv, log-downsampled,
    plus two PNG figures: the average-regret evolution and a two-panel
    consensus/tracking-error view.  Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = columns["t"]
    idx = log_downsample(t, max_points)
    written = []
    series = {
        "avg_regret": columns["avg_regret"],
        "consensus": columns["consensus"],
        "tracking_error": columns["tracking_error"],
    }
    for name, values in series.items():
        path = out_dir / f"{name}.csv"
        write_series(path, t[idx], values[idx], name)
        written.append(path)
    if render:
        written.extend(_render_figures(t[idx], {k: v[idx] for k, v in series.items()}, out_dir))
    return written


def _render_figures(t, series, out_dir: Path) -> list:
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.semilogx(t, series["avg_regret"], color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("average regret")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out_dir / "avg_regret.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(6.0, 5.2), sharex=True)
    axes[0].loglog(t, np.maximum(series["consensus"], 1e-300), color="tab:orange")
    axes[0].set_ylabel("consensus error")
    axes[0].grid(True, which="both", alpha=0.3)
    axes[1].loglog(t, np.maximum(series["tracking_error"], 1e-300), color="tab:green")
    axes[1].set_ylabel("tracking error")
    axes[1].set_xlabel("iteration")
    axes[1].grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out_dir / "consensus_tracking.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written

"""Figures written next to the CSV outputs (Agg backend, files only)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .sim import KIND_DUST, Frame

FIGSIZE = (7.0, 4.3)


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows, path, labels=None) -> None:
    """Per-object target counts and dust statistics against the swept value."""
    labels = labels or {}
    counts = defaultdict(lambda: defaultdict(list))
    dust = defaultdict(list)
    dust_i = defaultdict(list)
    seen = set()
    for r in rows:
        counts[r.object_id][r.value].append(r.return_count)
        if (r.value, r.replicate) not in seen:
            seen.add((r.value, r.replicate))
            dust[r.value].append(r.dust_count)
            dust_i[r.value].append(r.dust_mean_intensity)
    param = rows[0].param if rows else ""
    values = sorted(dust)
    log_x = param == "density" and all(v >= 0 for v in values) and any(v > 0 for v in values)

    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(FIGSIZE[0] * 1.6, FIGSIZE[1]))
    xs = np.array(values, float)
    if log_x:
        # zero density sits one decade below the smallest positive value
        floor = xs[xs > 0].min() / 10.0
        xs = np.where(xs > 0, xs, floor)
    for oid in sorted(counts):
        if oid < 0:
            continue
        ys = [np.mean(counts[oid][v]) for v in values]
        ax0.plot(xs, ys, "o-", label=labels.get(oid, f"object {oid}"))
    ax0.plot(xs, [np.mean(dust[v]) for v in values], "s--", color="0.4", label="dust")
    ax0.set_xlabel(param)
    ax0.set_ylabel("returns per frame")
    ax0.legend(frameon=False)
    ax1.plot(xs, [np.mean(dust_i[v]) for v in values], "s-", color="tab:brown")
    ax1.set_xlabel(param)
    ax1.set_ylabel("mean dust intensity")
    if log_x:
        ax0.set_xscale("log")
        ax1.set_xscale("log")
    _finish(fig, path)


def plot_frame(frame: Frame, path, max_range: float = 60.0) -> None:
    """Bird's-eye view of one frame; dust returns in brown."""
    fig, ax = plt.subplots(figsize=(FIGSIZE[0], FIGSIZE[0]))
    dust = frame.kind == KIND_DUST
    p = frame.points
    ax.scatter(p[~dust, 0], p[~dust, 1], s=1.0, c=frame.intensity[~dust], cmap="viridis", vmin=0, vmax=255)
    ax.scatter(p[dust, 0], p[dust, 1], s=1.5, color="tab:brown", label=f"dust ({int(dust.sum())})")
    ax.plot(*frame.origin[:2], "r^")
    ax.set_xlim(frame.origin[0] - max_range, frame.origin[0] + max_range)
    ax.set_ylim(frame.origin[1] - max_range, frame.origin[1] + max_range)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{frame.sensor_name} frame {frame.frame_id}: {len(frame)} returns")
    if dust.any():
        ax.legend(loc="upper right", frameon=False)
    _finish(fig, path)

"""Raster heatmaps written next to the CSV outputs.

The CSV files are the source of truth; images are conveniences.  All maps use
the ``viridis`` colormap (diverging data uses ``RdBu_r``), and PNG metadata is
stripped so reruns produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grids import JointIntensity  # noqa: E402

__all__ = ["COLORMAP", "DIVERGING_COLORMAP", "plot_joint_intensity", "plot_map", "plot_width_rows"]

COLORMAP = "viridis"
DIVERGING_COLORMAP = "RdBu_r"
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    fig.savefig(tmp, dpi=100, format="png", metadata=_PNG_META)
    plt.close(fig)
    tmp.replace(path)
    return path


def plot_joint_intensity(g: JointIntensity, path, title: str | None = None, label: str = "x") -> Path:
    """Heatmap of ``g`` with ``x_s`` horizontal and ``x_i`` vertical."""
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    extent = [g.x_s_axis.min, g.x_s_axis.max, g.x_i_axis.min, g.x_i_axis.max]
    im = ax.imshow(g.counts.T, origin="lower", extent=extent, cmap=COLORMAP, aspect="auto")
    ax.set_xlabel(f"{label}_s")
    ax.set_ylabel(f"{label}_i")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _save(fig, path)


def plot_map(values: np.ndarray, x, y, path, *, xlabel: str, ylabel: str,
             title: str | None = None, diverging: bool = False) -> Path:
    """Heatmap of ``values[i, j]`` over ``x[i]`` (horizontal) and ``y[j]``."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    if diverging:
        vmax = float(np.nanmax(np.abs(values))) or 1.0
        kw = {"cmap": DIVERGING_COLORMAP, "vmin": -vmax, "vmax": vmax}
    else:
        kw = {"cmap": COLORMAP}
    im = ax.pcolormesh(np.asarray(x), np.asarray(y), values.T, shading="nearest", **kw)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _save(fig, path)


def plot_width_rows(rows, path, title: str | None = None) -> Path:
    """Fitted width against ``c``, one line per plane; failed cells are omitted from the plot."""
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    planes = []
    drawn = False
    for row in rows:
        if row.z not in planes:
            planes.append(row.z)
    for z in planes:
        sel = [r for r in rows if r.z == z and r.ok]
        if sel:
            ax.plot([r.c for r in sel], [r.width for r in sel], marker="o", ms=3, label=f"z={z:g}")
            drawn = True
    ax.set_xlabel("c")
    ax.set_ylabel("fitted width")
    if title:
        ax.set_title(title)
    if drawn:
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)

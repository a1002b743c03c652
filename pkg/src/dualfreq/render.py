"""Static figure rendering for pipeline artifacts.

Every figure is written as a PNG with the plotted numbers alongside as CSV,
so results stay inspectable without the plotting stack.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .estimation import DualFrequencyMatrix
from .population import ClusterResult, SvdResult

__all__ = [
    "render_matrix",
    "render_scree",
    "render_loadings_scatter",
    "render_labels_strip",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_grid_csv(hz: np.ndarray, grid_values: np.ndarray, path) -> None:
    lines = ["f2_hz\\f1_hz," + ",".join(_fmt(v) for v in hz)]
    for i, row in enumerate(grid_values):
        lines.append(_fmt(hz[i]) + "," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def render_matrix(matrix: DualFrequencyMatrix, png_path, title: Optional[str] = None) -> None:
    """Heatmap of a dual-frequency matrix modulus, axes in Hz.

    Writes ``png_path`` and the modulus grid as a sibling ``.csv``.
    """
    png_path = Path(png_path)
    hz = matrix.grid.hz
    modulus = matrix.modulus
    if not np.all(np.isfinite(modulus)):
        raise ValidationError("cannot render a matrix with non-finite entries")
    _write_grid_csv(hz, modulus, png_path.with_suffix(".csv"))
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    extent = (hz[0], hz[-1], hz[0], hz[-1])
    image = ax.imshow(modulus, origin="lower", extent=extent, aspect="equal", cmap="viridis")
    ax.set_xlabel("frequency $f_1$ (Hz)")
    ax.set_ylabel("frequency $f_2$ (Hz)")
    ax.set_title(title or matrix.kind)
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


def render_scree(svd: SvdResult, png_path, title: str = "singular values") -> None:
    png_path = Path(png_path)
    values = svd.singular_values
    lines = ["component,singular_value"] + [
        f"{k},{_fmt(v)}" for k, v in enumerate(values)
    ]
    png_path.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.bar(np.arange(1, values.size + 1), values, color="tab:blue")
    ax.set_xlabel("component")
    ax.set_ylabel("singular value")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


def render_loadings_scatter(
    svd: SvdResult,
    png_path,
    clusters: Optional[ClusterResult] = None,
    dims: Sequence[int] = (0, 1),
) -> None:
    """Scatter of two loading columns, coloured by cluster when available."""
    png_path = Path(png_path)
    if svd.rank_kept <= max(dims):
        raise ValidationError("not enough components kept for the requested scatter")
    x, y = svd.loadings[:, dims[0]], svd.loadings[:, dims[1]]
    labels = clusters.labels if clusters is not None else np.zeros(x.size, dtype=int)
    lines = ["trial,x,y,label"] + [
        f"{r},{_fmt(x[r])},{_fmt(y[r])},{int(labels[r])}" for r in range(x.size)
    ]
    png_path.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    for label in np.unique(labels):
        member = labels == label
        ax.scatter(x[member], y[member], s=18, label=f"cluster {label}")
    ax.set_xlabel(f"loading {dims[0] + 1}")
    ax.set_ylabel(f"loading {dims[1] + 1}")
    if clusters is not None:
        ax.legend(frameon=False)
    ax.set_title("trial loadings")
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


def render_labels_strip(labels: np.ndarray, png_path, title: str = "state per trial") -> None:
    """Cluster/state labels against trial index."""
    png_path = Path(png_path)
    labels = np.asarray(labels, dtype=int)
    lines = ["trial,label"] + [f"{r},{int(v)}" for r, v in enumerate(labels)]
    png_path.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    fig, ax = plt.subplots(figsize=(6.2, 2.2))
    ax.step(np.arange(labels.size), labels, where="mid")
    ax.scatter(np.arange(labels.size), labels, s=10)
    ax.set_xlabel("trial")
    ax.set_ylabel("label")
    ax.set_yticks(np.unique(labels))
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)

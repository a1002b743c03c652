"""Population analysis of trial coherence matrices.

Each trial's thresholded magnitude-coherence values at the tested pairs are
stacked into a trials-by-pairs matrix.  Its singular value decomposition
separates shared frequency structures (right singular vectors) from
trial-specific weights (left singular vectors), and k-means on the leading
weights groups the trials into states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .estimation import DualFrequencyMatrix, magnitude_average
from .significance import ThresholdResult

__all__ = [
    "TrialStack",
    "SvdResult",
    "ClusterResult",
    "SparsityRecord",
    "build_stack",
    "svd_stack",
    "sparsity_metrics",
    "kmeans_loadings",
    "batch_magnitude_means",
]


@dataclass(frozen=True)
class TrialStack:
    """Trials-by-pairs matrix of thresholded magnitude coherences."""

    matrix: np.ndarray
    pair_index: np.ndarray
    trial_ids: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValidationError("the trial stack must be a 2-d (R, N) matrix")
        if np.any(matrix < 0.0) or np.any(matrix > 1.0 + 1e-9):
            raise ValidationError("stack entries are magnitude coherences in [0, 1]")
        pair_index = np.asarray(self.pair_index, dtype=int)
        if pair_index.shape != (matrix.shape[1], 2):
            raise ValidationError("one (i, j) pair per stack column is required")
        trial_ids = np.asarray(self.trial_ids, dtype=int)
        if trial_ids.shape != (matrix.shape[0],):
            raise ValidationError("one trial id per stack row is required")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "pair_index", pair_index)
        object.__setattr__(self, "trial_ids", trial_ids)

    @property
    def num_trials(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SvdResult:
    """Truncated SVD of a trial stack.

    ``loadings`` holds the trial weights (columns orthonormal),
    ``components`` the frequency structures, both with the deterministic
    sign convention that the largest-magnitude element of every component is
    positive.
    """

    singular_values: np.ndarray
    loadings: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=float)
        if np.any(s < 0.0) or np.any(np.diff(s) > 1e-12 * max(1.0, s[0] if s.size else 0.0)):
            raise ValidationError("singular values must be nonnegative and nonincreasing")
        object.__setattr__(self, "singular_values", s)
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    @property
    def rank_kept(self) -> int:
        return self.singular_values.size

    def reconstruct(self) -> np.ndarray:
        return (self.loadings * self.singular_values) @ self.components.T


@dataclass(frozen=True)
class ClusterResult:
    """k-means assignment of trials in loading space."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    dims: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        centroids = np.asarray(self.centroids, dtype=float)
        if np.any(labels < 0) or np.any(labels >= centroids.shape[0]):
            raise ValidationError("every label must reference a centroid")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", centroids)

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class SparsityRecord:
    """Per-trial sparsity and leading loadings."""

    trial_id: int
    fraction_nonzero: float
    loadings: Tuple[float, ...]


def build_stack(
    results: Sequence[ThresholdResult],
    band_hz: Optional[Tuple[float, float]] = None,
) -> TrialStack:
    """Stack thresholded trials into the trials-by-pairs matrix.

    Row r holds trial r's magnitude coherence at the shared tested-pair
    list, zero where the entry was not significant.  All results must come
    from the same grid and test configuration; trials whose matrix was
    entirely zeroed stay in the stack as zero rows so row indices keep the
    experimental trial order.
    """
    if not results:
        raise ValidationError("need at least one thresholded trial")
    first = results[0]
    if band_hz is not None:
        low, high = float(band_hz[0]), float(band_hz[1])
        if (low, high) != first.config.band_hz:
            raise ValidationError(
                f"stack band {(low, high)} does not match the tested band "
                f"{first.config.band_hz}"
            )
    for other in results[1:]:
        if not first.thresholded.grid.matches(other.thresholded.grid):
            raise ValidationError("all trials must share one frequency grid")
        if other.config != first.config:
            raise ValidationError("all trials must share one test configuration")
        if not np.array_equal(other.pairs, first.pairs):
            raise ValidationError("all trials must share one tested-pair list")
    rows = np.empty((len(results), first.pairs.shape[0]))
    for r, res in enumerate(results):
        rows[r] = np.abs(res.thresholded.values[first.pairs[:, 0], first.pairs[:, 1]])
    rows = np.clip(rows, 0.0, 1.0)
    return TrialStack(
        matrix=rows,
        pair_index=first.pairs.copy(),
        trial_ids=np.arange(len(results)),
    )


def svd_stack(stack: TrialStack, k_keep: int) -> SvdResult:
    """Truncated singular value decomposition of the stack."""
    if not 1 <= k_keep <= min(stack.num_trials, stack.num_pairs):
        raise ValidationError("k_keep must lie in [1, min(R, N)]")
    loadings, values, components_t = np.linalg.svd(stack.matrix, full_matrices=False)
    loadings = loadings[:, :k_keep].copy()
    values = values[:k_keep].copy()
    components = components_t[:k_keep].T.copy()
    for k in range(k_keep):
        anchor = np.argmax(np.abs(components[:, k]))
        if components[anchor, k] < 0.0:
            components[:, k] *= -1.0
            loadings[:, k] *= -1.0
    return SvdResult(singular_values=values, loadings=loadings, components=components)


def sparsity_metrics(stack: TrialStack, svd: SvdResult) -> List[SparsityRecord]:
    """Per-trial fraction of nonzero pairs alongside the first three loadings."""
    if svd.loadings.shape[0] != stack.num_trials:
        raise ValidationError("the decomposition does not match the stack")
    fractions = (stack.matrix != 0.0).sum(axis=1) / stack.num_pairs
    width = min(3, svd.rank_kept)
    return [
        SparsityRecord(
            trial_id=int(stack.trial_ids[r]),
            fraction_nonzero=float(fractions[r]),
            loadings=tuple(float(v) for v in svd.loadings[r, :width]),
        )
        for r in range(stack.num_trials)
    ]


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    distances = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = distances.sum()
        if total <= 0.0:
            centers[i] = points[rng.integers(n)]
        else:
            centers[i] = points[rng.choice(n, p=distances / total)]
        distances = np.minimum(distances, np.sum((points - centers[i]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    labels = np.zeros(points.shape[0], dtype=int)
    for _ in range(max_iter):
        sq_dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(sq_dists, axis=1)
        for c in range(centers.shape[0]):
            members = new_labels == c
            if not np.any(members):
                # Revive an empty cluster at the point farthest from its centre.
                farthest = np.argmax(sq_dists[np.arange(points.shape[0]), new_labels])
                new_labels[farthest] = c
                members = new_labels == c
            centers[c] = points[members].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    sq_dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(sq_dists, axis=1)
    inertia = float(sq_dists[np.arange(points.shape[0]), labels].sum())
    return labels, centers, inertia


def kmeans_loadings(
    svd: SvdResult,
    k: int,
    dims: int = 2,
    seed: int = 0,
    restarts: int = 20,
) -> ClusterResult:
    """Cluster trials by k-means on their leading loadings.

    Lloyd iterations from D^2-weighted seeds, ``restarts`` independent
    starts, best inertia kept (ties broken by restart order).  Deterministic
    given the seed.
    """
    if dims < 1 or dims > svd.rank_kept:
        raise ValidationError("dims must lie in [1, rank kept]")
    points = svd.loadings[:, :dims]
    if k < 1:
        raise ValidationError("need at least one cluster")
    if k > points.shape[0]:
        raise ValidationError(f"cannot form {k} clusters from {points.shape[0]} trials")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = _kmeans_pp_init(points, k, rng)
        labels, centers, inertia = _lloyd(points, centers.copy())
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    labels, centers, inertia = best
    return ClusterResult(labels=labels, centroids=centers, inertia=inertia, dims=dims)


def batch_magnitude_means(
    coherences: Sequence[DualFrequencyMatrix], batch_size: int
) -> List[DualFrequencyMatrix]:
    """Magnitude averages over consecutive non-overlapping trial batches.

    The final partial batch is included.
    """
    if batch_size < 1:
        raise ValidationError("batch size must be at least 1")
    coherences = list(coherences)
    if not coherences:
        raise ValidationError("need at least one matrix to batch")
    return [
        magnitude_average(coherences[start : start + batch_size])
        for start in range(0, len(coherences), batch_size)
    ]

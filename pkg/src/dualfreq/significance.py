"""Significance testing of dual-frequency coherence with FDR control.

Off-diagonal coherence of a stationary series is tested against its
approximate null, K |tau|^2 ~ chi^2_2 / 2, giving the closed-form p-value
exp(-K |tau|^2).  Tested pairs are the strictly-upper-triangle entries of
the band-restricted matrix, optionally decimated by two per axis to curb the
Hermitian redundancy and dependence, and always excluding pairs closer to
the diagonal than the taper resolution bandwidth (those are trivially
correlated by leakage).  Rejections are selected with the Benjamini-Hochberg
step-up rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ValidationError
from .estimation import DualFrequencyMatrix
from .tapers import TaperSet

__all__ = ["TestConfig", "ThresholdResult", "pvalue_null", "subsample_hermitian", "fdr_threshold"]

_COHERENCE_SLACK = 1e-9

_MIN_TESTED_PAIRS = 10


@dataclass(frozen=True)
class TestConfig:
    """Configuration of the coherence significance test.

    Parameters
    ----------
    num_tapers : int
        K of the estimator under test.
    taper_bandwidth : float
        Resolution bandwidth 2 NW / T in cycles per sample; pairs closer
        than this to the diagonal are not tested.
    fdr_rate : float
        Target false discovery rate q.
    band_hz : (float, float)
        Inclusive frequency band of interest on both axes.
    subsample_half : bool
        Keep every second band frequency per axis before pairing.
    """

    num_tapers: int
    taper_bandwidth: float
    fdr_rate: float = 0.05
    band_hz: Tuple[float, float] = (-30.0, 30.0)
    subsample_half: bool = True

    def __post_init__(self):
        if self.num_tapers < 1:
            raise ValidationError("the test needs at least one taper")
        if not 0.0 < self.fdr_rate < 1.0:
            raise ValidationError("the FDR rate must lie in (0, 1)")
        if self.taper_bandwidth < 0.0 or self.taper_bandwidth >= 1.0:
            raise ValidationError("taper bandwidth must lie in [0, 1) cycles/sample")
        low, high = self.band_hz
        if low > high:
            raise ValidationError("band limits must be ordered (low, high)")
        object.__setattr__(self, "band_hz", (float(low), float(high)))

    @classmethod
    def for_tapers(cls, tapers: TaperSet, **kwargs) -> "TestConfig":
        """Derive K and the resolution bandwidth from a taper set."""
        return cls(
            num_tapers=tapers.num_tapers,
            taper_bandwidth=tapers.resolution_bandwidth,
            **kwargs,
        )


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of thresholding one coherence matrix.

    ``pairs`` lists the tested (row, column) index pairs in row-major
    order, ``pvalues`` and ``rejected`` align with it, and ``thresholded``
    keeps the original values at significant pairs (plus their Hermitian
    mirrors and the diagonal) with everything else zeroed.
    """

    thresholded: DualFrequencyMatrix
    pairs: np.ndarray
    pvalues: np.ndarray
    rejected: np.ndarray
    config: TestConfig

    @property
    def num_tested(self) -> int:
        return int(self.pairs.shape[0])

    @property
    def num_rejected(self) -> int:
        return int(self.rejected.sum())

    def pvalue_records(self):
        """Tested pairs as (i, j, p) tuples."""
        return [
            (int(i), int(j), float(p))
            for (i, j), p in zip(self.pairs, self.pvalues)
        ]


def pvalue_null(coh_sq, num_tapers: int):
    """Null p-value of a squared coherence under K |tau|^2 ~ chi^2_2 / 2.

    The survival function of chi^2_2 / 2 is exp(-x), hence
    p = exp(-K coh_sq).  Accepts scalars or arrays.
    """
    if num_tapers < 1:
        raise ValidationError("the null needs at least one taper")
    values = np.asarray(coh_sq, dtype=float)
    if np.any(values < 0.0) or np.any(values > 1.0 + _COHERENCE_SLACK):
        raise ValidationError("squared coherence must lie in [0, 1]")
    p = np.exp(-num_tapers * np.minimum(values, 1.0))
    p = np.clip(p, 0.0, 1.0)
    return p if p.ndim else float(p)


def subsample_hermitian(matrix: DualFrequencyMatrix, config: TestConfig) -> np.ndarray:
    """Index pairs to test: band-restricted, decimated, off-diagonal.

    Returns the strictly-upper-triangle (i, j) pairs, i < j, of the
    band-restricted grid, keeping every second band frequency per axis when
    ``config.subsample_half`` and dropping pairs with
    |f_i - f_j| < taper_bandwidth.  Row-major order.
    """
    hz = matrix.grid.hz
    low, high = config.band_hz
    band = np.nonzero((hz >= low) & (hz <= high))[0]
    if config.subsample_half:
        band = band[::2]
    if band.size < 2:
        raise ValidationError("the band is too narrow: fewer than two testable frequencies")
    freqs = matrix.grid.frequencies
    rows, cols = np.meshgrid(band, band, indexing="ij")
    upper = rows < cols
    separated = np.abs(freqs[cols] - freqs[rows]) >= config.taper_bandwidth
    keep = upper & separated
    pairs = np.column_stack([rows[keep], cols[keep]])
    if pairs.shape[0] == 0:
        raise ValidationError("no testable pairs: the band is narrower than the resolution")
    return pairs


def _benjamini_hochberg(pvalues: np.ndarray, rate: float) -> np.ndarray:
    """Step-up rejection mask at the given FDR rate."""
    n = pvalues.size
    order = np.argsort(pvalues, kind="stable")
    ranked = pvalues[order]
    below = ranked <= rate * np.arange(1, n + 1) / n
    rejected = np.zeros(n, dtype=bool)
    if np.any(below):
        cutoff = np.nonzero(below)[0][-1]
        rejected[order[: cutoff + 1]] = True
    return rejected


def fdr_threshold(coherence: DualFrequencyMatrix, config: TestConfig) -> ThresholdResult:
    """Zero the non-significant entries of a coherence matrix.

    Tests the subsampled off-diagonal pairs against the stationary null and
    applies the Benjamini-Hochberg step-up rule at ``config.fdr_rate``.
    Significant pairs keep their values, as do their Hermitian mirrors and
    the diagonal; all other entries, including pairs skipped by the
    decimation, are zeroed (strictly conservative).
    """
    if coherence.kind not in ("coherency", "coherence_sqrt"):
        raise ValidationError("thresholding expects a coherency or coherence_sqrt matrix")
    pairs = subsample_hermitian(coherence, config)
    if pairs.shape[0] < _MIN_TESTED_PAIRS:
        raise ValidationError(
            f"only {pairs.shape[0]} testable pairs; the test is meaningless below "
            f"{_MIN_TESTED_PAIRS}"
        )
    sampled = coherence.values[pairs[:, 0], pairs[:, 1]]
    coh_sq = np.abs(sampled) ** 2
    finite = np.isfinite(coh_sq)
    coh_sq = np.where(finite, coh_sq, 0.0)
    pvalues = np.asarray(pvalue_null(coh_sq, config.num_tapers))
    pvalues = np.where(finite, pvalues, 1.0)
    rejected = _benjamini_hochberg(pvalues, config.fdr_rate)

    values = np.zeros_like(coherence.values)
    np.fill_diagonal(values, np.diag(coherence.values))
    keep = pairs[rejected]
    values[keep[:, 0], keep[:, 1]] = coherence.values[keep[:, 0], keep[:, 1]]
    values[keep[:, 1], keep[:, 0]] = coherence.values[keep[:, 1], keep[:, 0]]
    thresholded = DualFrequencyMatrix(
        values=values, grid=coherence.grid, kind="thresholded", excluded=coherence.excluded
    )
    return ThresholdResult(
        thresholded=thresholded,
        pairs=pairs,
        pvalues=pvalues,
        rejected=rejected,
        config=config,
    )

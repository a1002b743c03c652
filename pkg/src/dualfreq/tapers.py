"""Discrete prolate spheroidal (Slepian) tapers for multitaper estimation.

The tapers are the orthonormal sequences that maximise the fraction of
spectral energy inside the band (-W, W) with W = NW / T.  They are computed
as eigenvectors of the standard symmetric tridiagonal operator, which shares
eigenvectors with the band-concentration operator but is cheap and numerically
robust.  Concentration ratios are then evaluated directly as quadratic forms
with the Toeplitz sinc kernel of the band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, matmul_toeplitz

from .errors import ValidationError

__all__ = ["TaperSet", "dpss"]

_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class TaperSet:
    """A family of orthonormal tapers with their band-concentration ratios.

    Attributes
    ----------
    tapers : ndarray, shape (K, T)
        One taper per row, unit energy, mutually orthogonal.
    eigenvalues : ndarray, shape (K,)
        In-band energy concentration of each taper, strictly decreasing,
        all inside (0, 1).
    time_bandwidth : float
        The NW product the family was built for.
    """

    tapers: np.ndarray
    eigenvalues: np.ndarray
    time_bandwidth: float

    def __post_init__(self):
        tapers = np.asarray(self.tapers, dtype=float)
        eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if tapers.ndim != 2:
            raise ValidationError("tapers must be a 2-d (K, T) array")
        if eigenvalues.shape != (tapers.shape[0],):
            raise ValidationError("one eigenvalue per taper required")
        gram = tapers @ tapers.T
        if not np.allclose(gram, np.eye(tapers.shape[0]), atol=_ORTHO_TOL):
            raise ValidationError("tapers are not orthonormal to 1e-10")
        if np.any(eigenvalues <= 0.0) or np.any(eigenvalues >= 1.0):
            raise ValidationError("concentration eigenvalues must lie in (0, 1)")
        if np.any(np.diff(eigenvalues) >= 0.0):
            raise ValidationError("concentration eigenvalues must be strictly decreasing")
        object.__setattr__(self, "tapers", tapers)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def num_tapers(self) -> int:
        return self.tapers.shape[0]

    @property
    def length(self) -> int:
        return self.tapers.shape[1]

    @property
    def half_bandwidth(self) -> float:
        """Half bandwidth W = NW / T in cycles per sample."""
        return self.time_bandwidth / self.length

    @property
    def resolution_bandwidth(self) -> float:
        """Full analysis bandwidth 2 NW / T in cycles per sample."""
        return 2.0 * self.time_bandwidth / self.length


def _concentrations(tapers: np.ndarray, half_bandwidth: float) -> np.ndarray:
    """In-band energy of each taper via the Toeplitz sinc quadratic form."""
    length = tapers.shape[1]
    lags = np.arange(1, length)
    kernel = np.empty(length)
    kernel[0] = 2.0 * half_bandwidth
    kernel[1:] = np.sin(2.0 * np.pi * half_bandwidth * lags) / (np.pi * lags)
    products = matmul_toeplitz((kernel, kernel), tapers.T, check_finite=False)
    return np.einsum("kt,tk->k", tapers, products)


def dpss(length: int, time_bandwidth: float, num_tapers: int) -> TaperSet:
    """Build the first `num_tapers` Slepian tapers of a given length.

    Parameters
    ----------
    length : int
        Number of samples T of each taper.
    time_bandwidth : float
        Time-bandwidth product NW; the concentration band is
        (-NW/T, NW/T).  Must satisfy 0 < NW < T/2.
    num_tapers : int
        Number of tapers K, at most floor(2 NW).  Values above
        floor(2 NW) - 1 trigger a warning because the trailing taper's
        concentration degrades quickly.

    Returns
    -------
    TaperSet
        Tapers ordered by decreasing concentration.  Sign convention:
        the first nonzero element of every taper is positive.
    """
    length = int(length)
    num_tapers = int(num_tapers)
    time_bandwidth = float(time_bandwidth)
    if length < 2:
        raise ValidationError("taper length must be at least 2")
    if num_tapers < 1:
        raise ValidationError("at least one taper is required")
    if num_tapers > length:
        raise ValidationError(f"cannot build {num_tapers} tapers of length {length}")
    if not 0.0 < time_bandwidth < length / 2.0:
        raise ValidationError(
            f"time-bandwidth product must lie in (0, T/2); got {time_bandwidth}"
        )
    max_tapers = int(np.floor(2.0 * time_bandwidth))
    if num_tapers > max_tapers:
        raise ValidationError(
            f"at most floor(2 NW) = {max_tapers} tapers are usable at NW = {time_bandwidth}"
        )
    if num_tapers > max_tapers - 1:
        warnings.warn(
            f"requesting {num_tapers} tapers at NW = {time_bandwidth}: the last "
            "taper's band concentration is noticeably reduced",
            UserWarning,
            stacklevel=2,
        )

    half_bandwidth = time_bandwidth / length
    positions = np.arange(length)
    diagonal = ((length - 1) / 2.0 - positions) ** 2 * np.cos(2.0 * np.pi * half_bandwidth)
    off_diagonal = positions[1:] * (length - positions[1:]) / 2.0
    _, vectors = eigh_tridiagonal(
        diagonal, off_diagonal, select="i", select_range=(length - num_tapers, length - 1)
    )
    tapers = vectors.T[::-1]

    # Fix signs: first element of non-negligible magnitude must be positive.
    for row in tapers:
        nonzero = np.nonzero(np.abs(row) > 1e-12 * np.abs(row).max())[0]
        if row[nonzero[0]] < 0.0:
            row *= -1.0

    eigenvalues = _concentrations(tapers, half_bandwidth)
    # The tridiagonal operator shares eigenvectors with the concentration
    # operator but its eigenvalue order is only guaranteed for the usual
    # W < 1/4 regime; sort by measured concentration to be safe.
    order = np.argsort(eigenvalues)[::-1]
    tapers = tapers[order]
    eigenvalues = np.clip(eigenvalues[order], np.finfo(float).tiny, 1.0 - 1e-16)
    # The true concentrations are strictly decreasing; rounding can tie the
    # near-unity ones, so nudge ties down within float resolution.
    for i in range(1, eigenvalues.size):
        if eigenvalues[i] >= eigenvalues[i - 1]:
            eigenvalues[i] = np.nextafter(eigenvalues[i - 1], 0.0)
    return TaperSet(tapers=tapers, eigenvalues=eigenvalues, time_bandwidth=time_bandwidth)

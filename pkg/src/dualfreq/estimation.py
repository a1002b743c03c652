"""Dual-frequency multitaper estimation.

The estimator chain per trial is: tapered Fourier coefficients, per-taper
dual-frequency periodograms (rank-one outer products), their unweighted
average across tapers, and the normalised coherency.  Cross-trial reductions
come in two flavours: the plain complex mean, which destructively averages
phase-variable structure, and the mean of magnitudes, which does not.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .tapers import TaperSet

__all__ = [
    "FrequencyGrid",
    "DualFrequencyMatrix",
    "MATRIX_KINDS",
    "DEFAULT_MAX_GRID",
    "tapered_fft",
    "loeve_periodogram",
    "multitaper_spectrum",
    "replicate_average",
    "magnitude_average",
    "coherency",
]

MATRIX_KINDS = ("spectrum", "coherency", "coherence_sqrt", "thresholded")

DEFAULT_MAX_GRID = 2048

_DIAGONAL_FLOOR = 1e-300


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing analysis frequencies in cycles per sample.

    Frequencies live in the open interval (-1/2, 1/2); ``sample_rate_hz``
    only supplies physical axis labels.
    """

    frequencies: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim != 1 or freqs.size < 1:
            raise ValidationError("a frequency grid needs at least one point")
        if np.any(np.diff(freqs) <= 0.0):
            raise ValidationError("grid frequencies must be strictly increasing")
        if freqs[0] <= -0.5 or freqs[-1] >= 0.5:
            raise ValidationError("grid frequencies must lie inside (-1/2, 1/2)")
        if self.sample_rate_hz <= 0.0:
            raise ValidationError("sample rate must be positive")
        freqs.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.frequencies.size

    @property
    def hz(self) -> np.ndarray:
        return self.frequencies * self.sample_rate_hz

    @classmethod
    def fundamental(cls, length: int, sample_rate_hz: float = 1.0) -> "FrequencyGrid":
        """All DFT frequencies of a series of the given length, centred.

        For even lengths the unpaired -1/2 bin is dropped so the grid stays
        symmetric about zero inside the open interval.
        """
        if length < 2:
            raise ValidationError("need at least two samples for a fundamental grid")
        bins = np.fft.fftshift(np.fft.fftfreq(length))
        if length % 2 == 0:
            bins = bins[1:]
        return cls(frequencies=bins, sample_rate_hz=sample_rate_hz)

    def restrict(self, band_hz) -> "FrequencyGrid":
        """Keep frequencies with band_hz[0] <= f_hz <= band_hz[1] (inclusive)."""
        low, high = float(band_hz[0]), float(band_hz[1])
        if low > high:
            raise ValidationError("band limits must be ordered (low, high)")
        keep = (self.hz >= low) & (self.hz <= high)
        if not np.any(keep):
            raise ValidationError("the requested band contains no grid frequencies")
        return FrequencyGrid(self.frequencies[keep], self.sample_rate_hz)

    def decimate(self, step: int) -> "FrequencyGrid":
        if step < 1:
            raise ValidationError("decimation step must be at least 1")
        return FrequencyGrid(self.frequencies[::step], self.sample_rate_hz)

    def matches(self, other: "FrequencyGrid") -> bool:
        return (
            len(self) == len(other)
            and np.array_equal(self.frequencies, other.frequencies)
            and self.sample_rate_hz == other.sample_rate_hz
        )


@dataclass(frozen=True)
class DualFrequencyMatrix:
    """A complex matrix indexed by ordered pairs of grid frequencies.

    ``kind`` records the estimator stage: raw/averaged two-frequency
    spectrum, normalised coherency, magnitudes of coherency
    (``coherence_sqrt``), or a significance-thresholded matrix.
    ``excluded`` optionally flags grid indices dropped by the coherency
    normalisation guard.
    """

    values: np.ndarray
    grid: FrequencyGrid
    kind: str
    excluded: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ValidationError(f"unknown matrix kind {self.kind!r}")
        values = np.asarray(self.values, dtype=complex)
        n = len(self.grid)
        if values.shape != (n, n):
            raise ValidationError("matrix shape must match the grid size")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.excluded is not None:
            excluded = np.asarray(self.excluded, dtype=bool)
            if excluded.shape != (n,):
                raise ValidationError("exclusion mask must flag grid indices")
            object.__setattr__(self, "excluded", excluded)

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    def hermitian_residual(self) -> float:
        """Largest deviation from exchange symmetry values[i,j] = conj(values[j,i])."""
        return float(np.abs(self.values - self.values.conj().T).max())


def _uniform_dft_bins(frequencies: np.ndarray, length: int):
    """Map grid frequencies onto bins of a zero-padded DFT, if possible."""
    for factor in (1, 2, 3, 4, 5, 8):
        n = factor * length
        bins = frequencies * n
        rounded = np.round(bins)
        if np.max(np.abs(bins - rounded)) < 1e-9:
            return n, rounded.astype(int) % n
    return None


def tapered_fft(trial: np.ndarray, tapers: TaperSet, grid: FrequencyGrid) -> np.ndarray:
    """Tapered Fourier coefficients of one trial on a grid.

    Returns the (K, N) complex array with entry (k, i) equal to
    sum_t h_k[t] x[t] exp(-2 pi i f_i t).  A zero-padded FFT is used when
    the grid maps onto uniform DFT bins, otherwise direct summation; the two
    paths agree to 1e-10.
    """
    trial = np.asarray(trial, dtype=float)
    if trial.ndim != 1:
        raise ValidationError("a trial must be a 1-d sequence")
    if trial.size != tapers.length:
        raise ValidationError(
            f"trial length {trial.size} does not match taper length {tapers.length}"
        )
    tapered = tapers.tapers * trial
    mapping = _uniform_dft_bins(grid.frequencies, trial.size)
    if mapping is not None:
        n, bins = mapping
        return np.fft.fft(tapered, n=n, axis=1)[:, bins]
    t = np.arange(trial.size)
    carriers = np.exp(-2j * np.pi * np.outer(t, grid.frequencies))
    return tapered @ carriers


def _check_grid_size(grid: FrequencyGrid, max_grid_size: int) -> None:
    if len(grid) > max_grid_size:
        raise ValidationError(
            f"grid has {len(grid)} frequencies; dual-frequency matrices are "
            f"quadratic in the grid size and the guard is {max_grid_size}. "
            "Restrict the band or subsample the grid."
        )


def loeve_periodogram(
    coeffs: np.ndarray,
    taper_index: int,
    grid: FrequencyGrid,
    *,
    max_grid_size: int = DEFAULT_MAX_GRID,
) -> DualFrequencyMatrix:
    """Rank-one dual-frequency periodogram of a single taper."""
    coeffs = np.asarray(coeffs)
    if not 0 <= taper_index < coeffs.shape[0]:
        raise ValidationError(f"taper index {taper_index} out of range")
    if coeffs.shape[1] != len(grid):
        raise ValidationError("coefficient array does not match the grid")
    _check_grid_size(grid, max_grid_size)
    x = coeffs[taper_index]
    values = np.outer(x, x.conj())
    return DualFrequencyMatrix(values=values, grid=grid, kind="spectrum")


def multitaper_spectrum(
    trial: np.ndarray,
    tapers: TaperSet,
    grid: FrequencyGrid,
    *,
    max_grid_size: int = DEFAULT_MAX_GRID,
) -> DualFrequencyMatrix:
    """Dual-frequency spectrum of one trial: per-taper periodograms, averaged.

    The average is unweighted; with concentrations this close to one an
    eigenvalue weighting changes nothing in practice.
    """
    _check_grid_size(grid, max_grid_size)
    coeffs = tapered_fft(trial, tapers, grid)
    values = coeffs.T @ coeffs.conj() / tapers.num_tapers
    values = 0.5 * (values + values.conj().T)
    return DualFrequencyMatrix(values=values, grid=grid, kind="spectrum")


def _check_compatible(spectra: Sequence[DualFrequencyMatrix]) -> None:
    if not spectra:
        raise ValidationError("need at least one matrix to average")
    first = spectra[0]
    for other in spectra[1:]:
        if not first.grid.matches(other.grid):
            raise ValidationError("matrices to average must share one grid")
        if other.kind != first.kind:
            raise ValidationError("matrices to average must share one kind")


def replicate_average(spectra: Sequence[DualFrequencyMatrix]) -> DualFrequencyMatrix:
    """Elementwise complex mean across trials.

    Phase offsets that vary across trials interfere destructively here:
    structure whose phase is trial-specific is attenuated in the complex
    mean even when its magnitude is stable.  Use
    :func:`magnitude_average` to summarise magnitude-stable structure.
    """
    _check_compatible(spectra)
    stacked = np.stack([m.values for m in spectra])
    return DualFrequencyMatrix(
        values=stacked.mean(axis=0), grid=spectra[0].grid, kind=spectra[0].kind
    )


def magnitude_average(spectra: Sequence[DualFrequencyMatrix]) -> DualFrequencyMatrix:
    """Elementwise mean of magnitudes across trials (phase-insensitive)."""
    _check_compatible(spectra)
    stacked = np.stack([np.abs(m.values) for m in spectra])
    kind = "coherence_sqrt" if spectra[0].kind in ("coherency", "coherence_sqrt") else "spectrum"
    return DualFrequencyMatrix(
        values=stacked.mean(axis=0).astype(complex), grid=spectra[0].grid, kind=kind
    )


def coherency(spectrum: DualFrequencyMatrix) -> DualFrequencyMatrix:
    """Normalise a dual-frequency spectrum to coherency.

    Divides by the geometric mean of the diagonal entries; the diagonal of
    the result is exactly one.  Grid indices whose spectrum diagonal
    underflows are flagged in the exclusion mask and their rows/columns set
    to NaN.
    """
    if spectrum.kind != "spectrum":
        raise ValidationError("coherency must be computed from a spectrum matrix")
    diagonal = np.real(np.diag(spectrum.values)).copy()
    bad = ~(diagonal > _DIAGONAL_FLOOR)
    if np.any(bad):
        warnings.warn(
            f"{int(bad.sum())} grid frequencies have vanishing spectrum and are "
            "excluded from the coherency",
            UserWarning,
            stacklevel=2,
        )
        diagonal[bad] = 1.0
    scale = np.sqrt(diagonal)
    values = spectrum.values / np.outer(scale, scale)
    np.fill_diagonal(values, 1.0)
    if np.any(bad):
        values[bad, :] = np.nan
        values[:, bad] = np.nan
    excluded = bad if np.any(bad) else None
    return DualFrequencyMatrix(
        values=values, grid=spectrum.grid, kind="coherency", excluded=excluded
    )

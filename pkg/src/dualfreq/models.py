"""Generative models for modulated cyclic processes and their exact theory.

A model is a zero-mean stationary Gaussian base process multiplied by a
deterministic real modulator built from harmonic components::

    x[t] = g(t) * u[t],    g(t) = sum_c  w_c * a_c(t) * exp(i(2 pi c t / D + phi_c(t)))

Components come in conjugate pairs (c, -c) so that g is real-valued.  The
covariance of x then aggregates broadened diagonal lines in the
dual-frequency plane, one per difference of component indices, and both the
time-domain covariance and the dual-frequency spectrum can be evaluated
exactly from the model description.  Replicate-level variation enters as a
circular time shift of the amplitude envelopes, per-component phase offsets
and per-component nonnegative gain factors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz

from .errors import ModelError, ModelWarning, ValidationError

__all__ = [
    "BaseProcessSpec",
    "ComponentSpec",
    "ReplicateParams",
    "ModelSpec",
    "ReplicateVariation",
    "TrialMatrix",
    "theoretical_covariance",
    "theoretical_loeve_spectrum",
]

BASE_KINDS = ("white", "ar-coefficients", "spectral-shape")

_BAND_ENERGY_FRACTION = 0.99


@dataclass(frozen=True)
class BaseProcessSpec:
    """Description of the stationary Gaussian base process.

    Parameters
    ----------
    kind : str
        One of ``"white"``, ``"ar-coefficients"`` or ``"spectral-shape"``.
    params : sequence of float
        Unused for white noise; the AR coefficients (phi_1..phi_p) for an
        autoregression; or samples of a nonnegative, even spectral density
        on a uniform grid over [-1/2, 1/2) for a spectral shape.
    innovation_variance : float
        Noise variance for white/AR bases; overall scale factor applied to
        a sampled spectral density.
    """

    kind: str
    params: tuple = ()
    innovation_variance: float = 1.0

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValidationError(f"unknown base process kind {self.kind!r}")
        params = tuple(float(p) for p in np.atleast_1d(np.asarray(self.params, dtype=float))) if len(
            np.atleast_1d(self.params)
        ) else ()
        object.__setattr__(self, "params", params)
        if not np.isfinite(self.innovation_variance) or self.innovation_variance <= 0.0:
            raise ValidationError("innovation variance must be a positive real")
        if self.kind == "ar-coefficients":
            if not params:
                raise ValidationError("AR base requires at least one coefficient")
            poly = np.r_[-np.asarray(params)[::-1], 1.0]
            roots = np.roots(poly)
            if np.any(np.abs(roots) <= 1.0 + 1e-10):
                raise ModelError(
                    "AR coefficients do not define a causal stationary filter "
                    "(characteristic root on or inside the unit circle)"
                )
        if self.kind == "spectral-shape":
            density = np.asarray(params, dtype=float)
            if density.size < 2:
                raise ValidationError("sampled spectral density needs at least 2 points")
            if np.any(density < 0.0):
                raise ValidationError("sampled spectral density must be nonnegative")
            standard = np.fft.ifftshift(density)
            mirrored = standard[(-np.arange(density.size)) % density.size]
            if not np.allclose(standard, mirrored, atol=1e-12 * max(1.0, density.max())):
                raise ValidationError("sampled spectral density must be even in frequency")

    def acvs(self, max_lag: int) -> np.ndarray:
        """Exact autocovariance sequence of the base at lags 0..max_lag."""
        if self.kind == "white":
            out = np.zeros(max_lag + 1)
            out[0] = self.innovation_variance
            return out
        if self.kind == "ar-coefficients":
            return _ar_acvs(np.asarray(self.params), self.innovation_variance, max_lag)
        density = self.innovation_variance * np.fft.ifftshift(np.asarray(self.params))
        if max_lag >= density.size:
            raise ValidationError(
                "spectral-shape base supports lags only up to its grid size; "
                f"need {max_lag + 1} points but the density has {density.size}"
            )
        full = np.fft.ifft(density).real
        return full[: max_lag + 1]

    def spectral_density(self, frequencies: np.ndarray) -> np.ndarray:
        """Spectral density of the base at the given cycles-per-sample points."""
        frequencies = np.asarray(frequencies, dtype=float)
        if self.kind == "white":
            return np.full(frequencies.shape, self.innovation_variance)
        if self.kind == "ar-coefficients":
            coeffs = np.asarray(self.params)
            lags = np.arange(1, coeffs.size + 1)
            response = 1.0 - np.exp(-2j * np.pi * np.outer(frequencies, lags)) @ coeffs
            return self.innovation_variance / np.abs(response) ** 2
        density = np.asarray(self.params)
        grid = -0.5 + np.arange(density.size) / density.size
        indices = np.argmin(np.abs(np.subtract.outer(frequencies, grid)), axis=-1)
        return self.innovation_variance * density[indices]


def _band_fraction(sequence: np.ndarray, limit: float) -> float:
    padded = np.fft.fft(sequence, n=8 * sequence.size)
    energy = np.abs(padded) ** 2
    freqs = np.fft.fftfreq(8 * sequence.size)
    total = energy.sum()
    if total <= 0.0:
        return 1.0
    return float(energy[np.abs(freqs) < limit].sum() / total)


def _ar_acvs(coeffs: np.ndarray, noise_variance: float, max_lag: int) -> np.ndarray:
    """Autocovariance of a causal AR process from its Yule-Walker relations."""
    order = coeffs.size
    system = np.zeros((order + 1, order + 1))
    rhs = np.zeros(order + 1)
    rhs[0] = noise_variance
    for k in range(order + 1):
        system[k, k] += 1.0
        for i, phi in enumerate(coeffs, start=1):
            system[k, abs(k - i)] -= phi
    head = np.linalg.solve(system, rhs)
    out = np.empty(max_lag + 1)
    upto = min(order, max_lag)
    out[: upto + 1] = head[: upto + 1]
    for lag in range(order + 1, max_lag + 1):
        out[lag] = coeffs @ out[lag - order : lag][::-1]
    return out


@dataclass(frozen=True)
class ComponentSpec:
    """One harmonic component of the modulator.

    Parameters
    ----------
    index : int
        Signed harmonic number c; the component oscillates at c / period
        cycles per sample.  Components must be supplied in conjugate pairs
        (c, -c) sharing period, weight and amplitude, with opposite phase.
    period : float
        Cycle length D in samples, positive.
    amplitude : sequence of float
        Sampled amplitude envelope a_c(t), one value per time sample.
    weight : float
        Constant coupling weight multiplying the envelope.
    phase : sequence of float, optional
        Sampled phase modulation phi_c(t) in radians.  Applied during
        simulation only; the closed-form covariance/spectrum ignore it.
    """

    index: int
    period: float
    amplitude: np.ndarray
    weight: float = 1.0
    phase: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValidationError("component period must be positive")
        amplitude = np.asarray(self.amplitude, dtype=float)
        if amplitude.ndim != 1 or amplitude.size < 2:
            raise ValidationError("amplitude envelope must be a 1-d sampled sequence")
        if not np.all(np.isfinite(amplitude)):
            raise ValidationError("amplitude envelope must be finite")
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "weight", float(self.weight))
        if self.phase is not None:
            phase = np.asarray(self.phase, dtype=float)
            if phase.shape != amplitude.shape:
                raise ValidationError("phase modulation must match the envelope length")
            object.__setattr__(self, "phase", phase)

    def band_energy_fraction(self) -> float:
        """Fraction of envelope spectral energy inside (-|c|/D, |c|/D).

        Normalised by the same fraction for a constant envelope of equal
        length, so finite-window leakage does not count against slowly
        varying envelopes.
        """
        if self.index == 0:
            return 1.0
        limit = abs(self.index) / self.period
        raw = _band_fraction(self.amplitude, limit)
        reference = _band_fraction(np.ones(self.amplitude.size), limit)
        return float(min(raw / reference, 1.0)) if reference > 0 else 1.0

    def mean_modulation_offset(self) -> float:
        """Energy-weighted mean instantaneous frequency of the phase modulation."""
        if self.phase is None:
            return 0.0
        rate = np.gradient(self.phase) / (2.0 * np.pi)
        weights = self.amplitude**2
        total = weights.sum()
        if total <= 0.0:
            return 0.0
        return float((weights * rate).sum() / total)


@dataclass(frozen=True)
class ReplicateParams:
    """Trial-level variation: time shift, phase offsets and gain factors.

    ``phase_shifts`` and ``amplitude_factors`` are aligned with the model's
    component list.  Phase offsets must vanish for index-0 components and be
    antisymmetric across (c, -c) pairs; gain factors must be nonnegative and
    symmetric across pairs.
    """

    time_shift: int = 0
    phase_shifts: tuple = ()
    amplitude_factors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "time_shift", int(self.time_shift))
        object.__setattr__(
            self, "phase_shifts", tuple(float(p) for p in np.atleast_1d(self.phase_shifts))
            if np.size(self.phase_shifts) else ()
        )
        object.__setattr__(
            self,
            "amplitude_factors",
            tuple(float(a) for a in np.atleast_1d(self.amplitude_factors))
            if np.size(self.amplitude_factors) else (),
        )
        for p in self.phase_shifts:
            if not -np.pi < p <= np.pi + 1e-12:
                raise ValidationError("phase shifts must lie in (-pi, pi]")
        for a in self.amplitude_factors:
            if a < 0.0:
                raise ValidationError("amplitude factors must be nonnegative")


@dataclass(frozen=True)
class ReplicateVariation:
    """Distributions the simulator draws trial-level parameters from.

    ``phase`` modes: ``"none"``; ``"uniform"`` draws an independent offset
    per conjugate pair (appropriate for single-pair states); ``"cyclic"``
    draws one offset and applies it linearly in the harmonic index, which
    shifts the whole carrier cycle and so preserves multi-harmonic waveform
    shapes while still randomising every line's phase across trials.
    """

    phase: str = "none"            # "none" | "uniform" | "cyclic"
    time_shift_max: int = 0
    amplitude_factor_sd: float = 0.0

    def __post_init__(self):
        if self.phase not in ("none", "uniform", "cyclic"):
            raise ValidationError(
                "replicate phase variation must be 'none', 'uniform' or 'cyclic'"
            )
        if self.time_shift_max < 0:
            raise ValidationError("time shift range must be nonnegative")
        if self.amplitude_factor_sd < 0.0:
            raise ValidationError("amplitude factor spread must be nonnegative")

    @property
    def is_trivial(self) -> bool:
        return (
            self.phase == "none"
            and self.time_shift_max == 0
            and self.amplitude_factor_sd == 0.0
        )


@dataclass(frozen=True)
class ModelSpec:
    """Complete generative description of a replicated experiment.

    Parameters
    ----------
    base : BaseProcessSpec
        The stationary base process.
    components : sequence of ComponentSpec
        Pool of harmonic components, in conjugate-symmetric pairs.
    states : sequence of sequence of int
        One component-index list per mixture state.
    mixture_weights : array-like
        State probabilities; either one vector of length M shared by all
        replicates or an (R, M) array of per-replicate vectors.  Rows must
        sum to one.
    series_length : int
        Samples per trial T.
    num_replicates : int
        Number of trials R.
    seed : int
        Root seed for all randomness.
    sample_rate_hz : float
        Sampling rate used for axis labelling of derived artifacts.
    replicate_variation : ReplicateVariation
        Distributions for drawn trial-level parameters.
    """

    base: BaseProcessSpec
    components: tuple
    states: tuple
    mixture_weights: np.ndarray
    series_length: int
    num_replicates: int
    seed: int = 0
    sample_rate_hz: float = 1.0
    replicate_variation: ReplicateVariation = field(default_factory=ReplicateVariation)

    def __post_init__(self):
        if self.series_length < 2:
            raise ValidationError("series length must be at least 2")
        if self.num_replicates < 1:
            raise ValidationError("at least one replicate is required")
        if self.sample_rate_hz <= 0.0:
            raise ValidationError("sample rate must be positive")
        components = tuple(self.components)
        if not components:
            raise ValidationError("at least one component is required")
        for comp in components:
            if comp.amplitude.size != self.series_length:
                raise ValidationError(
                    "component envelopes must be sampled at the series length"
                )
        _check_conjugate_pairs(components)
        states = tuple(tuple(int(i) for i in state) for state in self.states)
        if not states:
            raise ValidationError("at least one state is required")
        for state in states:
            if not state:
                raise ValidationError("states must reference at least one component")
            for i in state:
                if not 0 <= i < len(components):
                    raise ValidationError(f"state references unknown component {i}")
            _check_conjugate_pairs([components[i] for i in state])
        weights = np.atleast_2d(np.asarray(self.mixture_weights, dtype=float))
        if weights.shape[1] != len(states):
            raise ValidationError("one mixture weight per state is required")
        if weights.shape[0] == 1:
            weights = np.repeat(weights, self.num_replicates, axis=0)
        if weights.shape[0] != self.num_replicates:
            raise ValidationError("mixture weights must be shared or given per replicate")
        if np.any(weights < 0.0) or not np.allclose(weights.sum(axis=1), 1.0, atol=1e-9):
            raise ValidationError("mixture weights must be probability vectors")
        weights = weights / weights.sum(axis=1, keepdims=True)
        weights.setflags(write=False)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "mixture_weights", weights)
        object.__setattr__(self, "series_length", int(self.series_length))
        object.__setattr__(self, "num_replicates", int(self.num_replicates))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def num_states(self) -> int:
        return len(self.states)

    def check_band_concentration(self) -> None:
        """Warn about envelopes whose spectral energy leaks past their line."""
        for pos, comp in enumerate(self.components):
            fraction = comp.band_energy_fraction()
            if fraction < _BAND_ENERGY_FRACTION:
                warnings.warn(
                    f"component {pos} (harmonic {comp.index}): only "
                    f"{100 * fraction:.1f}% of the envelope energy is inside "
                    "(-|c|/D, |c|/D); its line will appear shifted rather than "
                    "broadened",
                    ModelWarning,
                    stacklevel=2,
                )
            offset = comp.mean_modulation_offset()
            if abs(offset) > 0.1 / comp.period:
                warnings.warn(
                    f"component {pos} (harmonic {comp.index}): phase modulation "
                    f"shifts the mean frequency by {offset:.4g} cycles/sample",
                    ModelWarning,
                    stacklevel=2,
                )

    def unit_replicate_params(self) -> ReplicateParams:
        n = len(self.components)
        return ReplicateParams(
            time_shift=0,
            phase_shifts=(0.0,) * n,
            amplitude_factors=(1.0,) * n,
        )

    def validate_replicate_params(self, params: ReplicateParams) -> None:
        n = len(self.components)
        if params.phase_shifts and len(params.phase_shifts) != n:
            raise ValidationError("one phase shift per component is required")
        if params.amplitude_factors and len(params.amplitude_factors) != n:
            raise ValidationError("one amplitude factor per component is required")
        pairs = _pair_indices(self.components)
        phases = params.phase_shifts or (0.0,) * n
        gains = params.amplitude_factors or (1.0,) * n
        for pos, comp in enumerate(self.components):
            if comp.index == 0 and phases[pos] != 0.0:
                raise ValidationError("index-0 components must have zero phase shift")
        for pos, mirror in pairs.items():
            if abs(phases[pos] + phases[mirror]) > 1e-12 and self.components[pos].index != 0:
                raise ValidationError("phase shifts must be antisymmetric across (c, -c)")
            if abs(gains[pos] - gains[mirror]) > 1e-12:
                raise ValidationError("amplitude factors must match across (c, -c)")


def _pair_indices(components: Sequence[ComponentSpec]) -> dict:
    """Map each component position to the position of its conjugate partner."""
    pairs = {}
    taken = set()
    for pos, comp in enumerate(components):
        if comp.index == 0:
            pairs[pos] = pos
            continue
        if pos in taken:
            continue
        for other_pos, other in enumerate(components):
            if other_pos in taken or other_pos == pos:
                continue
            if (
                other.index == -comp.index
                and other.period == comp.period
                and other.weight == comp.weight
                and np.array_equal(other.amplitude, comp.amplitude)
            ):
                pairs[pos] = other_pos
                pairs[other_pos] = pos
                taken.update((pos, other_pos))
                break
        else:
            raise ValidationError(
                f"component with harmonic {comp.index} has no conjugate partner; "
                "real-valued trials need components in (c, -c) pairs"
            )
    return pairs


def _check_conjugate_pairs(components: Sequence[ComponentSpec]) -> None:
    pairs = _pair_indices(components)
    for pos, mirror in pairs.items():
        comp, partner = components[pos], components[mirror]
        if comp.index == 0:
            if comp.phase is not None and np.any(comp.phase != 0.0):
                raise ValidationError("index-0 components cannot carry phase modulation")
            continue
        if (comp.phase is None) != (partner.phase is None):
            raise ValidationError("phase modulation must be present on both of (c, -c)")
        if comp.phase is not None and not np.allclose(comp.phase, -partner.phase):
            raise ValidationError("phase modulation must be antisymmetric across (c, -c)")


def state_modulator(
    spec: ModelSpec,
    state: int,
    params: Optional[ReplicateParams] = None,
    *,
    apply_phase_modulation: bool = False,
) -> np.ndarray:
    """Real modulator sequence g(t) of one mixture state.

    With ``params`` omitted the unit trial parameters are used, which is the
    convention of the closed-form covariance and spectrum.  Phase modulation
    envelopes are only applied when explicitly requested (simulation path).
    """
    if not 0 <= state < spec.num_states:
        raise ValidationError(f"state index {state} out of range")
    if params is None:
        params = spec.unit_replicate_params()
    spec.validate_replicate_params(params)
    phases = params.phase_shifts or (0.0,) * len(spec.components)
    gains = params.amplitude_factors or (1.0,) * len(spec.components)
    t = np.arange(spec.series_length)
    total = np.zeros(spec.series_length, dtype=complex)
    for pos in spec.states[state]:
        comp = spec.components[pos]
        envelope = np.roll(comp.amplitude, params.time_shift)
        angle = 2.0 * np.pi * comp.index * t / comp.period + phases[pos]
        if apply_phase_modulation and comp.phase is not None:
            angle = angle + np.roll(comp.phase, params.time_shift)
        total += gains[pos] * comp.weight * envelope * np.exp(1j * angle)
    scale = max(np.abs(total).max(), 1.0)
    if np.abs(total.imag).max() > 1e-9 * scale:
        raise ModelError("modulator is not real-valued; component symmetry is broken")
    return total.real


def theoretical_covariance(spec: ModelSpec, state: int, t, lag):
    """Exact covariance cov(x[t], x[t - lag]) of one state at unit trial params.

    Evaluates g(t) g(t - lag) s(lag) with s the base autocovariance; the
    modulator is extended periodically so every (t, lag) combination with
    ``0 <= t < T`` and ``|lag| < T`` is defined.  Phase-modulation envelopes
    are ignored here (no closed form); simulation applies them.

    Accepts scalars or broadcastable arrays for ``t`` and ``lag``.
    """
    t = np.asarray(t)
    lag = np.asarray(lag)
    if np.any(t < 0) or np.any(t >= spec.series_length):
        raise ValidationError("time index out of range")
    if np.any(np.abs(lag) >= spec.series_length):
        raise ValidationError("lag magnitude must be smaller than the series length")
    modulator = state_modulator(spec, state)
    acvs = spec.base.acvs(spec.series_length - 1)
    value = (
        modulator[t % spec.series_length]
        * modulator[(t - lag) % spec.series_length]
        * acvs[np.abs(lag)]
    )
    return value if value.ndim else float(value)


def theoretical_loeve_spectrum(spec: ModelSpec, state: int, grid) -> "DualFrequencyMatrix":
    """Exact dual-frequency spectrum of one state on a frequency grid.

    Returns (1/T) * M Sigma M^H with M the grid Fourier matrix weighted by
    the modulator and Sigma the Toeplitz base covariance, i.e. the finite-T
    double Fourier transform of the model covariance.  The 1/T scaling makes
    the diagonal of a purely stationary model match the base spectral
    density up to discretisation.
    """
    from .estimation import DualFrequencyMatrix  # local import; no cycle at call time

    modulator = state_modulator(spec, state)
    acvs = spec.base.acvs(spec.series_length - 1)
    sigma = toeplitz(acvs)
    t = np.arange(spec.series_length)
    carriers = np.exp(-2j * np.pi * np.outer(grid.frequencies, t)) * modulator
    values = carriers @ sigma @ carriers.conj().T / spec.series_length
    values = 0.5 * (values + values.conj().T)
    return DualFrequencyMatrix(values=values, grid=grid, kind="spectrum")


@dataclass(frozen=True)
class TrialMatrix:
    """Replicated trials, one row per replicate."""

    data: np.ndarray
    sample_rate_hz: float
    state_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValidationError("trial data must be a 2-d (R, T) array")
        if data.shape[0] < 1 or data.shape[1] < 2:
            raise ValidationError("need at least one replicate of length 2")
        if not np.all(np.isfinite(data)):
            raise ValidationError("trial data must be finite")
        if self.sample_rate_hz <= 0.0:
            raise ValidationError("sample rate must be positive")
        object.__setattr__(self, "data", data)
        if self.state_labels is not None:
            labels = np.asarray(self.state_labels, dtype=int)
            if labels.shape != (data.shape[0],):
                raise ValidationError("one state label per replicate is required")
            object.__setattr__(self, "state_labels", labels)

    @property
    def num_replicates(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

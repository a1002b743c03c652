"""Shared builders for the test suite."""

from itertools import permutations

import numpy as np
import pytest

import dualfreq as dq


def comb_model(
    length,
    period,
    num_harmonics,
    num_replicates,
    seed,
    sample_rate_hz=1.0,
    weight=1.0,
    envelope=None,
    base=None,
    variation=None,
):
    """Model with harmonics -J..J of one period, optionally enveloped.

    Harmonic counts must satisfy J < period / 2 so no carrier aliases.
    """
    if num_harmonics >= period / 2.0:
        raise ValueError("harmonics beyond the Nyquist carrier would alias")
    ones = np.ones(length)
    comps = [dq.ComponentSpec(index=0, period=period, amplitude=ones)]
    env = ones if envelope is None else np.asarray(envelope, dtype=float)
    for k in range(1, num_harmonics + 1):
        comps.append(dq.ComponentSpec(index=k, period=period, amplitude=env, weight=weight))
        comps.append(dq.ComponentSpec(index=-k, period=period, amplitude=env, weight=weight))
    return dq.ModelSpec(
        base=base or dq.BaseProcessSpec(kind="white"),
        components=tuple(comps),
        states=(tuple(range(len(comps))),),
        mixture_weights=[1.0],
        series_length=length,
        num_replicates=num_replicates,
        seed=seed,
        sample_rate_hz=sample_rate_hz,
        replicate_variation=variation or dq.ReplicateVariation(),
    )


def pulse_model(
    length,
    period,
    num_replicates,
    seed,
    floor_weight=0.25,
    sample_rate_hz=1.0,
    variation=None,
):
    """Noise gated by a periodic pulse train plus a small constant floor.

    The harmonics cover the full discrete carrier set of the period (the
    half-period harmonic split across the (D/2, -D/2) pair), so the
    modulator is an exact sampled comb and every difference line carries
    near-unit coherence: the strongest lines a cyclic model can produce.
    """
    period_int = int(period)
    if period_int != period or length % period_int:
        raise ValueError("pulse trains need an integer period dividing the length")
    ones = np.ones(length)
    comps = [dq.ComponentSpec(index=0, period=period, amplitude=ones, weight=1.0 + floor_weight)]
    for k in range(1, period_int // 2):
        comps.append(dq.ComponentSpec(index=k, period=period, amplitude=ones))
        comps.append(dq.ComponentSpec(index=-k, period=period, amplitude=ones))
    comps.append(dq.ComponentSpec(index=period_int // 2, period=period, amplitude=ones, weight=0.5))
    comps.append(dq.ComponentSpec(index=-(period_int // 2), period=period, amplitude=ones, weight=0.5))
    return dq.ModelSpec(
        base=dq.BaseProcessSpec(kind="white"),
        components=tuple(comps),
        states=(tuple(range(len(comps))),),
        mixture_weights=[1.0],
        series_length=length,
        num_replicates=num_replicates,
        seed=seed,
        sample_rate_hz=sample_rate_hz,
        replicate_variation=variation or dq.ReplicateVariation(),
    )


def gaussian_envelope(length, width, center=None, scale=1.0):
    t = np.arange(length)
    center = length / 2.0 if center is None else center
    return scale * np.exp(-0.5 * ((t - center) / width) ** 2)


def label_accuracy(labels, truth):
    """Best agreement over relabelings of the cluster assignment."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    values = np.unique(labels)
    best = 0.0
    for perm in permutations(np.unique(truth), values.size):
        mapped = np.empty_like(labels)
        for v, p in zip(values, perm):
            mapped[labels == v] = p
        best = max(best, float(np.mean(mapped == truth)))
    return best


def brute_force_mean_periodogram(data):
    """Replicate-averaged raw dual-frequency periodogram E[d(f1) d*(f2)] / T.

    Independent oracle for the multitaper path: plain DFT outer products,
    complex-averaged across replicates, on the centred fundamental grid.
    """
    data = np.asarray(data)
    num, length = data.shape
    spectra = np.fft.fftshift(np.fft.fft(data, axis=1), axes=1)
    if length % 2 == 0:
        spectra = spectra[:, 1:]
    out = np.einsum("ri,rj->ij", spectra, spectra.conj()) / (num * length)
    return out


@pytest.fixture(scope="session")
def small_tapers():
    return dq.dpss(128, 4.0, 7)

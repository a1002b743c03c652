"""Simulation behaviour: determinism, reductions, and spectral support."""

import numpy as np
import pytest

import dualfreq as dq
from dualfreq.errors import ModelWarning, ValidationError

from conftest import brute_force_mean_periodogram, comb_model, gaussian_envelope


def test_white_baseline_unit_variance():
    spec = comb_model(256, 8.0, 0, 200, seed=3)
    trials = dq.simulate_cyclostationary(spec)
    assert trials.data.shape == (200, 256)
    assert trials.data.var() == pytest.approx(1.0, abs=0.02)
    assert trials.data.mean() == pytest.approx(0.0, abs=0.02)


def test_deterministic_given_seed():
    spec = comb_model(64, 8.0, 1, 5, seed=42)
    a = dq.simulate_cyclostationary(spec)
    b = dq.simulate_cyclostationary(spec)
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(a.state_labels, b.state_labels)


def test_replicates_use_independent_substreams():
    # The first replicates of an R=2 run equal the single replicate of an
    # R=1 run: streams are keyed on (seed, replicate), not drawn serially.
    small = comb_model(64, 8.0, 1, 1, seed=9)
    large = comb_model(64, 8.0, 1, 2, seed=9)
    assert np.array_equal(
        dq.simulate_cyclostationary(small).data[0],
        dq.simulate_cyclostationary(large).data[0],
    )


def test_degenerate_modulation_equals_cyclic_path():
    spec = comb_model(64, 8.0, 2, 4, seed=5)
    unit = [spec.unit_replicate_params()] * 4
    a = dq.simulate_cyclostationary(spec)
    b = dq.simulate_modulated(spec, unit)
    assert np.array_equal(a.data, b.data)


def test_cyclic_path_requires_constant_envelopes():
    spec = comb_model(64, 8.0, 1, 2, seed=5, envelope=gaussian_envelope(64, 10.0))
    with pytest.raises(ValidationError):
        dq.simulate_cyclostationary(spec)


def test_replicate_params_length_checked():
    spec = comb_model(64, 8.0, 1, 3, seed=5)
    with pytest.raises(ValidationError):
        dq.simulate_modulated(spec, [spec.unit_replicate_params()] * 2)


def test_band_concentration_warning():
    # A 3-sample bump on a slow carrier leaks spectral energy past the line.
    spec = comb_model(256, 64.0, 1, 1, seed=5, envelope=gaussian_envelope(256, 3.0))
    with pytest.warns(ModelWarning, match="envelope energy"):
        dq.simulate_modulated(spec)


def test_state_labels_follow_mixture():
    length = 64
    ones = np.ones(length)
    comps = (dq.ComponentSpec(index=0, period=8.0, amplitude=ones),)
    spec = dq.ModelSpec(
        base=dq.BaseProcessSpec(kind="white"),
        components=comps,
        states=((0,), (0,)),
        mixture_weights=[0.0, 1.0],
        series_length=length,
        num_replicates=20,
        seed=1,
    )
    trials = dq.simulate_modulated(spec)
    assert np.all(trials.state_labels == 1)


def test_second_order_cyclic_periodicity():
    # Empirical lag-0 second moment is periodic with the cycle length.
    spec = comb_model(240, 8.0, 1, 4000, seed=12, weight=0.8)
    data = dq.simulate_cyclostationary(spec).data
    second_moment = (data**2).mean(axis=0)
    folded = second_moment.reshape(-1, 8)
    across_cycles = folded.std(axis=0) / folded.mean(axis=0)
    within_cycle = folded.mean(axis=0).std() / folded.mean()
    # variation across cycle positions is structural, across cycles is noise
    assert within_cycle > 5.0 * across_cycles.max()


def test_line_aggregation_of_double_modulation():
    # Base noise multiplied by (1 + cos + cos of the double frequency) puts
    # dual-frequency mass on the difference lines 0, +-f', +-2f'.
    length, period = 252, 6.0
    ones = np.ones(length)
    comps = (
        dq.ComponentSpec(index=0, period=period, amplitude=ones),
        dq.ComponentSpec(index=1, period=period, amplitude=ones, weight=0.5),
        dq.ComponentSpec(index=-1, period=period, amplitude=ones, weight=0.5),
        dq.ComponentSpec(index=2, period=period, amplitude=ones, weight=0.5),
        dq.ComponentSpec(index=-2, period=period, amplitude=ones, weight=0.5),
    )
    spec = dq.ModelSpec(
        base=dq.BaseProcessSpec(kind="white"), components=comps,
        states=(tuple(range(5)),), mixture_weights=[1.0],
        series_length=length, num_replicates=400, seed=21,
    )
    data = dq.simulate_cyclostationary(spec).data
    mean_pg = brute_force_mean_periodogram(data)
    n = mean_pg.shape[0]
    line_bins = int(round(length / period))
    offsets = np.arange(-(n - 1), n)
    level = np.array([np.abs(np.diagonal(mean_pg, off)).mean() for off in offsets])
    stated = [0, line_bins, -line_bins, 2 * line_bins, -2 * line_bins]
    # background: offsets at least 3 bins away from every multiple of f'
    multiples = np.arange(-n // line_bins - 1, n // line_bins + 2) * line_bins
    away = np.all(np.abs(offsets[:, None] - multiples[None, :]) > 3, axis=1)
    background = level[away].mean()
    for off in stated:
        assert level[offsets == off][0] > 10.0 * background


def test_line_concentration_within_rayleigh_bin():
    # Replicate-averaged raw periodogram of a period-8 model concentrates
    # within one fundamental bin of the +-1/8 lines.
    length = 512
    spec = comb_model(length, 8.0, 1, 200, seed=17, weight=0.8)
    data = dq.simulate_cyclostationary(spec).data
    mean_pg = brute_force_mean_periodogram(data)
    n = mean_pg.shape[0]
    line_bins = length // 8
    offsets = np.arange(5, n)  # off-diagonal, positive side
    level = np.array([np.abs(np.diagonal(mean_pg, off)).mean() for off in offsets])
    peak_offset = offsets[np.argmax(level)]
    assert abs(peak_offset - line_bins) <= 1


def test_bandwidth_grows_as_envelope_shrinks():
    # Brute-force averaged periodogram: halving the envelope width at least
    # multiplies the -3 dB width of the line cross-section by 1.5.
    length = 512

    def line_width(width):
        spec = comb_model(
            length, 16.0, 7, 150, seed=23, weight=3.0,
            envelope=gaussian_envelope(length, width),
        )
        data = dq.simulate_modulated(spec).data
        mean_pg = brute_force_mean_periodogram(data)
        center = length // 16
        offsets = np.arange(center - 14, center + 15)
        profile = np.array(
            [np.abs(np.diagonal(mean_pg, off)).mean() for off in offsets]
        )
        floor = np.abs(np.diagonal(mean_pg, center + 16)).mean()
        profile = profile - floor
        peak = profile.max()
        return np.count_nonzero(profile >= peak / np.sqrt(2.0))

    assert line_width(12.0) >= 1.5 * line_width(24.0)


def test_spectral_shape_base_covariance():
    # Simulated spectral-shape base matches its declared autocovariance.
    grid_size, length = 128, 96
    freqs = np.linspace(-0.5, 0.5, grid_size, endpoint=False)
    density = 1.0 + 0.8 * np.cos(2.0 * np.pi * freqs * 3.0)
    base = dq.BaseProcessSpec(kind="spectral-shape", params=tuple(density))
    spec = comb_model(length, 8.0, 0, 30_000, seed=33, base=base)
    data = dq.simulate_modulated(spec).data
    acvs = base.acvs(4)
    for lag in range(5):
        sample = (data[:, 20] * data[:, 20 - lag])
        se = sample.std(ddof=1) / np.sqrt(sample.size)
        assert sample.mean() == pytest.approx(acvs[lag], abs=4.0 * se)


def test_ar_base_autocorrelation():
    phi = 0.7
    base = dq.BaseProcessSpec(kind="ar-coefficients", params=(phi,))
    spec = comb_model(256, 8.0, 0, 2000, seed=8, base=base)
    data = dq.simulate_modulated(spec).data
    num = (data[:, 1:] * data[:, :-1]).mean()
    den = (data**2).mean()
    assert num / den == pytest.approx(phi, abs=0.02)


def test_drawn_replicate_params_modes():
    variation = dq.ReplicateVariation(phase="cyclic", time_shift_max=4, amplitude_factor_sd=0.2)
    spec = comb_model(64, 8.0, 2, 3, seed=7, variation=variation)
    params = dq.draw_replicate_params(spec, 1)
    spec.validate_replicate_params(params)
    assert params is not None
    again = dq.draw_replicate_params(spec, 1)
    assert params == again  # substream determinism
    other = dq.draw_replicate_params(spec, 2)
    assert params != other
    # cyclic mode: phases linear in the harmonic index
    idx = [c.index for c in spec.components]
    one = params.phase_shifts[idx.index(1)]
    two = params.phase_shifts[idx.index(2)]
    assert np.angle(np.exp(1j * (two - 2.0 * one))) == pytest.approx(0.0, abs=1e-9)

"""Ready-made demonstration model: a two-state mixture of cyclic trials.

State 0 superposes a long-period harmonic comb with constant envelopes,
giving thin coherence lines parallel to the dual-frequency diagonal.
State 1 uses a coarser comb gated by a short Gaussian burst, spreading its
lines into broad blobs.  Trials draw their state with equal probability,
and each trial's carrier cycle starts at a uniform random phase, so only
phase-insensitive cross-trial summaries see the common structure.
"""

from __future__ import annotations

from .io import model_spec_from_payload
from .models import ModelSpec

__all__ = ["two_state_payload", "two_state_spec"]


def two_state_payload(
    series_length: int = 512,
    num_replicates: int = 100,
    seed: int = 2024,
    line_period: float = 32.0,
    line_harmonics: int = 15,
    burst_period: float = 16.0,
    burst_harmonics: int = 7,
    sample_rate_hz: float = 128.0,
    burst_width: float = 8.0,
    burst_gain: float = 6.0,
) -> dict:
    """JSON-ready description of the two-state demonstration model.

    Harmonic counts must stay below half the period so no carrier exceeds
    the Nyquist frequency.
    """
    components = [
        {"index": 0, "period": line_period, "weight": 1.0, "amplitude": {"constant": 1.0}}
    ]
    for k in range(1, line_harmonics + 1):
        for sign in (1, -1):
            components.append(
                {
                    "index": sign * k,
                    "period": line_period,
                    "weight": 1.0,
                    "amplitude": {"constant": 1.0},
                }
            )
    narrow_state = list(range(len(components)))
    first_burst = len(components)
    burst = {
        "gaussian": {"center": series_length / 2.0, "width": burst_width, "scale": 1.0}
    }
    for k in range(1, burst_harmonics + 1):
        for sign in (1, -1):
            components.append(
                {
                    "index": sign * k,
                    "period": burst_period,
                    "weight": burst_gain,
                    "amplitude": burst,
                }
            )
    broad_state = [0] + list(range(first_burst, len(components)))
    return {
        "base": {"kind": "white", "params": [], "innovation_variance": 1.0},
        "components": components,
        "states": [narrow_state, broad_state],
        "mixture_weights": [0.5, 0.5],
        "series_length": series_length,
        "num_replicates": num_replicates,
        "seed": seed,
        "sample_rate_hz": sample_rate_hz,
        "replicate_variation": {
            "phase": "cyclic",
            "time_shift_max": 0,
            "amplitude_factor_sd": 0.0,
        },
    }


def two_state_spec(**kwargs) -> ModelSpec:
    """The demonstration model as a ready-to-simulate specification."""
    return model_spec_from_payload(two_state_payload(**kwargs), source="<demo>")

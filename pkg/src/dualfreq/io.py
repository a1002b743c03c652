"""File formats for models, trials, dual-frequency matrices and results.

Formats
-------
Model files are JSON.  Trials are stored either as CSV (one header row with
``sample_rate_hz,R,T`` followed by R rows of T values) or binary
(little-endian, 24-byte header: magic ``LVTRIAL1``, u32 R, u32 T, f64 rate,
then R*T row-major f64 samples).  Dual-frequency matrices are stored as CSV
of the upper triangle (``f1_hz,f2_hz,re,im``) or binary (magic ``LVDFM001``,
u32 N, u32 kind code, f64 rate, N f64 grid frequencies in cycles/sample,
then N*N row-major complex128 values).  All CSV floats are written with
repr-faithful precision so identical data round-trips byte-identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .estimation import MATRIX_KINDS, DualFrequencyMatrix, FrequencyGrid
from .models import (
    BaseProcessSpec,
    ComponentSpec,
    ModelSpec,
    ReplicateVariation,
    TrialMatrix,
)
from .population import ClusterResult, SparsityRecord, SvdResult, TrialStack
from .significance import TestConfig, ThresholdResult
from .tapers import TaperSet

__all__ = [
    "read_model_spec",
    "model_spec_from_payload",
    "write_model_spec",
    "read_trials_csv",
    "write_trials_csv",
    "read_trials_binary",
    "write_trials_binary",
    "read_labels_csv",
    "write_labels_csv",
    "read_matrix_binary",
    "write_matrix_binary",
    "read_matrix_csv",
    "write_matrix_csv",
    "write_threshold_csv",
    "read_threshold_csv",
    "write_tapers_csv",
    "write_singular_values_csv",
    "write_loadings_csv",
    "write_components_csv",
    "write_cluster_csv",
    "write_sparsity_csv",
]

TRIAL_MAGIC = b"LVTRIAL1"
MATRIX_MAGIC = b"LVDFM001"

_HEADER = struct.Struct("<8sIId")


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Model specifications (JSON)
# ---------------------------------------------------------------------------


def _amplitude_to_json(values: np.ndarray):
    if np.ptp(values) == 0.0:
        return {"constant": float(values[0])}
    return [float(v) for v in values]


def _amplitude_from_json(entry, length: int) -> np.ndarray:
    if isinstance(entry, dict):
        if "constant" in entry:
            return np.full(length, float(entry["constant"]))
        if "gaussian" in entry:
            g = entry["gaussian"]
            t = np.arange(length)
            scale = float(g.get("scale", 1.0))
            return scale * np.exp(-0.5 * ((t - float(g["center"])) / float(g["width"])) ** 2)
        raise ValidationError(f"unknown amplitude shorthand {sorted(entry)}")
    values = np.asarray(entry, dtype=float)
    if values.size != length:
        raise ValidationError(
            f"sampled amplitude has {values.size} points, expected {length}"
        )
    return values


def write_model_spec(spec: ModelSpec, path) -> None:
    payload = {
        "base": {
            "kind": spec.base.kind,
            "params": list(spec.base.params),
            "innovation_variance": spec.base.innovation_variance,
        },
        "components": [
            {
                "index": comp.index,
                "period": comp.period,
                "weight": comp.weight,
                "amplitude": _amplitude_to_json(comp.amplitude),
                **({"phase": [float(v) for v in comp.phase]} if comp.phase is not None else {}),
            }
            for comp in spec.components
        ],
        "states": [list(state) for state in spec.states],
        "mixture_weights": np.asarray(spec.mixture_weights).tolist(),
        "series_length": spec.series_length,
        "num_replicates": spec.num_replicates,
        "seed": spec.seed,
        "sample_rate_hz": spec.sample_rate_hz,
        "replicate_variation": {
            "phase": spec.replicate_variation.phase,
            "time_shift_max": spec.replicate_variation.time_shift_max,
            "amplitude_factor_sd": spec.replicate_variation.amplitude_factor_sd,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_model_spec(path) -> ModelSpec:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed model file {path}: {exc}") from exc
    return model_spec_from_payload(payload, source=str(path))


def model_spec_from_payload(payload: dict, source: str = "<payload>") -> ModelSpec:
    path = source
    try:
        length = int(payload["series_length"])
        base = BaseProcessSpec(
            kind=payload["base"]["kind"],
            params=tuple(payload["base"].get("params", ())),
            innovation_variance=float(payload["base"].get("innovation_variance", 1.0)),
        )
        components = []
        for pos, entry in enumerate(payload["components"]):
            try:
                phase = entry.get("phase")
                components.append(
                    ComponentSpec(
                        index=int(entry["index"]),
                        period=float(entry["period"]),
                        amplitude=_amplitude_from_json(entry["amplitude"], length),
                        weight=float(entry.get("weight", 1.0)),
                        phase=np.asarray(phase, dtype=float) if phase is not None else None,
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ValidationError(
                    f"malformed component {pos} in {path}: missing field {exc}"
                ) from exc
        variation = payload.get("replicate_variation", {})
        return ModelSpec(
            base=base,
            components=tuple(components),
            states=tuple(tuple(s) for s in payload["states"]),
            mixture_weights=np.asarray(payload["mixture_weights"], dtype=float),
            series_length=length,
            num_replicates=int(payload["num_replicates"]),
            seed=int(payload.get("seed", 0)),
            sample_rate_hz=float(payload.get("sample_rate_hz", 1.0)),
            replicate_variation=ReplicateVariation(
                phase=variation.get("phase", "none"),
                time_shift_max=int(variation.get("time_shift_max", 0)),
                amplitude_factor_sd=float(variation.get("amplitude_factor_sd", 0.0)),
            ),
        )
    except KeyError as exc:
        raise ValidationError(f"model file {path} is missing field {exc}") from exc


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def write_trials_csv(trials: TrialMatrix, path) -> None:
    lines = [f"{_fmt(trials.sample_rate_hz)},{trials.num_replicates},{trials.num_samples}"]
    for row in trials.data:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trials_csv(path) -> TrialMatrix:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValidationError(f"{path} is empty")
    header = text[0].split(",")
    if len(header) != 3:
        raise ValidationError(f"{path}: header must be sample_rate_hz,R,T")
    rate, r, t = float(header[0]), int(header[1]), int(header[2])
    if len(text) - 1 != r:
        raise ValidationError(f"{path}: expected {r} trial rows, found {len(text) - 1}")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    if data.shape != (r, t):
        raise ValidationError(f"{path}: trial rows do not match the declared shape")
    return TrialMatrix(data=data, sample_rate_hz=rate)


def write_trials_binary(trials: TrialMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                TRIAL_MAGIC,
                trials.num_replicates,
                trials.num_samples,
                trials.sample_rate_hz,
            )
        )
        fh.write(np.ascontiguousarray(trials.data, dtype="<f8").tobytes())


def read_trials_binary(path) -> TrialMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated trial file")
    magic, r, t, rate = _HEADER.unpack_from(raw)
    if magic != TRIAL_MAGIC:
        raise ValidationError(f"{path}: not a trial file (bad magic {magic!r})")
    expected = _HEADER.size + 8 * r * t
    if len(raw) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(r, t)
    return TrialMatrix(data=data.copy(), sample_rate_hz=rate)


def write_labels_csv(labels: Sequence[int], path) -> None:
    lines = ["trial,state"] + [f"{i},{int(s)}" for i, s in enumerate(labels)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels_csv(path) -> np.ndarray:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "trial,state":
        raise ValidationError(f"{path}: not a state-label file")
    return np.array([int(line.split(",")[1]) for line in lines[1:]], dtype=int)


# ---------------------------------------------------------------------------
# Dual-frequency matrices
# ---------------------------------------------------------------------------


def write_matrix_binary(matrix: DualFrequencyMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MATRIX_MAGIC,
                len(matrix.grid),
                MATRIX_KINDS.index(matrix.kind),
                matrix.grid.sample_rate_hz,
            )
        )
        fh.write(np.ascontiguousarray(matrix.grid.frequencies, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(matrix.values, dtype="<c16").tobytes())


def read_matrix_binary(path) -> DualFrequencyMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated matrix file")
    magic, n, kind_code, rate = _HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC:
        raise ValidationError(f"{path}: not a dual-frequency matrix file (bad magic {magic!r})")
    if kind_code >= len(MATRIX_KINDS):
        raise ValidationError(f"{path}: unknown matrix kind code {kind_code}")
    expected = _HEADER.size + 8 * n + 16 * n * n
    if len(raw) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    freqs = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=n)
    values = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size + 8 * n).reshape(n, n)
    grid = FrequencyGrid(frequencies=freqs.copy(), sample_rate_hz=rate)
    return DualFrequencyMatrix(values=values.copy(), grid=grid, kind=MATRIX_KINDS[kind_code])


def write_matrix_csv(matrix: DualFrequencyMatrix, path) -> None:
    """Upper triangle (including the diagonal) as f1_hz,f2_hz,re,im rows."""
    hz = matrix.grid.hz
    lines = [f"# kind={matrix.kind} n={len(matrix.grid)} sample_rate_hz={_fmt(matrix.grid.sample_rate_hz)}"]
    lines.append("f1_hz,f2_hz,re,im")
    n = len(matrix.grid)
    for i in range(n):
        for j in range(i, n):
            v = matrix.values[i, j]
            lines.append(f"{_fmt(hz[i])},{_fmt(hz[j])},{_fmt(v.real)},{_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> DualFrequencyMatrix:
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# kind="):
        raise ValidationError(f"{path}: not a dual-frequency matrix CSV")
    meta = dict(item.split("=") for item in lines[0][2:].split())
    kind, n, rate = meta["kind"], int(meta["n"]), float(meta["sample_rate_hz"])
    rows = [line.split(",") for line in lines[2:]]
    if len(rows) != n * (n + 1) // 2:
        raise ValidationError(f"{path}: wrong number of upper-triangle rows")
    hz = np.empty(n)
    values = np.zeros((n, n), dtype=complex)
    k = 0
    for i in range(n):
        for j in range(i, n):
            f1, f2, re, im = (float(v) for v in rows[k])
            hz[i], hz[j] = f1, f2
            values[i, j] = re + 1j * im
            values[j, i] = re - 1j * im
            k += 1
    grid = FrequencyGrid(frequencies=hz / rate, sample_rate_hz=rate)
    return DualFrequencyMatrix(values=values, grid=grid, kind=kind)


# ---------------------------------------------------------------------------
# Threshold results and analysis tables
# ---------------------------------------------------------------------------


def write_threshold_csv(result: ThresholdResult, path) -> None:
    """Tested pairs as f1_hz,f2_hz,coh,p,rejected (coh is the magnitude |tau|)."""
    hz = result.thresholded.grid.hz
    source = np.abs(result.thresholded.values)
    lines = [
        "# "
        + " ".join(
            [
                f"num_tapers={result.config.num_tapers}",
                f"taper_bandwidth={_fmt(result.config.taper_bandwidth)}",
                f"fdr_rate={_fmt(result.config.fdr_rate)}",
                f"band_low_hz={_fmt(result.config.band_hz[0])}",
                f"band_high_hz={_fmt(result.config.band_hz[1])}",
                f"subsample_half={int(result.config.subsample_half)}",
            ]
        ),
        "f1_hz,f2_hz,i,j,coh,p,rejected",
    ]
    for (i, j), p, rej in zip(result.pairs, result.pvalues, result.rejected):
        coh = source[i, j] if rej else 0.0
        lines.append(
            f"{_fmt(hz[i])},{_fmt(hz[j])},{i},{j},{_fmt(coh)},{_fmt(p)},{int(rej)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_threshold_csv(path, matrix: DualFrequencyMatrix) -> ThresholdResult:
    """Rebuild a ThresholdResult from its CSV plus the thresholded matrix."""
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise ValidationError(f"{path}: not a threshold table")
    meta = dict(item.split("=") for item in lines[0][2:].split())
    config = TestConfig(
        num_tapers=int(meta["num_tapers"]),
        taper_bandwidth=float(meta["taper_bandwidth"]),
        fdr_rate=float(meta["fdr_rate"]),
        band_hz=(float(meta["band_low_hz"]), float(meta["band_high_hz"])),
        subsample_half=bool(int(meta["subsample_half"])),
    )
    pairs, pvalues, rejected = [], [], []
    for line in lines[2:]:
        f1, f2, i, j, coh, p, rej = line.split(",")
        pairs.append((int(i), int(j)))
        pvalues.append(float(p))
        rejected.append(bool(int(rej)))
    return ThresholdResult(
        thresholded=matrix,
        pairs=np.asarray(pairs, dtype=int),
        pvalues=np.asarray(pvalues),
        rejected=np.asarray(rejected, dtype=bool),
        config=config,
    )


def write_tapers_csv(tapers: TaperSet, path) -> None:
    """One column per taper; first row holds the concentration eigenvalues."""
    lines = [",".join(f"taper{k}" for k in range(tapers.num_tapers))]
    lines.append(",".join(_fmt(v) for v in tapers.eigenvalues))
    for t in range(tapers.length):
        lines.append(",".join(_fmt(tapers.tapers[k, t]) for k in range(tapers.num_tapers)))
    Path(path).write_text("\n".join(lines) + "\n")


def write_singular_values_csv(svd: SvdResult, path) -> None:
    lines = ["component,singular_value"]
    lines += [f"{k},{_fmt(v)}" for k, v in enumerate(svd.singular_values)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_loadings_csv(svd: SvdResult, path) -> None:
    width = svd.rank_kept
    lines = ["trial," + ",".join(f"loading{k + 1}" for k in range(width))]
    for r, row in enumerate(svd.loadings):
        lines.append(f"{r}," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_components_csv(svd: SvdResult, stack: TrialStack, grid: FrequencyGrid, path) -> None:
    hz = grid.hz
    width = svd.rank_kept
    lines = ["i,j,f1_hz,f2_hz," + ",".join(f"component{k + 1}" for k in range(width))]
    for n, (i, j) in enumerate(stack.pair_index):
        values = ",".join(_fmt(v) for v in svd.components[n])
        lines.append(f"{i},{j},{_fmt(hz[i])},{_fmt(hz[j])},{values}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_cluster_csv(result: ClusterResult, path, true_labels: Optional[np.ndarray] = None) -> None:
    header = "trial,label" + (",true_state" if true_labels is not None else "")
    lines = [header]
    for r, label in enumerate(result.labels):
        row = f"{r},{int(label)}"
        if true_labels is not None:
            row += f",{int(true_labels[r])}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def write_sparsity_csv(records: List[SparsityRecord], path) -> None:
    width = max((len(rec.loadings) for rec in records), default=0)
    lines = ["trial,fraction_nonzero," + ",".join(f"loading{k + 1}" for k in range(width))]
    for rec in records:
        loads = list(rec.loadings) + [0.0] * (width - len(rec.loadings))
        lines.append(
            f"{rec.trial_id},{_fmt(rec.fraction_nonzero)},"
            + ",".join(_fmt(v) for v in loads)
        )
    Path(path).write_text("\n".join(lines) + "\n")

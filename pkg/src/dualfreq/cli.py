"""Batch command line for the simulation and analysis pipeline.

Stages are independent commands wired through files::

    dualfreq simulate  --model model.json --outdir run/sim
    dualfreq estimate  --trials run/sim/trials.bin --outdir run/est
    dualfreq threshold --estimates run/est --outdir run/thr
    dualfreq decompose --thresholds run/thr --outdir run/dec
    dualfreq cluster   --decomposition run/dec --outdir run/clu
    dualfreq validate  --outdir run/val
    dualfreq render    --input run/est --outdir run/fig

Every command accepts ``--config FILE`` (JSON) supplying defaults that
individual flags override.  Exit codes: 0 ok, 2 validation error, 3 I/O
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as dfio
from .errors import DualFreqError, NumericalError, ValidationError
from .estimation import DualFrequencyMatrix, FrequencyGrid, coherency, multitaper_spectrum
from .models import ModelSpec
from .moments import null_coherence_distribution_check, periodogram_moments
from .population import (
    batch_magnitude_means,
    build_stack,
    kmeans_loadings,
    sparsity_metrics,
    svd_stack,
)
from .render import render_labels_strip, render_loadings_scatter, render_matrix, render_scree
from .significance import TestConfig, fdr_threshold
from .simulate import simulate_modulated
from .tapers import dpss

__all__ = ["main"]

_CONFIG_KEYS = {
    "nw": float,
    "tapers": int,
    "band": lambda v: [float(v[0]), float(v[1])],
    "fdr_rate": float,
    "batch_size": int,
    "grid_decimate": int,
    "max_grid": int,
    "k_keep": int,
    "clusters": int,
    "dims": int,
    "seed": int,
    "threads": int,
    "no_subsample": bool,
    "replicates": int,
}


def _write_run_log(outdir: Path, payload: dict) -> None:
    (outdir / "run_log.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_run_log(directory: Path, producer: str) -> dict:
    path = directory / "run_log.json"
    if not path.exists():
        raise FileNotFoundError(
            f"no artifacts found in {directory}; run `dualfreq {producer}` first"
        )
    return json.loads(path.read_text())


def _load_trials(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"trial file {path} not found; run `dualfreq simulate` first")
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == dfio.TRIAL_MAGIC:
        return dfio.read_trials_binary(path)
    return dfio.read_trials_csv(path)


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = dfio.read_model_spec(args.model)
    if args.seed is not None:
        spec = ModelSpec(
            base=spec.base,
            components=spec.components,
            states=spec.states,
            mixture_weights=spec.mixture_weights,
            series_length=spec.series_length,
            num_replicates=spec.num_replicates,
            seed=args.seed,
            sample_rate_hz=spec.sample_rate_hz,
            replicate_variation=spec.replicate_variation,
        )
    out = _outdir(args)
    trials = simulate_modulated(spec)
    dfio.write_trials_csv(trials, out / "trials.csv")
    dfio.write_trials_binary(trials, out / "trials.bin")
    dfio.write_labels_csv(trials.state_labels, out / "state_labels.csv")
    _write_run_log(
        out,
        {
            "command": "simulate",
            "model": str(args.model),
            "seed": spec.seed,
            "num_replicates": spec.num_replicates,
            "series_length": spec.series_length,
            "sample_rate_hz": spec.sample_rate_hz,
        },
    )
    print(f"simulate: wrote {spec.num_replicates} trials of length {spec.series_length} to {out}")
    return 0


def _estimate_one(trial_row, tapers, grid, max_grid):
    spectrum = multitaper_spectrum(trial_row, tapers, grid, max_grid_size=max_grid)
    return coherency(spectrum)


def cmd_estimate(args) -> int:
    trials = _load_trials(Path(args.trials))
    out = _outdir(args)
    if args.tapers == 1:
        warnings.warn(
            "estimating with a single taper: the coherency is identically one "
            "and downstream thresholding is degenerate",
            UserWarning,
            stacklevel=2,
        )
    tapers = dpss(trials.num_samples, args.nw, args.tapers)
    grid = FrequencyGrid.fundamental(trials.num_samples, trials.sample_rate_hz)
    grid = grid.restrict(tuple(args.band))
    if args.grid_decimate > 1:
        grid = grid.decimate(args.grid_decimate)

    rows = list(trials.data)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            coherencies = list(
                pool.map(lambda row: _estimate_one(row, tapers, grid, args.max_grid), rows)
            )
    else:
        coherencies = [_estimate_one(row, tapers, grid, args.max_grid) for row in rows]

    for r, matrix in enumerate(coherencies):
        dfio.write_matrix_binary(matrix, out / f"coherency_{r:04d}.dfm")
    batches = batch_magnitude_means(coherencies, args.batch_size)
    for b, matrix in enumerate(batches):
        dfio.write_matrix_binary(matrix, out / f"batch_mean_{b:02d}.dfm")
        dfio.write_matrix_csv(matrix, out / f"batch_mean_{b:02d}.csv")
    _write_run_log(
        out,
        {
            "command": "estimate",
            "trials": str(args.trials),
            "num_replicates": trials.num_replicates,
            "series_length": trials.num_samples,
            "sample_rate_hz": trials.sample_rate_hz,
            "nw": args.nw,
            "num_tapers": args.tapers,
            "band_hz": list(args.band),
            "grid_decimate": args.grid_decimate,
            "grid_size": len(grid),
            "batch_size": args.batch_size,
            "num_batches": len(batches),
        },
    )
    print(
        f"estimate: {trials.num_replicates} coherency matrices on a {len(grid)}-point "
        f"grid, {len(batches)} batch means, written to {out}"
    )
    return 0


def cmd_threshold(args) -> int:
    est_dir = Path(args.estimates)
    log = _read_run_log(est_dir, "estimate")
    out = _outdir(args)
    config = TestConfig(
        num_tapers=int(log["num_tapers"]),
        taper_bandwidth=2.0 * float(log["nw"]) / int(log["series_length"]),
        fdr_rate=args.fdr_rate,
        band_hz=tuple(args.band),
        subsample_half=not args.no_subsample,
    )
    files = sorted(est_dir.glob("coherency_*.dfm"))
    if not files:
        raise FileNotFoundError(
            f"no coherency matrices in {est_dir}; run `dualfreq estimate` first"
        )
    total_rejected = 0
    for r, path in enumerate(files):
        matrix = dfio.read_matrix_binary(path)
        result = fdr_threshold(matrix, config)
        total_rejected += result.num_rejected
        dfio.write_matrix_binary(result.thresholded, out / f"thresholded_{r:04d}.dfm")
        dfio.write_threshold_csv(result, out / f"tests_{r:04d}.csv")
    _write_run_log(
        out,
        {
            "command": "threshold",
            "estimates": str(est_dir),
            "num_trials": len(files),
            "fdr_rate": args.fdr_rate,
            "band_hz": list(args.band),
            "subsample_half": not args.no_subsample,
            "num_tested": result.num_tested,
            "total_rejected": total_rejected,
        },
    )
    print(
        f"threshold: {len(files)} trials, {result.num_tested} tested pairs each, "
        f"{total_rejected} total rejections, written to {out}"
    )
    return 0


def cmd_decompose(args) -> int:
    thr_dir = Path(args.thresholds)
    _read_run_log(thr_dir, "threshold")
    out = _outdir(args)
    matrix_files = sorted(thr_dir.glob("thresholded_*.dfm"))
    table_files = sorted(thr_dir.glob("tests_*.csv"))
    if not matrix_files or len(matrix_files) != len(table_files):
        raise FileNotFoundError(
            f"incomplete threshold artifacts in {thr_dir}; run `dualfreq threshold` first"
        )
    results = []
    for mpath, tpath in zip(matrix_files, table_files):
        matrix = dfio.read_matrix_binary(mpath)
        results.append(dfio.read_threshold_csv(tpath, matrix))
    stack = build_stack(results)
    k_keep = min(args.k_keep, stack.num_trials, stack.num_pairs)
    svd = svd_stack(stack, k_keep)
    grid = results[0].thresholded.grid
    dfio.write_singular_values_csv(svd, out / "singular_values.csv")
    dfio.write_loadings_csv(svd, out / "loadings.csv")
    dfio.write_components_csv(svd, stack, grid, out / "components.csv")
    dfio.write_sparsity_csv(sparsity_metrics(stack, svd), out / "sparsity.csv")
    n = len(grid)
    for k in range(k_keep):
        values = np.zeros((n, n), dtype=complex)
        idx = stack.pair_index
        values[idx[:, 0], idx[:, 1]] = svd.components[:, k]
        values[idx[:, 1], idx[:, 0]] = svd.components[:, k]
        component = DualFrequencyMatrix(values=values, grid=grid, kind="spectrum")
        dfio.write_matrix_binary(component, out / f"component_{k + 1:02d}.dfm")
    _write_run_log(
        out,
        {
            "command": "decompose",
            "thresholds": str(thr_dir),
            "num_trials": stack.num_trials,
            "num_pairs": stack.num_pairs,
            "k_keep": k_keep,
            "singular_values": [float(v) for v in svd.singular_values],
        },
    )
    print(
        f"decompose: stacked {stack.num_trials} trials x {stack.num_pairs} pairs, "
        f"kept {k_keep} components, written to {out}"
    )
    return 0


def cmd_cluster(args) -> int:
    dec_dir = Path(args.decomposition)
    _read_run_log(dec_dir, "decompose")
    out = _outdir(args)
    svd = dfio_read_svd(dec_dir)
    clusters = kmeans_loadings(svd, k=args.clusters, dims=args.dims, seed=args.seed)
    true_labels = None
    if args.labels:
        true_labels = dfio.read_labels_csv(args.labels)
        if true_labels.size != clusters.labels.size:
            raise ValidationError(
                "state-label file does not match the number of clustered trials"
            )
    dfio.write_cluster_csv(clusters, out / "labels.csv", true_labels)
    centroid_lines = ["cluster," + ",".join(f"dim{d + 1}" for d in range(clusters.dims))]
    for c, row in enumerate(clusters.centroids):
        centroid_lines.append(f"{c}," + ",".join(repr(float(v)) for v in row))
    (out / "centroids.csv").write_text("\n".join(centroid_lines) + "\n")
    payload = {
        "command": "cluster",
        "decomposition": str(dec_dir),
        "clusters": args.clusters,
        "dims": args.dims,
        "seed": args.seed,
        "inertia": clusters.inertia,
    }
    message = (
        f"cluster: {clusters.labels.size} trials into {args.clusters} groups "
        f"(inertia {clusters.inertia:.6g})"
    )
    if true_labels is not None:
        accuracy = _label_accuracy(clusters.labels, true_labels)
        payload["accuracy_vs_labels"] = accuracy
        message += f", accuracy vs ground truth {100 * accuracy:.1f}%"
    _write_run_log(out, payload)
    print(message + f", written to {out}")
    return 0


def _label_accuracy(labels: np.ndarray, truth: np.ndarray) -> float:
    """Best accuracy over permutations of cluster labels (greedy over k <= 8)."""
    from itertools import permutations

    values = np.unique(labels)
    truths = np.unique(truth)
    best = 0.0
    for perm in permutations(truths.tolist() if truths.size >= values.size else
                             np.arange(values.size).tolist(), values.size):
        mapped = np.empty_like(labels)
        for v, p in zip(values, perm):
            mapped[labels == v] = p
        best = max(best, float(np.mean(mapped == truth)))
    return best


def dfio_read_svd(dec_dir: Path):
    """Rebuild an SvdResult from the decompose stage's CSV artifacts."""
    from .population import SvdResult

    sv_lines = (dec_dir / "singular_values.csv").read_text().strip().splitlines()[1:]
    singular_values = np.array([float(line.split(",")[1]) for line in sv_lines])
    ld_lines = (dec_dir / "loadings.csv").read_text().strip().splitlines()[1:]
    loadings = np.array([[float(v) for v in line.split(",")[1:]] for line in ld_lines])
    cp_lines = (dec_dir / "components.csv").read_text().strip().splitlines()[1:]
    components = np.array([[float(v) for v in line.split(",")[4:]] for line in cp_lines])
    return SvdResult(
        singular_values=singular_values, loadings=loadings, components=components
    )


def cmd_validate(args) -> int:
    out = _outdir(args)
    rng = np.random.default_rng(args.seed)
    report = []
    ok = True

    # Exponential-null self test of the KS machinery.
    ks_self = null_coherence_distribution_check(rng.exponential(size=2000))
    ok &= ks_self.passed
    report.append(
        f"{'PASS' if ks_self.passed else 'FAIL'}: KS self-test on exponential draws "
        f"(stat {ks_self.statistic:.4f}, p {ks_self.pvalue:.4f})"
    )

    # Moment formulas against Monte Carlo with proper unit-variance pairs.
    n = args.replicates * 40
    k_tapers = 7
    z1 = (rng.standard_normal((n, k_tapers)) + 1j * rng.standard_normal((n, k_tapers))) / np.sqrt(2)
    z2 = (rng.standard_normal((n, k_tapers)) + 1j * rng.standard_normal((n, k_tapers))) / np.sqrt(2)
    averaged = np.mean(z1 * np.conj(z2), axis=1)
    predicted = periodogram_moments(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, k_tapers)
    mean_se = np.sqrt(predicted.variance / n)
    mean_ok = abs(averaged.mean() - predicted.mean) <= 4.0 * mean_se
    var_mc = np.mean(np.abs(averaged - averaged.mean()) ** 2)
    var_ok = abs(var_mc - predicted.variance) <= 5.0 * predicted.variance / np.sqrt(n)
    ok &= bool(mean_ok and var_ok)
    report.append(
        f"{'PASS' if mean_ok and var_ok else 'FAIL'}: periodogram moment formulas vs "
        f"{n} Monte Carlo draws (mean dev {abs(averaged.mean()):.2e}, "
        f"variance {var_mc:.4f} vs {predicted.variance:.4f})"
    )

    # Scaled squared coherence of simulated white noise against the null.
    length, reps = 256, args.replicates
    tapers = dpss(length, 4.0, k_tapers)
    freq_pair = (0.35, 0.1)
    t = np.arange(length)
    carriers = np.exp(-2j * np.pi * np.outer(t, np.asarray(freq_pair)))
    draws = np.empty(reps)
    trials = rng.standard_normal((reps, length))
    for r in range(reps):
        coeffs = (tapers.tapers * trials[r]) @ carriers
        cross = np.mean(coeffs[:, 0] * np.conj(coeffs[:, 1]))
        d1 = np.mean(np.abs(coeffs[:, 0]) ** 2)
        d2 = np.mean(np.abs(coeffs[:, 1]) ** 2)
        draws[r] = k_tapers * np.abs(cross) ** 2 / (d1 * d2)
    ks_pipe = null_coherence_distribution_check(draws)
    ok &= ks_pipe.passed
    report.append(
        f"{'PASS' if ks_pipe.passed else 'FAIL'}: white-noise pipeline coherence vs "
        f"chi-squared null at {reps} trials (stat {ks_pipe.statistic:.4f}, "
        f"p {ks_pipe.pvalue:.4f})"
    )

    # Taper-count scaling of the moment formulas is exact.
    single = periodogram_moments(2.0, 3.0, 0.5 + 0.5j, 0.1, 0.2j, 0.3, 1)
    scaled = periodogram_moments(2.0, 3.0, 0.5 + 0.5j, 0.1, 0.2j, 0.3, 8)
    scaling_ok = (
        single.variance == 8.0 * scaled.variance
        and single.relation == 8.0 * scaled.relation
        and single.mean == scaled.mean
    )
    ok &= scaling_ok
    report.append(
        f"{'PASS' if scaling_ok else 'FAIL'}: moment scaling in the taper count is exact"
    )

    text = "\n".join(report) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return 0 if ok else 4


def cmd_render(args) -> int:
    source = Path(args.input)
    out = _outdir(args)
    if source.is_file():
        matrix_files = [source] if source.suffix == ".dfm" else []
        base_dir = source.parent
    elif source.is_dir():
        matrix_files = sorted(source.glob("*.dfm"))
        base_dir = source
    else:
        raise FileNotFoundError(f"render input {source} does not exist")
    rendered = 0
    for path in matrix_files:
        matrix = dfio.read_matrix_binary(path)
        render_matrix(matrix, out / f"{path.stem}.png", title=path.stem)
        rendered += 1
    if (base_dir / "singular_values.csv").exists() and (base_dir / "loadings.csv").exists():
        svd = dfio_read_svd(base_dir)
        render_scree(svd, out / "scree.png")
        render_loadings_scatter(svd, out / "loadings_scatter.png")
        rendered += 2
    labels_file = base_dir / "labels.csv"
    if labels_file.exists():
        lines = labels_file.read_text().strip().splitlines()[1:]
        labels = np.array([int(line.split(",")[1]) for line in lines])
        render_labels_strip(labels, out / "labels_strip.png")
        rendered += 1
    if rendered == 0:
        raise ValidationError(f"nothing renderable found at {source}")
    print(f"render: wrote {rendered} figures (PNG + CSV) to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _apply_config(argv):
    """Pull --config FILE out of argv and return (defaults dict, remaining argv)."""
    argv = list(argv)
    defaults = {}
    if "--config" in argv:
        at = argv.index("--config")
        try:
            path = argv[at + 1]
        except IndexError:
            raise ValidationError("--config requires a file argument") from None
        del argv[at : at + 2]
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config file {path}: {exc}") from exc
        for key, value in raw.items():
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"unknown config key {key!r}")
            defaults[key] = _CONFIG_KEYS[key](value)
    return defaults, argv


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualfreq",
        description="simulate, estimate, threshold and decompose dual-frequency coherence",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    d = defaults or {}

    p = sub.add_parser("simulate", help="simulate trials from a model file")
    p.add_argument("--model", required=True, help="model specification (JSON)")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=d.get("seed"), help="override the model seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="per-trial coherency matrices and batch means")
    p.add_argument("--trials", required=True, help="trial file (.bin or .csv)")
    p.add_argument("--outdir", required=True)
    p.add_argument("--nw", type=float, default=d.get("nw", 4.0), help="time-bandwidth product")
    p.add_argument("--tapers", type=int, default=d.get("tapers", 7), help="number of tapers")
    p.add_argument(
        "--band", type=float, nargs=2, default=d.get("band", [-30.0, 30.0]),
        metavar=("LOW", "HIGH"), help="analysis band in Hz (inclusive)",
    )
    p.add_argument("--batch-size", type=int, default=d.get("batch_size", 20))
    p.add_argument("--grid-decimate", type=int, default=d.get("grid_decimate", 1))
    p.add_argument("--max-grid", type=int, default=d.get("max_grid", 2048))
    p.add_argument("--threads", type=int, default=d.get("threads", 1))
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("threshold", help="FDR-threshold the per-trial coherencies")
    p.add_argument("--estimates", required=True, help="directory written by estimate")
    p.add_argument("--outdir", required=True)
    p.add_argument("--fdr-rate", type=float, default=d.get("fdr_rate", 0.05))
    p.add_argument(
        "--band", type=float, nargs=2, default=d.get("band", [-30.0, 30.0]),
        metavar=("LOW", "HIGH"),
    )
    p.add_argument("--no-subsample", action="store_true", default=d.get("no_subsample", False))
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("decompose", help="stack thresholded trials and decompose")
    p.add_argument("--thresholds", required=True, help="directory written by threshold")
    p.add_argument("--outdir", required=True)
    p.add_argument("--k-keep", type=int, default=d.get("k_keep", 4))
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("cluster", help="k-means on the leading trial loadings")
    p.add_argument("--decomposition", required=True, help="directory written by decompose")
    p.add_argument("--outdir", required=True)
    p.add_argument("--clusters", type=int, default=d.get("clusters", 2))
    p.add_argument("--dims", type=int, default=d.get("dims", 2))
    p.add_argument("--seed", type=int, default=d.get("seed", 0))
    p.add_argument("--labels", default=None, help="ground-truth state labels CSV")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("validate", help="run the analytic-moment and null-distribution checks")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=d.get("seed", 0))
    p.add_argument("--replicates", type=int, default=d.get("replicates", 500))
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="figures for matrices and decomposition artifacts")
    p.add_argument("--input", required=True, help=".dfm file or artifact directory")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults, argv = _apply_config(argv)
        parser = build_parser(defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except DualFreqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

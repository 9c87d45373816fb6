"""Experiment harness: benchmark protocols behind a small CLI.

Subcommands
    synth-bench   multi-seed benchmark on the complex-exponential stream;
                  per-seed trace files plus a checkpoint summary.
    monte-carlo   repeated runs with fresh random starts and fresh data,
                  shared within a run across algorithms; per-run final
                  errors plus quartile summaries.
    fit-series    stream a CSV time series through RBF-AR(X) estimators;
                  per-step cumulative fit error plus holdout accuracy.
    compare       one shared stream and start, all algorithms, one trace.

Every output CSV starts with a ``# config: {...}`` comment line carrying
the fully resolved configuration (master seed included), so artifacts are
self-describing. Reruns with the same configuration are byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    DEFAULT_INIT_RANGES,
    InitRanges,
    SynthSpec,
    gen_complex_exponential,
    load_series,
    ozone_transform,
    sample_initial_values,
    sample_rbf_initial,
)
from .errors import ConfigError, MetricDomainError, SepidentError
from .metrics import prediction_accuracy
from .models import (
    ComplexExponential3,
    ParameterState,
    RbfArx,
    RbfArxSpec,
    SeriesRecord,
    build_regressors,
)
from .recursive import ALGORITHMS, EstimatorConfig, run_stream

OUT_DIR_ENV = "SEPIDENT_OUT_DIR"
TRACE_HEADER = ("t", "algorithm", "residual", "rel_error", "cum_fit_error")
CHECKPOINTS = (100, 200, 500, 1000)
EXPERIMENT_KINDS = ("synth-bench", "monte-carlo", "fit-series", "compare")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment settings (config file merged with flags)."""

    kind: str
    out_dir: str
    algorithms: tuple[str, ...] = ALGORITHMS
    master_seed: int = 1
    # estimator knobs (per_algorithm entries override per algorithm)
    s0: float = 1.0
    k0: float = 100.0
    window_p: int = 10
    learning_rate: float = 0.01
    per_algorithm: dict = field(default_factory=dict)
    # synthetic-benchmark protocol
    noise_std: float = 0.2
    samples: int = 1000
    seeds: int = 20
    runs: int = 300
    init_ranges: InitRanges = DEFAULT_INIT_RANGES
    workers: int = 1
    # series protocol
    series_path: str | None = None
    series_schema: dict | None = None
    transform: str | None = None
    split: int | None = None
    rbf: tuple[int, ...] | None = None  # (p, q, m, d[, input_dim[, dl]])
    width_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {alg!r}; expected one of {ALGORITHMS}")
        if self.kind == "fit-series":
            if not self.series_path:
                raise ConfigError("fit-series requires a series path")
            if self.split is None:
                raise ConfigError("fit-series requires a train/holdout split index")
            if self.rbf is None or not 4 <= len(self.rbf) <= 6:
                raise ConfigError("fit-series requires an RBF-AR(X) structure p,q,m,d[,input_dim[,dl]]")

    def estimator_for(self, algorithm: str) -> EstimatorConfig:
        base = dict(
            algorithm=algorithm,
            s0=self.s0,
            k0=self.k0,
            window_p=self.window_p,
            learning_rate=self.learning_rate,
        )
        base.update(self.per_algorithm.get(algorithm, {}))
        return EstimatorConfig(**base)

    def to_json(self) -> str:
        blob = asdict(self)
        return json.dumps(blob, sort_keys=True, default=str)


def _write_rows(path: Path, config: ExperimentConfig, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config: {config.to_json()}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _trace_rows(traces_by_alg: dict[str, list]) -> list[tuple]:
    rows = []
    for alg, traces in traces_by_alg.items():
        cum = 0.0
        for trace in traces:
            r = trace.residual_before
            cum += r * r if np.isfinite(r) else 0.0
            rel = trace.rel_error if trace.rel_error is not None else float("nan")
            rows.append((trace.t, alg, float(r), float(rel), cum / trace.t))
    return rows


def _final_error(traces) -> float:
    rel = traces[-1].rel_error
    return float(rel) if rel is not None and np.isfinite(rel) else float("inf")


def _stream_seed(master: int, run: int) -> tuple[int, int, int]:
    return (int(master), 101, int(run))


def _init_seed(master: int, run: int) -> tuple[int, int, int]:
    return (int(master), 202, int(run))


def _bench_one_run(config: ExperimentConfig, run: int) -> dict[str, list]:
    """Shared protocol: one data stream and one random start, all algorithms."""
    model = ComplexExponential3()
    spec = SynthSpec(
        noise_std=config.noise_std, sample_count=config.samples, seed=_stream_seed(config.master_seed, run)
    )
    observations = gen_complex_exponential(spec)
    initial = sample_initial_values(config.init_ranges, _init_seed(config.master_seed, run))
    truth = ParameterState(np.asarray(spec.true_a), np.asarray(spec.true_c))
    return {
        alg: run_stream(model, config.estimator_for(alg), observations, initial, true_params=truth)
        for alg in config.algorithms
    }


def run_synth_bench(config: ExperimentConfig) -> dict[str, Path]:
    """Multi-seed benchmark; one trace file per seed plus a checkpoint summary."""
    out = Path(config.out_dir)
    written: dict[str, Path] = {}
    summary_rows = []
    for run in range(config.seeds):
        traces_by_alg = _bench_one_run(config, run)
        trace_path = out / f"trace-seed{run:03d}.csv"
        _write_rows(trace_path, config, TRACE_HEADER, _trace_rows(traces_by_alg))
        written[f"trace-seed{run:03d}"] = trace_path
        for alg, traces in traces_by_alg.items():
            for t in CHECKPOINTS:
                if t <= len(traces):
                    trace = traces[t - 1]
                    th = trace.theta_after
                    summary_rows.append((alg, run, t, *th.c, *th.a, trace.rel_error))
    summary_path = out / "summary.csv"
    header = ("algorithm", "seed", "t", "c1", "c2", "c3", "a1", "a2", "a3", "a4", "rel_error")
    _write_rows(summary_path, config, header, summary_rows)
    written["summary"] = summary_path
    return written


def _mc_task(args) -> tuple[int, dict[str, float]]:
    config, run = args
    traces_by_alg = _bench_one_run(config, run)
    return run, {alg: _final_error(traces) for alg, traces in traces_by_alg.items()}


def run_monte_carlo(config: ExperimentConfig) -> dict[str, Path]:
    """Repeated-run robustness protocol; per-run finals plus quartile summary.

    Runs execute concurrently when workers > 1; results are keyed and sorted
    by run index, so the output is identical whatever the pool size. A
    diverged run records an infinite error and the protocol continues.
    """
    out = Path(config.out_dir)
    tasks = [(config, run) for run in range(config.runs)]
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = dict(pool.map(_mc_task, tasks))
    else:
        results = dict(map(_mc_task, tasks))
    run_rows = [
        (run, alg, results[run][alg]) for run in sorted(results) for alg in config.algorithms
    ]
    _write_rows(out / "runs.csv", config, ("run", "algorithm", "final_error"), run_rows)
    summary_rows = []
    for alg in config.algorithms:
        finals = np.array([results[run][alg] for run in sorted(results)])
        finite = finals[np.isfinite(finals)]
        q1, med, q3 = (
            (np.percentile(finite, (25, 50, 75))) if finite.size else (np.inf, np.inf, np.inf)
        )
        summary_rows.append(
            (
                alg,
                finals.size,
                float(finite.min()) if finite.size else float("inf"),
                float(q1),
                float(med),
                float(q3),
                float(finite.max()) if finite.size else float("inf"),
                float(finite.mean()) if finite.size else float("inf"),
                float(finite.std()) if finite.size else float("inf"),
                int(finals.size - finite.size),
            )
        )
    header = ("algorithm", "count", "min", "q1", "median", "q3", "max", "mean", "std", "diverged")
    _write_rows(out / "summary.csv", config, header, summary_rows)
    return {"runs": out / "runs.csv", "summary": out / "summary.csv"}


def run_fit_series(config: ExperimentConfig) -> dict[str, Path]:
    """Stream a series through RBF-AR(X) estimators; trace plus holdout report."""
    out = Path(config.out_dir)
    records = load_series(config.series_path, config.series_schema)
    if config.transform == "ozone":
        transformed = ozone_transform([r.y for r in records])
        records = [SeriesRecord(r.t, float(v), r.u) for r, v in zip(records, transformed)]
    elif config.transform not in (None, "", "none"):
        raise ConfigError(f"unknown transform {config.transform!r}")
    spec = RbfArxSpec(*config.rbf)
    model = RbfArx(spec)
    train, holdout = build_regressors(records, spec, config.split)
    if not train:
        raise ConfigError("empty training split")
    if not holdout:
        raise ConfigError("empty holdout split")
    initial = sample_rbf_initial(
        model, [o.y for o in train], _init_seed(config.master_seed, 0), config.width_range
    )
    traces_by_alg = {}
    holdout_rows = []
    for alg in config.algorithms:
        traces = run_stream(model, config.estimator_for(alg), train, initial)
        traces_by_alg[alg] = traces
        final_state = ParameterState(traces[-1].theta_after.a, traces[-1].theta_after.c)
        try:
            acc = prediction_accuracy(model, final_state, holdout)
        except MetricDomainError:
            acc = float("inf")
        holdout_rows.append((alg, acc))
    _write_rows(out / "trace.csv", config, TRACE_HEADER, _trace_rows(traces_by_alg))
    _write_rows(out / "holdout.csv", config, ("algorithm", "prediction_accuracy"), holdout_rows)
    return {"trace": out / "trace.csv", "holdout": out / "holdout.csv"}


def run_compare(config: ExperimentConfig) -> dict[str, Path]:
    """Single shared stream and start, all algorithms, one trace file."""
    out = Path(config.out_dir)
    traces_by_alg = _bench_one_run(config, 0)
    _write_rows(out / "trace.csv", config, TRACE_HEADER, _trace_rows(traces_by_alg))
    summary_rows = [(alg, _final_error(traces)) for alg, traces in traces_by_alg.items()]
    _write_rows(out / "summary.csv", config, ("algorithm", "final_rel_error"), summary_rows)
    return {"trace": out / "trace.csv", "summary": out / "summary.csv"}


RUNNERS = {
    "synth-bench": run_synth_bench,
    "monte-carlo": run_monte_carlo,
    "fit-series": run_fit_series,
    "compare": run_compare,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--algorithms", help="comma-separated subset of " + ",".join(ALGORITHMS))
    parser.add_argument("--master-seed", type=int, dest="master_seed")
    parser.add_argument("--out", dest="out_dir", help=f"output directory (default ${OUT_DIR_ENV} or ./sepident-out)")
    parser.add_argument("--s0", type=float, help="initial full-covariance scale")
    parser.add_argument("--k0", type=float, help="initial linear-covariance scale")
    parser.add_argument("--window", type=int, dest="window_p", help="RVP sliding-window length")
    parser.add_argument("--lr", type=float, dest="learning_rate", help="SGD learning rate")
    parser.add_argument("--noise", type=float, dest="noise_std")
    parser.add_argument("--samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sepident", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    p = sub.add_parser("synth-bench", help="multi-seed synthetic benchmark")
    _add_common(p)
    p.add_argument("--seeds", type=int, help="number of seeds (default 20)")
    p = sub.add_parser("monte-carlo", help="repeated-run robustness protocol")
    _add_common(p)
    p.add_argument("--runs", type=int, help="number of runs (default 300)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p = sub.add_parser("fit-series", help="fit a CSV time series with RBF-AR(X) models")
    _add_common(p)
    p.add_argument("--series", dest="series_path", help="input CSV path (t,y[,u1,...])")
    p.add_argument("--split", type=int, help="first holdout time index")
    p.add_argument("--rbf", help="orders p,q,m,d[,input_dim[,dl]]")
    p.add_argument("--transform", choices=["ozone", "none"], help="target transform")
    p = sub.add_parser("compare", help="one stream, shared start, all algorithms")
    _add_common(p)
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for key in (
        "algorithms",
        "master_seed",
        "out_dir",
        "s0",
        "k0",
        "window_p",
        "learning_rate",
        "noise_std",
        "samples",
        "seeds",
        "runs",
        "workers",
        "series_path",
        "split",
        "rbf",
        "transform",
    ):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["kind"] = args.kind
    if isinstance(values.get("algorithms"), str):
        values["algorithms"] = tuple(s.strip() for s in values["algorithms"].split(",") if s.strip())
    elif isinstance(values.get("algorithms"), list):
        values["algorithms"] = tuple(values["algorithms"])
    if isinstance(values.get("rbf"), str):
        values["rbf"] = tuple(int(s) for s in values["rbf"].split(","))
    elif isinstance(values.get("rbf"), list):
        values["rbf"] = tuple(values["rbf"])
    if isinstance(values.get("init_ranges"), dict):
        raw = values["init_ranges"]
        values["init_ranges"] = InitRanges(
            a=tuple(tuple(pair) for pair in raw["a"]), c=tuple(tuple(pair) for pair in raw["c"])
        )
    if isinstance(values.get("width_range"), list):
        values["width_range"] = tuple(values["width_range"])
    values.setdefault("out_dir", os.environ.get(OUT_DIR_ENV) or "sepident-out")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        written = RUNNERS[config.kind](config)
    except (SepidentError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"sepident: error: {exc}", file=sys.stderr)
        return 2
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

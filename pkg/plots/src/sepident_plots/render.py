"""Render benchmark CSVs into convergence curves or error boxplots.

Consumes the CSV schemas the `sepident` CLI writes (leading `# ...`
comment lines are skipped):

- traces:      t,algorithm,residual,rel_error,cum_fit_error
- run finals:  run,algorithm,final_error
- summaries:   algorithm,count,min,q1,median,q3,max,...

Convergence plots draw one series per algorithm (per file when several
files carry the same algorithm) with a log-scaled error axis by default;
boxplots draw one box per algorithm, either from raw per-run finals or
from precomputed quartiles. Inputs are never modified; an existing output
file is only overwritten with the explicit force flag.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

TRACE_HEADER = ("t", "algorithm", "residual", "rel_error", "cum_fit_error")
RUNS_HEADER = ("run", "algorithm", "final_error")
SUMMARY_HEADER_PREFIX = ("algorithm", "count", "min", "q1", "median", "q3", "max")
KINDS = ("convergence", "boxplot")


class PlotInputError(ValueError):
    """A CSV input is missing, malformed, or selects nothing to draw."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class PlotJob:
    """One rendering request: inputs, figure kind, axis scale, output path."""

    inputs: tuple[Path, ...]
    kind: str
    out: Path
    scale: str = "log"
    force: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out", Path(self.out))
        if self.kind not in KINDS:
            raise PlotInputError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if self.scale not in ("log", "linear"):
            raise PlotInputError(f"unknown axis scale {self.scale!r}")
        if not self.inputs:
            raise PlotInputError("at least one input CSV is required")


def _read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise PlotInputError("input file does not exist", path)
    header: list[str] | None = None
    rows: list[list[str]] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in raw.split(",")]
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise PlotInputError(
                f"expected {len(header)} cells, found {len(cells)}", path, lineno
            )
        rows.append(cells)
    if header is None:
        raise PlotInputError("no header row found", path)
    return header, rows


def _parse_float(cell: str, path: Path, lineno_hint: int | None = None) -> float:
    try:
        return float(cell)
    except ValueError:
        raise PlotInputError(f"non-numeric cell {cell!r}", path, lineno_hint) from None


@dataclass
class Series:
    label: str
    t: np.ndarray
    y: np.ndarray


@dataclass
class BoxStats:
    label: str
    whislo: float
    q1: float
    med: float
    q3: float
    whishi: float
    values: np.ndarray = field(default_factory=lambda: np.empty(0))


def prepare_convergence(paths) -> list[Series]:
    """Extract one (t, error) series per algorithm from trace files.

    The error column is rel_error when it carries finite values (synthetic
    benchmarks with known truth), else cum_fit_error (series fits).
    """
    per_file: list[tuple[Path, dict[str, list[tuple[float, float, float]]]]] = []
    for path in paths:
        header, rows = _read_table(path)
        if tuple(header) != TRACE_HEADER:
            raise PlotInputError(
                f"expected trace header {','.join(TRACE_HEADER)}, found {','.join(header)}", path
            )
        groups: dict[str, list[tuple[float, float, float]]] = {}
        for cells in rows:
            t = _parse_float(cells[0], path)
            rel = _parse_float(cells[3], path)
            cum = _parse_float(cells[4], path)
            groups.setdefault(cells[1], []).append((t, rel, cum))
        per_file.append((path, groups))
    all_algorithms = [alg for _, groups in per_file for alg in groups]
    duplicated = len(all_algorithms) != len(set(all_algorithms))
    series: list[Series] = []
    for path, groups in per_file:
        for alg, triples in groups.items():
            arr = np.array(triples)
            rel = arr[:, 1]
            y = rel if np.isfinite(rel).any() else arr[:, 2]
            label = f"{alg} ({path.stem})" if duplicated else alg
            series.append(Series(label=label, t=arr[:, 0], y=y))
    if not series:
        raise PlotInputError("inputs contain no data rows")
    return series


def _stats_from_values(label: str, values: np.ndarray) -> BoxStats:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        finite = np.array([math.nan])
    q1, med, q3 = np.percentile(finite, (25, 50, 75))
    return BoxStats(
        label=label,
        whislo=float(finite.min()),
        q1=float(q1),
        med=float(med),
        q3=float(q3),
        whishi=float(finite.max()),
        values=finite,
    )


def prepare_boxplot(paths) -> list[BoxStats]:
    """Extract one box per algorithm from run finals or quartile summaries."""
    stats: list[BoxStats] = []
    for path in paths:
        header, rows = _read_table(path)
        if tuple(header) == RUNS_HEADER:
            groups: dict[str, list[float]] = {}
            for cells in rows:
                groups.setdefault(cells[1], []).append(_parse_float(cells[2], path))
            for alg, values in groups.items():
                stats.append(_stats_from_values(alg, np.array(values)))
        elif tuple(header[: len(SUMMARY_HEADER_PREFIX)]) == SUMMARY_HEADER_PREFIX:
            col = {name: i for i, name in enumerate(header)}
            for cells in rows:
                stats.append(
                    BoxStats(
                        label=cells[0],
                        whislo=_parse_float(cells[col["min"]], path),
                        q1=_parse_float(cells[col["q1"]], path),
                        med=_parse_float(cells[col["median"]], path),
                        q3=_parse_float(cells[col["q3"]], path),
                        whishi=_parse_float(cells[col["max"]], path),
                    )
                )
        else:
            raise PlotInputError(
                "expected run-finals or summary header, found " + ",".join(header), path
            )
    if not stats:
        raise PlotInputError("inputs contain no data rows")
    return stats


def build_figure(job: PlotJob) -> Figure:
    """Assemble the figure without touching the filesystem."""
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot()
    if job.kind == "convergence":
        for s in prepare_convergence(job.inputs):
            line = ax.plot(s.t, s.y, label=s.label, linewidth=1.2)[0]
            line.set_gid(f"series-{s.label}")
        ax.set_xlabel("step")
        ax.set_ylabel("error")
        ax.set_yscale(job.scale)
        ax.legend()
    else:
        stats = prepare_boxplot(job.inputs)
        artists = ax.bxp(
            [
                {
                    "label": s.label,
                    "whislo": s.whislo,
                    "q1": s.q1,
                    "med": s.med,
                    "q3": s.q3,
                    "whishi": s.whishi,
                }
                for s in stats
            ],
            showfliers=False,
        )
        for median_line, s in zip(artists["medians"], stats):
            median_line.set_gid(f"median-{s.label}")
        ax.set_ylabel("final error")
        if job.scale == "log":
            ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def render(job: PlotJob) -> Path:
    """Write the figure to job.out; refuses to overwrite without force."""
    if job.out.exists() and not job.force:
        raise PlotInputError(f"output {job.out} exists; pass force to overwrite")
    fig = build_figure(job)
    job.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.out)
    return job.out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sepident-plot", description="Render benchmark CSVs as figures."
    )
    parser.add_argument("inputs", nargs="+", help="input CSV paths")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path (extension picks format)")
    parser.add_argument("--scale", default="log", choices=["log", "linear"], help="error-axis scale")
    parser.add_argument("--force", action="store_true", help="overwrite an existing output file")
    args = parser.parse_args(argv)
    try:
        path = render(
            PlotJob(
                inputs=tuple(args.inputs),
                kind=args.kind,
                out=args.out,
                scale=args.scale,
                force=args.force,
            )
        )
    except PlotInputError as exc:
        print(f"sepident-plot: error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
CSV / JSON output.

Floats go out with 17 significant digits so every file re-parses to the
in-memory values; JSON keys are sorted and non-finite floats become the
strings ``"inf"`` / ``"-inf"`` / ``"nan"``. Each write holds a file lock on
``<path>.lock`` so concurrent sweep points never interleave rows.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence, Union

import numpy as np
from filelock import FileLock

from base.utils.logging import ColoredLogger

PathLike = Union[str, Path]

TRACE_COLUMNS = ["seed", "t", "k", "f_gap", "dist_sq", "V", "bits", "bound_value"]
TRAJECTORY_COLUMNS = ["seed", "step", "loss", "x"]
# "aux" is the standard error, or the deviation threshold on tail rows
EMBEDDING_COLUMNS = ["kind", "pair", "property", "value", "bound", "aux", "passed"]
TAIL_PROXY = 10.0


def fmt(value: Any) -> str:
    """Cell formatting: ints verbatim, floats at 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def _lock(path: Path) -> FileLock:
    path.parent.mkdir(parents=True, exist_ok=True)
    return FileLock(str(path) + ".lock")


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    with _lock(path):
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            n = 0
            for row in rows:
                writer.writerow([fmt(v) for v in row])
                n += 1
    ColoredLogger.debug(f"[Storage] {path}: {n} rows")
    return path


def read_csv(path: PathLike) -> List[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if hasattr(obj, "model_dump"):
        return to_jsonable(obj.model_dump(mode="json"))
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    with _lock(path):
        path.write_text(dumps(obj) + "\n")
    ColoredLogger.debug(f"[Storage] wrote {path}")
    return path


# ──────────────────────────────────────────────────────────────────────
# Domain-specific tables
# ──────────────────────────────────────────────────────────────────────
def trace_rows(traces, bounds=None):
    for i, trace in enumerate(traces):
        bound = None if bounds is None else bounds[i] if isinstance(bounds, list) else bounds
        for row in trace.rows(bound):
            yield [row.seed, row.t, row.k, row.f_gap, row.dist_sq, row.V, row.bits, row.bound_value]


def write_traces(path: PathLike, traces, bounds=None) -> Path:
    return write_csv(path, TRACE_COLUMNS, trace_rows(traces, bounds))


def write_bound_overlay(path: PathLike, empirical: np.ndarray, bound: np.ndarray,
                        label: str = "f_gap") -> Path:
    """Seed-averaged curve next to the theorem value per index, with the margin."""
    rows = ([t, e, b, b - e] for t, (e, b) in enumerate(zip(empirical, bound)))
    return write_csv(path, ["t", label, "bound_value", "margin"], rows)


def embedding_rows(reports):
    for rep in reports:
        for m in rep.moments:
            yield [rep.kind, m.label, "first_moment", m.empirical_mean, m.target, m.stderr, m.passed]
            yield [rep.kind, m.label, "second_moment", m.empirical_second_moment,
                   m.second_moment_bound, m.stderr_second, m.passed]
        for c in rep.coordinates:
            yield [rep.kind, c.label, "coordinate_max_z", c.max_abs_z, float("nan"),
                   float("nan"), c.passed]
        for n in rep.norms:
            yield [rep.kind, n.label, "norm_sq", n.mean_norm_sq, n.bound, n.stderr, n.passed]
        for t in rep.tails:
            yield [rep.kind, t.label, "tail", t.empirical_exceed_prob,
                   TAIL_PROXY * t.claimed_delta, t.threshold, t.passed]


def write_embedding_reports(path: PathLike, reports) -> Path:
    return write_csv(path, EMBEDDING_COLUMNS, embedding_rows(reports))


def write_trajectory(path: PathLike, trajectories: Sequence[Any]) -> Path:
    def rows():
        for seed, traj in enumerate(trajectories):
            for step, (x, loss) in enumerate(zip(traj.xs, traj.losses)):
                yield [seed, step, loss, " ".join(fmt(v) for v in x)]

    return write_csv(path, TRAJECTORY_COLUMNS, rows())

"""Text formats for datasets, draw stores and combined draws.

Dataset files are CSV with one row per response component::

    # q=3
    u1,u2,obs_id,component,y,x1,x2,x3
    0.25,0.5,0,0,1.3,0.1,-0.2,0.7
    0.25,0.5,0,1,0.9,1.1,0.4,-0.3

Rows sharing ``obs_id`` must be contiguous, agree on the index coordinates and
number their components ``0, 1, ...``. Lines starting with ``#`` are comments;
``# q=<int>`` sets the number of varying coefficients (default ``p``).

Draw files are CSV with a header of column names and one row per draw, every
value written with 17 significant digits. Each has a JSON sidecar with the
same stem.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError
from .model import Dataset

FLOAT_FMT = "%.17g"


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


# ---------------------------------------------------------------------------
# datasets


def write_dataset(dataset: Dataset, path, comment: str | None = None) -> None:
    d, p = dataset.d, dataset.p
    header = [f"u{i + 1}" for i in range(d)] + ["obs_id", "component", "y"] + [f"x{j + 1}" for j in range(p)]
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"# q={dataset.q}")
    lines.append(",".join(header))
    for i in range(dataset.n):
        u = ",".join(_fmt(c) for c in dataset.coords[i])
        rows = dataset.rows_of(i)
        for r, row in enumerate(range(rows.start, rows.stop)):
            x = ",".join(_fmt(v) for v in dataset.X[row])
            lines.append(f"{u},{int(dataset.ids[i])},{r},{_fmt(dataset.y[row])},{x}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(fields, lineno):
    try:
        obs_col = fields.index("obs_id")
    except ValueError:
        raise DatasetFormatError("header must contain obs_id", lineno) from None
    d = obs_col
    expected = [f"u{i + 1}" for i in range(d)] + ["obs_id", "component", "y"]
    if d < 1 or fields[: d + 3] != expected:
        raise DatasetFormatError(f"header must start with {','.join(expected) or 'u1'}", lineno)
    p = len(fields) - d - 3
    if p < 1 or fields[d + 3 :] != [f"x{j + 1}" for j in range(p)]:
        raise DatasetFormatError("covariate columns must be named x1..xp", lineno)
    return d, p


def ingest_dataset(path, allow_missing_y: bool = False) -> Dataset:
    """Read and validate a dataset file.

    Parameters
    ----------
    path
        File in the documented CSV layout.
    allow_missing_y
        Accept ``nan`` responses (test sets whose responses are unknown).
    """
    text = Path(path).read_text()
    q = None
    header = None
    coords, ys, xs, sizes, ids = [], [], [], [], []
    cur_id = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("q="):
                try:
                    q = int(body[2:])
                except ValueError:
                    raise DatasetFormatError("q directive must be an integer", lineno) from None
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            header = _parse_header(fields, lineno)
            continue
        d, p = header
        if len(fields) != d + 3 + p:
            raise DatasetFormatError(f"expected {d + 3 + p} fields, found {len(fields)}", lineno)
        try:
            u = [float(v) for v in fields[:d]]
            obs_id = int(fields[d])
            comp = int(fields[d + 1])
            y = float(fields[d + 2])
            x = [float(v) for v in fields[d + 3 :]]
        except ValueError as exc:
            raise DatasetFormatError(f"malformed value: {exc}", lineno) from None
        if not all(math.isfinite(c) and 0.0 <= c <= 1.0 for c in u):
            raise DatasetFormatError(f"index coordinates must lie in [0, 1], got {u}", lineno)
        if not all(math.isfinite(v) for v in x):
            raise DatasetFormatError("covariates must be finite", lineno)
        if not math.isfinite(y) and not (allow_missing_y and math.isnan(y)):
            raise DatasetFormatError("response must be finite", lineno)
        if obs_id != cur_id:
            if obs_id in seen:
                raise DatasetFormatError(f"rows of observation {obs_id} are not contiguous", lineno)
            if comp != 0:
                raise DatasetFormatError("components of an observation must start at 0", lineno)
            seen.add(obs_id)
            cur_id = obs_id
            ids.append(obs_id)
            coords.append(u)
            sizes.append(0)
        else:
            if comp != sizes[-1]:
                raise DatasetFormatError("components must be numbered consecutively", lineno)
            if u != coords[-1]:
                raise DatasetFormatError("index coordinates differ within an observation", lineno)
        sizes[-1] += 1
        ys.append(y)
        xs.append(x)
    if not ids:
        raise DatasetFormatError("no observations")
    try:
        return Dataset(np.array(coords), np.array(ys), np.array(xs), sizes, q=q, ids=ids)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# draws

VOLATILE_KEYS = ("wall_seconds",)


def _write_matrix(path, names, matrix) -> None:
    lines = [",".join(names)]
    fmt = ",".join([FLOAT_FMT] * len(names))
    lines += [fmt % tuple(row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_matrix(path):
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def write_draw_store(store, path) -> None:
    """CSV of all draws plus a JSON sidecar without run-time-dependent fields."""
    _write_matrix(path, store.column_names(), store.matrix())
    meta = {k: v for k, v in store.metadata.items() if k not in VOLATILE_KEYS}
    _dump_json(
        {
            "metadata": meta,
            "p": int(store.p),
            "test_points": store.test_points.tolist(),
            "test_sizes": store.test_sizes.tolist(),
        },
        sidecar(path),
    )


def read_draw_store(path):
    from .sampler import DrawStore

    info = json.loads(sidecar(path).read_text())
    names, data = _read_matrix(path)
    p = info["p"]
    test_points = np.asarray(info["test_points"], dtype=np.float64)
    test_sizes = np.asarray(info["test_sizes"], dtype=np.int64)
    nb = test_points.shape[0] * p
    ny = int(test_sizes.sum())
    if len(names) != nb + ny + 1:
        raise ValueError(f"{path}: column count does not match the sidecar")
    return DrawStore(data[:, :nb], data[:, nb : nb + ny], data[:, nb + ny], test_points, test_sizes, p, info["metadata"])


def write_combined(combined, path) -> None:
    names, matrix = list(combined.columns), combined.draws
    if combined.is_quantile:
        names = ["level"] + names
        matrix = np.column_stack([combined.levels, matrix])
    _write_matrix(path, names, matrix)
    _dump_json(
        {
            "method": combined.method,
            "policy": combined.policy,
            "info": combined.info,
            "p": int(combined.p),
            "test_points": combined.test_points.tolist(),
            "test_sizes": combined.test_sizes.tolist(),
            "mean": [float(v) for v in combined.mean],
        },
        sidecar(path),
    )


def read_combined(path):
    from .combiner import CombinedStore

    info = json.loads(sidecar(path).read_text())
    names, data = _read_matrix(path)
    levels = None
    if names and names[0] == "level":
        levels, data, names = data[:, 0], data[:, 1:], names[1:]
    return CombinedStore(
        info["method"],
        info["policy"],
        data,
        names,
        np.asarray(info["test_points"], dtype=np.float64),
        np.asarray(info["test_sizes"], dtype=np.int64),
        info["p"],
        levels=levels,
        mean=np.asarray(info["mean"], dtype=np.float64),
        info=info["info"],
    )

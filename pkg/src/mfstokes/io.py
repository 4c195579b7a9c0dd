"""CSV, JSON and snapshot files.  Floats are written with ``repr`` so they re-read exactly."""
import json
import os
import tempfile
from dataclasses import dataclass, fields

import numpy as np

DIAGNOSTICS_HEADER = (
    "t", "d_min", "s2_over_n", "v_inf", "nf_inf", "buckling", "v2_over_sqrt_n", "lipschitz_proxy",
)
SNAPSHOT_TAG = "# mfstokes-snapshot v1"
SNAPSHOT_HEADER = ("x", "y", "z", "vx", "vy", "vz", "m")


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    seed: int
    t: float
    w2_phase: float
    w2_space: float
    dmin_ratio: float
    s2_ratio: float
    buckling_max: float
    wallclock: float
    status: str = "ok"


CONVERGE_HEADER = tuple(f.name for f in fields(ConvergenceRow))


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def atomic_write(path, text):
    """Write ``text`` to a temporary sibling then rename it over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"could not write {path}: {exc}") from exc


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def diagnostics_rows(records):
    return [
        (r.t, r.d_min, r.s2_over_n, r.v_inf, r.nf_inf, r.buckling, r.v2_over_sqrt_n, r.lipschitz_proxy)
        for r in records
    ]


def write_diagnostics(records, path):
    atomic_write(path, _csv(DIAGNOSTICS_HEADER, diagnostics_rows(records)))


def write_converge(rows, path):
    atomic_write(path, _csv(CONVERGE_HEADER, [
        tuple(getattr(r, name) for name in CONVERGE_HEADER) for r in rows
    ]))


def read_csv(path):
    """Header and rows of one of our CSV files; integers stay exact, other numbers are floats."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = tuple(lines[0].split(","))
    rows = []
    for line in lines[1:]:
        cells = []
        for c in line.split(","):
            for parse in (int, float, str):
                try:
                    cells.append(parse(c))
                    break
                except ValueError:
                    pass
        rows.append(tuple(cells))
    return header, rows


def read_converge(path):
    header, rows = read_csv(path)
    if header != CONVERGE_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    return [
        ConvergenceRow(int(r[0]), int(r[1]), *r[2:9], status=str(r[9])) for r in rows
    ]


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(summary, path):
    atomic_write(path, json.dumps(_json_clean(summary), indent=2) + "\n")


def emit_outputs(rows, records, directory, summary=None):
    """Write ``diagnostics.csv``, ``converge.csv`` and (if given) ``summary.json``."""
    os.makedirs(directory, exist_ok=True)
    write_diagnostics(records, os.path.join(directory, "diagnostics.csv"))
    write_converge(rows, os.path.join(directory, "converge.csv"))
    if summary is not None:
        write_summary(summary, os.path.join(directory, "summary.json"))


# --- state snapshots ---------------------------------------------------------


def write_snapshot(path, positions, velocities, weights=None, t=0.0, kind="cloud", extra=None):
    """Snapshot CSV: a version tag line, a column header, one row per point."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    velocities = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if weights is None:
        weights = np.full(len(positions), 1.0 / max(len(positions), 1))
    meta = {"kind": kind, "t": repr(float(t))}
    meta.update(extra or {})
    tag = SNAPSHOT_TAG + " " + " ".join(f"{k}={v}" for k, v in meta.items())
    rows = np.hstack([positions, velocities, np.asarray(weights, dtype=float)[:, None]])
    atomic_write(path, tag + "\n" + _csv(SNAPSHOT_HEADER, rows.tolist()))


def read_snapshot(path):
    """Return ``(positions, velocities, weights, meta)`` from a snapshot file."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(SNAPSHOT_TAG):
        raise ValueError(f"{path}: missing snapshot version tag")
    meta = dict(item.split("=", 1) for item in lines[0][len(SNAPSHOT_TAG):].split())
    if tuple(lines[1].split(",")) != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: unexpected snapshot header")
    data = np.array([[float(c) for c in line.split(",")] for line in lines[2:]]).reshape(-1, 7)
    return data[:, :3], data[:, 3:6], data[:, 6], meta


def save_micro(path, state):
    write_snapshot(path, state.X, state.V, None, state.t, "micro", {"R": repr(state.R)})


def save_cloud(path, cloud):
    write_snapshot(path, cloud.Y, cloud.W, cloud.m, cloud.t, "cloud", {"delta": repr(cloud.delta)})

"""Reading and writing trajectories and reports.

The trajectory CSV starts with ``#`` comment lines carrying the schema version
and run metadata, followed by a header row in the fixed column order.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .bounds import VerificationReport
from .constants import ConstantsReport
from .dynamics import COLUMNS, BlowupFit, Status, Trajectory

SCHEMA = "ppblowup-trajectory/1"
_META_FLOATS = ("p", "T_num", "T_threshold", "dt0", "blowup_factor", "horizon", "theta_scheme")
_META_INTS = ("M", "steps", "rows_total")


def thin_rows(traj: Trajectory, dlogH: float, dt_frac: float) -> np.ndarray:
    """Indices of rows kept on export.

    A row is kept when it enters a new band of width ``dlogH`` in log H or of
    width ``dt_frac·horizon`` in t; the first and last rows are always kept.
    Both zero keeps every row.
    """
    n = len(traj)
    if n <= 2 or (dlogH <= 0 and dt_frac <= 0):
        return np.arange(n)
    logH = np.log(np.maximum(traj.H, np.finfo(float).tiny))
    horizon = traj.meta.get("horizon") or float(traj.t[-1] - traj.t[0]) or 1.0
    dt_keep = dt_frac * horizon if dt_frac > 0 else math.inf
    dl_keep = dlogH if dlogH > 0 else math.inf
    return _thin(logH, traj.t, dl_keep, dt_keep)


def _thin(logH, t, dl, dt):
    lev = np.floor((logH - logH[0]) / dl) if math.isfinite(dl) else np.zeros_like(logH)
    tlev = np.floor((t - t[0]) / dt) if math.isfinite(dt) else np.zeros_like(t)
    change = np.flatnonzero((np.diff(lev) != 0) | (np.diff(tlev) != 0)) + 1
    return np.unique(np.concatenate(([0], change, [t.size - 1])))


def write_trajectory_csv(traj: Trajectory, path, dlogH: float = 0.0, dt_frac: float = 0.0) -> Path:
    path = Path(path)
    idx = thin_rows(traj, dlogH, dt_frac)
    meta = {
        "schema": SCHEMA,
        "columns": ",".join(COLUMNS),
        "status": traj.status.value,
        "p": traj.p,
        "T_num": traj.T_num,
        "T_threshold": traj.T_threshold,
        "dt0": traj.meta.get("dt0"),
        "blowup_factor": traj.meta.get("blowup_factor"),
        "horizon": traj.meta.get("horizon"),
        "theta_scheme": traj.meta.get("theta_scheme"),
        "M": traj.meta.get("M"),
        "steps": traj.meta.get("steps"),
        "rows_total": len(traj),
        "thinned": "yes" if idx.size < len(traj) else "no",
    }
    if traj.fit is not None:
        f = traj.fit
        meta["fit"] = f"{f.exponent_source} {float(f.exponent)!r} {float(f.correlation)!r} {f.n_points}"
    lines = [f"# {k}: {_fmt_meta(v)}" for k, v in meta.items()]
    lines.append(",".join(COLUMNS))
    block = np.column_stack([traj.column(c)[idx] for c in COLUMNS])
    lines.extend(",".join(map(repr, row)) for row in block.tolist())
    path.write_text("\n".join(lines) + "\n")
    return path


def _fmt_meta(v):
    if v is None:
        return "none"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    meta, header, rows = {}, None, []
    with path.open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif header is None:
                header = line.strip()
            elif line.strip():
                rows.append(line)
    if header is None:
        raise ValueError(f"{path}: no header row")
    if meta.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unsupported schema {meta.get('schema')!r}")
    if tuple(header.split(",")) != COLUMNS:
        raise ValueError(f"{path}: column order {header!r} differs from {','.join(COLUMNS)}")
    data = np.loadtxt(rows, delimiter=",", ndmin=2) if rows else np.empty((0, len(COLUMNS)))
    cols = {c: data[:, k].copy() for k, c in enumerate(COLUMNS)}

    def num(key, cast=float):
        v = meta.get(key, "none")
        return None if v == "none" else cast(v)

    fit = None
    if "fit" in meta:
        src, expo, corr, npts = meta["fit"].split()
        fit = BlowupFit(num("T_num"), src, float(expo), float(corr), int(npts))
    extra = {k: num(k) for k in _META_FLOATS if k not in ("p", "T_num", "T_threshold")}
    extra.update({k: num(k, int) for k in _META_INTS})
    extra["thinned"] = meta.get("thinned") == "yes"
    return Trajectory(**cols, status=Status(meta["status"]), p=num("p"), T_num=num("T_num"),
                      T_threshold=num("T_threshold"), fit=fit, meta=extra)


def write_json(obj, path) -> Path:
    path = Path(path)
    if isinstance(obj, (ConstantsReport, VerificationReport)):
        text = obj.to_json()
    else:
        text = json.dumps(obj, indent=2)
    path.write_text(text + "\n")
    return path


def read_constants_json(path) -> ConstantsReport:
    return ConstantsReport.from_dict(json.loads(Path(path).read_text()))

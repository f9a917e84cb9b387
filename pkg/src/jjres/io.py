"""CSV serialization of maps, traces, fit results and conservation lines.

Floats are written with 12 significant digits; flagged map cells carry
``NaN`` values and ``converged=false``. Files are RFC-4180 style (CRLF
row terminators) so repeated runs produce identical bytes.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .fit import FitResult, Trace
from .spectroscopy import OK, ConservationLine, ScanResult

SIG_DIGITS = 12


def fmt(v) -> str:
    """Format a number with 12 significant digits (``NaN`` for missing)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, f".{SIG_DIGITS}g")


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _axis_label(axis) -> str:
    return f"{axis.name}_{axis.unit}"


def scan_rows(result: ScanResult, extra: tuple[str, ...] = ()):
    """Header and long-form rows (one per cell, x varying fastest)."""
    g = result.grid
    header = [_axis_label(g.x), _axis_label(g.y), "T", "P_out_aW", *extra, "converged", "status"]
    rows = []
    ny, nx = g.shape
    for iy in range(ny):
        for ix in range(nx):
            ok = result.status[iy, ix] == OK
            vals = [result.T[iy, ix], result.P_out[iy, ix]]
            vals += [result.extra[name][iy, ix] for name in extra]
            if not ok:
                vals = [math.nan] * len(vals)
            rows.append([g.x.values[ix], g.y.values[iy], *vals, ok, result.status[iy, ix]])
    return header, rows


def write_csv(obj, path, **kwargs) -> Path:
    """Write a :class:`ScanResult`, :class:`Trace` or :class:`FitResult` as CSV."""
    if isinstance(obj, ScanResult):
        return write_table(path, *scan_rows(obj, **kwargs))
    if isinstance(obj, Trace):
        name = kwargs.get("value_name", "value")
        if obj.sigma is None:
            return write_table(path, ["frequency_GHz", name], zip(obj.x, obj.y))
        return write_table(path, ["frequency_GHz", name, "sigma"], zip(obj.x, obj.y, obj.sigma))
    if isinstance(obj, FitResult):
        header, row = fit_row(obj)
        return write_table(path, header, [row])
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_trace_csv(path) -> Trace:
    """Read a two- or three-column trace CSV with a one-line header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) not in (2, 3):
        raise ValueError(f"{path}: expected 2 or 3 columns, got {len(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    sigma = data[:, 2] if data.shape[1] == 3 else None
    return Trace(data[:, 0], data[:, 1], sigma)


_UNITS = {"f01": "GHz", "kappa_c": "MHz", "kappa_i": "MHz"}


def _unit_name(name: str, suffix: str = "") -> str:
    unit = _UNITS.get(name)
    return f"{name}{suffix}_{unit}" if unit else name + suffix


def fit_row(result: FitResult) -> tuple[list[str], list]:
    header, row = [], []
    err = result.stderr
    for name, value in result.params.items():
        header += [_unit_name(name), _unit_name(name, "_stderr")]
        row += [value, err[name]]
    header += ["residual_rms", "converged", "iterations", "kind"]
    row += [result.residual_rms, result.converged, result.iterations, result.kind]
    return header, row


def fit_report(result: FitResult) -> str:
    """Flat ``key = value`` text report."""
    header, row = fit_row(result)
    lines = [f"{k} = {fmt(v)}" for k, v in zip(header, row)]
    for k, v in result.extra.items():
        lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def write_lines_csv(lines: list[ConservationLine], path) -> Path:
    """Conservation-line overlay in long form, keyed by (order, levels)."""
    header = ["m", "k", "level_i", "level_j", "energy_GHz", "f1_GHz", "f2_GHz"]
    rows = []
    for line in lines:
        m, k = line.order
        i, j = line.levels
        for f1, f2 in line.locus:
            rows.append([m, k, i, j, line.energy, f1, f2])
    return write_table(path, header, rows)

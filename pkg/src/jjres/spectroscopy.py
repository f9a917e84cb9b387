"""Parameter scans: one-tone power maps, pump-probe maps, energy diagrams,
energy-conservation lines and extremum detection."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .circuit import CONSTANTS, CircuitParams
from .dynamics import (
    DriveSpec,
    SingularLiouvillianError,
    SolverSettings,
    StiffnessError,
    Tone,
    TruncationError,
    linear_photon_number,
    output_power,
    single_tone_steady_state,
    transmission,
    two_tone_response,
)
from .spectrum import Spectrum, kerr_levels

log = logging.getLogger(__name__)

CELL_ERRORS = (SingularLiouvillianError, StiffnessError, TruncationError, np.linalg.LinAlgError)

OK, SKIPPED, FAILED, UNCONVERGED = "ok", "skipped", "failed", "unconverged"


@dataclass(frozen=True)
class Axis:
    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError(f"axis {self.name!r} needs at least one value")
        if v.size > 1:
            d = np.diff(v)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError(f"axis {self.name!r} must be strictly monotone")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class ScanGrid:
    x: Axis
    y: Axis
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.x) * len(self.y) < 2:
            raise ValueError("a scan grid needs at least two cells")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.y), len(self.x)


@dataclass
class ScanResult:
    """Map of probe-channel results; arrays are indexed ``[iy, ix]``."""

    grid: ScanGrid
    values: np.ndarray  # complex transmission amplitude (probe channel)
    T: np.ndarray
    P_out: np.ndarray  # aW
    status: np.ndarray  # per-cell status string
    extra: dict = field(default_factory=dict)  # name -> array of grid shape
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("values", "T", "P_out", "status"):
            if getattr(self, name).shape != self.grid.shape:
                raise ValueError(f"{name} shape does not match the grid")

    @property
    def converged(self) -> np.ndarray:
        return self.status == OK

    @property
    def n_failed(self) -> int:
        return int(np.sum((self.status == FAILED) | (self.status == UNCONVERGED)))


@dataclass(frozen=True)
class ConservationLine:
    order: tuple[int, int]  # photons from tone 1, tone 2
    levels: tuple[int, int]  # initial, final
    energy: float  # (E_j - E_i)/h in GHz
    locus: np.ndarray  # (n, 2) array of (f1, f2) in GHz

    def residuals(self) -> np.ndarray:
        m, k = self.order
        return m * self.locus[:, 0] + k * self.locus[:, 1] - self.energy


@dataclass(frozen=True)
class Feature:
    x: float
    y: float
    prominence: float
    value: float


# -------------------------------------------------------------- plumbing


def run_hash(*parts) -> str:
    """Stable digest of the inputs that define a computation."""
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(type(o))

    blob = json.dumps(parts, default=default, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _evaluate(cells: Sequence, fn: Callable, workers: int) -> list:
    """Evaluate ``fn`` on every cell; results come back in cell order."""
    if workers <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def _meta(p, settings, grid, kind, **extra):
    return {
        "kind": kind,
        "circuit": asdict(p),
        "solver": asdict(settings),
        "run_hash": run_hash(kind, p, settings, grid.x.values, grid.y.values, extra),
        **extra,
    }


def _probe_cell(p: CircuitParams, settings: SolverSettings, f1, P1, f2, P2, same_frequency=False):
    if f1 == f2 and not same_frequency:
        return complex("nan"), math.nan, math.nan, SKIPPED, math.nan
    try:
        r = two_tone_response(p, DriveSpec.pump_probe(f1, P1, f2, P2, same_frequency), settings)
    except CELL_ERRORS as exc:
        log.warning("cell f1=%g P1=%g f2=%g P2=%g failed: %s", f1, P1, f2, P2, exc)
        return complex("nan"), math.nan, math.nan, FAILED, math.nan
    return r.t, r.transmission, r.power_out, OK if r.converged else UNCONVERGED, r.fock_dim


def _assemble(grid, results, kind, p, settings, **meta):
    ny, nx = grid.shape
    values = np.empty((ny, nx), dtype=complex)
    T = np.empty((ny, nx))
    P_out = np.empty((ny, nx))
    status = np.empty((ny, nx), dtype=object)
    fock = np.empty((ny, nx))
    for idx, (t, Tc, Pc, st, d) in enumerate(results):
        iy, ix = divmod(idx, nx)
        values[iy, ix], T[iy, ix], P_out[iy, ix], status[iy, ix], fock[iy, ix] = t, Tc, Pc, st, d
    return ScanResult(grid, values, T, P_out, status.astype(str), extra={"fock_dim": fock},
                      meta=_meta(p, settings, grid, kind, **meta))


# -------------------------------------------------------------- one tone


def _one_tone_cell(p, settings, f, P):
    tone = Tone(f, P)
    try:
        ss = single_tone_steady_state(p, tone, settings)
    except CELL_ERRORS as exc:
        log.warning("cell f=%g P=%g failed: %s", f, P, exc)
        return complex("nan"), math.nan, math.nan, FAILED, math.nan
    t, T, _ = transmission(ss, tone, p)
    return t, T, output_power(ss.a_expect, f, p), OK, ss.fock_dim


def one_tone_map(p: CircuitParams, f_values, P_values,
                 settings: SolverSettings = SolverSettings(), workers: int = 1) -> ScanResult:
    """Steady-state transmission versus drive frequency (x, GHz) and power (y, aW).

    Extras: ``n_linear``, the photon number of the equivalent linear
    resonator for each power row, and ``R``, the reflection coefficient.
    """
    P_values = np.asarray(P_values, dtype=float)
    if np.any(P_values <= 0):
        raise ValueError("one-tone powers must be positive")
    grid = ScanGrid(Axis("f", "GHz", f_values), Axis("P", "aW", P_values))
    cells = [(f, P) for P in grid.y.values for f in grid.x.values]
    results = _evaluate(cells, lambda c: _one_tone_cell(p, settings, *c), workers)
    res = _assemble(grid, results, "onetone", p, settings)
    f_r = p.f01
    n_lin = np.array([linear_photon_number(P, f_r, p.kappa_c, p.kappa_i) for P in grid.y.values])
    res.extra["n_linear"] = np.repeat(n_lin[:, None], len(grid.x), axis=1)
    # equal port couplings: r = 1 - t
    res.extra["R"] = np.abs(1 - res.values) ** 2
    return res


def saturation_curve(p: CircuitParams, P_values, f: float | None = None,
                     settings: SolverSettings = SolverSettings(), workers: int = 1):
    """Coherent output power (aW) versus input power (aW) at fixed frequency.

    Defaults to the 0-1 transition frequency. Returns ``(P_in, P_out, status)``.
    """
    f = p.f01 if f is None else f
    P_values = np.asarray(P_values, dtype=float)
    results = _evaluate(list(P_values), lambda P: _one_tone_cell(p, settings, f, P), workers)
    P_out = np.array([r[2] for r in results])
    status = np.array([r[3] for r in results])
    return P_values, P_out, status


def saturation_plateau(P_in, P_out, p: CircuitParams, band=(3000.0, 30000.0), f=None) -> float:
    """Plateau level of P_out over ``band`` in units of kappa_c h f.

    Geometric mean of the samples inside the band (the curve is read on
    log-log axes).
    """
    f = p.f01 if f is None else f
    P_in, P_out = np.asarray(P_in), np.asarray(P_out)
    sel = (P_in >= band[0]) & (P_in <= band[1]) & np.isfinite(P_out)
    if not np.any(sel):
        raise ValueError("no samples inside the plateau band")
    unit = 2 * math.pi * p.kappa_c * 1e6 * CONSTANTS.h * f * 1e9 * 1e18  # aW
    return float(np.exp(np.mean(np.log(P_out[sel] / unit))))


def low_power_slope(P_in, P_out, n: int = 3) -> float:
    """Mean P_out/P_in over the ``n`` lowest input powers."""
    order = np.argsort(P_in)[:n]
    return float(np.mean(np.asarray(P_out)[order] / np.asarray(P_in)[order]))


# -------------------------------------------------------------- two tone


def two_tone_map(p: CircuitParams, f1: float, P1_values, f2_values, P2: float,
                 settings: SolverSettings = SolverSettings(), workers: int = 1) -> ScanResult:
    """Probe transmission versus probe frequency (x, GHz) and pump power (y, aW).

    A pump-off row (P1 = 0) is always included for contrast.
    """
    P1_values = np.unique(np.concatenate([[0.0], np.asarray(P1_values, dtype=float)]))
    grid = ScanGrid(Axis("f2", "GHz", f2_values), Axis("P1", "aW", P1_values),
                    fixed={"f1_GHz": f1, "P2_aW": P2})
    cells = [(P1, f2) for P1 in grid.y.values for f2 in grid.x.values]
    results = _evaluate(cells, lambda c: _probe_cell(p, settings, f1, c[0], c[1], P2), workers)
    return _assemble(grid, results, "twotone", p, settings, f1=f1, P2=P2)


def power_power_map(p: CircuitParams, f1: float, f2: float, P1_values, P2_values,
                    settings: SolverSettings = SolverSettings(), workers: int = 1) -> ScanResult:
    """Probe output power versus probe power (x, aW) and pump power (y, aW)."""
    grid = ScanGrid(Axis("P2", "aW", P2_values), Axis("P1", "aW", P1_values),
                    fixed={"f1_GHz": f1, "f2_GHz": f2})
    cells = [(P1, P2) for P1 in grid.y.values for P2 in grid.x.values]
    results = _evaluate(cells, lambda c: _probe_cell(p, settings, f1, c[0], f2, c[1]), workers)
    return _assemble(grid, results, "powermap", p, settings, f1=f1, f2=f2)


def energy_diagram(p: CircuitParams, f1_values, f2_values, P1: float, P2: float,
                   settings: SolverSettings = SolverSettings(), workers: int = 1,
                   same_frequency: bool = False) -> ScanResult:
    """Probe transmission versus pump frequency (x, GHz) and probe frequency (y, GHz).

    Cells with f1 == f2 are skipped unless ``same_frequency`` is set.
    """
    grid = ScanGrid(Axis("f1", "GHz", f1_values), Axis("f2", "GHz", f2_values),
                    fixed={"P1_aW": P1, "P2_aW": P2})
    cells = [(f1, f2) for f2 in grid.y.values for f1 in grid.x.values]
    results = _evaluate(
        cells, lambda c: _probe_cell(p, settings, c[0], P1, c[1], P2, same_frequency), workers)
    return _assemble(grid, results, "diagram", p, settings, P1=P1, P2=P2)


# ---------------------------------------------------- conservation lines


def model_spectrum(p: CircuitParams, n_levels: int = 4) -> Spectrum:
    """Bare Kerr-ladder energies (GHz) used by the dynamics engine."""
    return Spectrum(energies=kerr_levels(p.f01, p.Ec, n_levels), method="asymptotic")


DEFAULT_LINES = (
    (1, 1, 0, 2),  # one photon from each tone, 0 -> 2
    (2, 1, 0, 3),  # two pump photons and one probe photon, 0 -> 3
    (1, 0, 0, 1),
    (1, 0, 1, 2),
    (0, 1, 0, 1),
    (0, 1, 1, 2),
)


def conservation_lines(spectrum: Spectrum, window=(4.2, 5.1),
                       requests: Iterable[tuple[int, int, int, int]] = DEFAULT_LINES,
                       n_points: int = 181) -> list[ConservationLine]:
    """Loci of ``m f1 + k f2 = (E_j - E_i)/h`` inside the square frequency window.

    Each request is ``(m, k, i, j)``. A line outside the window has an
    empty locus.
    """
    if spectrum.n_levels < 4:
        raise ValueError("energy-diagram work needs at least four levels")
    lo, hi = window
    lines = []
    for m, k, i, j in requests:
        if i == j:
            raise ValueError(f"degenerate transition {i} -> {j}")
        if m < 0 or k < 0 or m + k == 0:
            raise ValueError(f"invalid photon order ({m}, {k})")
        if max(i, j) >= spectrum.n_levels:
            raise ValueError(f"level {max(i, j)} not in spectrum")
        energy = spectrum.transition(i, j)
        if k == 0:
            f1 = energy / m
            pts = [(f1, f2) for f2 in np.linspace(lo, hi, n_points)] if lo <= f1 <= hi else []
        elif m == 0:
            f2 = energy / k
            pts = [(f1, f2) for f1 in np.linspace(lo, hi, n_points)] if lo <= f2 <= hi else []
        else:
            f1 = np.linspace(lo, hi, n_points)
            f2 = (energy - m * f1) / k
            keep = (f2 >= lo) & (f2 <= hi)
            pts = list(zip(f1[keep], f2[keep]))
        locus = np.array(pts, dtype=float).reshape(-1, 2)
        lines.append(ConservationLine((m, k), (i, j), energy, locus))
    return lines


def distance_to_line(line: ConservationLine, x: float, y: float) -> float:
    """Euclidean distance (GHz) from (f1, f2) = (x, y) to the infinite line."""
    m, k = line.order
    return abs(m * x + k * y - line.energy) / math.hypot(m, k)


# ------------------------------------------------------- feature detection


def _prominences(z: np.ndarray, neighbours) -> dict:
    """Topographic prominence of every local maximum by descending flood fill."""
    flat = z.ravel()
    finite = np.flatnonzero(np.isfinite(flat))
    order = finite[np.argsort(-flat[finite], kind="stable")]
    parent = {}
    peak_of = {}
    result = {}
    floor = flat[finite].min()

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in order:
        level = flat[i]
        roots = {find(j) for j in neighbours(i) if j in parent}
        parent[i] = i
        if not roots:
            peak_of[i] = i
            continue
        ranked = sorted(roots, key=lambda r: (-flat[peak_of[r]], peak_of[r]))
        keep = ranked[0]
        for r in ranked[1:]:
            pk = peak_of[r]
            result[pk] = flat[pk] - level
            parent[r] = keep
        parent[i] = keep
    for r in {find(i) for i in parent}:
        result[peak_of[r]] = flat[peak_of[r]] - floor
    return result


def _subpixel(v: np.ndarray, i: int) -> float:
    if i <= 0 or i >= v.size - 1 or not np.all(np.isfinite(v[i - 1:i + 2])):
        return float(i)
    a, b, c = v[i - 1], v[i], v[i + 1]
    den = a - 2 * b + c
    if den >= 0:
        return float(i)
    return float(i + 0.5 * (a - c) / den)


def _coord(axis: np.ndarray, pos: float) -> float:
    return float(np.interp(pos, np.arange(axis.size), axis))


def detect_features(data, kind: str = "peak", *, x=None, y=None, scale: str = "linear",
                    rel_prominence: float = 0.05, prominence: float | None = None,
                    field_name: str = "T") -> list[Feature]:
    """Local extrema of a map or trace with prominence filtering.

    ``data`` is a :class:`ScanResult` (its ``field_name`` array is used) or a
    1-d/2-d array with coordinate axes ``x`` (and ``y``). With ``scale='log'``
    extrema are found on log10 of the data. The threshold is ``prominence``
    if given, else ``rel_prominence`` times the dynamic range. Positions are
    refined by a three-point parabola along each axis. Features are ordered
    by decreasing prominence.
    """
    if kind not in ("peak", "dip"):
        raise ValueError(f"kind must be 'peak' or 'dip', got {kind!r}")
    if isinstance(data, ScanResult):
        z = np.asarray(getattr(data, field_name) if field_name != "abs"
                       else np.abs(data.values), dtype=float)
        x, y = data.grid.x.values, data.grid.y.values
    else:
        z = np.asarray(data, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
        y = np.zeros(1)
    if x is None:
        x = np.arange(z.shape[1], dtype=float)
    if y is None:
        y = np.arange(z.shape[0], dtype=float)
    x, y = np.asarray(x, float), np.asarray(y, float)
    raw = z.copy()
    if scale == "log":
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(z > 0, np.log10(np.where(z > 0, z, 1.0)), np.nan)
    elif scale != "linear":
        raise ValueError(f"scale must be 'linear' or 'log', got {scale!r}")
    if kind == "dip":
        z = -z
    if not np.any(np.isfinite(z)):
        return []
    ny, nx = z.shape

    def neighbours(i):
        iy, ix = divmod(i, nx)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if (dy or dx) and 0 <= iy + dy < ny and 0 <= ix + dx < nx:
                    yield (iy + dy) * nx + ix + dx

    finite = z[np.isfinite(z)]
    threshold = prominence if prominence is not None else rel_prominence * (finite.max() - finite.min())
    proms = _prominences(z, neighbours)
    feats = []
    for i, pr in proms.items():
        if pr <= threshold or pr <= 0:
            continue
        iy, ix = divmod(i, nx)
        px = _subpixel(z[iy], ix)
        py = _subpixel(z[:, ix], iy) if ny > 1 else 0.0
        feats.append(Feature(x=_coord(x, px), y=_coord(y, py) if ny > 1 else float(y[0]),
                             prominence=float(pr), value=float(raw[iy, ix])))
    feats.sort(key=lambda f: (-f.prominence, f.x, f.y))
    return feats

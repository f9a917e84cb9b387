"""Parameter extraction from transmission/reflection traces, flux arcs and
pump-probe maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .circuit import ej_from_f01
from .dynamics import linear_response
from .spectroscopy import OK, ScanResult, detect_features

LORENTZ_PARAMS = ("f01", "kappa_c", "kappa_i")
MIN_SPAN_LINEWIDTHS = 3.0
_TOL = 1e-14


class FitError(RuntimeError):
    """Base class for fit failures."""


class FitConvergenceError(FitError):
    """The optimizer hit its evaluation budget before converging."""


class InsufficientSpanError(FitError, ValueError):
    """The trace does not cover enough of the resonance to fit it."""


class DegenerateGeometryError(FitError, ValueError):
    """The data cannot separate the requested parameters."""


class NoPeakFoundError(FitError):
    """No pump-induced probe peak was detected in the map."""


@dataclass(frozen=True, eq=False)
class Trace:
    """Frequency trace of T or R.

    Attributes
    ----------
    x : ndarray
        Frequencies in GHz, strictly monotone.
    y : ndarray
        Power transmission or reflection coefficient, non-negative.
    sigma : ndarray or None
        Optional per-point standard deviation of ``y``.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if x.size < 2:
            raise ValueError("a trace needs at least two points")
        d = np.diff(x)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("trace frequencies must be strictly monotone")
        if not np.all(np.isfinite(y)) or np.any(y < 0):
            raise ValueError("trace values must be finite and non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != x.shape or not np.all(s > 0):
                raise ValueError("sigma must be positive and match the trace length")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.x.size

    @classmethod
    def from_csv(cls, path) -> "Trace":
        from .io import read_trace_csv

        return read_trace_csv(path)


@dataclass
class FitResult:
    """Least-squares estimate with its covariance.

    ``params`` maps names to values (f01 in GHz, kappa_c and kappa_i as
    kappa/2pi in MHz, dimensionless amplitude scales). ``covariance`` is
    ordered like ``params``.
    """

    params: dict
    covariance: np.ndarray
    residual_rms: float
    converged: bool
    iterations: int
    kind: str
    gradient_norm: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.params)

    @property
    def stderr(self) -> dict:
        sd = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        return dict(zip(self.params, sd))

    def __getitem__(self, name):
        return self.params[name]


# ------------------------------------------------------------ Lorentzians


def lineshape(f, f01: float, kappa_c: float, kappa_i: float, kind: str = "transmission"):
    """Power lineshape of the symmetric two-port resonator (T or R)."""
    _, T, R = linear_response(f, f01, kappa_c, kappa_i)
    if kind == "transmission":
        return T
    if kind == "reflection":
        return R
    raise ValueError(f"kind must be 'transmission' or 'reflection', got {kind!r}")


def _half_max_width(x: np.ndarray, s: np.ndarray) -> tuple[int, float]:
    """Peak index and full width at half maximum of a single peak ``s``."""
    i = int(np.argmax(s))
    half = s[i] / 2

    def crossing(step):
        j = i
        while 0 <= j + step < s.size:
            if s[j + step] <= half:
                a, b = s[j], s[j + step]
                return x[j] + (x[j + step] - x[j]) * (a - half) / (a - b)
            j += step
        return None

    lo, hi = crossing(-1), crossing(1)
    if lo is None or hi is None:
        raise InsufficientSpanError("trace does not reach half maximum on both sides of the peak")
    return i, abs(hi - lo)


def initial_guess(trace: Trace, kind: str) -> tuple[float, float, float]:
    """(f01, kappa_c, kappa_i) from the extremum and its half width.

    For transmission the peak height fixes 2 kappa_c/kappa, for reflection
    the dip depth fixes kappa_i/kappa.
    """
    x, y = trace.x, trace.y
    s = y if kind == "transmission" else 1.0 - y
    i, fwhm = _half_max_width(x, s)
    span = abs(x[-1] - x[0])
    if span < MIN_SPAN_LINEWIDTHS * fwhm:
        raise InsufficientSpanError(
            f"trace spans {span * 1e3:.3g} MHz, less than {MIN_SPAN_LINEWIDTHS:g} "
            f"linewidths of {fwhm * 1e3:.3g} MHz")
    kappa = fwhm * 1e3  # MHz
    if kind == "transmission":
        kc = min(math.sqrt(max(y[i], 0.0)), 1.0) * kappa / 2
        ki = kappa - 2 * kc
    else:
        ki = min(math.sqrt(max(y[i], 0.0)), 1.0) * kappa
        kc = (kappa - ki) / 2
    floor = 1e-3 * kappa
    return float(x[i]), max(kc, floor), max(ki, floor)


def _solve(residuals, p0, lower, upper, names, n_data, sigma_known, kind, max_nfev):
    p0 = np.clip(p0, lower, upper)
    res = least_squares(residuals, p0, bounds=(lower, upper), method="trf", jac="3-point",
                        x_scale="jac", ftol=_TOL, xtol=_TOL, gtol=_TOL, max_nfev=max_nfev)
    if res.status == 0:
        raise FitConvergenceError(f"no convergence after {res.nfev} evaluations: {res.message}")
    J = res.jac
    cov = np.linalg.pinv(J.T @ J)
    dof = n_data - len(p0)
    if not sigma_known:
        cov = cov * (2 * res.cost / dof if dof > 0 else np.inf)
    cov = (cov + cov.T) / 2
    grad = float(np.max(np.abs(J.T @ res.fun))) if res.fun.size else 0.0
    # first-order optimality in the optimizer's own scaled variables
    converged = bool(res.status > 0 and res.optimality <= 1e-8 * max(1.0, np.linalg.norm(res.fun)))
    return FitResult(
        params=dict(zip(names, map(float, res.x))),
        covariance=cov,
        residual_rms=float(np.sqrt(np.mean(res.fun**2))),
        converged=converged,
        iterations=int(res.nfev),
        kind=kind,
        gradient_norm=grad,
        message=str(res.message),
    )


def fit_lorentzian(trace: Trace, kind: str = "transmission", *, fit_amplitude: bool = False,
                   max_nfev: int = 2000) -> FitResult:
    """Fit resonance frequency and both rates to a T or R trace.

    Transmission and reflection each give two constraints (on-resonance
    depth and linewidth), which separate kappa_c and kappa_i given equal
    port couplings. ``fit_amplitude`` adds a free scale ``A`` multiplying
    the model; this is only identifiable for reflection (for transmission
    it trades off against kappa_c, use :func:`fit_transmission_reflection`).

    Raises
    ------
    InsufficientSpanError
        The trace covers fewer than three linewidths.
    FitConvergenceError
        The evaluation budget ran out.
    """
    if kind not in ("transmission", "reflection"):
        raise ValueError(f"kind must be 'transmission' or 'reflection', got {kind!r}")
    if fit_amplitude and kind == "transmission":
        raise ValueError("amplitude and kappa_c are degenerate in a transmission-only fit")
    f0, kc0, ki0 = initial_guess(trace, kind)
    x, y, sig = trace.x, trace.y, trace.sigma
    w = 1.0 / sig if sig is not None else 1.0

    def residuals(p):
        model = lineshape(x, p[0], p[1], p[2], kind)
        if fit_amplitude:
            model = p[3] * model
        return (model - y) * w

    names = LORENTZ_PARAMS + (("amplitude",) if fit_amplitude else ())
    p0 = [f0, kc0, ki0] + ([1.0] if fit_amplitude else [])
    lower = [min(x[0], x[-1]), 1e-9, 0.0] + ([0.0] if fit_amplitude else [])
    upper = [max(x[0], x[-1]), np.inf, np.inf] + ([np.inf] if fit_amplitude else [])
    return _solve(residuals, np.array(p0), lower, upper, names, x.size, sig is not None,
                  kind, max_nfev)


def fit_transmission_reflection(t_trace: Trace, r_trace: Trace, *, max_nfev: int = 2000) -> FitResult:
    """Joint fit of T and R sharing (f01, kappa_c, kappa_i).

    T carries a free amplitude scale ``amplitude_T`` that absorbs line
    calibration; R is taken as calibrated, so the depth of its dip fixes
    kappa_i/kappa.
    """
    f0, kc0, ki0 = initial_guess(r_trace, "reflection")
    wt = 1.0 / t_trace.sigma if t_trace.sigma is not None else 1.0
    wr = 1.0 / r_trace.sigma if r_trace.sigma is not None else 1.0

    def residuals(p):
        T = p[3] * lineshape(t_trace.x, p[0], p[1], p[2], "transmission")
        R = lineshape(r_trace.x, p[0], p[1], p[2], "reflection")
        return np.concatenate([(T - t_trace.y) * wt, (R - r_trace.y) * wr])

    lo = min(t_trace.x.min(), r_trace.x.min())
    hi = max(t_trace.x.max(), r_trace.x.max())
    sigma_known = t_trace.sigma is not None and r_trace.sigma is not None
    return _solve(residuals, np.array([f0, kc0, ki0, 1.0]), [lo, 1e-9, 0.0, 0.0],
                  [hi, np.inf, np.inf, np.inf], LORENTZ_PARAMS + ("amplitude_T",),
                  len(t_trace) + len(r_trace), sigma_known, "joint", max_nfev)


# -------------------------------------------------------------- flux arcs


@dataclass
class FluxArcResult:
    """SQUID parameters from f01 versus flux. Unpacks as ``(EJ_max, Ec, d)``."""

    EJ_max: float  # GHz
    Ec: float  # GHz
    d: float
    covariance: np.ndarray  # over the free parameters, in fit order
    residual_rms: float  # GHz
    Ec_fixed: bool

    def __iter__(self):
        return iter((self.EJ_max, self.Ec, self.d))


def flux_arc_model(flux, EJ_max: float, Ec: float, d: float = 0.0):
    """f01 (GHz) of the asymptotic transmon with a flux-tuned SQUID."""
    x = np.pi * np.asarray(flux, dtype=float)
    ej = EJ_max * np.sqrt(np.cos(x) ** 2 + d**2 * np.sin(x) ** 2)
    return np.sqrt(8 * ej * Ec) - Ec


def fit_flux_arc(points, Ec: float | None = None, d: float | None = None, *,
                 Ec_guess: float = 0.3, max_nfev: int = 5000) -> FluxArcResult:
    """Fit (EJ_max, Ec, d) to measured ``(flux, f01)`` pairs.

    ``Ec`` and ``d`` are free when left as None. The asymmetry is fitted as
    ``d**2`` so the symmetric case sits on a bound instead of at a zero of
    the gradient.

    Raises
    ------
    DegenerateGeometryError
        All points share one value of ``|cos(pi flux)|``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (flux, f01) pairs")
    if pts.shape[0] < 5:
        raise ValueError(f"need at least 5 points, got {pts.shape[0]}")
    flux, f = pts[:, 0], pts[:, 1]
    if np.ptp(flux) < 0.3:
        raise ValueError(f"points span {np.ptp(flux):.3g} flux quanta, need >= 0.3")
    c = np.abs(np.cos(np.pi * flux))
    if np.ptp(c) < 1e-9:
        raise DegenerateGeometryError("all points share one |cos(pi flux)| value")
    if np.any(f <= 0):
        raise ValueError("f01 values must be positive")

    ec0 = Ec if Ec is not None else Ec_guess
    i = int(np.argmax(c))
    ej0 = ej_from_f01(f[i], ec0) / max(c[i], 1e-3)
    res = _arc_solve(flux, f, ej0, ec0, Ec, d, max_nfev)
    if d is None and res[0].x[-1] < 1e-6:
        # the symmetric solution sits on the bound d = 0, which trust-region
        # steps approach only slowly; compare against it directly
        edge = _arc_solve(flux, f, ej0, ec0, Ec, 0.0, max_nfev)
        if edge[0].cost <= res[0].cost:
            res = edge
    sol, unpack, n_free = res
    dof = f.size - n_free
    cov = np.linalg.pinv(sol.jac.T @ sol.jac) * (2 * sol.cost / dof if dof > 0 else np.inf)
    EJ, ec, dd = unpack(sol.x)
    return FluxArcResult(float(EJ), float(ec), float(dd), (cov + cov.T) / 2,
                         float(np.sqrt(np.mean(sol.fun**2))), Ec is not None)


def _arc_solve(flux, f, ej0, ec0, Ec, d, max_nfev):
    names, p0, lower = ["EJ_max"], [ej0], [1e-9]
    if Ec is None:
        names.append("Ec")
        p0.append(ec0)
        lower.append(1e-9)
    if d is None:
        names.append("d2")
        p0.append(1e-2)
        lower.append(0.0)
    upper = [np.inf] * len(p0)
    if d is None:
        upper[-1] = 1.0 - 1e-12

    def unpack(p):
        vals = dict(zip(names, p))
        return (vals["EJ_max"], vals.get("Ec", Ec),
                math.sqrt(vals["d2"]) if d is None else d)

    def residuals(p):
        return flux_arc_model(flux, *unpack(p)) - f

    sol = least_squares(residuals, p0, bounds=(lower, upper), method="trf", jac="3-point",
                        x_scale="jac", ftol=_TOL, xtol=_TOL, gtol=_TOL, max_nfev=max_nfev)
    if sol.status == 0:
        raise FitConvergenceError(f"flux-arc fit did not converge: {sol.message}")
    return sol, unpack, len(p0)


# ------------------------------------------------------------- Kerr shift


@dataclass(frozen=True)
class KerrEstimate:
    """Charging energy read off a pump-probe map.

    ``delta_f`` is the raw f01 - f_peak; ``Ec`` equals it and is kept
    separate from ``configured_Ec`` (the value the map was simulated or
    configured with, if known) without reconciling the two.
    """

    Ec: float  # GHz
    uncertainty: float  # GHz, half a probe-grid step
    f_peak: float  # GHz
    f01: float  # GHz
    P1: float  # aW, pump row the peak was read from
    delta_f: float  # GHz
    configured_Ec: float | None = None


def extract_kerr(result: ScanResult, f01: float | None = None, *, contrast: float = 3.0,
                 rel_prominence: float = 0.05) -> KerrEstimate:
    """Kerr shift ``f01 - f_peak`` from a probe-frequency versus pump-power map.

    Every pump-on row is searched for probe peaks; a peak counts only if
    the pump raises T there by at least ``contrast`` over the pump-off row.
    The strongest such peak is used, with parabolic sub-grid refinement.
    The choice depends only on ratios and argmax, so it is unchanged by a
    uniform rescaling of T.

    Raises
    ------
    NoPeakFoundError
        No row contains a pump-induced peak.
    """
    f2 = result.grid.x.values
    P1 = result.grid.y.values
    if f01 is None:
        f01 = result.grid.fixed.get("f1_GHz", result.meta.get("f1"))
        if f01 is None:
            raise ValueError("pump frequency unknown; pass f01")
    T = np.where(result.status == OK, result.T, np.nan)
    off = np.flatnonzero(P1 == 0)
    T_off = T[off[0]] if off.size else None
    best = None
    for iy, p in enumerate(P1):
        if p == 0:
            continue
        row = T[iy]
        if not np.any(np.isfinite(row)):
            continue
        for feat in detect_features(row, "peak", x=f2, rel_prominence=rel_prominence):
            if T_off is not None:
                ix = int(np.argmin(np.abs(f2 - feat.x)))
                base = T_off[ix]
                if not (np.isfinite(base) and feat.value >= contrast * base):
                    continue
            if best is None or feat.value > best[0].value:
                best = (feat, p)
    if best is None:
        raise NoPeakFoundError("no pump-induced probe peak in any pump-on row")
    feat, p = best
    step = float(np.mean(np.abs(np.diff(f2)))) if f2.size > 1 else math.nan
    circuit = result.meta.get("circuit", {})
    return KerrEstimate(Ec=f01 - feat.x, uncertainty=step / 2, f_peak=feat.x, f01=float(f01),
                        P1=float(p), delta_f=f01 - feat.x, configured_Ec=circuit.get("Ec"))

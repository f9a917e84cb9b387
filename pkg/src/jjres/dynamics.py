"""Driven-dissipative dynamics of the junction resonator.

Internal units: time in ns, angular frequencies and rates in rad/ns. Public
helpers that report SI quantities say so in their names or docstrings.

Drive convention: a tone of power P at frequency f entering the left port
adds ``eps (a e^{i w t} + a^dag e^{-i w t})`` to H/hbar with
``eps = sqrt(kappa_L P / (h f))``; the matching input field is
``a_in = -i eps / sqrt(kappa_L)``. Output fields follow
``a_out,R = sqrt(kappa_R) <a>`` and ``a_out,L = a_in - sqrt(kappa_L) <a>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _backend
from ._lindblad_py import STATUS_MAX_STEPS, STATUS_OK, STATUS_STEP_UNDERFLOW, dp54_integrate
from .circuit import CONSTANTS, CircuitParams
from .spectrum import DEFAULT_FOCK_DIM, Operator, kerr_hamiltonian, kerr_levels, ladder_operators

TWO_PI = 2 * math.pi
NS = 1e-9


class SingularLiouvillianError(RuntimeError):
    """The steady-state linear system has no unique solution."""


class StiffnessError(RuntimeError):
    """The adaptive integrator could not make progress."""


class WindowTooShortError(ValueError):
    """A demodulation window covers too few periods of the target beat."""


class TruncationError(RuntimeError):
    """The Fock space could not be enlarged enough to hold the state."""


# ------------------------------------------------------------- model types


@dataclass(frozen=True)
class ResonatorModel:
    """Kerr-oscillator parameters seen by the dynamics engine.

    Anything with ``f01``, ``Ec``, ``kappa_c`` and ``kappa_i`` attributes
    (including :class:`~jjres.circuit.CircuitParams`) is accepted where a
    model is expected; this class additionally allows ``Ec = 0``, the
    linear resonator.
    """

    f01: float  # GHz
    Ec: float  # GHz
    kappa_c: float  # MHz
    kappa_i: float = 0.0  # MHz

    def __post_init__(self):
        if not self.f01 > 0:
            raise ValueError(f"f01 must be positive, got {self.f01}")
        if self.Ec < 0:
            raise ValueError(f"Ec must be non-negative, got {self.Ec}")
        if not self.kappa_c > 0:
            raise ValueError(f"kappa_c must be positive, got {self.kappa_c}")
        if self.kappa_i < 0:
            raise ValueError(f"kappa_i must be non-negative, got {self.kappa_i}")

    @classmethod
    def from_circuit(cls, p: CircuitParams) -> "ResonatorModel":
        return cls(p.f01, p.Ec, p.kappa_c, p.kappa_i)

    @property
    def kappa_total(self) -> float:
        return 2 * self.kappa_c + self.kappa_i


# ---------------------------------------------------------------- drive types


@dataclass(frozen=True)
class Tone:
    frequency: float  # GHz
    power: float  # aW
    port: str = "left"

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"tone frequency must be positive, got {self.frequency}")
        if self.power < 0:
            raise ValueError(f"tone power must be non-negative, got {self.power} aW")
        if self.port not in ("left", "right"):
            raise ValueError(f"port must be 'left' or 'right', got {self.port!r}")


@dataclass(frozen=True)
class DriveSpec:
    tones: tuple[Tone, ...]
    same_frequency: bool = False

    def __post_init__(self):
        tones = tuple(self.tones)
        object.__setattr__(self, "tones", tones)
        if not 1 <= len(tones) <= 2:
            raise ValueError(f"a drive holds one or two tones, got {len(tones)}")
        if len(tones) == 2 and tones[0].frequency == tones[1].frequency and not self.same_frequency:
            raise ValueError("two tones at the same frequency need same_frequency=True")

    @classmethod
    def single(cls, frequency: float, power: float) -> "DriveSpec":
        return cls((Tone(frequency, power),))

    @classmethod
    def pump_probe(cls, f1: float, P1: float, f2: float, P2: float,
                   same_frequency: bool = False) -> "DriveSpec":
        return cls((Tone(f1, P1), Tone(f2, P2)), same_frequency=same_frequency)

    @property
    def is_single(self) -> bool:
        return len(self.tones) == 1


@dataclass(frozen=True)
class SolverSettings:
    charge_cutoff: int = 20
    fock_dim: int = DEFAULT_FOCK_DIM
    max_fock_dim: int = 40
    fock_step: int = 2
    truncation_tol: float = 1e-6
    atol: float = 1e-8
    rtol: float = 0.0
    transient_kappa: float = 10.0  # transient cutoff in units of 1/kappa_total
    window_periods: int = 20
    samples_per_period: int = 16
    drift_tol: float = 1e-4
    max_transient_extensions: int = 3

    def __post_init__(self):
        if self.fock_dim < 3:
            raise ValueError(f"fock_dim must be >= 3, got {self.fock_dim}")
        if self.max_fock_dim < self.fock_dim:
            raise ValueError("max_fock_dim must be >= fock_dim")
        if self.window_periods < 2 or self.window_periods % 2:
            raise ValueError("window_periods must be an even integer >= 2")
        if self.samples_per_period < 4:
            raise ValueError("samples_per_period must be >= 4")


# ------------------------------------------------------------ rates and drive


def rates(p: CircuitParams) -> tuple[float, float, float]:
    """(kappa_L, kappa_R, kappa_i) in rad/ns."""
    kc = TWO_PI * p.kappa_c * 1e6 * NS
    return kc, kc, TWO_PI * p.kappa_i * 1e6 * NS


def kappa_total(p: CircuitParams) -> float:
    """Total energy decay rate in rad/ns."""
    return sum(rates(p))


def collapse_operators(p: CircuitParams, fock_dim: int) -> list[Operator]:
    """sqrt(kappa_L) a, sqrt(kappa_R) a, sqrt(kappa_i) a with rates in 1/ns."""
    if fock_dim < 3:
        raise ValueError(f"fock_dim must be >= 3, got {fock_dim}")
    a, _ = ladder_operators(fock_dim)
    return [math.sqrt(k) * a for k in rates(p)]


def drive_amplitude(P: float, f: float, kappa_c: float) -> float:
    """Drive strength eps in rad/s for power ``P`` (aW) at ``f`` (GHz).

    ``kappa_c`` is the input-port coupling kappa_c/2pi in MHz.
    """
    if P < 0:
        raise ValueError(f"power must be non-negative, got {P}")
    if not f > 0:
        raise ValueError(f"frequency must be positive, got {f}")
    photon_flux = P * 1e-18 / (CONSTANTS.h * f * 1e9)
    return math.sqrt(TWO_PI * kappa_c * 1e6 * photon_flux)


def linear_photon_number(P: float, f: float, kappa_c: float, kappa_i: float) -> float:
    """On-resonance photon number of the equivalent linear resonator."""
    kc = TWO_PI * kappa_c * 1e6
    k = TWO_PI * (2 * kappa_c + kappa_i) * 1e6
    return 4 * kc / k**2 * P * 1e-18 / (CONSTANTS.h * f * 1e9)


def linear_response(f, f01: float, kappa_c: float, kappa_i: float):
    """Closed-form two-port response of a linear resonator.

    ``f`` and ``f01`` in GHz, rates kappa/2pi in MHz. Returns ``(t, T, R)``
    (arrays if ``f`` is an array).
    """
    f = np.asarray(f, dtype=float)
    half = (2 * kappa_c + kappa_i) * 1e-3 / 2  # GHz
    denom = half + 1j * (f01 - f)
    t = kappa_c * 1e-3 / denom
    r = 1 - kappa_c * 1e-3 / denom
    return t, np.abs(t) ** 2, np.abs(r) ** 2


# ------------------------------------------------------------- Hamiltonians


def rotating_frame_hamiltonian(H_kerr: Operator, drive: DriveSpec, eps: float) -> Operator:
    """Single-tone Hamiltonian H/hbar (rad/ns) in the frame of the drive.

    ``H_kerr`` is the Fock-basis Kerr Hamiltonian H/h in GHz; ``eps`` the
    drive strength in rad/s.
    """
    if not drive.is_single:
        raise ValueError("rotating_frame_hamiltonian takes a single-tone drive")
    if H_kerr.basis != "fock":
        raise ValueError("expected a Fock-basis Hamiltonian")
    d = H_kerr.dim
    n = np.arange(d)
    levels = np.real(np.diag(H_kerr.data)) - drive.tones[0].frequency * n
    a, ad = ladder_operators(d)
    H = Operator(np.diag(TWO_PI * levels), "fock")
    return H + (eps * NS) * (a + ad)


def liouvillian(H: Operator, c_ops: Sequence[Operator]) -> np.ndarray:
    """Dense Lindblad generator acting on row-major vec(rho)."""
    d = H.dim
    eye = np.eye(d)
    L = -1j * (np.kron(H.data, eye) - np.kron(eye, H.data.T))
    for c in c_ops:
        C = c.data
        CdC = C.conj().T @ C
        L += np.kron(C, C.conj()) - 0.5 * np.kron(CdC, eye) - 0.5 * np.kron(eye, CdC.T)
    return L


# ----------------------------------------------------------- steady states


@dataclass(frozen=True)
class DensityMatrix:
    matrix: Operator
    time: float | None = None  # ns

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data))

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8,
                 pos_tol: float = 1e-8) -> None:
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > trace_tol:
            raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -pos_tol:
            raise ValueError("density matrix has negative eigenvalues")


@dataclass(frozen=True)
class SteadyStateResult:
    rho: DensityMatrix
    a_expect: complex
    n_expect: float
    residual: float

    @property
    def fock_dim(self) -> int:
        return self.rho.matrix.dim

    @property
    def top_population(self) -> float:
        return float(self.rho.populations()[-1])


def steady_state(H: Operator, c_ops: Sequence[Operator]) -> SteadyStateResult:
    """Null vector of the Lindblad generator, normalised to unit trace.

    One row of the vectorised generator is replaced by the trace condition
    and the dense system is solved directly.
    """
    d = H.dim
    L = liouvillian(H, c_ops)
    M = L.copy()
    M[0, :] = np.eye(d).ravel()
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularLiouvillianError(f"steady-state system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularLiouvillianError("steady-state solve produced non-finite values")
    # residual relative to the generator norm
    residual = float(np.linalg.norm(L @ x) / np.linalg.norm(L))
    if residual > 1e-10:
        raise SingularLiouvillianError(f"steady-state residual {residual:.2e} too large")
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    a, ad = ladder_operators(d)
    return SteadyStateResult(
        rho=DensityMatrix(Operator(rho, "fock")),
        a_expect=complex(np.trace(a.data @ rho)),
        n_expect=float(np.real(np.trace(ad.data @ a.data @ rho))),
        residual=residual,
    )


def _escalating_dims(settings: SolverSettings):
    d = settings.fock_dim
    while d <= settings.max_fock_dim:
        yield d
        d += settings.fock_step


def single_tone_steady_state(p: CircuitParams, tone: Tone,
                             settings: SolverSettings = SolverSettings()) -> SteadyStateResult:
    """Steady state under one tone, enlarging the Fock space until the top
    level holds less than ``settings.truncation_tol`` population."""
    eps = drive_amplitude(tone.power, tone.frequency, p.kappa_c)
    drive = DriveSpec((tone,))
    for d in _escalating_dims(settings):
        H = rotating_frame_hamiltonian(kerr_hamiltonian(p.f01, p.Ec, d), drive, eps)
        ss = steady_state(H, collapse_operators(p, d))
        if ss.top_population < settings.truncation_tol:
            return ss
    raise TruncationError(
        f"top-level population {ss.top_population:.2e} at fock_dim={d} exceeds "
        f"{settings.truncation_tol:g}"
    )


def transmission(ss: SteadyStateResult, tone: Tone, p: CircuitParams) -> tuple[complex, float, float]:
    """Transmission amplitude and power coefficients (t, T, R) of a single tone."""
    if not tone.power > 0:
        raise ValueError("transmission is undefined at zero input power")
    kL, kR, _ = rates(p)
    eps = drive_amplitude(tone.power, tone.frequency, p.kappa_c) * NS
    a = ss.a_expect
    t = 1j * math.sqrt(kL * kR) * a / eps
    r = 1 - 1j * kL * a / eps
    return t, abs(t) ** 2, abs(r) ** 2


def output_power(a_amplitude: complex, f: float, p: CircuitParams) -> float:
    """Coherent power (aW) leaving the right port at ``f`` (GHz)."""
    kR = TWO_PI * p.kappa_c * 1e6
    return kR * CONSTANTS.h * f * 1e9 * abs(a_amplitude) ** 2 * 1e18


# ------------------------------------------------------------ time domain


@dataclass(frozen=True)
class DrivenKerrModel:
    """Kerr oscillator with up to two tones, in the frame rotating at tone 1.

    H/hbar = diag(energies) + g(t) a^dag + conj(g(t)) a with
    ``g(t) = eps1 + eps2 exp(-i beat t)``; collapse sqrt(kappa) a.
    All quantities in rad/ns.
    """

    energies: np.ndarray
    kappa: float
    eps1: complex
    eps2: complex = 0j
    beat: float = 0.0
    frame_frequency: float = 0.0  # GHz

    @property
    def fock_dim(self) -> int:
        return len(self.energies)

    def hamiltonian(self, t: float) -> np.ndarray:
        d = self.fock_dim
        a, ad = (op.data for op in ladder_operators(d))
        g = self.eps1 + self.eps2 * np.exp(-1j * self.beat * t)
        return np.diag(self.energies).astype(complex) + g * ad + np.conj(g) * a

    __call__ = hamiltonian

    def collapse(self) -> list[np.ndarray]:
        a, _ = ladder_operators(self.fock_dim)
        return [math.sqrt(self.kappa) * a.data]


def driven_kerr_model(p: CircuitParams, drive: DriveSpec, fock_dim: int,
                      probe_phase: float = 0.0) -> DrivenKerrModel:
    """Model for ``drive`` in the frame rotating at the first tone's frequency."""
    f1 = drive.tones[0].frequency
    n = np.arange(fock_dim)
    energies = TWO_PI * (kerr_levels(p.f01, p.Ec, fock_dim) - f1 * n)
    eps1 = drive_amplitude(drive.tones[0].power, f1, p.kappa_c) * NS
    eps2, beat = 0j, 0.0
    if not drive.is_single:
        f2 = drive.tones[1].frequency
        eps2 = drive_amplitude(drive.tones[1].power, f2, p.kappa_c) * NS * np.exp(1j * probe_phase)
        beat = TWO_PI * (f2 - f1)
    return DrivenKerrModel(energies=energies, kappa=kappa_total(p), eps1=complex(eps1),
                           eps2=complex(eps2), beat=beat, frame_frequency=f1)


@dataclass
class Trajectory:
    t: np.ndarray  # ns
    a: np.ndarray  # <a>(t) in the rotating frame
    populations: np.ndarray  # (len(t), fock_dim)
    rho_final: np.ndarray
    frame_frequency: float  # GHz
    stats: dict = field(default_factory=dict)


def _dense_rhs(H: Callable, c_ops: Sequence[np.ndarray], d: int):
    cs = [np.asarray(c, dtype=complex) for c in c_ops]
    cdc = sum((c.conj().T @ c for c in cs), np.zeros((d, d), dtype=complex))

    def rhs(t, y):
        r = y.reshape(d, d)
        Ht = np.asarray(H(t), dtype=complex)
        out = -1j * (Ht @ r - r @ Ht) - 0.5 * (cdc @ r + r @ cdc)
        for c in cs:
            out += c @ r @ c.conj().T
        return out.ravel()

    return rhs


def time_evolve(H, rho0, t_span: tuple[float, float], t_eval=None, *,
                c_ops: Sequence | None = None, atol: float = 1e-8, rtol: float = 0.0,
                h0: float = 1e-3, backend: str | None = None) -> Trajectory:
    """Integrate the master equation over ``t_span`` (ns).

    ``H`` is either a :class:`DrivenKerrModel` (fast path through the active
    kernel backend) or any callable ``t -> H(t)/hbar`` in rad/ns, in which
    case ``c_ops`` must be given. ``<a>`` and the level populations are
    sampled at ``t_eval``.
    """
    rho0 = np.asarray(getattr(rho0, "data", rho0), dtype=complex)
    d = rho0.shape[0]
    t0, t1 = map(float, t_span)
    t_eval = np.array([t1] if t_eval is None else t_eval, dtype=float)
    if t_eval.size and (t_eval.min() < t0 or t_eval.max() > t1):
        raise ValueError("t_eval must lie inside t_span")
    if isinstance(H, DrivenKerrModel):
        if H.fock_dim != d:
            raise ValueError("rho0 dimension does not match the model")
        kernel = _backend.get_evolve_kerr(backend)
        rho1, a_s, pops, raw = kernel(H.energies, H.kappa, H.eps1, H.eps2, H.beat,
                                      rho0, t0, t1, t_eval, atol, rtol, h0)
        frame = H.frame_frequency
    else:
        if c_ops is None:
            raise ValueError("c_ops are required for a generic Hamiltonian callback")
        a_op = ladder_operators(d)[0].data
        diag = np.arange(d) * (d + 1)

        def observe(y):
            return np.concatenate([[np.sum(a_op * y.reshape(d, d).T)], y[diag]])

        y1, samples, raw = dp54_integrate(
            _dense_rhs(H, [getattr(c, "data", c) for c in c_ops], d), observe,
            rho0.ravel(), t0, t1, t_eval, atol, rtol, h0, 1e-12, 10_000_000,
        )
        rho1, a_s, pops = y1.reshape(d, d), samples[:, 0], samples[:, 1:].real
        frame = 0.0
    accepted, rejected, n_rhs, status, last_h = raw
    if status == STATUS_STEP_UNDERFLOW:
        raise StiffnessError(f"step size underflow at fock_dim={d} (last h={last_h:.2e} ns)")
    if status == STATUS_MAX_STEPS:
        raise StiffnessError(f"step budget exhausted after {accepted + rejected} steps")
    assert status == STATUS_OK
    trace_error = float(abs(np.trace(rho1) - 1))
    return Trajectory(t=t_eval, a=np.asarray(a_s), populations=np.asarray(pops),
                      rho_final=rho1, frame_frequency=frame,
                      stats={"accepted": accepted, "rejected": rejected, "n_rhs": n_rhs,
                             "trace_error": trace_error})


def demodulate(traj: Trajectory, f_target: float, window: tuple[float, float] | None = None,
               min_periods: int = 20) -> complex:
    """Fourier component of <a>(t) at ``f_target`` (GHz, lab frame).

    Projects onto ``exp(-i 2 pi (f_target - f_frame) t)`` over the largest
    whole number of target periods inside ``window``; samples must be
    uniformly spaced. ``window`` is half-open, ``[start, stop)``, so a window
    spanning whole beat periods averages exactly over them. A target equal to
    the frame frequency is a plain mean over the window.
    """
    t, a = traj.t, traj.a
    if window is not None:
        tol = 1e-9 * max(1.0, abs(window[1]))
        mask = (t >= window[0] - tol) & (t < window[1] - tol)
        t, a = t[mask], a[mask]
    if t.size < 2:
        raise WindowTooShortError("window holds fewer than two samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("demodulation needs uniformly spaced samples")
    df = f_target - traj.frame_frequency
    span = t[-1] - t[0] + dt
    if abs(df) < 1e-12:
        return complex(np.mean(a))
    periods = math.floor(span * abs(df) + 1e-9)
    if periods < min_periods:
        raise WindowTooShortError(
            f"window covers {span * abs(df):.2f} periods of the {df * 1e3:.1f} MHz beat, "
            f"need >= {min_periods}"
        )
    n_use = int(round(periods / abs(df) / dt))
    n_use = min(n_use, t.size)
    ts, as_ = t[:n_use], a[:n_use]
    return complex(np.mean(as_ * np.exp(1j * TWO_PI * df * ts)))


# -------------------------------------------------------- two-tone engine


def probe_linear_response(model: DrivenKerrModel, rho_pump: np.ndarray) -> np.ndarray:
    """First-order probe correction ``rho_plus`` (coefficient of e^{-i beat t}).

    Solves (L_pump + i beat) rho_plus = i eps2 [a^dag, rho_pump].
    """
    d = model.fock_dim
    H0 = Operator(model.hamiltonian(0.0) - _probe_part(model, 0.0), "fock")
    c_ops = [Operator(c, "fock") for c in model.collapse()]
    L = liouvillian(H0, c_ops)
    ad = ladder_operators(d)[1].data
    src = 1j * model.eps2 * (ad @ rho_pump - rho_pump @ ad)
    x = np.linalg.solve(L + 1j * model.beat * np.eye(d * d), src.ravel())
    return x.reshape(d, d)


def _probe_part(model: DrivenKerrModel, t: float) -> np.ndarray:
    a, ad = (op.data for op in ladder_operators(model.fock_dim))
    g2 = model.eps2 * np.exp(-1j * model.beat * t)
    return g2 * ad + np.conj(g2) * a


@dataclass(frozen=True)
class ProbeResult:
    amplitude: complex  # probe component of <a>
    transmission: float  # probe output power / probe input power
    power_out: float  # aW
    drift: float  # normalised change of the amplitude between window halves
    converged: bool
    fock_dim: int
    top_population: float
    linear_amplitude: complex  # first-order-in-probe estimate used as warm start
    n_rhs: int = 0
    t: complex = complex("nan")  # probe transmission amplitude


def two_tone_response(p: CircuitParams, drive: DriveSpec,
                      settings: SolverSettings = SolverSettings(),
                      backend: str | None = None) -> ProbeResult:
    """Probe-channel response under a pump (tone 1) and a probe (tone 2).

    The pump-only steady state plus the first-order probe correction seeds
    the integration; after a transient of ``transient_kappa / kappa_total``
    the probe amplitude is demodulated over ``window_periods`` beat periods.
    The transient is extended while the two window halves disagree by more
    than ``drift_tol`` (relative to the natural probe amplitude 2 eps2/kappa),
    and the Fock space grows while the top level exceeds ``truncation_tol``.
    """
    if drive.is_single:
        raise ValueError("two_tone_response needs a pump and a probe tone")
    pump, probe = drive.tones
    if probe.power == 0:
        return ProbeResult(0j, math.nan, 0.0, 0.0, True, settings.fock_dim, 0.0, 0j)
    if pump.frequency == probe.frequency:
        return _same_frequency_response(p, drive, settings)

    f_beat = probe.frequency - pump.frequency
    period = 1 / abs(f_beat)
    kappa = kappa_total(p)
    n_samp = settings.window_periods * settings.samples_per_period
    last = None
    for d in _escalating_dims(settings):
        model = driven_kerr_model(p, drive, d)
        pump_ss = steady_state(
            Operator(model.hamiltonian(0.0) - _probe_part(model, 0.0), "fock"),
            [Operator(c, "fock") for c in model.collapse()],
        )
        rho_pump = pump_ss.rho.data
        if rho_pump[-1, -1].real >= settings.truncation_tol:
            last = (d, rho_pump[-1, -1].real)
            continue
        rho_plus = probe_linear_response(model, rho_pump)
        a_op = ladder_operators(d)[0].data
        a_lin = complex(np.trace(a_op @ rho_plus))
        rho0 = rho_pump + rho_plus + rho_plus.conj().T
        scale = 2 * abs(model.eps2) / kappa

        t_start = 0.0
        transient = settings.transient_kappa / kappa
        n_rhs = 0
        for _ in range(settings.max_transient_extensions + 1):
            t_a = t_start + transient
            t_b = t_a + settings.window_periods * period
            t_eval = t_a + np.arange(n_samp + 1) * (period / settings.samples_per_period)
            t_eval[-1] = t_b
            traj = time_evolve(model, rho0, (t_start, t_b), t_eval,
                               atol=settings.atol, rtol=settings.rtol, backend=backend)
            n_rhs += traj.stats["n_rhs"]
            half = t_a + settings.window_periods // 2 * period
            amp = demodulate(traj, probe.frequency, (t_a, t_b), settings.window_periods)
            a1 = demodulate(traj, probe.frequency, (t_a, half), settings.window_periods // 2)
            a2 = demodulate(traj, probe.frequency, (half, t_b), settings.window_periods // 2)
            drift = abs(a1 - a2) / scale
            if drift < settings.drift_tol:
                break
            rho0, t_start = traj.rho_final, t_b
        top = float(traj.populations[:, -1].max())
        if top >= settings.truncation_tol:
            last = (d, top)
            continue
        kc = TWO_PI * p.kappa_c * 1e6 * NS
        T = kc * kc * abs(amp) ** 2 / abs(model.eps2) ** 2
        return ProbeResult(
            amplitude=amp, transmission=T, power_out=output_power(amp, probe.frequency, p),
            drift=drift, converged=drift < settings.drift_tol, fock_dim=d,
            top_population=top, linear_amplitude=a_lin, n_rhs=n_rhs,
            t=complex(1j * kc * amp / model.eps2),
        )
    d, top = last
    raise TruncationError(f"top-level population {top:.2e} at fock_dim={d} "
                          f"exceeds {settings.truncation_tol:g}")


def _same_frequency_response(p: CircuitParams, drive: DriveSpec,
                             settings: SolverSettings) -> ProbeResult:
    # Synchronised tones at one frequency add coherently; report the total
    # output field normalised to the probe power.
    pump, probe = drive.tones
    eps = drive_amplitude(pump.power, pump.frequency, p.kappa_c) + \
        drive_amplitude(probe.power, probe.frequency, p.kappa_c)
    P_eff = eps**2 * CONSTANTS.h * pump.frequency * 1e9 / (TWO_PI * p.kappa_c * 1e6) * 1e18
    ss = single_tone_steady_state(p, Tone(pump.frequency, P_eff), settings)
    eps2 = drive_amplitude(probe.power, probe.frequency, p.kappa_c) * NS
    kc = TWO_PI * p.kappa_c * 1e6 * NS
    amp = ss.a_expect
    return ProbeResult(amp, kc * kc * abs(amp) ** 2 / eps2**2,
                       output_power(amp, probe.frequency, p), 0.0, True,
                       ss.fock_dim, ss.top_population, amp, t=complex(1j * kc * amp / eps2))

"""Pure-numpy implementation of the time-domain kernels.

Mirrors ``_lindblad_ext.pyx`` step for step: Dormand-Prince 5(4) with a
max-norm error controller and the 4th-order free interpolant for sampling
observables between accepted steps.
"""
from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def dp54_integrate(rhs, observe, y0, t0, t1, t_out, atol, rtol, h0, h_min, max_steps):
    """Integrate ``dy/dt = rhs(t, y)`` from ``t0`` to ``t1``.

    ``observe`` maps a state (or a stage derivative) to a 1-d complex vector
    and must be linear; it is sampled at every time in ``t_out`` through the
    dense-output polynomial.

    Returns ``(y1, samples, stats)`` with ``stats = (accepted, rejected,
    n_rhs, status, last_h)``.
    """
    y = np.array(y0, dtype=complex)
    t_out = np.asarray(t_out, dtype=float)
    n_obs = observe(y).size
    samples = np.zeros((t_out.size, n_obs), dtype=complex)
    idx = 0
    while idx < t_out.size and t_out[idx] <= t0:
        samples[idx] = observe(y)
        idx += 1

    t = t0
    h = h0
    k = [None] * 7
    k[0] = rhs(t, y)
    n_rhs = 1
    accepted = rejected = 0
    status = STATUS_OK
    prev_rejected = False
    while t < t1:
        if accepted + rejected >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < h_min:
            status = STATUS_STEP_UNDERFLOW
            break
        if t + h > t1:
            h = t1 - t
        for s in range(1, 6):
            dy = sum(a * k[j] for j, a in enumerate(_A[s]))
            k[s] = rhs(t + _C[s] * h, y + h * dy)
        y_new = y + h * sum(b * k[j] for j, b in enumerate(_B) if b != 0.0)
        k[6] = rhs(t + h, y_new)
        n_rhs += 6
        err_vec = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            t_new = t + h
            if idx < t_out.size and t_out[idx] <= t_new:
                obs_y = observe(y)
                obs_k = np.array([observe(kk) for kk in k])
                while idx < t_out.size and t_out[idx] <= t_new:
                    theta = (t_out[idx] - t) / h
                    powers = np.array([theta, theta**2, theta**3, theta**4])
                    samples[idx] = obs_y + h * (_P @ powers) @ obs_k
                    idx += 1
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err ** -0.2)
            if prev_rejected:
                factor = min(factor, 1.0)
            t = t_new
            y = y_new
            k[0] = k[6]
            accepted += 1
            prev_rejected = False
            h *= factor
        else:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            rejected += 1
            prev_rejected = True
    return y, samples, (accepted, rejected, n_rhs, status, h)


def kerr_rhs_factory(energies, kappa, eps1, eps2, beat):
    """Lindblad right-hand side for a driven Kerr oscillator, flattened state.

    H/hbar = diag(energies) + g(t) a^dag + conj(g(t)) a with
    g(t) = eps1 + eps2 exp(-i beat t); one collapse channel sqrt(kappa) a.
    All quantities in rad/ns.
    """
    energies = np.asarray(energies, dtype=float)
    d = energies.size
    sq = np.sqrt(np.arange(d, dtype=float))
    dE = energies[:, None] - energies[None, :]
    mn = np.add.outer(np.arange(d), np.arange(d)).astype(float)
    decay = -1j * dE - 0.5 * kappa * mn
    feed = kappa * np.outer(sq[1:], sq[1:])
    col = sq[:, None]
    row = sq[None, :]

    def rhs(t, y):
        r = y.reshape(d, d)
        g = eps1 + eps2 * np.exp(-1j * beat * t) if eps2 != 0 else eps1 + 0j
        gc = np.conj(g)
        out = decay * r
        out[:-1, :-1] += feed * r[1:, 1:]
        comm = np.zeros_like(r)
        comm[1:, :] += g * col[1:] * r[:-1, :]
        comm[:-1, :] += gc * col[1:] * r[1:, :]
        comm[:, :-1] -= g * row[:, 1:] * r[:, 1:]
        comm[:, 1:] -= gc * row[:, 1:] * r[:, :-1]
        out -= 1j * comm
        return out.ravel()

    return rhs


def kerr_observer(d):
    sq = np.sqrt(np.arange(1, d, dtype=float))
    lower = (np.arange(1, d) * d + np.arange(d - 1))
    diag = np.arange(d) * (d + 1)

    def observe(y):
        out = np.empty(d + 1, dtype=complex)
        out[0] = np.dot(sq, y[lower])
        out[1:] = y[diag]
        return out

    return observe


def evolve_kerr(energies, kappa, eps1, eps2, beat, rho0, t0, t1, t_out,
                atol=1e-8, rtol=0.0, h0=1e-3, h_min=1e-12, max_steps=10_000_000):
    """Time-domain evolution of the driven Kerr oscillator.

    Returns ``(rho1, a_samples, pops_samples, stats)``.
    """
    energies = np.ascontiguousarray(energies, dtype=float)
    d = energies.size
    rhs = kerr_rhs_factory(energies, float(kappa), complex(eps1), complex(eps2), float(beat))
    y1, samples, stats = dp54_integrate(
        rhs, kerr_observer(d), np.asarray(rho0, dtype=complex).ravel(), float(t0), float(t1),
        t_out, atol, rtol, h0, h_min, max_steps,
    )
    return y1.reshape(d, d), samples[:, 0].copy(), samples[:, 1:].real.copy(), stats

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-domain kernel for the driven Kerr oscillator.

Same algorithm and signature as ``_lindblad_py.evolve_kerr``; the Lindblad
generator is evaluated element-wise using the banded structure of a and
a^dag instead of dense matrix products.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmax, fmin, pow, cos, sin

cnp.import_array()

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0

# Dormand-Prince 5(4) tableau
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = -71.0 / 57600, E3 = 71.0 / 16695, E4 = -71.0 / 1920, E5 = 17253.0 / 339200, E6 = -22.0 / 525, E7 = 1.0 / 40

cdef double[7][4] P = [
    [1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799],
    [0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072],
    [0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632],
    [0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844],
    [0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423],
]


cdef inline void kerr_rhs(int d, double t, const double complex* r, double complex* out,
                          const double* E, const double* sq, double kappa,
                          double complex eps1, double complex eps2, double beat) noexcept nogil:
    cdef double complex g, gc, acc, val
    cdef int m, n
    cdef double phase = -beat * t
    g = eps1 + eps2 * (cos(phase) + 1j * sin(phase))
    gc = g.conjugate()
    for m in range(d):
        for n in range(d):
            acc = (E[m] - E[n]) * r[m * d + n]
            if m > 0:
                acc = acc + g * sq[m] * r[(m - 1) * d + n]
            if m < d - 1:
                acc = acc + gc * sq[m + 1] * r[(m + 1) * d + n]
            if n < d - 1:
                acc = acc - g * sq[n + 1] * r[m * d + n + 1]
            if n > 0:
                acc = acc - gc * sq[n] * r[m * d + n - 1]
            val = -1j * acc - 0.5 * kappa * (m + n) * r[m * d + n]
            if m < d - 1 and n < d - 1:
                val = val + kappa * sq[m + 1] * sq[n + 1] * r[(m + 1) * d + n + 1]
            out[m * d + n] = val


cdef inline void observe(int d, const double complex* y, const double* sq,
                         double complex* obs) noexcept nogil:
    cdef int m
    cdef double complex acc = 0
    for m in range(d - 1):
        acc = acc + sq[m + 1] * y[(m + 1) * d + m]
    obs[0] = acc
    for m in range(d):
        obs[1 + m] = y[m * (d + 1)]


def evolve_kerr(energies, double kappa, double complex eps1, double complex eps2, double beat,
                rho0, double t0, double t1, t_out,
                double atol=1e-8, double rtol=0.0, double h0=1e-3, double h_min=1e-12,
                long max_steps=10_000_000):
    """Time-domain evolution of the driven Kerr oscillator.

    Returns ``(rho1, a_samples, pops_samples, stats)`` where ``stats`` is
    ``(accepted, rejected, n_rhs, status, last_h)``.
    """
    cdef double[::1] E = np.ascontiguousarray(energies, dtype=np.float64)
    cdef int d = E.shape[0]
    cdef int nn = d * d
    cdef double[::1] sq = np.sqrt(np.arange(d, dtype=np.float64))
    cdef double complex[::1] y = np.array(rho0, dtype=np.complex128).ravel().copy()
    cdef double complex[::1] y_new = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] tmp = np.empty(nn, dtype=np.complex128)
    cdef double complex[:, ::1] k = np.empty((7, nn), dtype=np.complex128)
    cdef double[::1] tout = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef int n_out = tout.shape[0]
    samples_np = np.zeros((n_out, d + 1), dtype=np.complex128)
    cdef double complex[:, ::1] samples = samples_np
    cdef double complex[:, ::1] obs_k = np.empty((7, d + 1), dtype=np.complex128)
    cdef double complex[::1] obs_y = np.empty(d + 1, dtype=np.complex128)

    cdef double t = t0, h = h0, t_new, err, sc, e_abs, factor, theta, th, w
    cdef double bw[7]
    cdef long accepted = 0, rejected = 0, n_rhs = 1
    cdef int status = 0, idx = 0, i, s, j, prev_rejected = 0
    cdef double complex* kp = &k[0, 0]

    with nogil:
        while idx < n_out and tout[idx] <= t0:
            observe(d, &y[0], &sq[0], &samples[idx, 0])
            idx += 1
        kerr_rhs(d, t, &y[0], &k[0, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
        while t < t1:
            if accepted + rejected >= max_steps:
                status = 2
                break
            if h < h_min:
                status = 1
                break
            if t + h > t1:
                h = t1 - t
            for i in range(nn):
                tmp[i] = y[i] + h * A21 * kp[i]
            kerr_rhs(d, t + C2 * h, &tmp[0], &k[1, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            for i in range(nn):
                tmp[i] = y[i] + h * (A31 * kp[i] + A32 * k[1, i])
            kerr_rhs(d, t + C3 * h, &tmp[0], &k[2, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            for i in range(nn):
                tmp[i] = y[i] + h * (A41 * kp[i] + A42 * k[1, i] + A43 * k[2, i])
            kerr_rhs(d, t + C4 * h, &tmp[0], &k[3, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            for i in range(nn):
                tmp[i] = y[i] + h * (A51 * kp[i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
            kerr_rhs(d, t + C5 * h, &tmp[0], &k[4, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            for i in range(nn):
                tmp[i] = y[i] + h * (A61 * kp[i] + A62 * k[1, i] + A63 * k[2, i]
                                     + A64 * k[3, i] + A65 * k[4, i])
            kerr_rhs(d, t + h, &tmp[0], &k[5, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            for i in range(nn):
                y_new[i] = y[i] + h * (B1 * kp[i] + B3 * k[2, i] + B4 * k[3, i]
                                       + B5 * k[4, i] + B6 * k[5, i])
            kerr_rhs(d, t + h, &y_new[0], &k[6, 0], &E[0], &sq[0], kappa, eps1, eps2, beat)
            n_rhs += 6
            err = 0.0
            for i in range(nn):
                e_abs = abs(h * (E1 * kp[i] + E3 * k[2, i] + E4 * k[3, i] + E5 * k[4, i]
                                 + E6 * k[5, i] + E7 * k[6, i]))
                sc = atol + rtol * fmax(abs(y[i]), abs(y_new[i]))
                err = fmax(err, e_abs / sc)
            if err <= 1.0:
                t_new = t + h
                if idx < n_out and tout[idx] <= t_new:
                    observe(d, &y[0], &sq[0], &obs_y[0])
                    for s in range(7):
                        observe(d, &k[s, 0], &sq[0], &obs_k[s, 0])
                    while idx < n_out and tout[idx] <= t_new:
                        theta = (tout[idx] - t) / h
                        for s in range(7):
                            th = theta
                            w = 0.0
                            for j in range(4):
                                w = w + P[s][j] * th
                                th = th * theta
                            bw[s] = w
                        for j in range(d + 1):
                            samples[idx, j] = obs_y[j]
                            for s in range(7):
                                samples[idx, j] = samples[idx, j] + h * bw[s] * obs_k[s, j]
                        idx += 1
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = fmin(MAX_FACTOR, SAFETY * pow(err, -0.2))
                if prev_rejected:
                    factor = fmin(factor, 1.0)
                t = t_new
                for i in range(nn):
                    y[i] = y_new[i]
                    kp[i] = k[6, i]
                accepted += 1
                prev_rejected = 0
                h = h * factor
            else:
                h = h * fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
                rejected += 1
                prev_rejected = 1

    rho1 = np.asarray(y).reshape(d, d).copy()
    return (rho1, samples_np[:, 0].copy(), samples_np[:, 1:].real.copy(),
            (accepted, rejected, n_rhs, status, h))

"""Compare the compiled and pure-numpy time-domain kernels.

Runs the driven Kerr-oscillator integration used by every two-tone cell at
several Fock dimensions and reports wall time, speed-up and the largest
difference in the sampled <a>(t).

    python benchmarks/bench_kernels.py [--dims 6 10 16] [--duration 300] [--repeat 3]
"""
import argparse
import time

import numpy as np

from jjres import _backend
from jjres.circuit import REFERENCE_DEVICE
from jjres.dynamics import DriveSpec, driven_kerr_model


def _case(d, duration):
    p = REFERENCE_DEVICE
    drive = DriveSpec.pump_probe(p.f01, 450.0, p.f01 - p.Ec, 27.0)
    m = driven_kerr_model(p, drive, d)
    rho0 = np.zeros((d, d), complex)
    rho0[0, 0] = 1
    t_out = np.linspace(0, duration, 2001)
    return (m.energies, m.kappa, m.eps1, m.eps2, m.beat, rho0, 0.0, duration, t_out)


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[6, 10, 16])
    ap.add_argument("--duration", type=float, default=300.0, help="integration time in ns")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _backend.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python kernel is available")
    print(f"{'fock_dim':>8} {'steps':>7} {'python_s':>10} {'compiled_s':>11} "
          f"{'speedup':>8} {'max_diff':>10}")
    for d in args.dims:
        case = _case(d, args.duration)
        t_py, out_py = _time(_backend.get_evolve_kerr("python"), case, args.repeat)
        steps = out_py[3][0]
        if "compiled" in backends:
            t_c, out_c = _time(_backend.get_evolve_kerr("compiled"), case, args.repeat)
            diff = float(np.max(np.abs(out_py[1] - out_c[1])))
            print(f"{d:>8} {steps:>7} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>8.1f} {diff:>10.2e}")
        else:
            print(f"{d:>8} {steps:>7} {t_py:>10.4f} {'-':>11} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()

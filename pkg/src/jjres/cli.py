"""Command-line entry point.

``jjres <subcommand> --config run.json [--out DIR] [--threads N] [--seed S]``

Exit codes: 0 success, 1 configuration error, 2 fatal solver error,
3 I/O error. Flagged map cells are reported in the manifest but are not
fatal. The default thread count comes from ``JJRES_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .circuit import derived_quantities
from .config import ConfigError, RunConfig, config_from_dict, parse_config
from .dynamics import SingularLiouvillianError, StiffnessError, TruncationError
from .fit import (FitError, NoPeakFoundError, Trace, extract_kerr, fit_lorentzian,
                  fit_transmission_reflection, lineshape)
from .io import fit_report, read_trace_csv, write_csv, write_lines_csv, write_table
from .spectroscopy import (conservation_lines, energy_diagram, low_power_slope, model_spectrum,
                           one_tone_map, power_power_map, saturation_curve, saturation_plateau,
                           two_tone_map)
from .spectrum import asymptotic_spectrum, cpb_spectrum, kerr_levels

log = logging.getLogger("jjres")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
THREADS_ENV = "JJRES_THREADS"
SUBCOMMANDS = ("spectrum", "onetone", "saturation", "twotone", "powermap", "diagram", "fit")
SOLVER_ERRORS = (SingularLiouvillianError, StiffnessError, TruncationError, FitError,
                 np.linalg.LinAlgError)


class _InputError(OSError):
    """A data file named in the configuration could not be read."""


@dataclass
class RunManifest:
    config_hash: str
    version: str
    subcommand: str
    started_utc: str
    finished_utc: str = ""
    n_failed_cells: int = 0
    files: list = field(default_factory=list)
    backend: str = _backend.BACKEND
    threads: int = 1
    seed: int = 0
    exit_code: int = 0
    message: str = ""

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Writer:
    """Creates output files under one directory and records their names."""

    def __init__(self, directory: Path, prefix: str):
        self.directory = directory
        self.prefix = prefix
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        name = self.prefix + name
        self.files.append(name)
        return self.directory / name


# ------------------------------------------------------------ subcommands


def _run_spectrum(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    n = cfg.scan["n_levels"]
    exact = cpb_spectrum(p.EJ, p.Ec, k=n, n_g=cfg.scan["n_g"],
                         charge_cutoff=cfg.solver.charge_cutoff).energies
    asym = asymptotic_spectrum(p.EJ, p.Ec, k=n).energies
    kerr = kerr_levels(p.f01, p.Ec, n)
    exact, asym = exact - exact[0], asym - asym[0]
    rows = []
    for i in range(n):
        gap = exact[i] - exact[i - 1] if i else math.nan
        rows.append([i, exact[i], gap, asym[i], kerr[i]])
    write_table(out.path("spectrum.csv"),
                ["level", "E_charge_basis_GHz", "gap_charge_basis_GHz", "E_asymptotic_GHz",
                 "E_kerr_GHz"], rows)
    d = derived_quantities(p)
    write_table(out.path("circuit.csv"), ["quantity", "value"], [
        ["EJ_GHz", p.EJ], ["Ec_GHz", p.Ec], ["f01_GHz", d.f01], ["f12_GHz", d.f12],
        ["L_H", d.L], ["C_sigma_F", d.C_sigma], ["Zr_Ohm", d.Zr], ["C_c_F", d.C_c],
    ])
    return 0


def _run_onetone(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    res = one_tone_map(p, cfg.axis("f_GHz"), cfg.axis("P_aW"), cfg.solver, threads)
    write_csv(res, out.path("onetone.csv"), extra=("R", "n_linear"))
    if len(res.grid.y) == 1:
        if np.all(res.converged):
            f = res.grid.x.values
            write_csv(Trace(f, res.T[0]), out.path("trace_T.csv"), value_name="T")
            write_csv(Trace(f, res.extra["R"][0]), out.path("trace_R.csv"), value_name="R")
        else:
            log.warning("single-power trace has flagged cells; trace files not written")
    return res.n_failed


def _run_saturation(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    f = cfg.drive.get("f_GHz", p.f01)
    P_in, P_out, status = saturation_curve(p, cfg.axis("P_aW"), f, cfg.solver, threads)
    ok = status == "ok"
    write_table(out.path("saturation.csv"), ["P_in_aW", "P_out_aW", "converged", "status"],
                [[a, b if c else math.nan, c, s] for a, b, c, s in zip(P_in, P_out, ok, status)])
    P_ok = np.where(ok, P_out, np.nan)
    try:
        plateau = saturation_plateau(P_in, P_ok, p, f=f)
    except ValueError:
        plateau = math.nan
    pos = ok & (P_in > 0)
    slope = low_power_slope(P_in[pos], P_out[pos]) if np.any(pos) else math.nan
    write_table(out.path("saturation_summary.csv"), ["quantity", "value"], [
        ["f_GHz", f], ["low_power_slope", slope], ["plateau_kappa_c_h_f", plateau]])
    return int(np.sum(~ok))


def _run_twotone(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    f1 = cfg.drive.get("f1_GHz", p.f01)
    P2 = cfg.drive_value("P2_aW")
    res = two_tone_map(p, f1, cfg.axis("P1_aW"), cfg.axis("f2_GHz"), P2, cfg.solver, threads)
    write_csv(res, out.path("twotone.csv"))
    header = ["found", "Ec_GHz", "uncertainty_GHz", "f_peak_GHz", "f01_GHz", "P1_aW",
              "delta_f_GHz", "configured_Ec_GHz"]
    try:
        k = extract_kerr(res, f1)
        row = [True, k.Ec, k.uncertainty, k.f_peak, k.f01, k.P1, k.delta_f, p.Ec]
    except NoPeakFoundError as exc:
        log.warning("%s", exc)
        row = [False] + [math.nan] * 6 + [p.Ec]
    write_table(out.path("kerr.csv"), header, [row])
    return res.n_failed


def _run_powermap(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    f1 = cfg.drive.get("f1_GHz", p.f01)
    f2 = cfg.drive.get("f2_GHz", p.f01 - p.Ec)
    res = power_power_map(p, f1, f2, cfg.axis("P1_aW"), cfg.axis("P2_aW"), cfg.solver, threads)
    write_csv(res, out.path("powermap.csv"))
    return res.n_failed


def _run_diagram(cfg: RunConfig, out: _Writer, threads: int) -> int:
    p = cfg.circuit
    res = energy_diagram(p, cfg.axis("f1_GHz"), cfg.axis("f2_GHz"), cfg.drive_value("P1_aW"),
                         cfg.drive_value("P2_aW"), cfg.solver, threads,
                         cfg.drive["same_frequency"])
    write_csv(res, out.path("diagram.csv"))
    lines = conservation_lines(model_spectrum(p, 4), window=tuple(cfg.scan["window_GHz"]))
    write_lines_csv(lines, out.path("lines.csv"))
    return res.n_failed


def _load_trace(cfg: RunConfig, key: str) -> Trace:
    path = Path(cfg.fit[key])
    if not path.is_absolute() and cfg.source is not None:
        path = cfg.source.parent / path
    try:
        return read_trace_csv(path)
    except (OSError, ValueError) as exc:
        raise _InputError(f"fit.{key}: {exc}") from exc


def _synthetic_trace(cfg: RunConfig, kind: str) -> Trace:
    p = cfg.circuit
    fc = cfg.fit
    half = fc["synthetic_span_GHz"] / 2
    f = np.linspace(p.f01 - half, p.f01 + half, fc["synthetic_points"])
    y = lineshape(f, p.f01, p.kappa_c, p.kappa_i, kind)
    if fc["synthetic_noise"] > 0:
        rng = np.random.default_rng(cfg.seed + (kind == "reflection"))
        y = np.clip(y * (1 + fc["synthetic_noise"] * rng.standard_normal(f.size)), 0, None)
    return Trace(f, y)


def _run_fit(cfg: RunConfig, out: _Writer, threads: int) -> int:
    kind = cfg.fit["kind"]
    if kind == "joint":
        if "trace_csv" in cfg.fit:
            if "reflection_csv" not in cfg.fit:
                raise ConfigError("fit.reflection_csv is required for a joint fit")
            t_tr, r_tr = _load_trace(cfg, "trace_csv"), _load_trace(cfg, "reflection_csv")
        else:
            t_tr = _synthetic_trace(cfg, "transmission")
            r_tr = _synthetic_trace(cfg, "reflection")
        result = fit_transmission_reflection(t_tr, r_tr)
    else:
        trace = (_load_trace(cfg, "trace_csv") if "trace_csv" in cfg.fit
                 else _synthetic_trace(cfg, kind))
        try:
            result = fit_lorentzian(trace, kind, fit_amplitude=cfg.fit["fit_amplitude"])
        except ValueError as exc:
            if isinstance(exc, FitError):
                raise
            raise ConfigError(f"fit: {exc}") from exc
    out.path("fit_report.txt").write_text(fit_report(result))
    write_csv(result, out.path("fit.csv"))
    return 0


_RUNNERS = {
    "spectrum": _run_spectrum,
    "onetone": _run_onetone,
    "saturation": _run_saturation,
    "twotone": _run_twotone,
    "powermap": _run_powermap,
    "diagram": _run_diagram,
    "fit": _run_fit,
}


# ------------------------------------------------------------------ driver


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jjres", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    parser.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    parser.add_argument("--seed", type=int, help="seed for synthetic data (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _threads(arg: int | None, cfg: RunConfig) -> int:
    if arg is not None:
        n = arg
    elif cfg.threads is not None:
        n = cfg.threads
    else:
        try:
            n = int(os.environ.get(THREADS_ENV, "1"))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def run_subcommand(name: str, cfg: RunConfig, out_dir: Path | None = None,
                   threads: int | None = None) -> tuple[int, RunManifest]:
    """Run one subcommand and write its outputs plus ``<subcommand>.manifest.json``.

    Returns the exit code and the manifest.
    """
    if name not in _RUNNERS:
        raise ConfigError(f"unknown subcommand {name!r}; choose from {', '.join(SUBCOMMANDS)}")
    n_threads = _threads(threads, cfg)
    directory = Path(out_dir) if out_dir is not None else Path(cfg.output["directory"])
    manifest = RunManifest(cfg.hash, __version__, name, _now(), threads=n_threads, seed=cfg.seed)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory: %s", exc)
        return EXIT_IO, manifest
    out = _Writer(directory, cfg.output["prefix"])
    code = EXIT_OK
    try:
        out.path("config.echo.json").write_text(cfg.echo())
        manifest.n_failed_cells = int(_RUNNERS[name](cfg, out, n_threads))
    except ConfigError as exc:
        code, manifest.message = EXIT_CONFIG, str(exc)
    except SOLVER_ERRORS as exc:
        code, manifest.message = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        code, manifest.message = EXIT_IO, str(exc)
    if manifest.message:
        log.error("%s", manifest.message)
    manifest.files = [f for f in out.files if (directory / f).exists()]
    manifest.finished_utc = _now()
    manifest.exit_code = code
    try:
        manifest.write(directory / f"{cfg.output['prefix']}{name}.manifest.json")
    except OSError as exc:
        log.error("cannot write manifest: %s", exc)
        code = code or EXIT_IO
    return code, manifest


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            tree = cfg.to_dict()
            tree["seed"] = args.seed
            cfg = config_from_dict(tree, source=cfg.source)
        code, manifest = run_subcommand(args.subcommand, cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"jjres: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"jjres: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_OK and manifest.n_failed_cells:
        log.warning("%d cells flagged (see status column)", manifest.n_failed_cells)
    return code


if __name__ == "__main__":
    sys.exit(main())

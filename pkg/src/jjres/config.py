"""Run configuration: JSON files validated against a bundled JSON Schema.

Physical keys carry their unit as a suffix (``Ec_GHz``, ``kappa_c_MHz``,
``P1_aW``). Unknown keys are rejected. Defaults declared in the schema are
filled in, and the completed tree can be written back as an echo config
that parses to the same :class:`RunConfig`.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .circuit import CircuitParams, ej_from_f01
from .dynamics import SolverSettings

_UNIT_SUFFIXES = ("GHz", "MHz", "aW", "Ohm", "Phi0")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def load_schema() -> dict:
    text = resources.files("jjres").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def _unit_of(key: str) -> str | None:
    for suffix in _UNIT_SUFFIXES:
        if key.endswith("_" + suffix):
            return suffix
    return None


def _describe(err: jsonschema.ValidationError) -> str:
    path = list(err.absolute_path)
    key = next((k for k in reversed(path) if isinstance(k, str)), None)
    if err.validator == "required":
        # the missing key only appears in the message
        missing = err.message.split("'")[1] if "'" in err.message else None
        key = missing or key
        path = path + ([missing] if missing else [])
    where = ".".join(str(k) for k in path) or "<root>"
    unit = _unit_of(key) if key else None
    hint = f" (expected unit: {unit})" if unit else ""
    return f"{where}: {err.message}{hint}"


def _fill_defaults(node: dict, schema: dict) -> None:
    props = schema.get("properties", {})
    for key, sub in props.items():
        if "$ref" in sub:
            continue
        if key not in node and "default" in sub:
            node[key] = copy.deepcopy(sub["default"])
        if isinstance(node.get(key), dict) and sub.get("type") == "object":
            _fill_defaults(node[key], sub)


def axis_values(spec) -> np.ndarray:
    """Expand an axis given as a list or as ``{start, stop, num, spacing}``."""
    if isinstance(spec, dict):
        start, stop, num = spec["start"], spec["stop"], spec["num"]
        if spec.get("spacing", "linear") == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log-spaced axes need positive endpoints")
            return np.logspace(math.log10(start), math.log10(stop), num)
        return np.linspace(start, stop, num)
    return np.asarray(spec, dtype=float)


@dataclass
class RunConfig:
    """Validated configuration with every default filled in."""

    circuit: CircuitParams
    solver: SolverSettings
    scan: dict
    drive: dict
    fit: dict
    output: dict
    seed: int
    threads: int | None
    tree: dict = field(repr=False)  # normalized JSON tree
    source: Path | None = None

    def axis(self, name: str) -> np.ndarray:
        if name not in self.scan:
            raise ConfigError(f"scan.{name} is required for this subcommand")
        values = axis_values(self.scan[name])
        if name.endswith("_aW") and np.any(values < 0):
            raise ConfigError(f"scan.{name}: powers must be >= 0 (expected unit: aW)")
        if name.endswith("_GHz") and np.any(values <= 0):
            raise ConfigError(f"scan.{name}: frequencies must be > 0 (expected unit: GHz)")
        return values

    def drive_value(self, name: str, default=None):
        value = self.drive.get(name, default)
        if value is None:
            raise ConfigError(f"drive.{name} is required for this subcommand")
        return value

    def to_dict(self) -> dict:
        return copy.deepcopy(self.tree)

    def echo(self) -> str:
        """Completed configuration as canonical JSON text."""
        return json.dumps(self.tree, indent=2, sort_keys=True) + "\n"

    @property
    def hash(self) -> str:
        blob = json.dumps(self.tree, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def config_from_dict(tree: dict, source: Path | None = None) -> RunConfig:
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(tree), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))
    tree = copy.deepcopy(tree)
    _fill_defaults(tree, schema)

    c = tree["circuit"]
    try:
        if "EJ_max_GHz" in c:
            ej_max = c["EJ_max_GHz"]
        else:
            x = math.pi * c["flux_Phi0"]
            g = math.sqrt(math.cos(x) ** 2 + c["asymmetry_d"] ** 2 * math.sin(x) ** 2)
            if g == 0:
                raise ConfigError("circuit.f01_GHz: cannot invert at a flux where EJ vanishes")
            ej_max = ej_from_f01(c["f01_GHz"], c["Ec_GHz"]) / g
        circuit = CircuitParams(ej_max, c["Ec_GHz"], c["kappa_c_MHz"], c["kappa_i_MHz"],
                                c["Z0_Ohm"], c["flux_Phi0"], c["asymmetry_d"])
        circuit.EJ  # checks the transmon regime at the configured flux
        solver = SolverSettings(**tree["solver"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return RunConfig(circuit=circuit, solver=solver, scan=tree["scan"], drive=tree["drive"],
                     fit=tree["fit"], output=tree["output"], seed=tree["seed"],
                     threads=tree.get("threads"), tree=tree, source=source)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run configuration.

    Raises
    ------
    ConfigError
        Malformed JSON or a schema violation; the message names the key
        path and its expected unit.
    OSError
        The file cannot be read.
    """
    path = Path(path)
    text = path.read_text()
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(tree, source=path)

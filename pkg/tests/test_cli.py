import csv
import json
from pathlib import Path

import numpy as np
import pytest

from jjres.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, main, run_subcommand
from jjres.config import ConfigError, axis_values, config_from_dict, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

DEVICE = {
    "circuit": {"EJ_max_GHz": 10.8, "Ec_GHz": 0.29, "kappa_c_MHz": 12.0, "kappa_i_MHz": 3.0},
    "solver": {"fock_dim": 6},
}


def _write(tmp_path, tree, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(tree))
    return path


# ----------------------------------------------------------------- config


def test_reference_config_is_valid():
    cfg = config_from_dict(DEVICE)
    assert cfg.circuit.EJ_max == 10.8
    assert cfg.solver.fock_dim == 6
    assert cfg.solver.charge_cutoff == 20  # default filled
    assert cfg.tree["output"]["directory"] == "out"


def test_missing_key_is_named():
    tree = {"circuit": {"EJ_max_GHz": 10.8, "Ec_GHz": 0.29}}
    with pytest.raises(ConfigError, match="kappa_c_MHz.*expected unit: MHz"):
        config_from_dict(tree)


def test_negative_power_is_unit_aware():
    tree = {**DEVICE, "drive": {"P1_aW": -5.0}}
    with pytest.raises(ConfigError, match=r"drive\.P1_aW.*expected unit: aW"):
        config_from_dict(tree)
    cfg = config_from_dict({**DEVICE, "scan": {"P1_aW": [1.0, -2.0]}})
    with pytest.raises(ConfigError, match="aW"):
        cfg.axis("P1_aW")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="Ec_MHz"):
        config_from_dict({**DEVICE, "circuit": {**DEVICE["circuit"], "Ec_MHz": 290}})


def test_f01_inversion_and_regime_check():
    cfg = config_from_dict({"circuit": {"f01_GHz": 4.86, "Ec_GHz": 0.29, "kappa_c_MHz": 12.0}})
    assert cfg.circuit.f01 == pytest.approx(4.86, rel=1e-12)
    with pytest.raises(ConfigError):
        config_from_dict({"circuit": {"EJ_max_GHz": 0.2, "Ec_GHz": 0.29, "kappa_c_MHz": 12.0}})


def test_echo_round_trip(tmp_path):
    cfg = parse_config(CONFIGS / "reference_device.json")
    again = parse_config(_write(tmp_path, json.loads(cfg.echo()), "echo.json"))
    assert again.tree == cfg.tree
    assert again.hash == cfg.hash
    assert again.circuit == cfg.circuit and again.solver == cfg.solver


def test_axis_spec():
    np.testing.assert_allclose(axis_values({"start": 1, "stop": 100, "num": 3, "spacing": "log"}),
                               [1, 10, 100])
    np.testing.assert_allclose(axis_values([3, 1]), [3, 1])


def test_bundled_configs_parse():
    for path in CONFIGS.glob("*.json"):
        parse_config(path)


# -------------------------------------------------------------------- cli


def test_exit_code_config_errors(tmp_path, capsys):
    assert main(["spectrum", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad)]) == EXIT_CONFIG
    path = _write(tmp_path, {"circuit": {"Ec_GHz": 0.29}})
    assert main(["spectrum", "--config", str(path)]) == EXIT_CONFIG
    assert "kappa_c_MHz" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["bogus", "--config", str(path)])
    assert exc.value.code == EXIT_CONFIG


def test_subcommand_config_mismatch(tmp_path):
    # diagram without the required axes and drive powers
    path = _write(tmp_path, DEVICE)
    assert main(["diagram", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    manifest = json.loads((tmp_path / "o" / "diagram.manifest.json").read_text())
    assert manifest["exit_code"] == EXIT_CONFIG and "f1_GHz" in manifest["message"]


def test_exit_code_io(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    path = _write(tmp_path, DEVICE)
    assert main(["spectrum", "--config", str(path), "--out", str(blocker / "sub")]) == EXIT_IO
    tree = {**DEVICE, "fit": {"trace_csv": "missing.csv"}}
    path = _write(tmp_path, tree)
    assert main(["fit", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_IO


def test_exit_code_solver(tmp_path):
    # a flat trace has no resonance to fit
    (tmp_path / "flat.csv").write_text("frequency_GHz,T\n" + "".join(
        f"{4.7 + 0.001 * i},0.5\n" for i in range(200)))
    tree = {**DEVICE, "fit": {"trace_csv": "flat.csv"}}
    code = main(["fit", "--config", str(_write(tmp_path, tree)), "--out", str(tmp_path / "o")])
    assert code in (EXIT_CONFIG, EXIT_SOLVER)
    assert code != EXIT_OK


def test_spectrum_outputs_and_manifest(tmp_path):
    cfg = config_from_dict(DEVICE)
    code, manifest = run_subcommand("spectrum", cfg, tmp_path, threads=1)
    assert code == EXIT_OK
    listed = set(manifest.files) | {"spectrum.manifest.json"}
    assert listed == {p.name for p in tmp_path.iterdir()}
    assert manifest.config_hash == cfg.hash
    with open(tmp_path / "spectrum.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[1]["gap_charge_basis_GHz"]) == pytest.approx(4.6956, abs=1e-4)


def test_onetone_trace_feeds_fit(tmp_path):
    tree = {**DEVICE, "scan": {"f_GHz": {"start": 4.6356, "stop": 4.7956, "num": 81},
                              "P_aW": [1.0]}}
    cfg = config_from_dict(tree)
    code, m = run_subcommand("onetone", cfg, tmp_path, threads=2)
    assert code == EXIT_OK and {"trace_T.csv", "trace_R.csv"} <= set(m.files)
    tree["fit"] = {"kind": "joint", "trace_csv": str(tmp_path / "trace_T.csv"),
                   "reflection_csv": str(tmp_path / "trace_R.csv")}
    code, m = run_subcommand("fit", config_from_dict(tree), tmp_path, threads=1)
    assert code == EXIT_OK
    report = dict(l.split(" = ") for l in (tmp_path / "fit_report.txt").read_text().splitlines())
    assert float(report["f01_GHz"]) == pytest.approx(cfg.circuit.f01, abs=1e-5)
    # a 1 aW trace still carries a small Kerr distortion of the rates
    assert float(report["kappa_c_MHz"]) == pytest.approx(12.0, rel=0.03)
    # both manifests survive in the shared directory
    assert (tmp_path / "onetone.manifest.json").exists() and (tmp_path / "fit.manifest.json").exists()


def test_seed_override_changes_synthetic_fit(tmp_path):
    tree = {**DEVICE, "fit": {"synthetic_noise": 0.02}}
    path = _write(tmp_path, tree)
    outs = []
    for seed in ("1", "2", "1"):
        out = tmp_path / f"o{len(outs)}"
        assert main(["fit", "--config", str(path), "--out", str(out), "--seed", seed]) == EXIT_OK
        outs.append((out / "fit.csv").read_bytes())
    assert outs[0] == outs[2] and outs[0] != outs[1]


def test_prefix_and_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("JJRES_THREADS", "3")
    cfg = config_from_dict({**DEVICE, "output": {"prefix": "run1_"}})
    code, m = run_subcommand("spectrum", cfg, tmp_path)
    assert code == EXIT_OK and m.threads == 3
    assert (tmp_path / "run1_spectrum.csv").exists()
    assert (tmp_path / "run1_spectrum.manifest.json").exists()
    monkeypatch.setenv("JJRES_THREADS", "zero")
    with pytest.raises(ConfigError):
        run_subcommand("spectrum", cfg, tmp_path)

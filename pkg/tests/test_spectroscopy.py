
import numpy as np
import pytest

from jjres.circuit import REFERENCE_DEVICE, SHIFTED_DEVICE
from jjres.dynamics import (DriveSpec, SolverSettings, demodulate, driven_kerr_model,
                             linear_response, time_evolve)
from jjres.spectroscopy import (Axis, ScanGrid, conservation_lines, detect_features,
                                distance_to_line, energy_diagram, low_power_slope, model_spectrum,
                                one_tone_map, power_power_map, run_hash, saturation_curve,
                                saturation_plateau, two_tone_map)
from jjres.spectrum import Spectrum

P = REFERENCE_DEVICE
S6 = SolverSettings(fock_dim=6)


def test_axis_and_grid_validation():
    with pytest.raises(ValueError):
        Axis("f", "GHz", [1.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        Axis("f", "GHz", [])
    with pytest.raises(ValueError):
        ScanGrid(Axis("f", "GHz", [1.0]), Axis("P", "aW", [1.0]))
    g = ScanGrid(Axis("f", "GHz", [1.0, 2.0, 3.0]), Axis("P", "aW", [5.0]))
    assert g.shape == (1, 3)


def test_one_tone_map_low_power_is_linear_lorentzian():
    f = np.linspace(P.f01 - 0.05, P.f01 + 0.05, 11)
    res = one_tone_map(P, f, [0.01, 1000.0], S6)
    assert res.T.shape == (2, 11) and res.n_failed == 0
    _, T_lin, R_lin = linear_response(f, P.f01, P.kappa_c, P.kappa_i)
    np.testing.assert_allclose(res.T[0], T_lin, rtol=2e-3)
    np.testing.assert_allclose(res.extra["R"][0], R_lin, rtol=2e-2, atol=1e-4)
    # bleaching row
    assert res.T[1, 5] < 0.1 * res.T[0, 5]
    assert res.extra["n_linear"][1, 0] == pytest.approx(3.3, abs=0.1)
    assert res.meta["kind"] == "onetone" and len(res.meta["run_hash"]) == 16


def test_one_tone_map_order_independent():
    f = np.linspace(4.6, 4.8, 5)
    a = one_tone_map(P, f, [10.0, 300.0], S6, workers=1)
    b = one_tone_map(P, f, [10.0, 300.0], S6, workers=3)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.status, b.status)


def test_one_tone_rejects_zero_power():
    with pytest.raises(ValueError):
        one_tone_map(P, [4.7, 4.71], [0.0], S6)


def test_saturation_curve_and_plateau():
    P_in = np.logspace(-1, 4.5, 12)
    P_in, P_out, status = saturation_curve(P, P_in, settings=S6)
    assert np.all(status == "ok")
    assert low_power_slope(P_in, P_out) == pytest.approx((24 / 27) ** 2, rel=0.01)
    plateau = saturation_plateau(P_in, P_out, P)
    assert 0.1 <= plateau <= 0.5
    with pytest.raises(ValueError):
        saturation_plateau(P_in[:3], P_out[:3], P)


def test_two_tone_map_adds_pump_off_row():
    f2 = np.linspace(4.38, 4.47, 7)
    res = two_tone_map(P, P.f01, [300.0], f2, 8.6, S6)
    assert res.grid.y.values.tolist() == [0.0, 300.0]
    assert np.all(res.T[0] < 0.01)
    assert np.nanmax(res.T[1]) > 10 * res.T[0][np.nanargmax(res.T[1])]


def test_power_power_map_linear_corner_and_zero_probe():
    res = power_power_map(P, P.f01, P.f01 - P.Ec, [0.0, 2.5, 5.0], [0.0, 2.0, 4.0], S6)
    assert np.all(res.P_out[:, 0] == 0)
    # probe-linear: doubling P2 doubles P_out
    np.testing.assert_allclose(res.P_out[:, 2] / res.P_out[:, 1], 2.0, rtol=0.02)
    # pump-linear at low pump: the pump-induced change of the probe amplitude
    # scales with P1 (the coherent probe background does not)
    shift = np.abs(res.values[1:, 2] - res.values[0, 2])
    assert shift[1] / shift[0] == pytest.approx(2.0, rel=0.05)


def test_power_power_rollover():
    res = power_power_map(P, P.f01, P.f01 - P.Ec, [100.0, 1000.0, 30000.0], [8.6, 1000.0], S6)
    assert res.P_out[-1, -1] < np.nanmax(res.P_out)


def test_energy_diagram_skips_diagonal_and_bleaching_node():
    f = np.linspace(4.75, 4.85, 5)
    res = energy_diagram(SHIFTED_DEVICE, f, f, 450.0, 27.0, S6)
    assert np.all(res.status[np.eye(5, dtype=bool)] == "skipped")
    assert np.all(np.isnan(res.T[np.eye(5, dtype=bool)]))
    assert res.n_failed == 0


@pytest.mark.parametrize("target", [4.81, 4.53])
def test_role_swap_at_equal_powers_is_a_frame_change(target):
    # two equal tones; which one sets the rotating frame must not matter
    fa, fb, d = 4.53, 4.81, 7
    t = 300.0 + np.arange(321) / (16 * (fb - fa))
    rho0 = np.zeros((d, d), complex)
    rho0[0, 0] = 1.0
    out = []
    for f1, f2 in ((fa, fb), (fb, fa)):
        m = driven_kerr_model(SHIFTED_DEVICE, DriveSpec.pump_probe(f1, 27.0, f2, 27.0), d)
        tr = time_evolve(m, rho0, (0.0, t[-1]), t, atol=1e-10)
        out.append(demodulate(tr, target, (t[0], t[-1])))
    assert abs(out[0] - out[1]) < 1e-6 * abs(out[0])


def test_conservation_lines_examples():
    spec = model_spectrum(SHIFTED_DEVICE, 4)
    lines = {l.order + l.levels: l for l in conservation_lines(spec)}
    two = lines[(1, 1, 0, 2)]
    assert distance_to_line(two, 4.815, 4.525) < 1e-9
    assert distance_to_line(two, 4.525, 4.815) < 1e-9
    three = lines[(2, 1, 0, 3)]
    step = 0.9 / 60
    assert distance_to_line(three, 4.4, 4.8) < step
    for line in lines.values():
        assert np.all(np.abs(line.residuals()) < 1e-9)
        if line.locus.size:
            assert line.locus.min() >= 4.2 - 1e-12 and line.locus.max() <= 5.1 + 1e-12


def test_conservation_lines_errors():
    spec = model_spectrum(P, 4)
    with pytest.raises(ValueError):
        conservation_lines(spec, requests=[(1, 1, 2, 2)])
    with pytest.raises(ValueError):
        conservation_lines(spec, requests=[(0, 0, 0, 1)])
    with pytest.raises(ValueError):
        conservation_lines(Spectrum(np.arange(3.0), "asymptotic"))
    out = conservation_lines(spec, window=(1.0, 2.0), requests=[(1, 0, 0, 1)])
    assert out[0].locus.shape == (0, 2)


def test_detect_single_lorentzian():
    f = np.linspace(4.6, 4.8, 81)
    _, T, _ = linear_response(f, 4.7123, 12.0, 3.0)
    feats = detect_features(T, "peak", x=f)
    assert len(feats) == 1
    assert abs(feats[0].x - 4.7123) < f[1] - f[0]
    dips = detect_features(1 - T, "dip", x=f)
    assert abs(dips[0].x - feats[0].x) < 1e-12


def test_detect_noise_below_threshold_is_empty():
    rng = np.random.default_rng(7)
    z = 1.0 + 1e-3 * rng.standard_normal((20, 20))
    assert detect_features(z, "peak", prominence=0.05) == []


def test_detect_two_dimensional_ordering():
    x = np.linspace(0, 1, 41)
    X, Y = np.meshgrid(x, x)
    z = np.exp(-((X - 0.3) ** 2 + (Y - 0.6) ** 2) / 0.005) + 0.5 * np.exp(
        -((X - 0.7) ** 2 + (Y - 0.2) ** 2) / 0.005)
    feats = detect_features(z, "peak", x=x, y=x)
    assert len(feats) == 2
    assert (round(feats[0].x, 2), round(feats[0].y, 2)) == (0.3, 0.6)
    assert (round(feats[1].x, 2), round(feats[1].y, 2)) == (0.7, 0.2)
    assert feats[0].prominence > feats[1].prominence


def test_detect_log_scale_handles_nan():
    z = np.array([1e-4, 1e-3, 1e-2, np.nan, 1e-3, 1e-1, 1e-3])
    feats = detect_features(z, "peak", scale="log")
    assert [round(f.x) for f in feats] == [5, 2]


def test_run_hash_stable():
    assert run_hash("a", np.arange(3), P) == run_hash("a", np.arange(3), P)
    assert run_hash("a", np.arange(3), P) != run_hash("a", np.arange(4), P)

import math

import pytest

from jjres.circuit import (CONSTANTS, REFERENCE_DEVICE, SHIFTED_DEVICE, CircuitParams,
                           TransmonValidityError, coupling_capacitance, derived_quantities,
                           ec_from_splitting, ej_at_flux, ej_from_f01, eigenenergy_asymptotic,
                           impedance_from_energies, transition_frequencies)

# Independent oracle: the same SI relations evaluated by hand with CODATA
# constants (C = e^2/2Ec, L = hbar^2/4e^2 EJ, Zr = sqrt(L/C)).
C_SIGMA_FF = 66.79389422296249
L_NH = 15.135325259887146
ZR_OHM = 476.02251766602456
CC_FF_AT_486 = 10.547695898343164


def test_transition_frequencies_closed_form():
    f01, f12 = transition_frequencies(10.8, 0.29)
    assert f01 == pytest.approx(math.sqrt(8 * 10.8 * 0.29) - 0.29, rel=1e-15)
    assert f01 - f12 == pytest.approx(0.29, rel=1e-12)
    assert f01 == pytest.approx(4.7156, abs=5e-5)


def test_derived_quantities_match_hand_evaluation():
    d = derived_quantities(REFERENCE_DEVICE)
    assert d.C_sigma * 1e15 == pytest.approx(C_SIGMA_FF, rel=1e-12)
    assert d.L * 1e9 == pytest.approx(L_NH, rel=1e-12)
    assert d.Zr == pytest.approx(ZR_OHM, rel=1e-12)
    assert impedance_from_energies(10.8, 0.29) == pytest.approx(ZR_OHM, rel=1e-12)


def test_coupling_capacitance():
    cc = coupling_capacitance(12.0, 4.86, 50.0, ZR_OHM)
    assert cc * 1e15 == pytest.approx(CC_FF_AT_486, rel=1e-12)
    # C_c grows as sqrt(kappa_c)
    assert coupling_capacitance(48.0, 4.86, 50.0, ZR_OHM) == pytest.approx(2 * cc, rel=1e-12)


def test_ej_inversion_examples():
    assert ej_from_f01(4.86, 0.29) == pytest.approx(11.432112068965, rel=1e-12)
    assert ej_from_f01(4.815, 0.29) == pytest.approx(11.233200431034, rel=1e-12)
    assert SHIFTED_DEVICE.f01 == pytest.approx(4.815, abs=1e-12)
    EJ = ej_from_f01(4.7156, 0.29)
    assert transition_frequencies(EJ, 0.29)[0] == pytest.approx(4.7156, rel=1e-14)


def test_ec_from_splitting():
    assert ec_from_splitting(4.715, 4.44) == pytest.approx(0.275, abs=1e-12)
    with pytest.raises(ValueError):
        ec_from_splitting(4.4, 4.7)


def test_asymptotic_gaps_reproduce_transitions():
    f01, f12 = transition_frequencies(10.8, 0.29)
    E = [eigenenergy_asymptotic(n, 10.8, 0.29) for n in range(3)]
    assert E[1] - E[0] == pytest.approx(f01, rel=1e-14)
    assert E[2] - E[1] == pytest.approx(f12, rel=1e-14)


def test_flux_tuning():
    p = REFERENCE_DEVICE.with_(flux=0.4, EJ_max=20.0)
    assert ej_at_flux(p) == pytest.approx(20.0 * math.cos(0.4 * math.pi), rel=1e-14)
    p = p.with_(asymmetry_d=0.5, flux=0.5)
    assert ej_at_flux(p) == pytest.approx(10.0, rel=1e-14)
    assert ej_at_flux(REFERENCE_DEVICE.with_(flux=1.0)) == pytest.approx(10.8, rel=1e-14)


def test_transmon_validity():
    p = REFERENCE_DEVICE.with_(flux=0.5)
    assert not p.is_transmon()
    with pytest.raises(TransmonValidityError):
        ej_at_flux(p)
    with pytest.raises(TransmonValidityError):
        p.f01


@pytest.mark.parametrize("kwargs", [
    dict(EJ_max=-1.0), dict(Ec=0.0), dict(kappa_c=0.0), dict(kappa_i=-1.0),
    dict(Z0=0.0), dict(asymmetry_d=1.0),
])
def test_parameter_validation(kwargs):
    base = dict(EJ_max=10.8, Ec=0.29, kappa_c=12.0, kappa_i=3.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        CircuitParams(**base)


def test_constants():
    assert CONSTANTS.Phi0 == pytest.approx(2.067833848e-15, rel=1e-9)
    assert REFERENCE_DEVICE.kappa_total == 27.0

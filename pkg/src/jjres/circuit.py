"""Physical constants, circuit parameters and closed-form relations for a
single-junction (Cooper-pair-box) resonator.

Unit convention used throughout the package: energies are stored as E/h in
GHz, decay rates as kappa/2pi in MHz, powers in aW. SI conversion happens
only inside :func:`derived_quantities`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy import constants as _sc


class TransmonValidityError(ValueError):
    """Raised when EJ/Ec drops to 1 or below, outside the transmon expansion."""


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = _sc.h
    hbar: float = _sc.hbar
    e: float = _sc.e

    @property
    def Phi0(self) -> float:
        return self.h / (2 * self.e)

    @property
    def Z_quantum(self) -> float:
        return self.hbar / self.e**2


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class CircuitParams:
    """Device parameters.

    Attributes
    ----------
    EJ_max : float
        Josephson energy at zero flux, E_J/h in GHz.
    Ec : float
        Charging energy E_c/h in GHz.
    kappa_c : float
        Per-port coupling rate kappa_c/2pi in MHz (left and right ports equal).
    kappa_i : float
        Internal loss rate kappa_i/2pi in MHz.
    Z0 : float
        Line impedance in Ohm.
    flux : float
        Flux bias in units of the flux quantum.
    asymmetry_d : float
        SQUID junction asymmetry, 0 <= d < 1.
    """

    EJ_max: float
    Ec: float
    kappa_c: float
    kappa_i: float = 0.0
    Z0: float = 50.0
    flux: float = 0.0
    asymmetry_d: float = 0.0

    def __post_init__(self):
        if not self.EJ_max > 0:
            raise ValueError(f"EJ_max must be positive, got {self.EJ_max}")
        if not self.Ec > 0:
            raise ValueError(f"Ec must be positive, got {self.Ec}")
        if not self.kappa_c > 0:
            raise ValueError(f"kappa_c must be positive, got {self.kappa_c}")
        if self.kappa_i < 0:
            raise ValueError(f"kappa_i must be non-negative, got {self.kappa_i}")
        if not self.Z0 > 0:
            raise ValueError(f"Z0 must be positive, got {self.Z0}")
        if not 0 <= self.asymmetry_d < 1:
            raise ValueError(f"asymmetry_d must lie in [0, 1), got {self.asymmetry_d}")

    @property
    def kappa_total(self) -> float:
        """Total linewidth (2 kappa_c + kappa_i)/2pi in MHz."""
        return 2 * self.kappa_c + self.kappa_i

    @property
    def EJ(self) -> float:
        return ej_at_flux(self)

    @property
    def f01(self) -> float:
        return transition_frequencies(self.EJ, self.Ec)[0]

    def is_transmon(self) -> bool:
        return ej_at_flux(self, check=False) / self.Ec > 1

    def with_(self, **changes) -> "CircuitParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedCircuit:
    f01: float  # GHz
    f12: float  # GHz
    L: float  # H
    C_sigma: float  # F
    Zr: float  # Ohm
    C_c: float  # F


def ej_at_flux(p: CircuitParams, check: bool = True) -> float:
    """Flux-tuned Josephson energy of the SQUID, in GHz.

    ``EJ_max * |cos(pi flux)| * sqrt(1 + d^2 tan^2(pi flux))``, written in the
    equivalent form that stays finite at half-integer flux.
    """
    x = math.pi * p.flux
    d = p.asymmetry_d
    ej = p.EJ_max * math.sqrt(math.cos(x) ** 2 + d**2 * math.sin(x) ** 2)
    if check and not ej / p.Ec > 1:
        raise TransmonValidityError(
            f"EJ(flux={p.flux})/Ec = {ej / p.Ec:.3g} <= 1, outside the transmon regime"
        )
    return ej


def transition_frequencies(EJ: float, Ec: float) -> tuple[float, float]:
    """Return (f01, f12) in GHz from the asymptotic transmon expansion."""
    if not (EJ > 0 and Ec > 0):
        raise ValueError(f"EJ and Ec must be positive, got EJ={EJ}, Ec={Ec}")
    f01 = math.sqrt(8 * EJ * Ec) - Ec
    return f01, f01 - Ec


def eigenenergy_asymptotic(n: int, EJ: float, Ec: float) -> float:
    """E_n/h in GHz, measured from the bottom of the cosine well.

    The plasma term carries the (n + 1/2) factor so that successive gaps give
    exactly ``transition_frequencies``.
    """
    if n < 0:
        raise ValueError(f"level index must be >= 0, got {n}")
    if not (EJ > 0 and Ec > 0):
        raise ValueError(f"EJ and Ec must be positive, got EJ={EJ}, Ec={Ec}")
    return math.sqrt(8 * EJ * Ec) * (n + 0.5) - Ec / 4 * (2 * n * n + 2 * n + 1)


def ej_from_f01(f01: float, Ec: float) -> float:
    """Invert ``transition_frequencies``: the EJ that gives ``f01`` (GHz)."""
    if not (f01 > 0 and Ec > 0):
        raise ValueError(f"f01 and Ec must be positive, got f01={f01}, Ec={Ec}")
    return (f01 + Ec) ** 2 / (8 * Ec)


def ec_from_splitting(f01: float, f12: float) -> float:
    """Charging energy from the first two transition frequencies (GHz)."""
    if not f01 > f12:
        raise ValueError(f"need f01 > f12 for a positive charging energy, got {f01}, {f12}")
    return f01 - f12


def derived_quantities(p: CircuitParams, const: PhysicalConstants = CONSTANTS) -> DerivedCircuit:
    """Inductance, capacitances and impedance of the resonator mode (SI)."""
    EJ = ej_at_flux(p)
    f01, f12 = transition_frequencies(EJ, p.Ec)
    ej_joule = const.h * EJ * 1e9
    ec_joule = const.h * p.Ec * 1e9
    L = const.hbar**2 / (4 * const.e**2 * ej_joule)
    C_sigma = const.e**2 / (2 * ec_joule)
    Zr = math.sqrt(L / C_sigma)
    C_c = coupling_capacitance(p.kappa_c, f01, p.Z0, Zr)
    return DerivedCircuit(f01=f01, f12=f12, L=L, C_sigma=C_sigma, Zr=Zr, C_c=C_c)


def coupling_capacitance(kappa_c: float, f01: float, Z0: float, Zr: float) -> float:
    """Port capacitance (F) giving coupling ``kappa_c`` (MHz) at ``f01`` (GHz)."""
    if not (kappa_c > 0 and f01 > 0 and Z0 > 0 and Zr > 0):
        raise ValueError("kappa_c, f01, Z0 and Zr must all be positive")
    kappa = 2 * math.pi * kappa_c * 1e6
    return math.sqrt(kappa / (8 * math.pi**3 * (f01 * 1e9) ** 3 * Z0 * Zr))


def impedance_from_energies(EJ: float, Ec: float, const: PhysicalConstants = CONSTANTS) -> float:
    """Z_r = (hbar/e^2) sqrt(Ec / 2EJ); the energy-ratio form of sqrt(L/C)."""
    return const.Z_quantum * math.sqrt(Ec / (2 * EJ))


# Measured device. The energy-diagram bias sits 100 MHz higher, f01 = 4.815 GHz.
REFERENCE_DEVICE = CircuitParams(EJ_max=10.8, Ec=0.29, kappa_c=12.0, kappa_i=3.0)
SHIFTED_DEVICE = REFERENCE_DEVICE.with_(EJ_max=ej_from_f01(4.815, 0.29))

"""Simulation and analysis of a single-Josephson-junction resonator.

Submodules: :mod:`circuit` (parameters and closed forms), :mod:`spectrum`
(charge-basis and Kerr spectra), :mod:`dynamics` (Lindblad steady states
and time evolution), :mod:`spectroscopy` (maps and feature detection),
:mod:`fit` (parameter extraction), :mod:`io`, :mod:`config` and :mod:`cli`.
"""
__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .circuit import (CONSTANTS, REFERENCE_DEVICE, SHIFTED_DEVICE, CircuitParams, DerivedCircuit,
                      TransmonValidityError, derived_quantities, ej_at_flux, ej_from_f01,
                      transition_frequencies)
from .dynamics import (DriveSpec, ProbeResult, ResonatorModel, SolverSettings, Tone,
                       single_tone_steady_state, steady_state, time_evolve, transmission,
                       two_tone_response)
from .fit import (FitResult, Trace, extract_kerr, fit_flux_arc, fit_lorentzian,
                  fit_transmission_reflection)
from .spectroscopy import (ScanResult, conservation_lines, detect_features, energy_diagram,
                           one_tone_map, power_power_map, saturation_curve, two_tone_map)
from .spectrum import Operator, Spectrum, cpb_spectrum, kerr_hamiltonian

__all__ = [name for name in dir() if not name.startswith("_")]

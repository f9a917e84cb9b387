"""Cooper-pair-box spectrum in the charge basis and the Kerr-oscillator
reduction used by the dynamics engine."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_CHARGE_CUTOFF = 20
DEFAULT_FOCK_DIM = 15


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex matrix tagged with the basis it lives in ('charge' or 'fock')."""

    data: np.ndarray
    basis: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {data.shape}")
        if self.basis not in ("charge", "fock"):
            raise ValueError(f"unknown basis tag {self.basis!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def _check(self, other: "Operator") -> None:
        if other.basis != self.basis:
            raise ValueError(f"basis mismatch: {self.basis} vs {other.basis}")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data + other.data, self.basis)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data - other.data, self.basis)
        return NotImplemented

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.data @ other.data, self.basis)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.data * scalar, self.basis)
        return NotImplemented

    __rmul__ = __mul__

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.basis)

    def hermiticity_error(self) -> float:
        """Relative Frobenius norm of the anti-Hermitian part."""
        norm = np.linalg.norm(self.data)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(self.data - self.data.conj().T) / norm)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_error() <= tol


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray  # E_n/h in GHz, ascending
    method: str  # 'exact_charge_basis' or 'asymptotic'

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def gaps(self) -> np.ndarray:
        return np.diff(self.energies)

    def transition(self, i: int, j: int) -> float:
        """(E_j - E_i)/h in GHz."""
        return float(self.energies[j] - self.energies[i])


def build_cpb_hamiltonian(EJ: float, Ec: float, n_g: float = 0.0,
                          charge_cutoff: int = DEFAULT_CHARGE_CUTOFF) -> Operator:
    """Cooper-pair-box Hamiltonian H/h (GHz) on charge states m = -N..N.

    ``4 Ec (m - n_g)^2`` on the diagonal and ``-EJ/2`` on the first
    off-diagonals. ``EJ = 0`` is allowed (pure charging ladder).
    """
    if charge_cutoff < 5:
        raise ValueError(f"charge cutoff must be >= 5, got {charge_cutoff}")
    if EJ < 0 or not Ec > 0:
        raise ValueError(f"need EJ >= 0 and Ec > 0, got EJ={EJ}, Ec={Ec}")
    m = np.arange(-charge_cutoff, charge_cutoff + 1)
    dim = m.size
    H = np.diag(4 * Ec * (m - n_g) ** 2).astype(complex)
    off = -EJ / 2 * np.ones(dim - 1)
    H[np.arange(dim - 1), np.arange(1, dim)] = off
    H[np.arange(1, dim), np.arange(dim - 1)] = off
    return Operator(H, "charge")


def eigen_spectrum(H: Operator, k: int, method: str = "exact_charge_basis") -> Spectrum:
    """Lowest ``k`` eigenvalues of a Hermitian operator, ascending."""
    if not 1 <= k <= H.dim:
        raise ValueError(f"k must lie in [1, {H.dim}], got {k}")
    if not H.is_hermitian(1e-12):
        raise ValueError(f"operator is not Hermitian (error {H.hermiticity_error():.2e})")
    try:
        w = scipy.linalg.eigh(H.data, eigvals_only=True, subset_by_index=(0, k - 1))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise RuntimeError("eigensolver returned non-finite eigenvalues")
    return Spectrum(energies=np.asarray(w, dtype=float), method=method)


def cpb_spectrum(EJ: float, Ec: float, k: int = 4, n_g: float = 0.0,
                 charge_cutoff: int = DEFAULT_CHARGE_CUTOFF) -> Spectrum:
    return eigen_spectrum(build_cpb_hamiltonian(EJ, Ec, n_g, charge_cutoff), k)


def asymptotic_spectrum(EJ: float, Ec: float, k: int = 4) -> Spectrum:
    from .circuit import eigenenergy_asymptotic

    E = np.array([eigenenergy_asymptotic(n, EJ, Ec) for n in range(k)])
    return Spectrum(energies=E, method="asymptotic")


def kerr_levels(f01: float, Ec: float, fock_dim: int) -> np.ndarray:
    """Diagonal of the Kerr Hamiltonian, ``f01 n - (Ec/2) n (n-1)`` in GHz."""
    n = np.arange(fock_dim, dtype=float)
    return f01 * n - Ec / 2 * n * (n - 1)


def kerr_hamiltonian(f01: float, Ec: float, fock_dim: int = DEFAULT_FOCK_DIM) -> Operator:
    """Truncated Kerr-oscillator Hamiltonian H/h (GHz) in the Fock basis."""
    if fock_dim < 3:
        raise ValueError(f"fock_dim must be >= 3 to hold two-photon physics, got {fock_dim}")
    return Operator(np.diag(kerr_levels(f01, Ec, fock_dim)), "fock")


def ladder_operators(fock_dim: int) -> tuple[Operator, Operator]:
    """Truncated annihilation and creation operators."""
    if fock_dim < 2:
        raise ValueError(f"fock_dim must be >= 2, got {fock_dim}")
    a = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), 1)
    return Operator(a, "fock"), Operator(a.T, "fock")

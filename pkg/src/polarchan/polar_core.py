"""Polarization-qubit conventions: Stokes vectors, density matrices, Jones matrices.

Conventions used throughout the package:

* qubit basis {|H>, |V>} with |H> = (1, 0);
* Stokes axes:  S1 <-> horizontal/vertical (H maps to +1),
                S2 <-> diagonal (P = (H+V)/sqrt2 maps to +1),
                S3 <-> circular (R = (H+iV)/sqrt2 maps to +1);
* the operator basis ``PAULI_BASIS`` = (E0, E1, E2, E3) is ordered to match
  the Stokes axes, so E1 = sigma_z, E2 = sigma_x, E3 = sigma_y in textbook
  naming.  With this ordering, s_i = Tr(rho E_i) and channel radii line up
  index-for-index with the Stokes components.

All public interfaces take angles in degrees (fast-axis orientation measured
from horizontal); radians are an internal detail.  Jones matrices are defined
only up to a global phase and every observable computed here is
phase-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ATOL",
    "KET_H",
    "KET_V",
    "KET_P",
    "KET_M",
    "KET_R",
    "KET_L",
    "PAULI_BASIS",
    "StokesVector",
    "ket_projector",
    "check_density",
    "density_from_stokes",
    "stokes_from_density",
    "degree_of_polarization",
    "rotation2",
    "waveplate_jones",
    "fidelity",
]

#: default absolute tolerance for matrix invariants (hermiticity, trace, ...)
ATOL = 1e-12

#: tolerance below which a small negative eigenvalue is treated as zero
EIG_ATOL = 1e-10

KET_H = np.array([1.0, 0.0], dtype=complex)
KET_V = np.array([0.0, 1.0], dtype=complex)
KET_P = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_M = np.array([-1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_R = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)
# L differs from the common (H - iV)/sqrt2 by a global phase i; the projector
# is identical, so the choice is unobservable.
KET_L = np.array([1.0j, 1.0], dtype=complex) / np.sqrt(2.0)

_E0 = np.eye(2, dtype=complex)
_E1 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)     # S1 axis (H/V)
_E2 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)      # S2 axis (P/M)
_E3 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)   # S3 axis (R/L)
for _m in (_E0, _E1, _E2, _E3):
    _m.setflags(write=False)

#: Stokes-aligned operator basis (identity first).  Tr(Ei Ej) = 2 delta_ij.
PAULI_BASIS: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] = (
    _E0, _E1, _E2, _E3,
)


@dataclass(frozen=True)
class StokesVector:
    """Point in (or on) the Poincare sphere; S0 == 1 is implied."""

    s1: float
    s2: float
    s3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3], dtype=float)

    @classmethod
    def from_array(cls, values) -> "StokesVector":
        v = np.asarray(values, dtype=float).reshape(3)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def norm(self) -> float:
        return float(np.sqrt(self.s1**2 + self.s2**2 + self.s3**2))


def _stokes_array(s) -> np.ndarray:
    if isinstance(s, StokesVector):
        return s.as_array()
    return np.asarray(s, dtype=float).reshape(3)


def ket_projector(ket: np.ndarray) -> np.ndarray:
    """Density matrix |k><k| of a (normalized) 2-component ket."""
    k = np.asarray(ket, dtype=complex).reshape(2)
    return np.outer(k, k.conj())


def check_density(rho: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Validate a 2x2 density matrix; returns it as a complex ndarray.

    Raises ValueError if the matrix is not Hermitian/unit-trace within
    ``atol`` or has an eigenvalue below -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"density matrix must be 2x2, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol or abs(np.trace(rho).imag) > atol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -EIG_ATOL:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def density_from_stokes(s) -> np.ndarray:
    """Density matrix rho = (I + s1 E1 + s2 E2 + s3 E3) / 2.

    Rejects Stokes vectors longer than 1 (beyond numerical slack) as
    unphysical.
    """
    v = _stokes_array(s)
    norm = float(np.linalg.norm(v))
    if norm > 1.0 + 1e-9:
        raise ValueError(f"Stokes vector length {norm:.6g} exceeds 1 (unphysical)")
    rho = 0.5 * (_E0 + v[0] * _E1 + v[1] * _E2 + v[2] * _E3)
    return rho


def stokes_from_density(rho: np.ndarray) -> StokesVector:
    """Stokes components s_i = Tr(rho E_i) of a valid density matrix."""
    rho = check_density(rho)
    return StokesVector(
        float(np.trace(rho @ _E1).real),
        float(np.trace(rho @ _E2).real),
        float(np.trace(rho @ _E3).real),
    )


def degree_of_polarization(s) -> float:
    """Length of the Stokes vector: 0 = fully mixed, 1 = pure."""
    return float(np.linalg.norm(_stokes_array(s)))


def rotation2(angle_deg: float) -> np.ndarray:
    """2x2 rotation of the (H, V) amplitude plane by ``angle_deg``."""
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def waveplate_jones(kind: str, angle_deg: float) -> np.ndarray:
    """Jones matrix of a half- or quarter-wave plate.

    ``angle_deg`` is the fast-axis orientation from horizontal.  The
    half-wave plate is R(t) diag(1, -1) R(-t) = [[cos2t, sin2t],
    [sin2t, -cos2t]]; the quarter-wave plate is R(t) diag(1, i) R(-t).
    Global phase is not normalized.
    """
    if kind == "half":
        a = np.deg2rad(angle_deg)
        c2, s2 = np.cos(2 * a), np.sin(2 * a)
        return np.array([[c2, s2], [s2, -c2]], dtype=complex)
    if kind == "quarter":
        r = rotation2(angle_deg).astype(complex)
        return r @ np.diag([1.0, 1.0j]) @ r.T
    raise ValueError(f"unknown wave-plate kind {kind!r} (expected 'half' or 'quarter')")


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity of two qubit states (squared-overlap convention).

    Uses the closed form F = Tr(rho sigma) + 2 sqrt(det rho det sigma),
    valid for 2x2 density matrices.
    """
    rho = check_density(rho)
    sigma = check_density(sigma)
    overlap = float(np.trace(rho @ sigma).real)
    dets = np.linalg.det(rho).real * np.linalg.det(sigma).real
    f = overlap + 2.0 * np.sqrt(max(dets, 0.0))
    return float(min(max(f, 0.0), 1.0))

"""Channel representations and diagnostics: process matrix, ellipsoid, feasibility.

The process matrix chi expresses a channel as
``E(rho) = sum_mn chi_mn E_m rho E_n^dag`` over the Stokes-aligned operator
basis of :mod:`polarchan.polar_core`.  For trace-preserving channels chi is
Hermitian, positive semidefinite and has unit trace.  A unital qubit channel
acts on Stokes space as a 3x3 matrix whose polar decomposition separates the
depolarizing ellipsoid (symmetric factor) from rotations/reflections
(orthogonal factor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bench_sim import KrausSet
from .polar_core import PAULI_BASIS

__all__ = [
    "chi_from_kraus",
    "apply_process_matrix",
    "check_process_matrix",
    "chi_eigenvalues",
    "EllipsoidReport",
    "polar_decompose",
    "pauli_feasible",
    "isotropy_deviation",
]

#: eigenvalue clipping window before declaring a chi matrix unphysical
_EIG_CLIP = 1e-10


def chi_from_kraus(kraus: KrausSet) -> np.ndarray:
    """Process matrix from a Kraus set.

    Each operator is expanded as K_d = sum_m c_dm E_m with
    c_dm = Tr(E_m K_d)/2; then chi_mn = sum_d c_dm c_dn^*.
    """
    kraus.require_complete()
    coeffs = np.array(
        [[np.trace(em @ k) / 2.0 for em in PAULI_BASIS] for k in kraus.operators]
    )
    chi = coeffs.T @ coeffs.conj()
    return chi


def apply_process_matrix(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Evaluate E(rho) = sum_mn chi_mn E_m rho E_n^dag."""
    chi = np.asarray(chi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((2, 2), dtype=complex)
    for m in range(4):
        for n in range(4):
            if chi[m, n] != 0.0:
                out += chi[m, n] * (PAULI_BASIS[m] @ rho @ PAULI_BASIS[n].conj().T)
    return out


def check_process_matrix(chi: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Validate hermiticity, unit trace and positivity of a 4x4 chi matrix."""
    chi = np.asarray(chi, dtype=complex)
    if chi.shape != (4, 4):
        raise ValueError(f"process matrix must be 4x4, got {chi.shape}")
    if np.abs(chi - chi.conj().T).max() > atol:
        raise ValueError("process matrix is not Hermitian")
    if abs(np.trace(chi) - 1.0) > atol:
        raise ValueError("process matrix trace differs from 1")
    if np.linalg.eigvalsh(chi).min() < -_EIG_CLIP:
        raise ValueError("process matrix has a negative eigenvalue")
    return chi


def chi_eigenvalues(chi: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Real eigenvalues of chi, sorted descending, tiny negatives clipped to 0."""
    chi = np.asarray(chi, dtype=complex)
    if np.abs(chi - chi.conj().T).max() > 1e-9:
        raise ValueError("process matrix is not Hermitian")
    vals = np.linalg.eigvalsh(chi)[::-1].astype(float)
    if vals.min() < -atol:
        raise ValueError(f"eigenvalue {vals.min():.3g} below clipping window")
    return np.clip(vals, 0.0, None)


@dataclass(frozen=True)
class EllipsoidReport:
    """Poincare-sphere image of a unital channel: M = rotation @ stretch.

    ``radii`` are signed: when the Stokes matrix is diagonal (axis-aligned
    channel) they are its diagonal entries, negative values meaning a
    reflection along that axis; otherwise they are the singular values in
    descending order with the sign of det(rotation) carried by the smallest.
    ``rotation`` is the orthogonal polar factor, reported verbatim.
    """

    radii: tuple
    rotation: np.ndarray
    det_sign: float
    axis_aligned: bool

    def __post_init__(self):
        o = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        o.setflags(write=False)
        object.__setattr__(self, "rotation", o)
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))

    @property
    def reflections(self) -> tuple:
        return tuple(r < 0 for r in self.radii)


def polar_decompose(m: np.ndarray, atol: float = 1e-10) -> EllipsoidReport:
    """Split a 3x3 Stokes matrix into orthogonal and stretch factors.

    Rank-deficient maps get det(rotation) = sign(det M) when that is
    nonzero and +1 otherwise, which keeps the report deterministic for the
    complete depolarizer (M = 0).
    """
    m = np.asarray(m, dtype=float).reshape(3, 3)
    u, sing, vt = np.linalg.svd(m)
    det_m = float(np.linalg.det(m))
    rank_deficient = sing.min() <= atol
    o = u @ vt
    if rank_deficient and np.linalg.det(o) < 0:
        # flip the weakest left-singular direction; S is unchanged at rank
        u = u.copy()
        u[:, -1] *= -1.0
        o = u @ vt
    det_sign = 1.0 if np.linalg.det(o) > 0 else -1.0

    off_diag = np.abs(m - np.diag(np.diag(m))).max()
    if off_diag <= atol:
        radii = tuple(np.diag(m))
        rotation = np.diag([1.0 if r >= 0 else -1.0 for r in radii])
        return EllipsoidReport(radii, rotation, float(np.linalg.det(rotation)), True)

    radii = sing.copy()
    radii[-1] *= det_sign
    return EllipsoidReport(tuple(radii), o, det_sign, False)


def pauli_feasible(r1: float, r2: float, r3: float, atol: float = 1e-12):
    """Physicality of an axis-aligned channel with signed radii (r1, r2, r3).

    Returns (feasible, lambdas) where the four lambdas are the process-matrix
    eigenvalues implied by the radii; the channel is completely positive iff
    all of them lie in [0, 1].
    """
    lam = np.array(
        [
            (1.0 + r1 + r2 + r3) / 4.0,
            (1.0 + r1 - r2 - r3) / 4.0,
            (1.0 - r1 + r2 - r3) / 4.0,
            (1.0 - r1 - r2 + r3) / 4.0,
        ]
    )
    feasible = bool(np.all(lam >= -atol) and np.all(lam <= 1.0 + atol))
    return feasible, lam


def isotropy_deviation(chi: np.ndarray) -> float:
    """Distance of a channel from isotropic depolarization.

    A channel that shrinks the sphere uniformly has three equal
    process-matrix eigenvalues (the fourth, attached to the identity
    component, can sit above or below them, and reaches zero at the
    strongest reflective settings).  The deviation is therefore the
    smallest spread among the four triples of eigenvalues: for values
    sorted descending, min(l2 - l4, l1 - l3).  Exactly zero for isotropic
    channels of any strength, including the identity.
    """
    lam = chi_eigenvalues(chi)
    return float(min(lam[1] - lam[3], lam[0] - lam[2]))

"""Exact temporal-mode model of an optical bench of crystals and wave plates.

A birefringent crystal couples polarization to arrival time: the component
along its fast axis keeps its delay, the slow component is retarded by the
crystal length (an integer number of base walk-off units after
normalization).  Propagation therefore maintains a map ``delay -> 2x2
transfer matrix``; wave plates act on every delay bin, crystals split each
bin into a fast part (same delay) and a slow part (delay + length).
Contributions landing in the same bin are summed coherently: with all
crystals cut from one material, a path's accumulated optical phase is a
function of its total delay alone, so amplitudes meeting at equal delay
carry no relative phase.  Tracing out the (unresolved) arrival time turns
the surviving transfer matrices into the Kraus operators of the
polarization channel.

Delays are exact integers end to end; there is no floating-point
coincidence test anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

import numpy as np

from .polar_core import PAULI_BASIS, rotation2, waveplate_jones

__all__ = [
    "Crystal",
    "Waveplate",
    "OpticalElement",
    "BenchConfig",
    "KrausSet",
    "AffineMap",
    "normalize_delays",
    "propagate",
    "apply_channel",
    "affine_map",
]

#: transfer matrices with Frobenius norm at or below this are dropped as
#: numerically-zero path amplitudes (perturbs completeness at the 1e-28 level)
_ZERO_NORM = 1e-14


def _as_length(value) -> Fraction:
    """Coerce a crystal length to an exact positive Fraction.

    Floats are interpreted via their shortest decimal representation
    (1.5 -> 3/2, 0.1 -> 1/10); strings accept both '3/2' and '1.5'.
    """
    if isinstance(value, Fraction):
        frac = value
    elif isinstance(value, int):
        frac = Fraction(value)
    elif isinstance(value, float):
        frac = Fraction(repr(value))
    elif isinstance(value, str):
        frac = Fraction(value)
    else:
        raise TypeError(f"cannot interpret {value!r} as a crystal length")
    if frac <= 0:
        raise ValueError(f"crystal length must be positive, got {frac}")
    return frac


@dataclass(frozen=True)
class Crystal:
    """Birefringent crystal: ``length`` in base walk-off units, fast axis in degrees."""

    length: Fraction
    fast_axis_deg: float

    def __post_init__(self):
        object.__setattr__(self, "length", _as_length(self.length))
        object.__setattr__(self, "fast_axis_deg", float(self.fast_axis_deg))


@dataclass(frozen=True)
class Waveplate:
    """Half- or quarter-wave plate at ``angle_deg`` (fast axis from horizontal)."""

    kind: str
    angle_deg: float

    def __post_init__(self):
        if self.kind not in ("half", "quarter"):
            raise ValueError(f"wave-plate kind must be 'half' or 'quarter', got {self.kind!r}")
        object.__setattr__(self, "angle_deg", float(self.angle_deg))

    def jones(self) -> np.ndarray:
        return waveplate_jones(self.kind, self.angle_deg)


OpticalElement = Union[Crystal, Waveplate]


@dataclass(frozen=True)
class BenchConfig:
    """Ordered sequence of optical elements, first element hit first."""

    elements: tuple

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("bench must contain at least one element")
        for el in elements:
            if not isinstance(el, (Crystal, Waveplate)):
                raise TypeError(f"unsupported bench element {el!r}")
        object.__setattr__(self, "elements", elements)

    def crystal_lengths(self) -> tuple:
        return tuple(el.length for el in self.elements if isinstance(el, Crystal))


def normalize_delays(bench: BenchConfig) -> BenchConfig:
    """Rescale crystal lengths by the smallest common factor making them integers.

    Length ratios are preserved exactly; the traced-out channel is invariant
    under this rescaling because delay-bin coincidences are.
    """
    lengths = bench.crystal_lengths()
    if not lengths:
        return bench
    common_den = math.lcm(*(ln.denominator for ln in lengths))
    ints = [int(ln * common_den) for ln in lengths]
    g = math.gcd(*ints)
    scale = Fraction(common_den, g)
    elements = []
    for el in bench.elements:
        if isinstance(el, Crystal):
            elements.append(Crystal(el.length * scale, el.fast_axis_deg))
        else:
            elements.append(el)
    return BenchConfig(tuple(elements))


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators of a channel, one per resolved temporal delay."""

    delays: tuple
    operators: tuple

    def __post_init__(self):
        delays = tuple(int(d) for d in self.delays)
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if len(delays) != len(ops):
            raise ValueError("delays and operators must have equal length")
        if any(d1 >= d2 for d1, d2 in zip(delays, delays[1:])):
            raise ValueError("delays must be strictly increasing")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "operators", ops)

    def __len__(self) -> int:
        return len(self.delays)

    def __iter__(self) -> Iterator:
        return iter(zip(self.delays, self.operators))

    def completeness_defect(self) -> float:
        """Max-norm deviation of sum_d K_d^dag K_d from the identity."""
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.abs(acc - np.eye(2)).max())

    def require_complete(self, atol: float = 1e-12) -> None:
        defect = self.completeness_defect()
        if defect > atol:
            raise ValueError(f"Kraus set is not trace preserving (defect {defect:.3g})")


def _fast_slow_projectors(angle_deg: float) -> tuple:
    r = rotation2(angle_deg)
    fast = np.outer(r[:, 0], r[:, 0]).astype(complex)
    slow = np.outer(r[:, 1], r[:, 1]).astype(complex)
    return fast, slow


def propagate(bench: BenchConfig) -> KrausSet:
    """Propagate through the bench and return the delay-resolved Kraus set.

    The bench is normalized to integer crystal lengths first (exact), so any
    positive-rational lengths are accepted.
    """
    bench = normalize_delays(bench)
    transfer = {0: np.eye(2, dtype=complex)}
    for el in bench.elements:
        if isinstance(el, Waveplate):
            u = el.jones()
            transfer = {d: u @ t for d, t in transfer.items()}
        else:
            shift = int(el.length)
            fast, slow = _fast_slow_projectors(el.fast_axis_deg)
            merged: dict = {}
            for d, t in transfer.items():
                stay = fast @ t
                move = slow @ t
                if d in merged:
                    merged[d] = merged[d] + stay
                else:
                    merged[d] = stay
                if d + shift in merged:
                    merged[d + shift] = merged[d + shift] + move
                else:
                    merged[d + shift] = move
            transfer = merged
    pairs = sorted(
        ((d, t) for d, t in transfer.items()
         if np.sqrt((np.abs(t) ** 2).sum()) > _ZERO_NORM),
        key=lambda pair: pair[0],
    )
    return KrausSet(tuple(d for d, _ in pairs), tuple(t for _, t in pairs))


def apply_channel(kraus: KrausSet, rho: np.ndarray) -> np.ndarray:
    """Channel action rho -> sum_d K_d rho K_d^dag."""
    kraus.require_complete()
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((2, 2), dtype=complex)
    for k in kraus.operators:
        out += k @ rho @ k.conj().T
    return out


@dataclass(frozen=True)
class AffineMap:
    """Stokes-space action of a channel: s -> matrix @ s + translation."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        m.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "translation", t)

    def apply(self, stokes) -> np.ndarray:
        s = np.asarray(stokes, dtype=float).reshape(3)
        return self.matrix @ s + self.translation


def _stokes_of(rho: np.ndarray) -> np.ndarray:
    # unchecked fast path; rho is a channel output, validation happens in tests
    return np.array([np.trace(rho @ PAULI_BASIS[i]).real for i in (1, 2, 3)])


def affine_map(kraus: KrausSet) -> AffineMap:
    """Stokes-space affine map of the channel.

    Column i of the matrix is the image of the +1 state on Stokes axis i
    minus the translation; the translation is the image of the fully mixed
    state (zero for every bench built here, since each path acts
    unitarily).
    """
    kraus.require_complete()
    eye = np.eye(2, dtype=complex)
    t = _stokes_of(apply_channel(kraus, eye / 2))
    m = np.empty((3, 3))
    for i in (1, 2, 3):
        rho_axis = (eye + PAULI_BASIS[i]) / 2
        m[:, i - 1] = _stokes_of(apply_channel(kraus, rho_axis)) - t
    return AffineMap(m, t)

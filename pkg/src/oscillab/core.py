"""
Phase space of a commensurate harmonic oscillator.

A signature ``m = (m_1, ..., m_N)`` with base frequency ``omega`` gives mode
frequencies ``omega / m_n``. Points are stored as complex amplitudes
``alpha_n = (q_n + i p_n) / sqrt(2)``; the reduced coordinates
``beta_n = sqrt(I_n / m_n) exp(i m_n phi_n)`` identify points that differ by
an element of the ambiguity group.

Mode indices are zero-based throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce as _fold
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class SignatureError(ValueError):
    """Raised for an invalid frequency signature."""


def wrap_angle(x):
    """Map angles into [0, 2*pi). Shared by every mod-2pi reduction."""
    y = np.mod(x, TWO_PI)
    # np.mod can round a tiny negative input up to exactly 2*pi
    y = np.where(y >= TWO_PI, 0.0, y)
    return float(y) if np.ndim(y) == 0 else y


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrequencySignature:
    """Integer frequency divisors ``m`` and base angular frequency ``omega``.

    The overall common divisor of ``m`` is removed on construction, pairwise
    divisors are kept.
    """

    m: tuple[int, ...]
    omega: float = 1.0

    def __post_init__(self):
        try:
            raw = [int(v) for v in self.m]
        except (TypeError, ValueError) as exc:
            raise SignatureError(f"divisors must be integers: {self.m!r}") from exc
        if not raw:
            raise SignatureError("signature needs at least one divisor")
        if any(v != w for v, w in zip(raw, self.m)):
            raise SignatureError(f"divisors must be integers: {self.m!r}")
        if any(v < 1 for v in raw):
            raise SignatureError(f"divisors must be >= 1: {raw}")
        omega = float(self.omega)
        if not math.isfinite(omega) or omega <= 0.0:
            raise SignatureError(f"omega must be positive and finite, got {self.omega!r}")
        g = _fold(math.gcd, raw)
        object.__setattr__(self, "m", tuple(v // g for v in raw))
        object.__setattr__(self, "omega", omega)

    @property
    def N(self) -> int:
        return len(self.m)

    @property
    def m_array(self) -> np.ndarray:
        return np.asarray(self.m, dtype=float)


def make_signature(m_raw: Sequence[int], omega: float = 1.0) -> FrequencySignature:
    return FrequencySignature(tuple(m_raw), omega)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point of phase space, held as complex amplitudes ``alpha``."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=complex))
        if a.ndim != 1:
            raise ValueError("alpha must be a vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha entries must be finite")
        object.__setattr__(self, "alpha", _frozen(a))

    @classmethod
    def from_cartesian(cls, q, p) -> PhasePoint:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return cls((q + 1j * p) / math.sqrt(2.0))

    @classmethod
    def from_action_angle(cls, actions, angles) -> PhasePoint:
        actions = np.asarray(actions, dtype=float)
        if np.any(actions < 0):
            raise ValueError("actions must be non-negative")
        return cls(np.sqrt(actions) * np.exp(1j * np.asarray(angles, dtype=float)))

    @property
    def N(self) -> int:
        return self.alpha.shape[0]

    @property
    def actions(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2

    def __repr__(self):
        return f"PhasePoint({np.array2string(self.alpha, precision=6)})"


@dataclass(frozen=True, eq=False)
class ReducedPoint:
    """A point of the reduced phase space, held as ``beta``."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        if b.ndim != 1:
            raise ValueError("beta must be a vector")
        if not np.all(np.isfinite(b)):
            raise ValueError("beta entries must be finite")
        object.__setattr__(self, "beta", _frozen(b))

    @property
    def N(self) -> int:
        return self.beta.shape[0]

    def __repr__(self):
        return f"ReducedPoint({np.array2string(self.beta, precision=6)})"


@dataclass(frozen=True)
class AmbiguityElement:
    """Element ``R_1^{r_1} ... R_N^{r_N}`` of the ambiguity group; ``r_n`` is taken mod ``m_n``."""

    r: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(int(v) for v in self.r))

    @staticmethod
    def group_order(sig: FrequencySignature) -> int:
        return math.prod(sig.m)

    @staticmethod
    def elements(sig: FrequencySignature):
        """Iterate over all group elements."""
        for r in np.ndindex(*sig.m):
            yield AmbiguityElement(r)


class CoordinateViews(NamedTuple):
    q: np.ndarray
    p: np.ndarray
    actions: np.ndarray
    angles: np.ndarray  # NaN marks an undefined angle (zero action)


def coordinate_views(x: PhasePoint) -> CoordinateViews:
    a = x.alpha
    q = math.sqrt(2.0) * a.real
    p = math.sqrt(2.0) * a.imag
    actions = np.abs(a) ** 2
    angles = wrap_angle(np.angle(a))
    angles = np.where(actions > 0.0, angles, np.nan)
    return CoordinateViews(q, p, actions, angles)


def reduce_alpha(alpha: np.ndarray, m) -> np.ndarray:
    """Vectorised reduction map on arrays whose last axis is the mode index."""
    alpha = np.asarray(alpha, dtype=complex)
    m = np.asarray(m)
    r = np.abs(alpha)
    safe = np.where(r > 0.0, r, 1.0)
    u = alpha / safe
    beta = (r / np.sqrt(m)) * u ** m.astype(int)
    return np.where(r > 0.0, beta, 0.0)


def reduce(x: PhasePoint, sig: FrequencySignature) -> ReducedPoint:
    """Map a phase-space point onto the reduced space; ``beta_n = 0`` where ``alpha_n = 0``."""
    if x.N != sig.N:
        raise ValueError(f"point has {x.N} modes, signature has {sig.N}")
    return ReducedPoint(reduce_alpha(x.alpha, sig.m))


def ambiguity_apply(x: PhasePoint, sig: FrequencySignature, g: AmbiguityElement) -> PhasePoint:
    if len(g.r) != sig.N:
        raise ValueError("ambiguity element has wrong length")
    r = np.mod(np.asarray(g.r), sig.m)
    return PhasePoint(np.exp(-1j * TWO_PI * r / sig.m_array) * x.alpha)


def fiber_rotate(b: ReducedPoint, gamma: float) -> ReducedPoint:
    return ReducedPoint(np.exp(1j * gamma) * b.beta)


def random_phase_point(rng: np.random.Generator, n: int, low: float = 0.1, high: float = 2.0) -> PhasePoint:
    """Actions uniform in ``[low, high]``, angles uniform on the circle."""
    actions = rng.uniform(low, high, size=n)
    angles = rng.uniform(0.0, TWO_PI, size=n)
    return PhasePoint.from_action_angle(actions, angles)

"""
Constants of motion of the m-oscillator.

``J_{nn'} = conj(beta_n) beta_{n'}`` is the hermitean rank-one invariant
matrix on the reduced space. For two modes it is equivalent to the null
four-vector ``(J0, J1, J2, J3)`` with ``J_nu = 1/2 conj(beta) sigma_nu beta``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    TWO_PI,
    FrequencySignature,
    PhasePoint,
    ReducedPoint,
    coordinate_views,
    wrap_angle,
)

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

RANK_TOL = 1e-10


class ZeroActionError(ValueError):
    """An angle was requested for a mode with vanishing action."""

    def __init__(self, index: int):
        super().__init__(f"action of mode {index} is zero; its angle is undefined")
        self.index = index


def _check_index(n: int, N: int):
    if not 0 <= n < N:
        raise IndexError(f"mode index {n} out of range for N={N}")


def hamiltonian(x: PhasePoint, sig: FrequencySignature) -> float:
    """Energy ``omega * sum |alpha_n|^2 / m_n``."""
    return sig.omega * float(np.sum(np.abs(x.alpha) ** 2 / sig.m_array))


def k_invariant(x: PhasePoint, sig: FrequencySignature, n: int, nprime: int) -> complex:
    """``K_{nn'} = alpha_n^{m_n} conj(alpha_{n'})^{m_{n'}}``.

    The two-mode invariant ``alpha_2^{m_2} conj(alpha_1)^{m_1}`` is
    ``k_invariant(x, sig, 1, 0)`` in zero-based indexing.
    """
    _check_index(n, sig.N)
    _check_index(nprime, sig.N)
    if n == nprime:
        raise ValueError("K needs two distinct modes")
    a = x.alpha
    return complex(a[n] ** sig.m[n] * np.conj(a[nprime]) ** sig.m[nprime])


@dataclass(frozen=True, eq=False)
class RelAngleSet:
    """Relative angles ``chi_{nn'} = m_n phi_n - m_{n'} phi_{n'}`` (mod 2pi), stored for n < n'."""

    chi: np.ndarray

    @property
    def N(self) -> int:
        return self.chi.shape[0]

    def angle(self, n: int, nprime: int) -> float:
        if n == nprime:
            return 0.0
        if n < nprime:
            return float(self.chi[n, nprime])
        return wrap_angle(TWO_PI - self.chi[nprime, n])

    def cocycle_residual(self) -> float:
        """Largest deviation of ``chi_{ab} + chi_{bc} + chi_{ca}`` from 0 mod 2pi."""
        worst = 0.0
        for a, b, c in itertools.combinations(range(self.N), 3):
            s = wrap_angle(self.angle(a, b) + self.angle(b, c) + self.angle(c, a))
            worst = max(worst, min(s, TWO_PI - s))
        return worst


def rel_angles(x: PhasePoint, sig: FrequencySignature) -> RelAngleSet:
    views = coordinate_views(x)
    for n, act in enumerate(views.actions):
        if act == 0.0:
            raise ZeroActionError(n)
    phase = sig.m_array * views.angles
    chi = np.zeros((sig.N, sig.N))
    for n, k in itertools.combinations(range(sig.N), 2):
        chi[n, k] = wrap_angle(phase[n] - phase[k])
    chi.setflags(write=False)
    return RelAngleSet(chi)


@dataclass(frozen=True, eq=False)
class InvariantSet:
    """The invariant matrix ``jmat``; ``j0`` and (two modes) ``jvec`` are derived from it."""

    jmat: np.ndarray

    def __post_init__(self):
        j = np.array(self.jmat, dtype=complex)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError("jmat must be square")
        j.setflags(write=False)
        object.__setattr__(self, "jmat", j)

    @classmethod
    def from_four_vector(cls, j0: float, jvec) -> InvariantSet:
        j1, j2, j3 = (float(v) for v in jvec)
        return cls([[j0 + j3, j1 + 1j * j2], [j1 - 1j * j2, j0 - j3]])

    @property
    def N(self) -> int:
        return self.jmat.shape[0]

    @property
    def j0(self) -> float:
        return 0.5 * float(np.trace(self.jmat).real)

    @property
    def jvec(self) -> np.ndarray | None:
        if self.N != 2:
            return None
        # conj(b) sigma_k b = sum_{ab} jmat_ab (sigma_k)_ab
        return 0.5 * np.einsum("ab,kab->k", self.jmat, PAULI[1:]).real

    @property
    def four_vector(self) -> np.ndarray:
        if self.N != 2:
            raise ValueError("four-vector exists only for two modes")
        return np.concatenate([[self.j0], self.jvec])

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.jmat - self.jmat.conj().T)))

    def component(self, A) -> float:
        """``conj(beta) A beta`` for hermitean ``A``, read off the rank-one matrix."""
        A = np.asarray(A, dtype=complex)
        return float(np.einsum("ab,ab->", self.jmat, A).real)


def jmatrix(beta) -> np.ndarray:
    """``J_{nn'} = conj(beta_n) beta_{n'}``; works on stacked arrays too."""
    beta = np.asarray(beta, dtype=complex)
    return np.conj(beta)[..., :, None] * beta[..., None, :]


def invariant_set(b: ReducedPoint) -> InvariantSet:
    return InvariantSet(jmatrix(b.beta))


def four_vector_action_angle(x: PhasePoint, sig: FrequencySignature) -> np.ndarray:
    """Two-mode four-vector built from actions and the relative angle."""
    if sig.N != 2:
        raise ValueError("two-mode signatures only")
    m1, m2 = sig.m
    I1, I2 = np.abs(x.alpha) ** 2
    chi = 0.0
    if I1 > 0 and I2 > 0:
        # chi = m2 phi2 - m1 phi1
        chi = rel_angles(x, sig).angle(1, 0)
    r = np.sqrt(I1 * I2 / (m1 * m2))
    return np.array([I1 / (2 * m1) + I2 / (2 * m2), r * np.cos(chi), r * np.sin(chi), I1 / (2 * m1) - I2 / (2 * m2)])


def cone_residual(inv: InvariantSet) -> float:
    """Distance from the physical (rank-one) set.

    Two modes: ``|J0^2 - |J|^2|``. Otherwise the second largest eigenvalue
    magnitude of ``jmat``.
    """
    if inv.N == 2:
        return abs(inv.j0 ** 2 - float(np.dot(inv.jvec, inv.jvec)))
    if inv.N == 1:
        return 0.0
    ev = np.sort(np.abs(np.linalg.eigvalsh(inv.jmat)))
    return float(ev[-2])


def is_rank_one(inv: InvariantSet, tol: float = RANK_TOL) -> bool:
    return cone_residual(inv) <= tol * (1.0 + inv.j0)

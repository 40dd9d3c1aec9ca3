"""
Classification of frequency signatures, period census and subsystem invariants.

A signature is isotropic when every divisor is 1 and canonical when the
divisors are pairwise coprime. Otherwise subsets of modes share a divisor
``k``; removing it gives a subsystem with its own reduced coordinates
``beta'`` and invariants ``J'`` that are conserved but do not close with the
invariants of the full oscillator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce as _fold
from typing import Sequence

import numpy as np

from .core import TWO_PI, FrequencySignature, PhasePoint, ReducedPoint, random_phase_point, reduce_alpha
from .poisson import bracket_from_gradients, hamiltonian_obs, sesquilinear_with_gradient

CENSUS_MAX_N = 20
NONCLOSURE_THRESHOLD = 1e-3
NONCLOSURE_SAMPLES = 64
NONCLOSURE_SEED = 0xC0FFEE

_SUBTYPES = {1: "type1", 2: "type2", 3: "type3"}


def gcd_matrix(m: Sequence[int]) -> np.ndarray:
    """Pairwise gcds; the diagonal is set to 0 (unused)."""
    n = len(m)
    g = np.zeros((n, n), dtype=int)
    for a, b in itertools.combinations(range(n), 2):
        g[a, b] = g[b, a] = math.gcd(m[a], m[b])
    return g


def _lcm(values) -> int:
    return _fold(lambda x, y: x * y // math.gcd(x, y), values, 1)


@dataclass
class OscillatorClass:
    kind: str
    gcd_matrix: np.ndarray
    subtype: str | None = None
    extrapolated: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subtype": self.subtype,
            "gcd_matrix": self.gcd_matrix.tolist(),
            "extrapolated": self.extrapolated,
        }


def _nested_or_repeated(m: tuple[int, ...], g: np.ndarray) -> bool:
    """True when the gcd pattern is not a set of distinct, coprime pair divisors."""
    shared = []
    for a, b in itertools.combinations(range(len(m)), 2):
        d = int(g[a, b])
        if d > 1:
            # nested: a divisor that still divides what is left after removing it
            if math.gcd(m[a] // d, d) > 1 or math.gcd(m[b] // d, d) > 1:
                return True
            shared.append(d)
    return any(math.gcd(x, y) > 1 for x, y in itertools.combinations(shared, 2))


def classify(sig: FrequencySignature) -> OscillatorClass:
    """Isotropic / canonical / non-canonical, with the three-mode subtype.

    For three modes the subtype counts the pairs with a common divisor.
    Signatures with nested or repeated divisors still get a subtype from
    that count but are flagged ``extrapolated``.
    """
    m = sig.m
    g = gcd_matrix(m)
    if all(v == 1 for v in m):
        return OscillatorClass("isotropic", g)
    pairs = int(np.count_nonzero(np.triu(g, 1) > 1))
    if pairs == 0:
        return OscillatorClass("canonical", g)
    if sig.N == 3:
        return OscillatorClass("non_canonical", g, _SUBTYPES[pairs], _nested_or_repeated(m, g))
    return OscillatorClass("non_canonical", g)


@dataclass
class PeriodCensus:
    """Minimal periods of orbits exciting exactly the modes in each subset (zero-based)."""

    periods: dict
    M: int
    w: tuple[int, ...]
    omega: float = 1.0

    def distinct_periods(self, rel: float = 1e-12) -> list[float]:
        out: list[float] = []
        for T in sorted(self.periods.values()):
            if not out or T - out[-1] > rel * T:
                out.append(T)
        return out

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "w": list(self.w),
            "periods": [{"subset": list(S), "T": T} for S, T in self.periods.items()],
        }


def period_census(sig: FrequencySignature) -> PeriodCensus:
    """``T_S = 2 pi lcm(m_S) / omega`` for every non-empty subset; ``M = lcm(m)``, ``w_n = M / m_n``."""
    if sig.N > CENSUS_MAX_N:
        raise ValueError(f"period census enumerates 2^N - 1 subsets; N={sig.N} exceeds {CENSUS_MAX_N}")
    m = sig.m
    periods = {}
    for size in range(1, sig.N + 1):
        for S in itertools.combinations(range(sig.N), size):
            periods[S] = TWO_PI * _lcm(m[i] for i in S) / sig.omega
    M = _lcm(m)
    return PeriodCensus(periods, M, tuple(M // v for v in m), sig.omega)


@dataclass
class Subsystem:
    """Modes ``subset`` with their common divisor ``k`` removed.

    ``sig`` is the subsystem signature ``m' = m_S / k`` with base frequency
    ``omega / k``, so the subsystem energy is unchanged.
    """

    subset: tuple[int, ...]
    k: int
    sig: FrequencySignature
    parent: FrequencySignature = field(repr=False)

    @property
    def m_prime(self) -> tuple[int, ...]:
        return self.sig.m

    def reduce(self, x: PhasePoint) -> ReducedPoint:
        """``beta'_n = |alpha_n| / sqrt(m'_n) (alpha_n / |alpha_n|)^{m'_n}`` for n in the subset."""
        return ReducedPoint(reduce_alpha(x.alpha[list(self.subset)], self.sig.m))

    def invariants(self, x: PhasePoint) -> np.ndarray:
        b = self.reduce(x).beta
        return np.conj(b)[:, None] * b[None, :]

    def invariants_with_gradient(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``J'`` and its gradient in the full ``(q, p)`` coordinates, shape ``(2N, s, s)``."""
        S = list(self.subset)
        Jp, dJp = sesquilinear_with_gradient(a[S], self.sig.m)
        N, s = self.parent.N, len(S)
        full = np.zeros((2 * N, s, s), dtype=complex)
        full[S] = dJp[:s]
        full[[N + i for i in S]] = dJp[s:]
        return Jp, full


def subsystem(sig: FrequencySignature, subset: Sequence[int]) -> Subsystem:
    S = tuple(sorted({int(i) for i in subset}))
    if len(S) != len(tuple(subset)):
        raise ValueError("subset indices must be distinct")
    if len(S) < 2:
        raise ValueError("a subsystem needs at least two modes")
    if S[0] < 0 or S[-1] >= sig.N:
        raise IndexError(f"subset {S} out of range for N={sig.N}")
    ms = [sig.m[i] for i in S]
    k = _fold(math.gcd, ms)
    sub = FrequencySignature(tuple(v // k for v in ms), sig.omega / k)
    return Subsystem(S, k, sub, sig)


@dataclass
class NonClosureReport:
    subset: tuple
    k: int
    m_prime: tuple
    samples: int
    seed: int
    threshold: float
    fit_residual: float
    worst_pair: tuple | None
    energy_residual: float
    closes: bool

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "k": self.k,
            "m_prime": list(self.m_prime),
            "samples": self.samples,
            "seed": self.seed,
            "threshold": self.threshold,
            "fit_residual": self.fit_residual,
            "worst_pair": None if self.worst_pair is None else list(self.worst_pair),
            "energy_residual": self.energy_residual,
            "closes": self.closes,
        }


def nonclosure_check(
    sig: FrequencySignature,
    subset: Sequence[int],
    samples: int = NONCLOSURE_SAMPLES,
    seed: int = NONCLOSURE_SEED,
    threshold: float = NONCLOSURE_THRESHOLD,
) -> NonClosureReport:
    """Test whether brackets ``{J'_ab, J_cd}`` stay in the span of ``{J, J', 1}``.

    Each bracket, sampled at random points, is least-squares fitted against
    the sampled basis functions; the report carries the largest relative
    residual. Brackets are computed from exact gradients. The energy residual
    is ``max |{H, J'_ab}|`` over the same points.
    """
    sub = subsystem(sig, subset)
    if samples < 2:
        raise ValueError("need at least two samples")
    N, s = sig.N, len(sub.subset)
    H = hamiltonian_obs(sig)
    rng = np.random.default_rng(seed)
    brackets, basis = [], []
    energy = 0.0
    for _ in range(samples):
        a = random_phase_point(rng, N).alpha
        J, dJ = sesquilinear_with_gradient(a, sig.m)
        Jp, dJp = sub.invariants_with_gradient(a)
        brackets.append(bracket_from_gradients(dJp, dJ).reshape(-1))
        basis.append(np.concatenate([J.reshape(-1), Jp.reshape(-1), [1.0]]))
        eh = bracket_from_gradients(np.asarray(H.grad(a))[:, None], dJp.reshape(2 * N, -1))
        energy = max(energy, float(np.abs(eh).max()))
    Y = np.asarray(brackets)  # samples x (s*s*N*N)
    B = np.asarray(basis)
    coef, *_ = np.linalg.lstsq(B, Y, rcond=None)
    resid = np.linalg.norm(Y - B @ coef, axis=0)
    norms = np.linalg.norm(Y, axis=0)
    scale = norms.max() if norms.size else 0.0
    live = norms > 1e-12 * max(scale, 1e-300)
    rel = np.zeros_like(norms)
    rel[live] = resid[live] / norms[live]
    worst = None
    if np.any(live):
        idx = int(np.argmax(rel))
        worst = tuple(int(v) for v in np.unravel_index(idx, (s, s, N, N)))
        worst = (sub.subset[worst[0]], sub.subset[worst[1]], worst[2], worst[3])
    fit = float(rel.max()) if rel.size else 0.0
    return NonClosureReport(
        subset=sub.subset,
        k=sub.k,
        m_prime=sub.m_prime,
        samples=samples,
        seed=seed,
        threshold=threshold,
        fit_residual=fit,
        worst_pair=worst,
        energy_residual=energy,
        closes=fit <= threshold,
    )

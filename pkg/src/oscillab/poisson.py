"""
Numerical Poisson brackets on phase space.

Convention: ``{f, g} = sum_n (df/dq_n dg/dp_n - df/dp_n dg/dq_n)``, so that
``{q, p} = 1``, ``{I, phi} = 1`` and ``{conj(alpha), alpha} = i``.

Observables are evaluated on the raw amplitude array ``alpha`` (shape ``(N,)``);
gradients are ordered ``(d/dq_1 .. d/dq_N, d/dp_1 .. d/dp_N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import FrequencySignature, PhasePoint, random_phase_point, reduce_alpha
from .invariants import PAULI

DEFAULT_H = 1e-5
DEFAULT_TOL = 1e-5
DEFAULT_SEED = 0xC0FFEE
SERIES_H = 1e-2
K_MAX = 6
RELATIONS = ("IK", "su2", "uN")

SQRT2 = math.sqrt(2.0)


class StencilError(RuntimeError):
    """A finite-difference stencil produced a non-finite value."""

    def __init__(self, label: str, offset):
        super().__init__(f"non-finite value of {label!r} at stencil offset {offset}")
        self.label = label
        self.offset = offset


@dataclass(frozen=True)
class PhaseFunction:
    """A (complex) phase-space observable with an optional exact gradient."""

    func: Callable[[np.ndarray], complex]
    label: str = "f"
    grad: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, x) -> complex:
        return self.func(_alpha(x))

    def __mul__(self, other: PhaseFunction) -> PhaseFunction:
        def grad(a, f=self, g=other):
            return f.grad(a) * g.func(a) + f.func(a) * g.grad(a)

        return PhaseFunction(
            lambda a: self.func(a) * other.func(a),
            f"({self.label})*({other.label})",
            grad if self.grad is not None and other.grad is not None else None,
        )


def _alpha(x) -> np.ndarray:
    return x.alpha if isinstance(x, PhasePoint) else np.asarray(x, dtype=complex)


def displacement(v: np.ndarray) -> np.ndarray:
    """Convert a (q, p) displacement of length 2N to an amplitude displacement."""
    n = v.shape[0] // 2
    return (v[:n] + 1j * v[n:]) / SQRT2


def _unit_shift(n: int, j: int) -> np.ndarray:
    d = np.zeros(n, dtype=complex)
    if j < n:
        d[j] = 1.0 / SQRT2
    else:
        d[j - n] = 1j / SQRT2
    return d


def _checked(f: PhaseFunction, a: np.ndarray, offset):
    v = f.func(a)
    if not np.all(np.isfinite(v)):
        raise StencilError(f.label, offset)
    return v


def gradient(f: PhaseFunction, x, h: float = DEFAULT_H, exact: bool = True) -> np.ndarray:
    """Gradient in (q, p); exact when available and allowed, else central differences."""
    a = _alpha(x)
    if exact and f.grad is not None:
        return np.asarray(f.grad(a), dtype=complex)
    if h <= 0:
        raise ValueError("step size must be positive")
    n = a.shape[0]
    out = []
    for j in range(2 * n):
        d = h * _unit_shift(n, j)
        plus = _checked(f, a + d, (j, +h))
        minus = _checked(f, a - d, (j, -h))
        out.append((plus - minus) / (2 * h))
    return np.asarray(out, dtype=complex)


def bracket_from_gradients(gf: np.ndarray, gg: np.ndarray) -> np.ndarray:
    """Bracket of gradient stacks ``gf[2N, *A]`` and ``gg[2N, *B]``; result has shape ``A + B``."""
    n = gf.shape[0] // 2
    return np.tensordot(gf[:n], gg[n:], axes=(0, 0)) - np.tensordot(gf[n:], gg[:n], axes=(0, 0))


def bracket(f: PhaseFunction, g: PhaseFunction, x, h: float = DEFAULT_H, exact: bool = True) -> complex:
    a = _alpha(x)
    return complex(bracket_from_gradients(gradient(f, a, h, exact), gradient(g, a, h, exact)))


def hamiltonian_vector(g: PhaseFunction, x, h: float = DEFAULT_H) -> np.ndarray:
    """(q, p) components of the field ``X_g`` with ``X_g f = {f, g}``."""
    gg = gradient(g, x, h)
    n = gg.shape[0] // 2
    return np.concatenate([gg[n:], -gg[:n]])


def _directional(F: Callable[[np.ndarray], complex], a: np.ndarray, v: np.ndarray, h: float, label: str):
    """Fourth-order derivative of F along the real (q, p) vector v."""
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0
    d = displacement(v / norm) * h
    vals = []
    for s in (-2, -1, 1, 2):
        val = F(a + s * d)
        if not np.all(np.isfinite(val)):
            raise StencilError(label, s * h)
        vals.append(val)
    return norm * (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)


def _bracket_with(F: Callable, g: PhaseFunction, h: float, label: str) -> Callable:
    """``a -> {F, g}(a)`` as a directional derivative along ``X_g``."""

    def G(a):
        v = hamiltonian_vector(g, a)
        out = _directional(F, a, v.real, h, label)
        # a real g can still carry rounding-level imaginary parts in its gradient
        if np.max(np.abs(v.imag)) > 1e-13 * (1.0 + np.max(np.abs(v.real))):
            out = out + 1j * _directional(F, a, v.imag, h, label)
        return out

    return G


def iterated_bracket(f: PhaseFunction, g: PhaseFunction, k: int, x, h: float = SERIES_H, k_max: int = K_MAX) -> complex:
    """``{f, g}_k``: ``{f, g}_0 = f`` and ``{f, g}_{k+1} = {{f, g}_k, g}``.

    Each level is a fourth-order directional difference of step ``h`` along
    the Hamiltonian field of ``g``. Nesting amplifies rounding by roughly
    ``1/h`` per level, hence the cap ``k_max``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > k_max:
        raise ValueError(f"k={k} exceeds k_max={k_max}")
    F = f.func
    for _ in range(k):
        F = _bracket_with(F, g, h, f.label)
    return complex(F(_alpha(x)))


def exp_series_flow(f: PhaseFunction, g: PhaseFunction, tau: float, x, k_max: int = K_MAX, h: float = SERIES_H) -> complex:
    """Truncated Lie series ``sum_k {f, g}_k tau^k / k!``; meant for ``|tau| <= 0.1``."""
    total = 0j
    for k in range(k_max + 1):
        total += iterated_bracket(f, g, k, x, h, k_max) * tau ** k / math.factorial(k)
    return total


# ---------------------------------------------------------------------------
# observables with exact gradients
# ---------------------------------------------------------------------------

def _qp_from_action_angle(a: np.ndarray, d_action: np.ndarray, d_angle: np.ndarray) -> np.ndarray:
    """Chain rule from (I, phi) partials (leading axis = mode) to (q, p) partials."""
    q = SQRT2 * a.real
    p = SQRT2 * a.imag
    I = np.abs(a) ** 2
    shape = (-1,) + (1,) * (d_action.ndim - 1)
    q, p, I = q.reshape(shape), p.reshape(shape), I.reshape(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        dq = d_action * q - d_angle * p / (2 * I)
        dp = d_action * p + d_angle * q / (2 * I)
    return np.concatenate([dq, dp])


def sesquilinear_with_gradient(a: np.ndarray, m) -> tuple[np.ndarray, np.ndarray]:
    """``J_{ab} = conj(beta_a) beta_b`` and its (q, p) gradient of shape ``(2N, N, N)``."""
    m = np.asarray(m, dtype=float)
    n = a.shape[0]
    beta = reduce_alpha(a, m)
    J = np.conj(beta)[:, None] * beta[None, :]
    eye = np.eye(n)
    I = np.abs(a) ** 2
    # d/dI_k: (delta_ak + delta_bk) J_ab / (2 I_k);  d/dphi_k: i m_k (delta_bk - delta_ak) J_ab
    sel = eye[:, :, None] + eye[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        d_action = sel * J[None] / (2 * I[:, None, None])
    d_angle = 1j * m[:, None, None] * (eye[:, None, :] - eye[:, :, None]) * J[None]
    return J, _qp_from_action_angle(a, d_action, d_angle)


def k_matrix_with_gradient(a: np.ndarray, m) -> tuple[np.ndarray, np.ndarray]:
    """``K_{ab} = alpha_a^{m_a} conj(alpha_b)^{m_b}`` and its gradient ``(2N, N, N)``."""
    mi = np.asarray(m, dtype=int)
    m = mi.astype(float)
    n = a.shape[0]
    pw = a ** mi
    K = pw[:, None] * np.conj(pw)[None, :]
    eye = np.eye(n)
    I = np.abs(a) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d_action = (m[None, :, None] * eye[:, :, None] + m[None, None, :] * eye[:, None, :]) * K[None] / (2 * I[:, None, None])
    d_angle = 1j * (m[None, :, None] * eye[:, :, None] - m[None, None, :] * eye[:, None, :]) * K[None]
    return K, _qp_from_action_angle(a, d_action, d_angle)


def coordinate_q(n: int) -> PhaseFunction:
    def grad(a):
        g = np.zeros(2 * a.shape[0], dtype=complex)
        g[n] = 1.0
        return g

    return PhaseFunction(lambda a: SQRT2 * a[n].real, f"q{n}", grad)


def coordinate_p(n: int) -> PhaseFunction:
    def grad(a):
        g = np.zeros(2 * a.shape[0], dtype=complex)
        g[a.shape[0] + n] = 1.0
        return g

    return PhaseFunction(lambda a: SQRT2 * a[n].imag, f"p{n}", grad)


def alpha_obs(n: int, conjugate: bool = False) -> PhaseFunction:
    s = -1.0 if conjugate else 1.0

    def grad(a):
        g = np.zeros(2 * a.shape[0], dtype=complex)
        g[n] = 1 / SQRT2
        g[a.shape[0] + n] = s * 1j / SQRT2
        return g

    func = (lambda a: np.conj(a[n])) if conjugate else (lambda a: a[n])
    return PhaseFunction(func, f"conj(alpha{n})" if conjugate else f"alpha{n}", grad)


def action(n: int) -> PhaseFunction:
    def grad(a):
        d = np.zeros(a.shape[0])
        d[n] = 1.0
        return _qp_from_action_angle(a, d, np.zeros_like(d))

    return PhaseFunction(lambda a: abs(a[n]) ** 2, f"I{n}", grad)


def angle(n: int) -> PhaseFunction:
    """Angle of mode n; smooth only away from zero action and the branch cut."""

    def grad(a):
        d = np.zeros(a.shape[0])
        d[n] = 1.0
        return _qp_from_action_angle(a, np.zeros_like(d), d)

    return PhaseFunction(lambda a: math.atan2(a[n].imag, a[n].real), f"phi{n}", grad)


def hamiltonian_obs(sig: FrequencySignature) -> PhaseFunction:
    w = sig.omega / sig.m_array

    def grad(a):
        return _qp_from_action_angle(a, w.copy(), np.zeros_like(w))

    return PhaseFunction(lambda a: float(np.sum(w * np.abs(a) ** 2)), "H", grad)


def beta_obs(sig: FrequencySignature, n: int, conjugate: bool = False) -> PhaseFunction:
    m = sig.m_array

    def value(a):
        b = reduce_alpha(a, sig.m)[n]
        return np.conj(b) if conjugate else b

    def grad(a):
        b = value(a)
        d_action = np.zeros(a.shape[0], dtype=complex)
        d_angle = np.zeros(a.shape[0], dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_action[n] = b / (2 * abs(a[n]) ** 2)
        d_angle[n] = (-1j if conjugate else 1j) * m[n] * b
        return _qp_from_action_angle(a, d_action, d_angle)

    return PhaseFunction(value, f"conj(beta{n})" if conjugate else f"beta{n}", grad)


def k_obs(sig: FrequencySignature, n: int, nprime: int) -> PhaseFunction:
    return PhaseFunction(
        lambda a: k_matrix_with_gradient(a, sig.m)[0][n, nprime],
        f"K{n}{nprime}",
        lambda a: k_matrix_with_gradient(a, sig.m)[1][:, n, nprime],
    )


def sesquilinear_obs(sig: FrequencySignature, A, label: str = "G") -> PhaseFunction:
    """``conj(beta) A beta`` as a phase-space observable."""
    A = np.asarray(A, dtype=complex)

    def value(a):
        J = sesquilinear_with_gradient(a, sig.m)[0]
        return np.einsum("ab,ab->", J, A)

    def grad(a):
        dJ = sesquilinear_with_gradient(a, sig.m)[1]
        return np.einsum("kab,ab->k", dJ, A)

    return PhaseFunction(value, label, grad)


def j_obs(sig: FrequencySignature, n: int, nprime: int) -> PhaseFunction:
    A = np.zeros((sig.N, sig.N))
    A[n, nprime] = 1.0
    return sesquilinear_obs(sig, A, f"J{n}{nprime}")


def four_vector_obs(sig: FrequencySignature, nu: int) -> PhaseFunction:
    if sig.N != 2:
        raise ValueError("four-vector components exist only for two modes")
    return sesquilinear_obs(sig, 0.5 * PAULI[nu], f"J{nu}")


# ---------------------------------------------------------------------------
# algebra verification
# ---------------------------------------------------------------------------

@dataclass
class AlgebraReport:
    relation: str
    samples: int
    h: float
    tol: float
    max_residual: float
    worst_point: list
    passed: bool
    exact: bool = False
    failed_samples: int = 0
    m: tuple = ()
    omega: float = 1.0
    seed: int = DEFAULT_SEED

    def to_dict(self) -> dict:
        return {
            "relation": self.relation,
            "samples": self.samples,
            "h": self.h,
            "tol": self.tol,
            "max_residual": self.max_residual,
            "worst_point": self.worst_point,
            "pass": self.passed,
            "exact": self.exact,
            "failed_samples": self.failed_samples,
            "m": list(self.m),
            "omega": self.omega,
            "seed": self.seed,
        }


def _stacked_gradient(F: Callable[[np.ndarray], np.ndarray], a: np.ndarray, h: float, label: str) -> np.ndarray:
    """Central differences of an array-valued function; result ``(2N, *shape)``."""
    n = a.shape[0]
    out = []
    for j in range(2 * n):
        d = h * _unit_shift(n, j)
        plus, minus = F(a + d), F(a - d)
        if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
            raise StencilError(label, (j, h))
        out.append((plus - minus) / (2 * h))
    return np.asarray(out)


def _residual_ik(a, sig, h, exact):
    m = sig.m_array
    n = sig.N

    def actions(z):
        return np.abs(z) ** 2

    K, dK = k_matrix_with_gradient(a, sig.m)
    if exact:
        dI = _qp_from_action_angle(a, np.eye(n), np.zeros((n, n)))
    else:
        dI = _stacked_gradient(actions, a, h, "I")
        dK = _stacked_gradient(lambda z: k_matrix_with_gradient(z, sig.m)[0], a, h, "K")
    ik = bracket_from_gradients(dI, dK)  # [a, b, c]
    eye = np.eye(n)
    expected = 1j * (m[None, :, None] * eye[:, :, None] - m[None, None, :] * eye[:, None, :]) * K[None]
    off = ~np.eye(n, dtype=bool)
    res = np.abs(ik - expected)[:, off]
    ii = bracket_from_gradients(dI, dI)
    return max(float(res.max()) if res.size else 0.0, float(np.abs(ii).max()))


def _residual_su2(a, sig, h, exact):
    def four(z):
        J = sesquilinear_with_gradient(z, sig.m)[0]
        return 0.5 * np.einsum("ab,kab->k", J, PAULI).real

    J, dJ = sesquilinear_with_gradient(a, sig.m)
    if exact:
        j4 = 0.5 * np.einsum("ab,kab->k", J, PAULI).real
        d4 = 0.5 * np.einsum("xab,kab->xk", dJ, PAULI)
    else:
        j4 = four(a)
        d4 = _stacked_gradient(four, a, h, "J")
    br = bracket_from_gradients(d4, d4)
    expected = np.zeros((4, 4))
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    expected[1:, 1:] = np.einsum("jkl,l->jk", eps, j4[1:])
    return float(np.abs(br - expected).max())


def _residual_un(a, sig, h, exact):
    J, dJ = sesquilinear_with_gradient(a, sig.m)
    if not exact:
        dJ = _stacked_gradient(lambda z: sesquilinear_with_gradient(z, sig.m)[0], a, h, "J")
    br = bracket_from_gradients(dJ, dJ)  # [a, b, c, d]
    eye = np.eye(sig.N)
    # i (delta_ad J_cb - delta_bc J_ad)
    expected = 1j * (np.einsum("ad,cb->abcd", eye, J) - np.einsum("bc,ad->abcd", eye, J))
    return float(np.abs(br - expected).max())


_RESIDUALS = {"IK": _residual_ik, "su2": _residual_su2, "uN": _residual_un}


def verify_algebra(
    sig: FrequencySignature,
    relation: str,
    samples: int = 100,
    seed: int = DEFAULT_SEED,
    h: float = DEFAULT_H,
    tol: float = DEFAULT_TOL,
    exact: bool = False,
) -> AlgebraReport:
    """Check a bracket relation at random points with actions in [0.1, 2].

    ``IK``: brackets of actions with the K invariants; ``su2``: the two-mode
    four-vector algebra; ``uN``: brackets of the invariant matrix entries.
    The report passes iff the largest absolute residual is below ``tol``.
    """
    if relation not in _RESIDUALS:
        raise ValueError(f"unknown relation {relation!r}; choose from {RELATIONS}")
    if relation == "su2" and sig.N != 2:
        raise ValueError("su2 relation needs a two-mode signature")
    if relation == "IK" and sig.N < 2:
        raise ValueError("IK relation needs at least two modes")
    if samples < 1 or h <= 0 or tol <= 0:
        raise ValueError("samples, h and tol must be positive")
    rng = np.random.default_rng(seed)
    points = [random_phase_point(rng, sig.N).alpha for _ in range(samples)]
    check = _RESIDUALS[relation]
    worst, worst_point, failed = -1.0, None, 0
    for a in points:
        try:
            r = check(a, sig, h, exact)
        except StencilError:
            failed += 1
            continue
        if r > worst:
            worst, worst_point = r, a
    if failed == samples:
        raise StencilError(relation, "every sample")
    return AlgebraReport(
        relation=relation,
        samples=samples,
        h=h,
        tol=tol,
        max_residual=worst,
        worst_point=[[float(z.real), float(z.imag)] for z in worst_point],
        passed=bool(worst < tol),
        exact=exact,
        failed_samples=failed,
        m=sig.m,
        omega=sig.omega,
        seed=seed,
    )

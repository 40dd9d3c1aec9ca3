"""
Symmetry flows in phase space, reduced space and invariant space.

In the reduced space a generator ``G = conj(beta) A beta`` acts linearly,
``beta -> exp(-i tau A) beta``; for two modes the direction generators
``n . J`` give SU(2) and the invariants rotate under SO(3). In phase space
the same generators produce non-linear fields that are ill-defined where an
action vanishes; ``flow_gamma`` integrates them numerically and stops at
the first such plane instead of continuing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq, minimize_scalar

from .core import (
    TWO_PI,
    FrequencySignature,
    PhasePoint,
    ReducedPoint,
    make_signature,
    reduce_alpha,
)
from .invariants import PAULI, InvariantSet, invariant_set, jmatrix
from .poisson import displacement, hamiltonian_vector, sesquilinear_obs

EPS_SING = 1e-6
RTOL = 1e-10
ATOL = 1e-10
MAX_STEP = 1.0

E3 = np.array([0.0, 0.0, 1.0])


class SingularInputError(ValueError):
    """The starting point already lies on (or at the image of) a singular plane."""


def _unit(v, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{what} must have three components")
    norm = float(np.linalg.norm(v))
    if not math.isfinite(norm) or norm == 0.0:
        raise ValueError(f"{what} must be non-zero and finite")
    return v / norm


@dataclass(frozen=True, eq=False)
class Generator:
    """A linear combination of invariants acting as a flow generator.

    The generated function is ``conj(beta) A beta``; ``matrix(N)`` returns ``A``.
    """

    kind: str
    n: np.ndarray | None = None
    A: np.ndarray | None = None
    label: str = ""

    @classmethod
    def j0(cls) -> Generator:
        return cls("J0", label="J0")

    @classmethod
    def j3(cls) -> Generator:
        return cls("J3", label="J3")

    @classmethod
    def direction(cls, n) -> Generator:
        u = _unit(n, "direction")
        return cls("direction", n=u, label="n.J")

    @classmethod
    def hermitean(cls, A, label: str = "A") -> Generator:
        A = np.array(A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("generator matrix must be square")
        if np.max(np.abs(A - A.conj().T)) > 1e-12:
            raise ValueError("generator matrix must be hermitean")
        return cls("hermitean", A=A, label=label)

    @classmethod
    def symmetric(cls, N: int, a: int, b: int) -> Generator:
        """``J^s_ab = 1/2 conj(beta) (E_ab + E_ba) beta``."""
        A = np.zeros((N, N), dtype=complex)
        A[a, b] += 0.5
        A[b, a] += 0.5
        return cls.hermitean(A, f"Js{a}{b}")

    @classmethod
    def antisymmetric(cls, N: int, a: int, b: int) -> Generator:
        """``J^a_ab = 1/(2i) conj(beta) (E_ab - E_ba) beta``."""
        A = np.zeros((N, N), dtype=complex)
        A[a, b] = -0.5j
        A[b, a] = 0.5j
        return cls.hermitean(A, f"Ja{a}{b}")

    @classmethod
    def diagonal(cls, N: int, a: int) -> Generator:
        """``J^d_a = 1/2 conj(beta) (E_aa - E_{a+1,a+1}) beta``."""
        A = np.zeros((N, N), dtype=complex)
        A[a, a] = 0.5
        A[a + 1, a + 1] = -0.5
        return cls.hermitean(A, f"Jd{a}")

    def matrix(self, N: int) -> np.ndarray:
        if self.kind == "J0":
            return 0.5 * np.eye(N, dtype=complex)
        if self.kind == "hermitean":
            if self.A.shape[0] != N:
                raise ValueError(f"generator acts on {self.A.shape[0]} modes, point has {N}")
            return self.A
        if N != 2:
            raise ValueError(f"{self.kind} generators need two modes")
        if self.kind == "J3":
            return 0.5 * PAULI[3]
        return 0.5 * np.einsum("k,kab->ab", self.n, PAULI[1:])

    def is_diagonal(self, N: int) -> bool:
        A = self.matrix(N)
        return bool(np.all(A[~np.eye(N, dtype=bool)] == 0))


@dataclass
class OrbitTrace:
    """Sampled flow output.

    ``states`` holds amplitudes (phase or reduced space) or the four-vector
    (invariant space); ``invariants`` holds ``J0..J3`` for two modes and
    ``J0`` otherwise; ``drift`` is the largest change of the conserved
    quantities relative to the first sample.
    """

    space: str
    taus: np.ndarray
    states: np.ndarray
    invariants: np.ndarray
    drift: np.ndarray
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.taus)


@dataclass
class SingularityReport:
    """Outcome of singular-plane detection, or the singular geometry of a point.

    Planes are zero-based: plane ``k`` is ``alpha_k = 0``. For two modes,
    ``normals[0] = J + J0 e3`` (its pole ``-J0 e3`` is plane 0) and
    ``normals[1] = J - J0 e3`` (pole ``+J0 e3``, plane 1).
    """

    hit: bool
    tau_star: float | None = None
    plane: int | None = None
    min_action: float = math.inf
    normals: np.ndarray | None = None
    plane_bases: np.ndarray | None = None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "hit": self.hit,
            "tau_star": self.tau_star,
            "plane": self.plane,
            "min_action": self.min_action if math.isfinite(self.min_action) else None,
            "normals": None if self.normals is None else self.normals.tolist(),
            "diagnostic": self.diagnostic,
        }


@dataclass
class FlowOptions:
    eps_sing: float = EPS_SING
    rtol: float = RTOL
    atol: float = ATOL
    max_step: float = MAX_STEP
    sample_step: float | None = None
    crosscheck: bool = True

    def __post_init__(self):
        for name in ("eps_sing", "rtol", "atol", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sample_step is not None and not self.sample_step > 0:
            raise ValueError("sample_step must be positive")


# ---------------------------------------------------------------------------
# closed-form flows
# ---------------------------------------------------------------------------

def evolve_time(x: PhasePoint, sig: FrequencySignature, t: float) -> PhasePoint:
    return PhasePoint(np.exp(-1j * sig.omega * t / sig.m_array) * x.alpha)


def su2_matrix(n, tau: float) -> np.ndarray:
    """``cos(tau/2) - i sin(tau/2) n.sigma``."""
    n = np.asarray(n, dtype=float)
    return math.cos(tau / 2) * PAULI[0] - 1j * math.sin(tau / 2) * np.einsum("k,kab->ab", n, PAULI[1:])


def unitary(A: np.ndarray, tau: float) -> np.ndarray:
    """``exp(-i tau A)`` for hermitean ``A`` via its eigen-decomposition."""
    w, V = np.linalg.eigh(A)
    return (V * np.exp(-1j * tau * w)) @ V.conj().T


def flow_matrix(g: Generator, N: int, tau: float) -> np.ndarray:
    if g.kind == "J0":
        return np.exp(-0.5j * tau) * np.eye(N, dtype=complex)
    if g.kind == "J3":
        g.matrix(N)
        return np.diag([np.exp(-0.5j * tau), np.exp(0.5j * tau)])
    if g.kind == "direction":
        g.matrix(N)
        return su2_matrix(g.n, tau)
    return unitary(g.matrix(N), tau)


def _flow_many(A: np.ndarray, b0: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Rows ``exp(-i tau A) b0`` for every tau."""
    w, V = np.linalg.eigh(A)
    c = V.conj().T @ b0
    return (np.exp(-1j * np.outer(taus, w)) * c) @ V.T


def flow_reduced(b: ReducedPoint, g: Generator, tau: float) -> ReducedPoint:
    return ReducedPoint(flow_matrix(g, b.N, tau) @ b.beta)


def rotate(jvec, n, tau: float) -> np.ndarray:
    """Rotate ``jvec`` by ``tau`` about unit ``n`` (right-handed)."""
    j = np.asarray(jvec, dtype=float)
    n = np.asarray(n, dtype=float)
    return math.cos(tau) * j + (1 - math.cos(tau)) * n * np.dot(n, j) + math.sin(tau) * np.cross(n, j)


def flow_upsilon(inv: InvariantSet, n, tau: float) -> InvariantSet:
    """Action of ``n . J`` on two-mode invariants: ``dJ/dtau = n x J``."""
    if inv.N != 2:
        raise ValueError("invariant-space rotations are defined for two modes")
    u = _unit(n, "direction")
    return InvariantSet.from_four_vector(inv.j0, rotate(inv.jvec, u, tau))


def lorentz_boost(b: ReducedPoint, nu, gamma_param: float) -> tuple[ReducedPoint, InvariantSet]:
    """``beta -> (cosh(g/2) + sinh(g/2) nu.sigma) beta`` and its invariants."""
    if b.N != 2:
        raise ValueError("boosts act on two-mode reduced points")
    u = _unit(nu, "boost direction")
    B = math.cosh(gamma_param / 2) * PAULI[0] + math.sinh(gamma_param / 2) * np.einsum("k,kab->ab", u, PAULI[1:])
    out = ReducedPoint(B @ b.beta)
    return out, invariant_set(out)


def hopf_sample(sig: FrequencySignature, E: float, count: int, seed: int | None = None) -> list[tuple[ReducedPoint, InvariantSet]]:
    """Uniform points on the energy 3-sphere ``|beta|^2 = E/omega`` with their invariants."""
    if sig.N != 2:
        raise ValueError("Hopf sampling needs a two-mode signature")
    if not E > 0:
        raise ValueError("energy must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, 2)) + 1j * rng.standard_normal((count, 2))
    z *= math.sqrt(E / sig.omega) / np.linalg.norm(z, axis=1)[:, None]
    out = []
    for beta in z:
        b = ReducedPoint(beta)
        out.append((b, invariant_set(b)))
    return out


def group_compose_check(sequence: Sequence[tuple], b: ReducedPoint) -> float:
    """Sequential reduced flows versus one application of the SU(2) product."""
    if b.N != 2:
        raise ValueError("two-mode reduced point expected")
    state = b
    product = np.eye(2, dtype=complex)
    for n, tau in sequence:
        g = Generator.direction(n)
        state = flow_reduced(state, g, tau)
        product = su2_matrix(g.n, tau) @ product
    return float(np.max(np.abs(state.beta - product @ b.beta)))


# ---------------------------------------------------------------------------
# phase-space fields
# ---------------------------------------------------------------------------

def gamma_field(alpha: np.ndarray, m, A: np.ndarray) -> np.ndarray:
    """``d alpha / d tau = {alpha, conj(beta) A beta}`` by the chain rule.

    With ``c_n = conj(beta_n) (A beta)_n`` the field is
    ``-i (Re c_n + i m_n Im c_n) / conj(alpha_n)``. The diagonal part is
    smooth; the off-diagonal part is set to zero where ``alpha_n = 0``.
    """
    return make_gamma_field(m, A)(np.asarray(alpha, dtype=complex))


def make_gamma_field(m, A: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Precomputed ``gamma_field`` for repeated evaluation inside the integrator."""
    m = np.asarray(m, dtype=float)
    mi = m.astype(int)
    A = np.asarray(A, dtype=complex)
    lin = -1j * np.diag(A).real / m
    off = A - np.diag(np.diag(A))
    if not np.any(off):
        return lambda a: lin * a
    root_m = np.sqrt(m)

    def field_(a):
        r = np.abs(a)
        nz = r > 0
        if nz.all():
            beta = a ** mi / (r ** (mi - 1) * root_m)
        else:
            beta = reduce_alpha(a, m)
        c = np.conj(beta) * (off @ beta)
        out = lin * a
        if nz.all():
            return out - 1j * (c.real + 1j * m * c.imag) / np.conj(a)
        out[nz] += -1j * (c.real[nz] + 1j * m[nz] * c.imag[nz]) / np.conj(a[nz])
        return out

    return field_


def direction_field(alpha: np.ndarray, sig: FrequencySignature, n) -> np.ndarray:
    """Two-mode field of ``n . J`` written through the four-vector (undefined on the planes)."""
    n = np.asarray(n, dtype=float)
    beta = reduce_alpha(alpha, sig.m)
    j = 0.5 * np.einsum("a,kab,b->k", np.conj(beta), PAULI, beta).real
    nj = float(np.dot(n, j[1:]))
    cross3 = n[0] * j[2] - n[1] * j[1]
    m1, m2 = sig.m
    return np.array([
        (nj + 1j * m1 * cross3 + n[2] * j[0]) / np.conj(alpha[0]),
        (nj - 1j * m2 * cross3 - n[2] * j[0]) / np.conj(alpha[1]),
    ]) / 2j


def gamma_field_fd(alpha: np.ndarray, sig: FrequencySignature, A: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """The same field from finite-difference Poisson brackets."""
    G = sesquilinear_obs(sig, A)
    G = type(G)(G.func, G.label)  # drop the exact gradient
    return displacement(hamiltonian_vector(G, alpha, h))


# ---------------------------------------------------------------------------
# numerical integration with singular-plane detection
# ---------------------------------------------------------------------------

@dataclass
class _Run:
    taus: list
    states: list
    fine_taus: list
    fine_states: list
    stats: dict
    hit: tuple | None = None  # (tau_star, plane, min_action, diagnostic)


def _grid_between(t0: float, t1: float, step: float | None, tau_max: float) -> np.ndarray:
    if step is None:
        return np.array([t1])
    k0 = math.floor(t0 / step + 1e-9) + 1
    k1 = math.floor(t1 / step + 1e-9)
    pts = [k * step for k in range(k0, k1 + 1) if t0 < k * step <= t1]
    if t1 == tau_max and (not pts or pts[-1] < t1):
        pts.append(t1)
    return np.asarray(pts)


def _integrate(
    fun: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    tau_max: float,
    opts: FlowOptions,
    watch: np.ndarray | None = None,
    m: np.ndarray | None = None,
) -> _Run:
    """Adaptive DOP853 run. ``watch`` marks modes whose action must stay above
    ``eps_sing``; ``m`` enables the per-step phase guard on ``beta``."""
    calls = [0]

    def rhs(t, y):
        calls[0] += 1
        return fun(y)

    y0 = np.asarray(y0, dtype=complex)
    run = _Run([0.0], [y0.copy()], [0.0], [y0.copy()], {"steps": 0, "rejected": 0, "nfev": 0, "restarts": 0})
    if tau_max <= 0:
        return run
    max_step = opts.max_step
    t, y = 0.0, y0
    solver = DOP853(rhs, t, y, tau_max, rtol=opts.rtol, atol=opts.atol, max_step=max_step)
    n_stages = solver.n_stages
    scale = float(np.max(np.abs(y0) ** 2)) if y0.size else 1.0
    screen = max(100 * opts.eps_sing, 1e-2 * scale)

    while solver.status == "running":
        before = calls[0]
        solver.step()
        attempts = (calls[0] - before) // n_stages
        if solver.status == "failed":
            I = np.abs(solver.y) ** 2
            plane = int(np.argmin(np.where(watch, I, np.inf))) if watch is not None else None
            run.hit = (float(solver.t), plane, float(I[plane]) if plane is not None else math.nan, f"integrator stopped: {solver.message}")
            break
        run.stats["steps"] += 1
        run.stats["rejected"] += max(attempts - 1, 0)
        t0, t1 = solver.t_old, solver.t
        dense = solver.dense_output()
        ts = np.linspace(t0, t1, 9)
        ys = dense(ts).T

        if m is not None and watch is not None:
            beta = reduce_alpha(ys, m)[:, watch]
            dphi = np.angle(beta[1:] / np.where(beta[:-1] == 0, 1, beta[:-1]))
            if np.any(np.abs(dphi.sum(axis=0)) >= math.pi) and (t1 - t0) > 1e-9:
                # reject: restart from the previous point with a smaller step cap
                run.stats["restarts"] += 1
                max_step = 0.5 * (t1 - t0)
                solver = DOP853(rhs, t0, ys[0], tau_max, rtol=opts.rtol, atol=opts.atol, max_step=max_step, first_step=max_step)
                continue

        hit = None
        if watch is not None:
            I = np.abs(ys) ** 2
            low = np.where(watch, I, np.inf).min(axis=0)
            for k in np.flatnonzero(low < screen):
                hit_k = _refine_minimum(dense, ts, k, opts.eps_sing)
                if hit_k is not None and (hit is None or hit_k[0] < hit[0]):
                    hit = (hit_k[0], int(k), hit_k[1])
        if hit is not None:
            tau_star, plane, min_action = hit
            keep = ts < tau_star
            run.fine_taus.extend(ts[1:][keep[1:]])
            run.fine_states.extend(ys[1:][keep[1:]])
            grid = _grid_between(t0, tau_star, opts.sample_step, tau_star)
            grid = grid[grid < tau_star]
            for tg in grid:
                run.taus.append(float(tg))
                run.states.append(dense(tg))
            run.taus.append(tau_star)
            run.states.append(dense(tau_star))
            run.hit = (tau_star, plane, min_action, "action fell below eps_sing")
            break

        run.fine_taus.extend(ts[1:])
        run.fine_states.extend(ys[1:])
        for tg in _grid_between(t0, t1, opts.sample_step, tau_max):
            run.taus.append(float(tg))
            run.states.append(dense(tg) if tg != t1 else solver.y.copy())
        if max_step < opts.max_step:
            max_step = min(opts.max_step, 2 * max_step)
            solver.max_step = max_step

    run.stats["nfev"] = calls[0]
    return run


def _refine_minimum(dense, ts: np.ndarray, k: int, eps: float):
    """Locate the minimum of action k inside one step; return (tau_star, min_action) on a hit."""

    def action(tau):
        return float(abs(dense(tau)[k]) ** 2)

    I = np.abs(dense(ts)[k]) ** 2
    j = int(np.argmin(I))
    lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, len(ts) - 1)]
    if hi > lo:
        res = minimize_scalar(action, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        tau_min, i_min = (float(res.x), float(res.fun)) if res.fun < I[j] else (float(ts[j]), float(I[j]))
    else:
        tau_min, i_min = float(ts[j]), float(I[j])
    if i_min >= eps:
        return None
    if action(ts[0]) < eps:
        return float(ts[0]), i_min
    tau_star = brentq(lambda s: action(s) - eps, ts[0], tau_min, xtol=1e-12)
    return float(tau_star), i_min


def _invariant_rows(betas: np.ndarray) -> np.ndarray:
    if betas.shape[1] == 2:
        return 0.5 * np.einsum("ia,kab,ib->ik", np.conj(betas), PAULI, betas).real
    return 0.5 * np.sum(np.abs(betas) ** 2, axis=1, keepdims=True)


def _generator_values(betas: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("ia,ab,ib->i", np.conj(betas), A, betas).real


def reconstruct_orbit(x: PhasePoint, sig: FrequencySignature, g: Generator, taus) -> np.ndarray:
    """Regular orbit of ``g`` in phase space from the linear reduced flow.

    Moduli come from ``|alpha_n|^2 = m_n |beta_n(tau)|^2`` (for two modes via
    the rotated invariants); phases from ``phi_n = phi_n(0) + (Phi_n(tau) - Phi_n(0)) / m_n``
    where ``Phi_n`` is the continuously tracked phase of ``beta_n(tau)``.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(x.actions == 0):
        raise SingularInputError("phase reconstruction needs all actions positive")
    m = sig.m_array
    b0 = reduce_alpha(x.alpha, sig.m)
    fine = np.union1d(taus, np.arange(0.0, taus.max() + 0.005, 0.005)) if taus.size else taus
    fine = np.union1d(fine, [0.0])
    betas = _flow_many(g.matrix(sig.N), b0, fine)
    Phi = np.unwrap(np.angle(betas), axis=0)
    phi = np.angle(x.alpha) + (Phi - Phi[0]) / m
    if g.kind == "direction":
        j0 = 0.5 * float(np.vdot(b0, b0).real)
        jvec = 0.5 * np.einsum("a,kab,b->k", np.conj(b0), PAULI[1:], b0).real
        n = g.n
        j3 = np.cos(fine) * jvec[2] + (1 - np.cos(fine)) * n[2] * np.dot(n, jvec) + np.sin(fine) * np.cross(n, jvec)[2]
        moduli = np.stack([m[0] * (j0 + j3), m[1] * (j0 - j3)], axis=1)
    else:
        moduli = m * np.abs(betas) ** 2
    alpha = np.sqrt(np.maximum(moduli, 0.0)) * np.exp(1j * phi)
    idx = np.searchsorted(fine, taus)
    return alpha[idx]


def flow_gamma(
    x: PhasePoint,
    sig: FrequencySignature,
    g: Generator,
    tau_max: float,
    opts: FlowOptions | None = None,
    field_fn: Callable | None = None,
) -> tuple[OrbitTrace, SingularityReport]:
    """Integrate ``d alpha/d tau = {alpha, G}`` until ``tau_max`` or the first singular plane.

    Modes that start with positive action are watched; the run halts when one
    of them drops below ``opts.eps_sing``. Regular orbits are compared with
    ``reconstruct_orbit`` and the deviations stored in ``trace.stats``.
    """
    opts = opts or FlowOptions()
    if x.N != sig.N:
        raise ValueError("point and signature disagree on N")
    A = g.matrix(sig.N)
    I0 = x.actions
    watch = I0 >= opts.eps_sing
    if not g.is_diagonal(sig.N) and not np.all(watch):
        raise SingularInputError(f"start point has action below eps_sing in mode(s) {np.flatnonzero(~watch).tolist()}")
    m = sig.m_array
    if field_fn is None:
        fun = make_gamma_field(m, A)
    else:
        fun = lambda a: field_fn(a, sig, A)  # noqa: E731

    run = _integrate(fun, x.alpha, tau_max, opts, watch=watch, m=m)
    taus = np.asarray(run.taus)
    states = np.asarray(run.states)
    betas = reduce_alpha(states, m)
    inv = _invariant_rows(betas)
    j0 = 0.5 * np.sum(np.abs(betas) ** 2, axis=1)
    G = _generator_values(betas, A)
    drift = np.maximum(np.abs(j0 - j0[0]), np.abs(G - G[0]))
    stats = dict(run.stats)

    if run.hit is None:
        report = SingularityReport(hit=False, min_action=float(np.min(np.abs(np.asarray(run.fine_states)) ** 2)))
        if opts.crosscheck and np.all(watch) and len(run.fine_taus) > 1:
            ft = np.asarray(run.fine_taus)
            fs = np.asarray(run.fine_states)
            rec = reconstruct_orbit(x, sig, g, ft)
            stats["moduli_error"] = float(np.max(np.abs(np.abs(fs) ** 2 - np.abs(rec) ** 2)))
            num_phase = np.unwrap(np.angle(fs), axis=0)
            rec_phase = np.unwrap(np.angle(rec), axis=0)
            stats["phase_error"] = float(np.max(np.abs(num_phase - rec_phase)))
    else:
        tau_star, plane, min_action, diag = run.hit
        report = SingularityReport(hit=True, tau_star=tau_star, plane=plane, min_action=min_action, diagnostic=diag)
    if sig.N == 2:
        report.normals = _pole_normals(inv[0])
    trace = OrbitTrace("gamma", taus, states, inv, drift, stats)
    return trace, report


def integrate_reduced(b: ReducedPoint, g: Generator, tau_max: float, opts: FlowOptions | None = None) -> OrbitTrace:
    """Numerically integrate ``d beta/d tau = {beta, G}`` in the reduced space.

    The field comes from the bracket engine, treating ``beta`` as canonical
    amplitudes, so it is independent of the closed-form ``flow_reduced``.
    """
    opts = opts or FlowOptions()
    flat = make_signature([1] * b.N)
    G = sesquilinear_obs(flat, g.matrix(b.N))
    run = _integrate(lambda z: displacement(hamiltonian_vector(G, z)), b.beta, tau_max, opts)
    taus = np.asarray(run.taus)
    states = np.asarray(run.states)
    inv = _invariant_rows(states)
    j0 = 0.5 * np.sum(np.abs(states) ** 2, axis=1)
    Gv = _generator_values(states, g.matrix(b.N))
    drift = np.maximum(np.abs(j0 - j0[0]), np.abs(Gv - Gv[0]))
    return OrbitTrace("reduced", taus, states, inv, drift, dict(run.stats))


def reduced_orbit(b: ReducedPoint, g: Generator, taus) -> OrbitTrace:
    """Closed-form orbit in the reduced space sampled at ``taus``."""
    taus = np.asarray(taus, dtype=float)
    A = g.matrix(b.N)
    states = _flow_many(A, b.beta, taus)
    inv = _invariant_rows(states)
    j0 = 0.5 * np.sum(np.abs(states) ** 2, axis=1)
    Gv = _generator_values(states, A)
    drift = np.maximum(np.abs(j0 - j0[0]), np.abs(Gv - Gv[0]))
    return OrbitTrace("reduced", taus, states, inv, drift, {})


def upsilon_orbit(inv: InvariantSet, n, taus) -> OrbitTrace:
    taus = np.asarray(taus, dtype=float)
    rows = np.array([flow_upsilon(inv, n, s).four_vector for s in taus])
    ref = rows[0]
    drift = np.maximum(np.abs(rows[:, 0] - ref[0]), np.abs(np.linalg.norm(rows[:, 1:], axis=1) - np.linalg.norm(ref[1:])))
    return OrbitTrace("upsilon", taus, rows, rows.copy(), drift, {})


def time_orbit(x: PhasePoint, sig: FrequencySignature, t_max: float, dt: float) -> OrbitTrace:
    """Exact time evolution sampled every ``dt``; drift covers ``J`` and every ``K``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ts = np.arange(0.0, t_max + 0.5 * dt, dt)
    ts = ts[ts <= t_max + 1e-12]
    states = np.exp(-1j * sig.omega * ts[:, None] / sig.m_array[None, :]) * x.alpha[None, :]
    betas = reduce_alpha(states, sig.m)
    inv = _invariant_rows(betas)
    J = jmatrix(betas)
    pw = states ** np.asarray(sig.m)
    K = pw[:, :, None] * np.conj(pw)[:, None, :]
    drift = np.maximum(
        np.abs(J - J[0]).reshape(len(ts), -1).max(axis=1),
        np.abs(K - K[0]).reshape(len(ts), -1).max(axis=1),
    )
    return OrbitTrace("time", ts, states, inv, drift, {})


# ---------------------------------------------------------------------------
# singular geometry
# ---------------------------------------------------------------------------

def _pole_normals(four: np.ndarray) -> np.ndarray:
    j0, jvec = four[0], np.asarray(four[1:])
    return np.array([jvec + j0 * E3, jvec - j0 * E3])


def singular_planes(x: PhasePoint, sig: FrequencySignature, eps: float = EPS_SING) -> SingularityReport:
    """Directions whose flow carries ``x`` into a singular plane.

    Rotating ``J`` about any unit vector ``n`` with ``n . (J - p) = 0`` sends
    it through the pole ``p``. Plane 0 (``alpha_0 = 0``) is the pole
    ``-J0 e3``, plane 1 the pole ``+J0 e3``; ``plane_bases[k]`` is an
    orthonormal basis of the admissible directions for plane ``k``.
    """
    if sig.N != 2:
        raise ValueError("singular planes are computed for two modes")
    if np.min(x.actions) < eps:
        raise SingularInputError("point already lies on a singular plane")
    inv = invariant_set(ReducedPoint(reduce_alpha(x.alpha, sig.m)))
    four = inv.four_vector
    normals = _pole_normals(four)
    bases = []
    for v in normals:
        u1 = np.cross(v, E3)
        if np.linalg.norm(u1) < 1e-14 * max(four[0], 1e-300):
            raise SingularInputError("invariants sit at a pole; the critical circles degenerate")
        u1 /= np.linalg.norm(u1)
        u2 = np.cross(v / np.linalg.norm(v), u1)
        u2 /= np.linalg.norm(u2)
        bases.append([u1, u2])
    return SingularityReport(hit=False, normals=normals, plane_bases=np.array(bases))


def singular_direction(x: PhasePoint, sig: FrequencySignature, plane: int) -> np.ndarray:
    """A direction whose orbit meets only the requested plane (it has a non-zero 3-component)."""
    rep = singular_planes(x, sig)
    return rep.plane_bases[plane][1]


def rotation_angle_to(jvec, target, n) -> float | None:
    """Angle in [0, 2pi) rotating ``jvec`` onto ``target`` about ``n``; None when unreachable."""
    n = _unit(n)
    j = np.asarray(jvec, float)
    p = np.asarray(target, float)
    jp = j - n * np.dot(n, j)
    pp = p - n * np.dot(n, p)
    scale = max(np.linalg.norm(j), np.linalg.norm(p))
    if np.linalg.norm(jp) < 1e-12 * scale:
        return None
    if abs(np.dot(n, j) - np.dot(n, p)) > 1e-9 * scale or abs(np.linalg.norm(jp) - np.linalg.norm(pp)) > 1e-9 * scale:
        return None
    ang = math.atan2(float(np.dot(n, np.cross(jp, pp))), float(np.dot(jp, pp)))
    return ang % TWO_PI


def predicted_hit(x: PhasePoint, sig: FrequencySignature, n) -> tuple[float, int] | None:
    """First pole reached by rotating ``J(x)`` about ``n``: ``(tau, plane)`` or None."""
    inv = invariant_set(ReducedPoint(reduce_alpha(x.alpha, sig.m)))
    j0, jvec = inv.j0, inv.jvec
    best = None
    for plane, pole in ((0, -j0 * E3), (1, j0 * E3)):
        ang = rotation_angle_to(jvec, pole, n)
        if ang is not None and (best is None or ang < best[0]):
            best = (ang, plane)
    return best

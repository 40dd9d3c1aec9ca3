"""Acceptance criteria; each test prints one PASS/FAIL line."""

import io
import json
import math
import time
from contextlib import redirect_stdout, redirect_stderr

import numpy as np

from conftest import ACCEPTANCE_LINES
from oscillab.classify import classify, nonclosure_check, period_census
from oscillab.cli import main
from oscillab.core import PhasePoint, ReducedPoint, fiber_rotate, make_signature, random_phase_point, reduce
from oscillab.flows import (
    FlowOptions,
    Generator,
    evolve_time,
    flow_gamma,
    flow_reduced,
    flow_upsilon,
    group_compose_check,
    hopf_sample,
    integrate_reduced,
    lorentz_boost,
    reduced_orbit,
)
from oscillab.invariants import cone_residual, invariant_set, k_invariant, rel_angles
from oscillab.poisson import action, bracket, k_obs, verify_algebra


def report(number, title, ok, detail):
    line = f"[{number:2d}] {'PASS' if ok else 'FAIL'} {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_01_su2_closure():
    t0 = time.perf_counter()
    code, out, _ = cli(["verify", "--m", "1,2", "--relation", "su2", "--samples", "100", "--h", "1e-5"])
    elapsed = time.perf_counter() - t0
    fd = json.loads(out)["max_residual"]
    exact = verify_algebra(make_signature([1, 2]), "su2", 100, exact=True).max_residual
    ok = code == 0 and fd < 1e-5 and exact < 1e-9 and elapsed < 1.0
    report(1, "su2 closure", ok, f"fd residual {fd:.2e}, exact {exact:.2e}, {elapsed:.2f}s")


def test_02_un_closure():
    t0 = time.perf_counter()
    code, out, _ = cli(["verify", "--m", "2,3,5", "--relation", "uN", "--samples", "100"])
    elapsed = time.perf_counter() - t0
    res = json.loads(out)["max_residual"]
    ok = code == 0 and res < 1e-5 and elapsed < 2.0
    report(2, "u(N) closure N=3", ok, f"residual {res:.2e}, {elapsed:.2f}s")


def test_03_k_brackets():
    worst = 0.0
    for m in ([1, 2], [3, 4]):
        sig = make_signature(m)
        K = k_obs(sig, 1, 0)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = random_phase_point(rng, 2)
            k = K(x)
            r1 = abs(bracket(action(0), K, x, h=1e-5, exact=False) + 1j * sig.m[0] * k)
            r2 = abs(bracket(action(1), K, x, h=1e-5, exact=False) - 1j * sig.m[1] * k)
            worst = max(worst, r1, r2)
    report(3, "K brackets", worst < 1e-5, f"max residual {worst:.2e}")


def test_04_null_cone():
    rng = np.random.default_rng(4)
    two = max(cone_residual(invariant_set(ReducedPoint(rng.normal(size=2) + 1j * rng.normal(size=2)))) for _ in range(1000))
    five = max(cone_residual(invariant_set(ReducedPoint(rng.normal(size=5) + 1j * rng.normal(size=5)))) for _ in range(1000))
    report(4, "null cone / rank one", two < 1e-12 and five < 1e-10, f"N=2 {two:.2e}, N=5 {five:.2e}")


def test_05_conservation():
    sig = make_signature([2, 3])
    T = 2 * math.pi * period_census(sig).M / sig.omega
    rng = np.random.default_rng(5)
    drift = endpoint = 0.0
    pairs = ((0, 1), (1, 0))
    for _ in range(100):
        x = random_phase_point(rng, 2)
        j_ref = invariant_set(reduce(x, sig)).jmat
        k_ref = [k_invariant(x, sig, *p) for p in pairs]
        chi_ref = rel_angles(x, sig).angle(0, 1)
        for t in np.linspace(0, T, 41):
            y = evolve_time(x, sig, t)
            drift = max(drift, float(np.max(np.abs(invariant_set(reduce(y, sig)).jmat - j_ref))))
            drift = max(drift, max(abs(k_invariant(y, sig, *p) - k) for p, k in zip(pairs, k_ref)))
            d = abs(rel_angles(y, sig).angle(0, 1) - chi_ref)
            drift = max(drift, min(d, 2 * math.pi - d))
        endpoint = max(endpoint, float(np.max(np.abs(evolve_time(x, sig, T).alpha - x.alpha))))
    report(5, "conservation over one revolution", drift < 1e-9 and endpoint < 1e-9, f"drift {drift:.2e}, endpoint {endpoint:.2e}")


def test_06_reduced_flow_exactness():
    rng = np.random.default_rng(6)
    numeric = period = 0.0
    for _ in range(10):
        b = ReducedPoint(rng.normal(size=2) + 1j * rng.normal(size=2))
        g = Generator.direction(unit(rng))
        trace = integrate_reduced(b, g, 4 * math.pi, FlowOptions(sample_step=0.05))
        numeric = max(numeric, float(np.max(np.abs(trace.states - reduced_orbit(b, g, trace.taus).states))))
        period = max(period, float(np.max(np.abs(flow_reduced(b, g, 4 * math.pi).beta - b.beta))))
    words = 0.0
    for _ in range(50):
        word = [(unit(rng), rng.uniform(-4 * math.pi, 4 * math.pi)) for _ in range(5)]
        words = max(words, group_compose_check(word, ReducedPoint(rng.normal(size=2) + 1j * rng.normal(size=2))))
    ok = numeric < 1e-6 and period < 1e-10 and words < 1e-10
    report(6, "reduced flow exactness", ok, f"numeric {numeric:.2e}, 4pi {period:.2e}, words {words:.2e}")


def test_07_space_consistency():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        b = ReducedPoint(rng.normal(size=2) + 1j * rng.normal(size=2))
        n = unit(rng)
        tau = rng.uniform(-4 * math.pi, 4 * math.pi)
        lhs = invariant_set(flow_reduced(b, Generator.direction(n), tau)).four_vector
        rhs = flow_upsilon(invariant_set(b), n, tau).four_vector
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    report(7, "reduced vs invariant space", worst < 1e-10, f"max deviation {worst:.2e}")


def test_08_gamma_closure():
    sig = make_signature([1, 2])
    x = PhasePoint([1, 1])
    n = np.array([1.0, 0, 0])
    t0 = time.perf_counter()
    trace, rep = flow_gamma(x, sig, Generator.direction(n), 4 * math.pi * 1 * 2, FlowOptions(sample_step=0.01))
    elapsed = time.perf_counter() - t0
    closure = float(np.max(np.abs(trace.states[-1] - x.alpha)))
    # moduli against the rotated invariants: |alpha_1|^2 = m_1 (j0 + j3), |alpha_2|^2 = m_2 (j0 - j3)
    inv = invariant_set(reduce(x, sig))
    j3 = np.array([flow_upsilon(inv, n, t).jvec[2] for t in trace.taus])
    moduli = np.stack([sig.m[0] * (inv.j0 + j3), sig.m[1] * (inv.j0 - j3)], axis=1)
    mod_err = max(float(np.max(np.abs(np.abs(trace.states) ** 2 - moduli))), trace.stats["moduli_error"])
    ok = not rep.hit and closure < 1e-6 and mod_err < 1e-7 and elapsed < 5.0
    report(8, "gamma orbit closure at 8pi", ok, f"closure {closure:.2e}, moduli {mod_err:.2e}, {elapsed:.2f}s")


def test_09_singularity_universality():
    code, out, err = cli(["scan-singular", "--m", "1,2", "--samples", "100"])
    lines = out.strip().splitlines()[1:]
    rows = [line.split(",") for line in lines]
    planes = [r for r in rows if r[1].startswith("plane")]
    diag = [r for r in rows if r[1] in ("J0", "J3")]
    plane_ok = sum(r[-1] == "1" for r in planes)
    samples_hit = len({r[0] for r in planes if r[-1] == "1"})
    diag_ok = sum(r[-1] == "1" for r in diag)
    ok = code == 0 and len(planes) == 200 and plane_ok == 200 and diag_ok == 200
    report(9, "singularity universality", ok, f"{samples_hit}/100 points hit both named planes, {diag_ok}/200 diagonal flows regular")


def test_10_hopf():
    sig = make_signature([1, 2])
    radius = fiber = 0.0
    for b, inv in hopf_sample(sig, 1.5, 1000, seed=10):
        radius = max(radius, abs(float(np.linalg.norm(inv.jvec)) - 1.5 / (2 * sig.omega)))
        for g in np.linspace(0, 2 * math.pi, 8, endpoint=False):
            fiber = max(fiber, float(np.max(np.abs(invariant_set(fiber_rotate(b, g)).jmat - inv.jmat))))
    report(10, "Hopf fibration", radius < 1e-12 and fiber < 1e-12, f"radius {radius:.2e}, fiber {fiber:.2e}")


def test_11_lorentz():
    rng = np.random.default_rng(11)
    cone = deriv = 0.0
    h = 1e-4
    for _ in range(100):
        b = ReducedPoint(rng.normal(size=2) + 1j * rng.normal(size=2))
        nu = unit(rng)
        g = rng.uniform(-1, 1)
        _, inv = lorentz_boost(b, nu, g)
        cone = max(cone, cone_residual(inv))
        d = (lorentz_boost(b, nu, g + h)[1].j0 - lorentz_boost(b, nu, g - h)[1].j0) / (2 * h)
        deriv = max(deriv, abs(d - float(np.dot(nu, inv.jvec))))
    report(11, "Lorentz boosts", cone < 1e-10 and deriv < 1e-6, f"cone {cone:.2e}, dJ0/dgamma {deriv:.2e}")


def test_12_classification():
    iso = classify(make_signature([1, 1, 1])).kind == "isotropic"
    can = classify(make_signature([2, 3, 5]))
    census = period_census(make_signature([2, 3, 5]))
    nc = classify(make_signature([2, 6, 3]))
    nc_census = period_census(make_signature([2, 6, 3]))
    # every period returns a point exciting exactly that subset
    rng = np.random.default_rng(12)
    dyn = 0.0
    for m in ([2, 3, 5], [2, 6, 3]):
        sig = make_signature(m)
        for S, T in period_census(sig).periods.items():
            a = np.zeros(3, dtype=complex)
            a[list(S)] = rng.uniform(0.2, 2, len(S)) * np.exp(1j * rng.uniform(0, 6, len(S)))
            dyn = max(dyn, float(np.max(np.abs(evolve_time(PhasePoint(a), sig, T).alpha - a))))
    ok = (
        iso
        and can.kind == "canonical"
        and len(census.distinct_periods()) == 7
        and census.M == 30
        and census.w == (15, 10, 6)
        and (nc.kind, nc.subtype) == ("non_canonical", "type2")
        and nc_census.M == 6
        and dyn < 1e-9
    )
    report(12, "classification and census", ok,
           f"(2,3,5) {len(census.distinct_periods())} periods M={census.M} w={census.w}; (2,6,3) {nc.subtype} M={nc_census.M}; endpoints {dyn:.1e}")


def test_13_nonclosure():
    rep = nonclosure_check(make_signature([2, 6, 3]), [0, 1])
    ok = rep.fit_residual > 1e-3 and rep.energy_residual < 1e-8
    report(13, "non-closure of primed invariants", ok, f"fit residual {rep.fit_residual:.3f}, energy {rep.energy_residual:.1e}")

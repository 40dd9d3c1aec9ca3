import math

import numpy as np
import pytest

from oscillab.core import PhasePoint, make_signature, random_phase_point
from oscillab.invariants import PAULI
from oscillab.poisson import (
    PhaseFunction,
    StencilError,
    action,
    alpha_obs,
    angle,
    beta_obs,
    bracket,
    coordinate_p,
    coordinate_q,
    exp_series_flow,
    four_vector_obs,
    gradient,
    hamiltonian_obs,
    iterated_bracket,
    j_obs,
    k_obs,
    verify_algebra,
)


def test_anchor_q_p():
    x = PhasePoint([0.3 + 0.4j, -1.2 + 0.1j])
    assert bracket(coordinate_q(0), coordinate_p(0), x, exact=False) == pytest.approx(1.0, abs=1e-10)
    assert bracket(coordinate_q(0), coordinate_p(1), x, exact=False) == pytest.approx(0.0, abs=1e-12)
    assert bracket(coordinate_q(1), coordinate_p(1), x) == 1.0


def test_anchor_action_angle_and_alpha():
    x = PhasePoint([0.8 * np.exp(0.3j), 1.1 * np.exp(2.0j)])
    assert abs(bracket(action(1), angle(1), x, exact=False) - 1.0) < 1e-10
    assert abs(bracket(action(1), angle(1), x) - 1.0) < 1e-12
    assert abs(bracket(alpha_obs(0, True), alpha_obs(0), x, exact=False) - 1j) < 1e-10
    assert abs(bracket(alpha_obs(0, True), alpha_obs(0), x) - 1j) < 1e-15


def test_action_k_example():
    sig = make_signature([1, 2])
    x = PhasePoint([1, 1])
    # K = alpha_2^2 conj(alpha_1) = 1 here; {I_1, K} = -i m_1 K
    val = bracket(action(0), k_obs(sig, 1, 0), x, exact=False)
    assert abs(val - (-1j)) < 1e-9
    assert abs(bracket(action(1), k_obs(sig, 1, 0), x) - 2j) < 1e-12
    assert abs(bracket(action(0), action(1), x, exact=False)) < 1e-12


def test_exact_gradients_match_differences():
    rng = np.random.default_rng(12)
    sig = make_signature([2, 3, 5])
    fs = [action(1), angle(2), hamiltonian_obs(sig), beta_obs(sig, 1), beta_obs(sig, 2, True), k_obs(sig, 0, 2), j_obs(sig, 1, 2)]
    for _ in range(10):
        x = random_phase_point(rng, 3)
        for f in fs:
            np.testing.assert_allclose(gradient(f, x), gradient(f, x, exact=False), atol=1e-7, err_msg=f.label)


def test_antisymmetry_and_leibniz():
    rng = np.random.default_rng(13)
    sig = make_signature([1, 2])
    f, g, h = four_vector_obs(sig, 1), four_vector_obs(sig, 3), k_obs(sig, 1, 0)
    for _ in range(20):
        x = random_phase_point(rng, 2)
        assert abs(bracket(f, g, x, exact=False) + bracket(g, f, x, exact=False)) < 1e-10
        lhs = bracket(f * g, h, x, exact=False)
        rhs = f(x) * bracket(g, h, x, exact=False) + g(x) * bracket(f, h, x, exact=False)
        assert abs(lhs - rhs) < 1e-8
        # exact product gradient
        lhs = bracket(f * g, h, x)
        rhs = f(x) * bracket(g, h, x) + g(x) * bracket(f, h, x)
        assert abs(lhs - rhs) < 1e-12


def test_invariants_commute_with_h():
    rng = np.random.default_rng(14)
    sig = make_signature([2, 3, 5], 1.3)
    H = hamiltonian_obs(sig)
    obs = [j_obs(sig, a, b) for a in range(3) for b in range(3)] + [k_obs(sig, 0, 1), k_obs(sig, 2, 1)]
    for _ in range(100):
        x = random_phase_point(rng, 3)
        for f in obs:
            assert abs(bracket(H, f, x, exact=False)) < 1e-8
            assert abs(bracket(H, f, x)) < 1e-12


def test_reduced_brackets_canonical():
    rng = np.random.default_rng(15)
    sig = make_signature([3, 4])
    for _ in range(20):
        x = random_phase_point(rng, 2)
        for n in range(2):
            for k in range(2):
                val = bracket(beta_obs(sig, n, True), beta_obs(sig, k), x, exact=False)
                assert abs(val - (1j if n == k else 0)) < 1e-8
                assert abs(bracket(beta_obs(sig, n), beta_obs(sig, k), x, exact=False)) < 1e-8


def test_stencil_failure_carries_offset():
    def bad(a):
        return 1.0 / (a[0].real - 1.0) if a[0].real > 1.0 else np.nan

    f = PhaseFunction(bad, "bad")
    with pytest.raises(StencilError) as info:
        bracket(f, coordinate_q(0), PhasePoint([1.0 / math.sqrt(2) * 1.4142135623730951 + 1e-6]), exact=False)
    assert info.value.label == "bad"


def test_iterated_bracket_examples():
    sig = make_signature([1, 1])
    H = hamiltonian_obs(sig)
    x = PhasePoint.from_cartesian([0.7, -0.4], [0.2, 1.1])
    q, p = 0.7, 0.2
    assert iterated_bracket(coordinate_q(0), H, 0, x) == pytest.approx(q)
    assert abs(iterated_bracket(coordinate_q(0), H, 1, x) - p) < 1e-9
    assert abs(iterated_bracket(coordinate_q(0), H, 2, x) + q) < 1e-8
    for k in range(1, 4):
        assert abs(iterated_bracket(action(0), H, k, x)) < 1e-8
    with pytest.raises(ValueError):
        iterated_bracket(coordinate_q(0), H, 7, x)


def test_exp_series_examples():
    sig = make_signature([1, 2])
    x = PhasePoint([0.9 * np.exp(0.4j), 1.3 * np.exp(-1.1j)])
    b1 = beta_obs(sig, 0)
    re_b1 = PhaseFunction(lambda a: b1.func(a).real, "Re beta0")
    j3 = four_vector_obs(sig, 3)
    assert exp_series_flow(re_b1, j3, 0.0, x) == pytest.approx(re_b1(x))
    tau = 0.05
    closed = (np.exp(-0.5j * tau) * b1(x)).real
    assert abs(exp_series_flow(re_b1, j3, tau, x) - closed) < 1e-8
    H = hamiltonian_obs(sig)
    for nu in range(4):
        assert abs(exp_series_flow(H, four_vector_obs(sig, nu), 0.1, x) - H(x)) < 1e-8


def test_verify_algebra_relations():
    for m, rel in (([1, 2], "su2"), ([1, 1], "uN"), ([2, 3, 5], "uN"), ([3, 4], "IK"), ([1, 2, 3], "IK")):
        rep = verify_algebra(make_signature(m), rel, samples=20)
        assert rep.passed, rep.to_dict()
        exact = verify_algebra(make_signature(m), rel, samples=20, exact=True)
        assert exact.max_residual < 1e-10


def test_verify_algebra_detects_wrong_relation():
    # a tolerance below the finite-difference error must fail
    rep = verify_algebra(make_signature([1, 2]), "su2", samples=5, h=1e-2, tol=1e-12)
    assert not rep.passed and rep.max_residual > 1e-12


def test_verify_algebra_report_fields():
    rep = verify_algebra(make_signature([1, 2]), "su2", samples=3, seed=1)
    d = rep.to_dict()
    for key in ("relation", "samples", "h", "tol", "max_residual", "worst_point", "pass"):
        assert key in d
    assert len(d["worst_point"]) == 2
    assert verify_algebra(make_signature([1, 2]), "su2", samples=3, seed=1).to_dict() == d


@pytest.mark.parametrize("m, rel", [([1, 2, 3], "su2"), ([1], "IK")])
def test_verify_algebra_bad_input(m, rel):
    with pytest.raises(ValueError):
        verify_algebra(make_signature(m), rel, samples=2)


def test_four_vector_su2_by_hand():
    # {J1, J2} = J3 at a fixed point with exact gradients
    sig = make_signature([3, 4])
    x = PhasePoint([0.6 + 0.2j, -0.5 + 0.9j])
    J = [four_vector_obs(sig, k) for k in range(4)]
    assert abs(bracket(J[1], J[2], x) - J[3](x)) < 1e-12
    assert abs(bracket(J[2], J[3], x) - J[1](x)) < 1e-12
    assert abs(bracket(J[0], J[2], x)) < 1e-12
    assert np.allclose(PAULI[2] @ PAULI[3], 1j * PAULI[1])

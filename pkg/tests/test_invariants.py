import math

import numpy as np
import pytest

from oscillab.core import PhasePoint, ReducedPoint, fiber_rotate, make_signature, random_phase_point, reduce, ambiguity_apply, AmbiguityElement
from oscillab.flows import evolve_time
from oscillab.invariants import (
    InvariantSet,
    ZeroActionError,
    cone_residual,
    four_vector_action_angle,
    hamiltonian,
    invariant_set,
    is_rank_one,
    k_invariant,
    rel_angles,
)


def test_hamiltonian_examples():
    assert hamiltonian(PhasePoint([1, 1]), make_signature([1, 2])) == pytest.approx(1.5)
    assert hamiltonian(PhasePoint([0, 0]), make_signature([1, 2])) == 0.0
    assert hamiltonian(PhasePoint([1, 1j]), make_signature([1, 1], 2.0)) == pytest.approx(4.0)


def test_k_invariant_examples():
    sig = make_signature([1, 2])
    x = PhasePoint([1, np.exp(1j * math.pi / 4)])
    # alpha_2^2 conj(alpha_1) in one-based labels
    assert abs(k_invariant(x, sig, 1, 0) - 1j) < 1e-15
    assert k_invariant(PhasePoint([0, 1]), sig, 1, 0) == 0
    assert k_invariant(PhasePoint([1, 1]), make_signature([1, 1]), 0, 1) == 1


def test_k_invariant_errors():
    sig = make_signature([1, 2])
    with pytest.raises(IndexError):
        k_invariant(PhasePoint([1, 1]), sig, 0, 2)
    with pytest.raises(ValueError):
        k_invariant(PhasePoint([1, 1]), sig, 1, 1)


def test_rel_angles_examples():
    sig = make_signature([1, 2])
    assert rel_angles(PhasePoint([1.0, 2.0]), sig).angle(0, 1) == 0.0
    x = PhasePoint.from_action_angle([1, 1], [math.pi / 2, math.pi / 4])
    chi = rel_angles(x, sig).angle(0, 1)
    assert min(chi, 2 * math.pi - chi) < 1e-12


def test_rel_angles_cocycle():
    rng = np.random.default_rng(7)
    sig = make_signature([2, 3, 5, 7])
    for _ in range(50):
        assert rel_angles(random_phase_point(rng, 4), sig).cocycle_residual() < 1e-12


def test_rel_angles_zero_action():
    with pytest.raises(ZeroActionError) as info:
        rel_angles(PhasePoint([1, 0, 1]), make_signature([1, 2, 3]))
    assert info.value.index == 1


def test_invariant_set_example():
    inv = invariant_set(reduce(PhasePoint([1, 1]), make_signature([1, 2])))
    np.testing.assert_allclose(inv.four_vector, [0.75, 1 / math.sqrt(2), 0, 0.25], atol=1e-15)
    assert abs(0.75 ** 2 - (0.5 + 0.0625)) < 1e-15
    assert cone_residual(inv) < 1e-15
    zero = invariant_set(ReducedPoint([0, 0]))
    assert np.all(zero.four_vector == 0)


def test_four_vector_forms_agree():
    rng = np.random.default_rng(8)
    for m in ([1, 2], [3, 4], [1, 1], [5, 2]):
        sig = make_signature(m)
        for _ in range(30):
            x = random_phase_point(rng, 2)
            inv = invariant_set(reduce(x, sig))
            np.testing.assert_allclose(inv.four_vector, four_vector_action_angle(x, sig), atol=1e-12)


def test_trace_and_energy():
    rng = np.random.default_rng(9)
    sig = make_signature([2, 3, 5], 0.7)
    for _ in range(20):
        x = random_phase_point(rng, 3)
        inv = invariant_set(reduce(x, sig))
        assert abs(np.trace(inv.jmat).real - 2 * inv.j0) < 1e-12
        assert abs(2 * inv.j0 - hamiltonian(x, sig) / sig.omega) < 1e-12
        assert inv.hermiticity_residual() < 1e-12
        assert np.linalg.eigvalsh(inv.jmat).min() > -1e-12


def test_cone_residual_examples():
    assert cone_residual(InvariantSet(np.eye(2))) == pytest.approx(1.0)
    assert cone_residual(InvariantSet.from_four_vector(1.0, [1, 0, 0])) == 0.0
    assert not is_rank_one(InvariantSet(np.eye(3)))
    b = ReducedPoint(np.arange(1, 6) * (1 + 0.5j))
    assert is_rank_one(invariant_set(b))


def test_conservation_under_time_evolution():
    rng = np.random.default_rng(10)
    sig = make_signature([2, 3, 5])
    for _ in range(20):
        x = random_phase_point(rng, 3)
        y = evolve_time(x, sig, rng.uniform(0, 50))
        np.testing.assert_allclose(invariant_set(reduce(y, sig)).jmat, invariant_set(reduce(x, sig)).jmat, atol=1e-9)
        for n, k in ((0, 1), (2, 0), (1, 2)):
            assert abs(k_invariant(y, sig, n, k) - k_invariant(x, sig, n, k)) < 1e-9
        d = np.abs(rel_angles(y, sig).chi - rel_angles(x, sig).chi)
        assert np.all(np.minimum(d, 2 * math.pi - d) < 1e-9)


def test_ambiguity_and_fiber_invariance():
    rng = np.random.default_rng(11)
    sig = make_signature([2, 3])
    x = random_phase_point(rng, 2)
    ref = invariant_set(reduce(x, sig)).jmat
    for g in AmbiguityElement.elements(sig):
        assert np.max(np.abs(invariant_set(reduce(ambiguity_apply(x, sig, g), sig)).jmat - ref)) < 1e-12
    b = reduce(x, sig)
    for gamma in np.linspace(0, 7, 9):
        assert np.max(np.abs(invariant_set(fiber_rotate(b, gamma)).jmat - ref)) < 1e-12


def test_component_reads_generator():
    b = ReducedPoint([0.3 + 0.1j, -0.7j, 1.2])
    A = np.array([[1, 2j, 0], [-2j, 0, 1 - 1j], [0, 1 + 1j, -1]])
    assert invariant_set(b).component(A) == pytest.approx(float(np.vdot(b.beta, A @ b.beta).real))

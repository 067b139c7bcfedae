import math

import numpy as np
import pytest

from gps_lab import library
from gps_lab.cartan import (
    ThetaSet,
    WeylVector,
    alpha,
    cartan_projection,
    divergence_report,
    functional_eval,
    functional_from_spec,
    jordan_projection,
    omega,
    opposite_involution,
    pullback,
    sum_omega,
    symmetric_thetas,
    u_theta,
    v_theta,
)
from gps_lab.errors import IndexMismatch, InsufficientGap
from gps_lab.group import GeneratorSet, word_ball

GOLDEN = (1 + math.sqrt(5)) / 2
T1 = ThetaSet(2, (1,))


def test_cartan_examples():
    np.testing.assert_allclose(cartan_projection(np.diag([2, 0.5])).entries, [math.log(2), -math.log(2)])
    np.testing.assert_allclose(cartan_projection(np.eye(3)).entries, 0, atol=1e-15)
    np.testing.assert_allclose(cartan_projection([[1, 1], [0, 1]]).entries,
                               [math.log(GOLDEN), -math.log(GOLDEN)], atol=1e-12)
    assert abs(math.log(GOLDEN) - 0.48121) < 1e-5


def test_jordan_examples():
    np.testing.assert_allclose(jordan_projection(np.diag([3, 1 / 3])).entries, [math.log(3), -math.log(3)])
    np.testing.assert_allclose(jordan_projection([[1, 1], [0, 1]]).entries, 0, atol=1e-7)
    lam = math.log(3 + 2 * math.sqrt(2))
    np.testing.assert_allclose(jordan_projection([[5, 2], [2, 1]]).entries, [lam, -lam], atol=1e-12)
    assert abs(lam - 1.76275) < 1e-5


def test_functional_examples():
    t3 = ThetaSet(3, (1, 2))
    assert functional_eval(omega(t3, 2), WeylVector([3, 1, -4])) == pytest.approx(4)
    a = cartan_projection(np.diag([2, 0.5]))
    assert functional_eval(alpha(T1, 1), a) == pytest.approx(2 * math.log(2))
    assert functional_eval(omega(T1, 1), WeylVector([0, 0])) == 0


def test_functional_dimension_mismatch():
    with pytest.raises(IndexMismatch):
        functional_eval(omega(T1, 1), np.zeros(3))


def test_alpha_needs_adjacent_weights():
    t = ThetaSet(4, (1, 3))
    with pytest.raises(IndexMismatch):
        alpha(t, 1)
    assert alpha(ThetaSet.full(4), 2).coefficients == {2: 2.0, 1: -1.0, 3: -1.0}


def test_functional_from_spec():
    t3 = ThetaSet(3, (1, 2))
    assert functional_from_spec("sum_omega", t3) == sum_omega(t3)
    assert functional_from_spec("omega_2", t3) == omega(t3, 2)
    assert functional_from_spec([(1, 0.5)], t3).coefficients == {1: 0.5}
    with pytest.raises(ValueError):
        functional_from_spec("beta_1", t3)


def test_opposite_involution():
    np.testing.assert_allclose(opposite_involution(WeylVector([1, 0.2, -1.2])).entries, [1.2, -0.2, -1])
    v = WeylVector([0.7, -0.7])
    np.testing.assert_allclose(opposite_involution(opposite_involution(v)).entries, v.entries)
    g = np.array([[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_allclose(cartan_projection(np.linalg.inv(g)).entries,
                               opposite_involution(cartan_projection(g)).entries, atol=1e-12)


def test_pullback_moves_coefficients():
    t3 = ThetaSet(3, (1, 2))
    phi = functional_from_spec([(1, 1.0), (2, 0.3)], t3)
    assert pullback(phi).coefficients == {2: 1.0, 1: 0.3}
    a = WeylVector([0.9, 0.1, -1.0])
    assert pullback(phi)(a) == pytest.approx(phi(opposite_involution(a)))


def test_symmetric_thetas():
    assert [t.indices for t in symmetric_thetas(2)] == [(1,)]
    assert sorted(t.indices for t in symmetric_thetas(4)) == [(1, 2, 3), (1, 3), (2,)]
    with pytest.raises(ValueError):
        ThetaSet(3, (1,))


def test_u_theta_diagonal():
    F = u_theta(np.diag([2, 0.5]), T1)
    np.testing.assert_allclose(np.abs(F.basis(1)[:, 0]), [1, 0], atol=1e-15)
    F3 = u_theta(np.diag([4, 1, 0.25]), ThetaSet(3, (1, 2)))
    np.testing.assert_allclose(np.abs(F3.basis(2)), [[1, 0], [0, 1], [0, 0]], atol=1e-15)
    with pytest.raises(InsufficientGap):
        u_theta(np.eye(2), T1)


def test_v_theta_is_u_theta_of_transpose():
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(np.abs(v_theta(g, T1).frame), np.abs(u_theta(g.T, T1).frame))


def test_divergence_report_examples():
    cyc = library.cyclic_diag(1.0)
    rows = divergence_report(word_ball(cyc, 5), T1)
    assert [r.min_gap for r in rows[1:]] == pytest.approx([2 * n for n in range(1, 6)])
    sch = library.schottky(1.5)
    rows = divergence_report(word_ball(sch, 10), T1)
    gaps = [r.min_gap for r in rows]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
    rot = GeneratorSet([[[0.0, -1.0], [1.0, 0.0]]], presentation_hint="unknown")
    rows = divergence_report(word_ball(rot, 6), T1)
    assert max(r.min_gap for r in rows) < 1e-12


def test_chamber_ordering(rng):
    for _ in range(50):
        g = rng.standard_normal((4, 4))
        a = cartan_projection(g).entries
        assert np.all(np.diff(a) <= 1e-12)

import math

import numpy as np
import pytest

from gps_lab.cartan import ThetaSet, cartan_projection, functional_from_spec, symmetric_thetas, v_theta
from gps_lab.checks import gps_property_suite, quint_sup, random_generators, random_word
from gps_lab.errors import NotTransverse
from gps_lab.flags import (
    Flag,
    GpsSystem,
    busemann,
    cross_ratio,
    gps_residual,
    gromov_product,
    loxodromic_data,
    period,
    random_flag,
    sigma,
    transversality,
)
from gps_lab.group import GeneratorSet, evaluate_word

from conftest import make_system

T1 = ThetaSet(2, (1,))
S2 = math.sqrt(2)


def line(*v):
    return Flag.from_vectors(T1, np.array(v, dtype=float))


E1, E2 = line(1, 0), line(0, 1)
DIAG = np.diag([2.0, 0.5])


def sys2(phi="alpha_1"):
    gens = GeneratorSet([DIAG])
    return GpsSystem(gens, T1, functional_from_spec(phi, T1))


def test_flag_invariants(rng):
    t = ThetaSet(4, (1, 3))
    F = random_flag(t, rng)
    for k, b in F.bases.items():
        np.testing.assert_allclose(b.T @ b, np.eye(k), atol=1e-10)
    P1, P3 = F.projections()[1], F.projections()[3]
    np.testing.assert_allclose(P3 @ P1, P1, atol=1e-8)


def test_from_bases_checks_nesting():
    t = ThetaSet(3, (1, 2))
    F = Flag.from_bases(t, {1: np.array([[1.0], [0], [0]]), 2: np.eye(3)[:, :2]})
    np.testing.assert_allclose(F.basis(2), np.eye(3)[:, :2])
    with pytest.raises(ValueError):
        Flag.from_bases(t, {1: np.array([[0.0], [0], [1]]), 2: np.eye(3)[:, :2]})


def test_transversality_examples():
    r = transversality(E1, E2)
    assert r.transverse and r.pairings[1] == pytest.approx(1)
    r = transversality(E1, E1)
    assert not r.transverse and r.pairings[1] == pytest.approx(0, abs=1e-15)
    assert transversality(E1, line(1, 1)).pairings[1] == pytest.approx(1 / S2)


def test_busemann_examples():
    assert busemann(DIAG, E1)[1] == pytest.approx(math.log(2))
    assert busemann(np.eye(2), line(0.3, 0.7))[1] == pytest.approx(0, abs=1e-15)
    assert busemann(DIAG, line(1, 1))[1] == pytest.approx(0.5 * math.log(17 / 8))


def test_gromov_examples():
    assert gromov_product(E1, E2)[1] == pytest.approx(0, abs=1e-15)
    assert gromov_product(E1, line(1, 1))[1] == pytest.approx(0.5 * math.log(2))
    assert gromov_product(E1, line(2, 1))[1] == pytest.approx(0.5 * math.log(5))
    with pytest.raises(NotTransverse):
        gromov_product(E1, E1)


def test_sigma_examples():
    s = sys2()
    assert sigma(s, np.eye(2), line(0.2, 1)) == 0
    assert sigma(s, DIAG, E1) == pytest.approx(2 * math.log(2))


def test_gps_residual_examples(rng):
    s = sys2()
    assert gps_residual(s, np.eye(2), line(1, 0.3), line(-0.2, 1)) == 0
    assert gps_residual(sys2("omega_1"), DIAG, E1, E2) < 1e-12


def test_cross_ratio_examples():
    s = sys2("omega_1")
    assert cross_ratio(s, E1, E2, line(1, 1), line(1, -1)) == pytest.approx(0, abs=1e-14)
    assert cross_ratio(s, line(1, 2), line(1, 2), E1, E2) == 0


def test_cross_ratio_antisymmetry(anosov_sys, rng):
    x, x2, y, y2 = (random_flag(anosov_sys.theta, rng) for _ in range(4))
    b = cross_ratio(anosov_sys, x, x2, y, y2)
    assert cross_ratio(anosov_sys, x2, x, y, y2) == pytest.approx(-b, abs=1e-10)
    assert cross_ratio(anosov_sys, x, x2, y2, y) == pytest.approx(-b, abs=1e-10)


def test_loxodromic_examples():
    data = loxodromic_data(np.diag([3.0, 1 / 3]), T1)
    np.testing.assert_allclose(np.abs(data.attracting.frame[:, 0]), [1, 0], atol=1e-12)
    np.testing.assert_allclose(np.abs(data.repelling.frame[:, 0]), [0, 1], atol=1e-12)
    assert data.eigen_gaps[1] == pytest.approx(2 * math.log(3))
    assert loxodromic_data(np.array([[1.0, 2.0], [0.0, 1.0]]), T1) is None
    data = loxodromic_data(np.array([[5.0, 2.0], [2.0, 1.0]]), T1)
    lam = math.log(3 + 2 * S2)
    np.testing.assert_allclose(data.jordan.entries, [lam, -lam], atol=1e-12)
    v = np.array([1 + S2, 1.0]) / np.linalg.norm([1 + S2, 1.0])
    assert abs(data.attracting.frame[:, 0] @ v) == pytest.approx(1, abs=1e-12)


def test_period_examples():
    s = sys2()
    assert period(s, np.diag([3.0, 1 / 3])) == pytest.approx(2 * math.log(3))
    p = period(s, np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert p == 0 and not p.loxodromic
    p = period(s, np.array([[5.0, 2.0], [2.0, 1.0]]))
    assert p == pytest.approx(3.52549, abs=1e-5)
    assert p.discrepancy < 1e-10


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gps_identity_all_thetas(d):
    rng = np.random.default_rng(d)
    gens = random_generators(d, 2, rng)
    for theta in symmetric_thetas(d):
        s = GpsSystem(gens, theta, functional_from_spec("sum_omega", theta))
        rep = gps_property_suite(s, 50, rng)
        assert rep.max_gps < 1e-9
        assert rep.max_cocycle < 1e-8
        assert rep.max_normalization < 1e-8


def test_normalization_and_gromov_positivity(anosov_sys, rng):
    for _ in range(30):
        g = evaluate_word(anosov_sys.gens, random_word(anosov_sys.gens, rng, 6))
        V = v_theta(g, anosov_sys.theta)
        kap = np.cumsum(cartan_projection(g).entries)
        b = busemann(g, V)
        assert max(abs(b[k] - kap[k - 1]) for k in anosov_sys.theta) < 1e-8
        F, F2 = random_flag(anosov_sys.theta, rng), random_flag(anosov_sys.theta, rng)
        assert all(v >= 0 for v in gromov_product(F, F2).values())


def test_periods_positive(anosov_sys, rng):
    for _ in range(100):
        g = evaluate_word(anosov_sys.gens, random_word(anosov_sys.gens, rng, 8))
        p = period(anosov_sys, g)
        if p.loxodromic:
            assert p > 0


def test_quint_bound_does_not_grow():
    s = make_system("schottky(1.5)")
    rng = np.random.default_rng(7)
    short = quint_sup(s, 6, 300, rng)
    long = quint_sup(s, 10, 300, rng)
    assert math.isfinite(short) and math.isfinite(long)
    assert long / short < 1.5

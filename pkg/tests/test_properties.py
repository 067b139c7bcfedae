import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gps_lab import library
from gps_lab.cartan import (
    ThetaSet,
    WeylVector,
    cartan_projection,
    functional_from_spec,
    jordan_projection,
    opposite_involution,
    root_gaps,
)
from gps_lab.checks import random_word
from gps_lab._linalg import eigen_gap_noise, log_singular_values
from gps_lab.errors import NumericalBreakdown
from gps_lab.flags import busemann, loxodromic_data, random_flag
from gps_lab.group import evaluate_word, inverse_word

GROUPS = {
    "schottky": library.schottky(1.0),
    "theta": library.theta_group(),
    "anosov": library.diag_anosov(1.0, 0.8),
}
seeds = st.integers(0, 2**32 - 1)
names = st.sampled_from(sorted(GROUPS))


def word(gens, rng, n):
    return random_word(gens, rng, n)


@settings(max_examples=60, deadline=None)
@given(names, seeds)
def test_inverse_is_opposite(name, seed):
    gens, rng = GROUPS[name], np.random.default_rng(seed)
    g = evaluate_word(gens, word(gens, rng, 8))
    np.testing.assert_allclose(cartan_projection(g.inverse()).entries,
                               opposite_involution(cartan_projection(g)).entries, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(names, seeds)
def test_jordan_conjugation_invariant(name, seed):
    gens, rng = GROUPS[name], np.random.default_rng(seed)
    w, h = word(gens, rng, 8), word(gens, rng, 8)
    g = evaluate_word(gens, w)
    try:
        conj = evaluate_word(gens, h + w + inverse_word(h))
    except NumericalBreakdown:
        assume(False)  # the conjugate is beyond double precision
    # eigenvalues of the conjugate are only accurate to its rounding noise floor
    tol = max(1e-6, float(eigen_gap_noise(log_singular_values(conj.matrix[None]))[0]))
    np.testing.assert_allclose(jordan_projection(conj).entries, jordan_projection(g).entries, atol=tol)


@settings(max_examples=40, deadline=None)
@given(names, seeds, st.integers(1, 10))
def test_jordan_of_powers(name, seed, n):
    gens, rng = GROUPS[name], np.random.default_rng(seed)
    w = word(gens, rng, 4)
    g = evaluate_word(gens, w)
    if loxodromic_data(g, ThetaSet.full(gens.dimension)) is None:
        return
    try:
        gn = evaluate_word(gens, w * n)
    except NumericalBreakdown:
        assume(False)  # the power is beyond double precision
    tol = max(1e-6 * n, float(eigen_gap_noise(log_singular_values(gn.matrix[None]))[0]))
    np.testing.assert_allclose(jordan_projection(gn).entries, n * jordan_projection(g).entries, atol=tol)


@settings(max_examples=60, deadline=None)
@given(names, seeds)
def test_chamber_and_subadditivity(name, seed):
    gens, rng = GROUPS[name], np.random.default_rng(seed)
    theta = ThetaSet.full(gens.dimension)
    phi = functional_from_spec("sum_omega", theta)
    g = evaluate_word(gens, word(gens, rng, 6))
    h = evaluate_word(gens, word(gens, rng, 6))
    assert np.all(root_gaps(cartan_projection(g).entries, theta) >= -1e-12)
    assert phi(cartan_projection(g @ h)) <= phi(cartan_projection(g)) + phi(cartan_projection(h)) + 1e-6


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_functional_additive(a, b, c):
    theta = ThetaSet.full(3)
    phi = functional_from_spec([(1, c[0]), (2, c[1])], theta)
    va, vb = WeylVector([a[0], a[1], -a[0] - a[1]]), WeylVector([b[0], b[1], -b[0] - b[1]])
    assert abs(phi(va + vb) - phi(va) - phi(vb)) <= 1e-12 * (1 + abs(phi(va)) + abs(phi(vb)))


@settings(max_examples=60, deadline=None)
@given(names, seeds)
def test_cocycle_identity(name, seed):
    gens, rng = GROUPS[name], np.random.default_rng(seed)
    theta = ThetaSet.full(gens.dimension)
    g = evaluate_word(gens, word(gens, rng, 6))
    h = evaluate_word(gens, word(gens, rng, 6))
    F = random_flag(theta, rng)
    bgh, bg, bh = busemann(g @ h, F), busemann(g, F.transform(h.matrix)), busemann(h, F)
    assert max(abs(bgh[k] - bg[k] - bh[k]) for k in theta) < 1e-8

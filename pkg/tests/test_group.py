import math

import numpy as np
import pytest

from gps_lab.group import (
    GeneratorSet,
    GroupElement,
    canonical_rotation,
    cyclically_reduce,
    evaluate_word,
    free_ball_size,
    free_reduce,
    inverse_word,
    letter_rank,
    primitive_root,
    rank_letter,
    renormalize,
    word_ball,
)

A = [[1.0, 2.0], [0.0, 1.0]]
B = [[1.0, 0.0], [2.0, 1.0]]


@pytest.fixture
def ab():
    return GeneratorSet([A, B])


def test_empty_word_is_identity(ab):
    g = evaluate_word(ab, [])
    assert np.array_equal(g.matrix, np.eye(2))
    assert g.word == ()


def test_cancelling_word_is_identity(ab):
    g = evaluate_word(ab, [1, -1])
    np.testing.assert_allclose(g.matrix, np.eye(2), atol=1e-14)


def test_product_ab(ab):
    np.testing.assert_allclose(evaluate_word(ab, [1, 2]).matrix, [[5, 2], [2, 1]])


def test_letter_rank_roundtrip():
    for r in range(10):
        assert letter_rank(rank_letter(r)) == r
    assert letter_rank(1) == 0 and letter_rank(-1) == 1 and letter_rank(2) == 2


def test_free_ball_sizes(ab):
    assert len(list(word_ball(ab, 1))) == 5
    assert len(list(word_ball(ab, 3))) == 53
    assert free_ball_size(2, 3) == 53


def test_rotation_group_dedup():
    r = [[0.0, -1.0], [1.0, 0.0]]
    gens = GeneratorSet([r], presentation_hint="unknown")
    ball = word_ball(gens, 8)
    assert len(list(ball)) == 4


def test_ball_nesting(ab):
    small = {g.word for g in word_ball(ab, 2)}
    big = {g.word for g in word_ball(ab, 3)}
    assert small <= big


def test_renormalize_scalars():
    np.testing.assert_allclose(renormalize(GroupElement(2 * np.eye(2), ())).matrix, np.eye(2))
    np.testing.assert_allclose(renormalize(GroupElement([[3.0, 0], [0, 3.0]], ())).matrix, np.eye(2))
    m = np.array(A)
    np.testing.assert_allclose(renormalize(GroupElement(m, ())).matrix, m)


def test_generators_rescaled_to_unit_determinant():
    gens = GeneratorSet([[[2.0, 0.0], [0.0, 2.0]], [[2.0, 1.0], [0.0, 2.0]]])
    for g in gens.generators:
        assert math.isclose(np.linalg.det(g), 1.0, rel_tol=1e-12)


def test_free_hint_rejects_coinciding_generators():
    with pytest.raises(ValueError):
        GeneratorSet([A, A])
    with pytest.raises(ValueError):
        GeneratorSet([A, np.linalg.inv(A)])


def test_word_label_and_parse(ab):
    word = (1, -2, 2, 1)
    assert ab.word_label(word) == "AbBA"
    assert ab.parse_word("AbBA") == word
    assert ab.parse_word("1") == ()


def test_word_helpers():
    assert free_reduce((1, 2, -2, -1, 1)) == (1,)
    assert inverse_word((1, -2)) == (2, -1)
    assert cyclically_reduce((-1, 2, 1)) == (2,)
    assert canonical_rotation((2, 1)) == (1, 2)
    assert primitive_root((1, 2, 1, 2)) == ((1, 2), 2)
    assert primitive_root((1, 2, 2)) == ((1, 2, 2), 1)


def test_product_and_inverse_consistency(ab, rng):
    for _ in range(20):
        u = tuple(int(x) for x in rng.choice([1, -1, 2, -2], size=rng.integers(1, 10)))
        v = tuple(int(x) for x in rng.choice([1, -1, 2, -2], size=rng.integers(1, 10)))
        gu, gv = evaluate_word(ab, u).matrix, evaluate_word(ab, v).matrix
        guv = evaluate_word(ab, u + v).matrix
        np.testing.assert_allclose(guv, gu @ gv, rtol=1e-8 * (len(u) + len(v)), atol=1e-8 * np.abs(guv).max())
        ginv = evaluate_word(ab, inverse_word(u)).matrix
        np.testing.assert_allclose(ginv, np.linalg.inv(gu), rtol=1e-6, atol=1e-6 * np.abs(ginv).max())

"""Group elements as matrix/word pairs, word evaluation and enumeration.

Words are tuples of signed generator indices: ``k`` stands for the k-th
generator (1-based) and ``-k`` for its inverse.  Within a word length the
enumeration order is lexicographic for the alphabet order
``1 < -1 < 2 < -2 < ...``.
"""

from fractions import Fraction
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from ._linalg import log_singular_values, renormalize_stack
from .errors import NumericalBreakdown, SingularMatrix

DET_TOL = 1e-10
FREE_TOL = 1e-9
CONDITION_LIMIT = 1e12
RENORMALIZE_EVERY = 8


def letter_rank(letter):
    """Position of a signed letter in the alphabet order."""
    return 2 * (abs(letter) - 1) + (0 if letter > 0 else 1)


def rank_letter(rank):
    k = rank // 2 + 1
    return k if rank % 2 == 0 else -k


def free_reduce(word):
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def inverse_word(word):
    return tuple(-x for x in reversed(word))


def parse_number(text):
    """Parse a decimal or rational literal such as ``"1/2"``."""
    return float(Fraction(str(text).strip()))


class GeneratorSet:
    """Finite generating set of a subgroup of SL(d, R).

    Matrices with ``det != 1`` are rescaled by ``|det|^(-1/d)``.  With
    ``presentation_hint="free"`` the generators are checked to be pairwise
    distinct and distinct from each other's inverses.
    """

    def __init__(self, generators, labels=None, presentation_hint="free"):
        mats = [np.array(g, dtype=float) for g in generators]
        if not mats:
            raise ValueError("at least one generator is required")
        d = mats[0].shape[0]
        if d < 2:
            raise ValueError("dimension must be at least 2")
        for g in mats:
            if g.shape != (d, d):
                raise ValueError(f"generator of shape {g.shape}, expected {(d, d)}")
        mats = list(renormalize_stack(np.stack(mats)))
        for i, g in enumerate(mats):
            if abs(np.linalg.det(g) - 1.0) >= DET_TOL:
                raise ValueError(f"generator {i + 1} has determinant {np.linalg.det(g)} after renormalization")
        if labels is None:
            labels = [chr(ord("A") + i) if i < 26 else f"g{i + 1}" for i in range(len(mats))]
        labels = list(labels)
        if len(labels) != len(mats) or len(set(labels)) != len(labels):
            raise ValueError("labels must be distinct, one per generator")
        if presentation_hint not in ("free", "unknown"):
            raise ValueError(f"unknown presentation_hint {presentation_hint!r}")
        invs = [np.linalg.inv(g) for g in mats]
        if presentation_hint == "free":
            cands = mats + invs
            for i in range(len(cands)):
                for j in range(i + 1, len(cands)):
                    if j == i + len(mats):
                        continue
                    if np.max(np.abs(cands[i] - cands[j])) < FREE_TOL:
                        raise ValueError("free presentation has coinciding generators or inverses")
        self.dimension = d
        self.labels = labels
        self.presentation_hint = presentation_hint
        alphabet = np.empty((2 * len(mats), d, d))
        for i, (g, gi) in enumerate(zip(mats, invs)):
            alphabet[2 * i] = g
            alphabet[2 * i + 1] = gi
        alphabet.setflags(write=False)
        self.alphabet = alphabet

    @property
    def rank(self):
        return len(self.labels)

    @property
    def generators(self):
        return [self.alphabet[2 * i] for i in range(self.rank)]

    @property
    def letters(self):
        """Signed letters in alphabet order."""
        return [rank_letter(r) for r in range(2 * self.rank)]

    def matrix(self, letter):
        if letter == 0 or abs(letter) > self.rank:
            raise IndexError(f"letter {letter} out of range for {self.rank} generators")
        return self.alphabet[letter_rank(letter)]

    def word_label(self, word):
        """Human-readable word, inverses written in lower case."""
        out = []
        for x in word:
            lab = self.labels[abs(x) - 1]
            out.append(lab if x > 0 else (lab.lower() if lab.lower() != lab else lab + "^-1"))
        return "".join(out) if out else "1"

    def parse_word(self, text):
        """Inverse of :meth:`word_label` for single-character labels."""
        if text in ("", "1"):
            return ()
        lookup = {}
        for i, lab in enumerate(self.labels):
            lookup[lab] = i + 1
            if lab.lower() != lab:
                lookup[lab.lower()] = -(i + 1)
        try:
            return tuple(lookup[c] for c in text)
        except KeyError as exc:
            raise ValueError(f"cannot parse word {text!r}") from exc

    def __repr__(self):
        return f"GeneratorSet(d={self.dimension}, labels={self.labels}, hint={self.presentation_hint!r})"


class GroupElement:
    """Immutable matrix/word pair."""

    __slots__ = ("_matrix", "_word", "_cond")

    def __init__(self, matrix, word=()):
        m = np.array(matrix, dtype=float)
        m.setflags(write=False)
        self._matrix = m
        self._word = tuple(word)
        self._cond = None

    @property
    def matrix(self):
        return self._matrix

    @property
    def word(self):
        return self._word

    @property
    def dimension(self):
        return self._matrix.shape[0]

    @property
    def condition_estimate(self):
        if self._cond is None:
            logsv = log_singular_values(self._matrix)[0]
            self._cond = float(np.exp(logsv[0] - logsv[-1]))
        return self._cond

    def inverse(self):
        return GroupElement(np.linalg.inv(self._matrix), inverse_word(self._word))

    def __matmul__(self, other):
        return GroupElement(self._matrix @ other._matrix, free_reduce(self._word + other._word))

    def __len__(self):
        return len(self._word)

    def __repr__(self):
        return f"GroupElement(word={self._word}, matrix={self._matrix.tolist()})"


def renormalize(g):
    """Rescale ``g`` to determinant one, keeping its word."""
    m = g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    d = m.shape[0]
    det = np.linalg.det(m)
    if abs(det) < 1e-300:
        raise SingularMatrix(f"|det| = {abs(det)} below 1e-300")
    scaled = m * abs(det) ** (-1.0 / d)
    word = g.word if isinstance(g, GroupElement) else ()
    return GroupElement(scaled, word)


def evaluate_word(gens, word):
    word = free_reduce(word)
    for x in word:
        gens.matrix(x)
    m = np.eye(gens.dimension)
    for i, x in enumerate(word, 1):
        m = m @ gens.matrix(x)
        if i % RENORMALIZE_EVERY == 0:
            m = renormalize_stack(m)[0]
    if len(word) % RENORMALIZE_EVERY:
        m = renormalize_stack(m)[0]
    g = GroupElement(m, word)
    # in SL(2) sigma_2 = 1 / sigma_1 is exact, so only larger d can lose precision
    if gens.dimension > 2 and g.condition_estimate > CONDITION_LIMIT:
        raise NumericalBreakdown(
            f"condition estimate {g.condition_estimate:.3g} exceeds {CONDITION_LIMIT:g}; shorten the word"
        )
    return g


class Shell(NamedTuple):
    """All enumerated elements of one word length, as parallel arrays."""

    length: int
    matrices: np.ndarray  # (N, d, d)
    log_sv: np.ndarray  # (N, d), non-increasing
    words: Optional[np.ndarray]  # (N, length) int8 signed letters, or None

    def __len__(self):
        return len(self.matrices)


def _fingerprint(m, tol):
    q = np.round(m / tol).astype(np.int64)
    qi = np.round(np.linalg.inv(m) / tol).astype(np.int64)
    return q.tobytes() + qi.tobytes()


class _Dedup:
    def __init__(self, tol):
        self.tol = tol
        self.seen = set()
        self.collisions = 0

    def mask(self, mats):
        keep = np.ones(len(mats), dtype=bool)
        for i, m in enumerate(mats):
            fp = _fingerprint(m, self.tol)
            if fp in self.seen:
                keep[i] = False
                self.collisions += 1
            else:
                self.seen.add(fp)
        return keep


def iter_shells(
    gens,
    max_length,
    *,
    track_words=True,
    first_letters=None,
    include_identity=True,
    dedup_tolerance=None,
    expand=None,
    dedup=None,
    precision_index=None,
) -> Iterator[Shell]:
    """Breadth-first enumeration of freely reduced words, one shell per length.

    ``first_letters`` restricts the first letter (partitioning the ball into
    independent subtasks).  ``expand(shell) -> bool mask`` selects which
    nodes of a shell get children; pruned subtrees are never visited.
    ``dedup_tolerance`` (or an explicit ``_Dedup``) drops elements whose
    fingerprint was already seen; dropped elements are not expanded.
    Enumeration stops with ``NumericalBreakdown`` once ``sigma_1 / sigma_j``
    exceeds the condition limit, where ``j = precision_index`` is the last
    singular value whose relative accuracy is needed.  The default is ``d``,
    except in SL(2) where ``sigma_2 = 1 / sigma_1`` comes from the
    determinant and only ``sigma_1`` matters.
    """
    if max_length < 0:
        raise ValueError("radius must be non-negative")
    d = gens.dimension
    alphabet = gens.alphabet
    n_letters = len(alphabet)
    if dedup is None and dedup_tolerance is not None:
        dedup = _Dedup(dedup_tolerance)
    if precision_index is None:
        precision_index = 1 if d == 2 else d
    check = int(precision_index) - 1

    ident = np.eye(d)[None]
    if dedup is not None:
        dedup.mask(ident)
    if include_identity:
        yield Shell(0, ident, np.zeros((1, d)), np.zeros((1, 0), dtype=np.int8) if track_words else None)
    if max_length == 0:
        return

    signed = np.array([rank_letter(r) for r in range(n_letters)], dtype=np.int8)
    ranks = np.arange(n_letters)
    if first_letters is not None:
        ranks = np.array(sorted(letter_rank(x) for x in first_letters), dtype=int)
    mats = alphabet[ranks].copy()
    last = ranks
    words = np.array([[rank_letter(r)] for r in ranks], dtype=np.int8) if track_words else None
    length = 1
    while True:
        if dedup is not None and len(mats):
            keep = dedup.mask(mats)
            mats, last = mats[keep], last[keep]
            if words is not None:
                words = words[keep]
        log_sv = log_singular_values(mats) if len(mats) else np.zeros((0, d))
        if len(mats) and check > 0:
            worst = np.max(log_sv[:, 0] - log_sv[:, check])
            if worst > np.log(CONDITION_LIMIT):
                raise NumericalBreakdown(
                    f"condition estimate {np.exp(worst):.3g} exceeds {CONDITION_LIMIT:g} at word length {length}"
                )
        shell = Shell(length, mats, log_sv, words)
        yield shell
        if length == max_length or not len(mats):
            return
        if expand is not None:
            sel = np.asarray(expand(shell), dtype=bool)
            mats, last = mats[sel], last[sel]
            if words is not None:
                words = words[sel]
            if not len(mats):
                return
        # children: every letter except the inverse of the last one (rank ^ 1)
        allowed = np.arange(n_letters)[None, :] != (last[:, None] ^ 1)
        parent_idx, child_rank = np.nonzero(allowed)
        mats = np.einsum("nij,njk->nik", mats[parent_idx], alphabet[child_rank])
        last = child_rank
        length += 1
        if length % RENORMALIZE_EVERY == 0:
            mats = renormalize_stack(mats)
        if words is not None:
            words = np.concatenate([words[parent_idx], signed[child_rank][:, None]], axis=1)


class WordBall:
    """Iterable over the word ball of a given radius.

    After iteration, ``collisions`` holds the number of elements dropped by
    fingerprint deduplication (always 0 for free presentations).
    """

    def __init__(self, gens, radius, dedup_tolerance=1e-9, first_letters=None):
        if radius < 0:
            raise ValueError("radius must be non-negative")
        self.gens = gens
        self.radius = radius
        self.dedup_tolerance = dedup_tolerance
        self.first_letters = first_letters
        self.collisions = 0

    def shells(self, track_words=True):
        dedup = None
        if self.gens.presentation_hint != "free":
            dedup = _Dedup(self.dedup_tolerance)
        yield from iter_shells(
            self.gens,
            self.radius,
            track_words=track_words,
            first_letters=self.first_letters,
            include_identity=self.first_letters is None,
            dedup=dedup,
        )
        if dedup is not None:
            self.collisions = dedup.collisions

    def __iter__(self):
        for shell in self.shells():
            for m, w in zip(shell.matrices, shell.words):
                yield GroupElement(m, tuple(int(x) for x in w))


def word_ball(gens, radius, dedup_tolerance=1e-9, first_letters=None):
    return WordBall(gens, radius, dedup_tolerance, first_letters)


def free_ball_size(rank, radius):
    """Number of freely reduced words of length <= radius on ``rank`` generators."""
    return 1 + sum(2 * rank * (2 * rank - 1) ** (k - 1) for k in range(1, radius + 1))


def cyclically_reduce(word):
    word = free_reduce(word)
    i, j = 0, len(word)
    while j - i >= 2 and word[i] == -word[j - 1]:
        i += 1
        j -= 1
    return word[i:j]


def _key(word):
    return tuple(letter_rank(x) for x in word)


def canonical_rotation(word):
    """Lexicographically minimal rotation (alphabet order) of a cyclic word."""
    if not word:
        return ()
    n = len(word)
    best = min(range(n), key=lambda i: _key(word[i:] + word[:i]))
    return word[best:] + word[:best]


def primitive_root(word):
    """Return ``(root, power)`` with ``word == root * power`` and ``root``
    not itself a proper power."""
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == tuple(word):
            return tuple(word[:p]), n // p
    return tuple(word), 1


def is_cyclically_reduced(word: Sequence[int]):
    return len(word) == 0 or (free_reduce(word) == tuple(word) and (len(word) == 1 or word[0] != -word[-1]))

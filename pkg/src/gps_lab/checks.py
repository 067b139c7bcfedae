"""Randomized property suites for the GPS system.

Each suite draws reduced words and Haar-random flags from a seeded
generator and records the worst residual of an identity that holds exactly
in theory: the GPS identity, the cocycle identity, the normalization
``B(g, V(g)) = kappa(g)``, the period identity and the cross-ratio formula
for periods.
"""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg

from .cartan import cartan_projection, jordan_projection, v_theta
from .errors import InsufficientGap, NotTransverse
from .flags import _pairings, busemann, cross_ratio, gps_residual, loxodromic_data, random_flag, sigma
from .group import GeneratorSet, evaluate_word


def random_word(gens, rng, max_length, min_length=1):
    """Uniform length in ``[min_length, max_length]``, then a uniform reduced word."""
    length = int(rng.integers(min_length, max_length + 1))
    letters = gens.letters
    word = []
    while len(word) < length:
        x = letters[int(rng.integers(len(letters)))]
        if word and x == -word[-1]:
            continue
        word.append(x)
    return tuple(word)


def random_generators(d, count, rng, scale=0.6):
    """``count`` matrices ``exp(scale * X)`` with X Gaussian and traceless."""
    mats = []
    for _ in range(count):
        x = rng.standard_normal((d, d))
        x -= np.trace(x) / d * np.eye(d)
        mats.append(scipy.linalg.expm(scale * x))
    return GeneratorSet(mats)


def _sup(a):
    return float(np.max(np.abs(a))) if len(a) else 0.0


def _transverse_pair(theta, rng, floor, g=None, attempts=50):
    for _ in range(attempts):
        F, F2 = random_flag(theta, rng), random_flag(theta, rng)
        if min(_pairings(F, F2).values()) < floor:
            continue
        if g is not None and min(_pairings(F.transform(g), F2.transform(g)).values()) < floor:
            continue
        return F, F2
    raise NotTransverse(f"no flag pair with pairing >= {floor:g} found in {attempts} draws")


@dataclass
class GpsTrial:
    word: tuple
    gps: float
    cocycle: float
    normalization: float


@dataclass
class GpsSuiteReport:
    trials: List[GpsTrial] = field(repr=False)
    max_gps: float
    max_cocycle: float
    max_normalization: float
    normalization_skipped: int


def gps_property_suite(sys, trials, rng, max_length=6, pairing_floor=1e-3):
    """GPS, cocycle and normalization residuals on random trials.

    Trials draw a word ``g`` and flags ``F, F'`` such that both ``(F, F')``
    and ``(gF, gF')`` have pairing determinants at least ``pairing_floor``.
    """
    rows = []
    skipped = 0
    for _ in range(trials):
        # strongly contracting words squeeze most pairs together; redraw the word too
        for _ in range(100):
            word = random_word(sys.gens, rng, max_length)
            g = evaluate_word(sys.gens, word)
            try:
                F, F2 = _transverse_pair(sys.theta, rng, pairing_floor, g.matrix)
                break
            except NotTransverse:
                continue
        else:
            raise NotTransverse(f"no word of length <= {max_length} admits flag pairs above {pairing_floor:g}")
        h = evaluate_word(sys.gens, random_word(sys.gens, rng, max_length))
        res = gps_residual(sys, g, F, F2)
        bgh = busemann(g @ h, F)
        bg, bh = busemann(g, F.transform(h.matrix)), busemann(h, F)
        coc = max(abs(bgh[k] - bg[k] - bh[k]) for k in sys.theta)
        try:
            V = v_theta(g, sys.theta)
            kap = np.cumsum(cartan_projection(g).entries)
            b = busemann(g, V)
            norm = max(abs(b[k] - kap[k - 1]) for k in sys.theta)
        except InsufficientGap:
            norm = math.nan
            skipped += 1
        rows.append(GpsTrial(word, res, coc, norm))
    norms = np.array([r.normalization for r in rows])
    norms = norms[np.isfinite(norms)]
    return GpsSuiteReport(
        rows,
        _sup(np.array([r.gps for r in rows])),
        _sup(np.array([r.cocycle for r in rows])),
        _sup(norms),
        skipped,
    )


@dataclass
class PeriodTrial:
    word: tuple
    period: float
    period_bar: float
    period_residual: float
    cross_ratio_residual: float


@dataclass
class PeriodSuiteReport:
    trials: List[PeriodTrial] = field(repr=False)
    max_period: float
    max_cross_ratio: float
    draws: int


def period_property_suite(sys, count, rng, max_length=8, pairing_floor=1e-3, max_draws=None):
    """Period identity ``sigma(g, g+) = phi(lambda(g))`` and
    ``B(x, g x, g-, g+) = l(g) + l_bar(g)`` on random loxodromic words."""
    rows = []
    draws = 0
    max_draws = max_draws or 50 * count
    while len(rows) < count:
        if draws >= max_draws:
            raise InsufficientGap(f"only {len(rows)} loxodromic words in {draws} draws")
        draws += 1
        word = random_word(sys.gens, rng, max_length)
        g = evaluate_word(sys.gens, word)
        data = loxodromic_data(g, sys.theta)
        if data is None:
            continue
        lam = jordan_projection(g)
        ell, ell_bar = sys.phi(lam), sys.phi_bar(lam)
        per_res = abs(sigma(sys, g, data.attracting) - ell)
        x = random_flag(sys.theta, rng)
        gx = x.transform(g.matrix)
        try:
            if min(min(_pairings(a, b).values()) for a in (x, gx) for b in (data.repelling, data.attracting)) \
                    < pairing_floor:
                continue
            cr = cross_ratio(sys, x, gx, data.repelling, data.attracting)
        except NotTransverse:
            continue
        rows.append(PeriodTrial(word, ell, ell_bar, per_res, abs(cr - ell - ell_bar)))
    return PeriodSuiteReport(
        rows,
        _sup(np.array([r.period_residual for r in rows])),
        _sup(np.array([r.cross_ratio_residual for r in rows])),
        draws,
    )


def quint_sup(sys, length, samples, rng, pairing_floor=0.1):
    """Sampled sup of ``||B(g, F) - kappa(g)||`` over words of the given
    length and flags F with pairing at least ``pairing_floor`` against
    ``U_theta(g^-1)``."""
    from .cartan import u_theta

    best = 0.0
    for _ in range(samples):
        g = evaluate_word(sys.gens, random_word(sys.gens, rng, length, min_length=length))
        try:
            U = u_theta(g.inverse(), sys.theta)
        except InsufficientGap:
            continue
        F = random_flag(sys.theta, rng)
        if min(_pairings(U, F).values()) < pairing_floor:
            continue
        kap = np.cumsum(cartan_projection(g).entries)
        b = busemann(g, F)
        best = max(best, max(abs(b[k] - kap[k - 1]) for k in sys.theta))
    return best

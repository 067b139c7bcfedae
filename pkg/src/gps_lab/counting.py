"""Weak conjugacy classes, counting functions, Poincare series and exponents.

Two enumeration modes are offered for conjugacy classes of a free group:

``depth``
    every cyclically reduced word up to ``word_cap`` letters.  Complete
    below ``safety * (minimal period in the last word-length shell)``.
``magnitude``
    every element with ``phi(kappa) <= radius``, found by a pruned
    breadth-first search.  A class is found as soon as one conjugate lies in
    the ball; it is certified below ``radius - (largest observed gap between
    a class's smallest found magnitude and its period)``.  This reaches the
    long parabolic words that dominate short periods in groups with cusps.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ._linalg import centered_log_sv, eigen_gap_noise, weighted_rows
from .cartan import DEFAULT_GAP_TOL, cartan_batch, functional_eval, jordan_batch, jordan_projection
from .errors import (
    DegenerateSample,
    EmptySpectrum,
    InsufficientData,
    NotParabolic,
    UnsupportedPresentation,
)
from .flags import loxodromic_data, transversality
from .group import (
    GroupElement,
    Shell,
    _Dedup,
    canonical_rotation,
    cyclically_reduce,
    evaluate_word,
    iter_shells,
    letter_rank,
    primitive_root,
)

SAFETY_FACTOR = 0.9
TRANSIENT_FRACTION = 0.3
MIN_WINDOW = 3.0
MAX_WORD_LENGTH = 100_000


def shell_magnitudes(phi, shell):
    """``phi(kappa(g))`` for every element of a shell."""
    return weighted_rows(centered_log_sv(shell.log_sv), phi.weights)


def _shell_spectral(sys, mats, log_sv, gap_tol):
    """Periods, bar-periods and the loxodromic mask for a stack."""
    lam = jordan_batch(mats)
    tol = np.maximum(gap_tol, eigen_gap_noise(log_sv))
    idx = np.array(sys.theta.indices) - 1
    gaps = lam[:, idx] - lam[:, idx + 1]
    lox = np.all(gaps > tol[:, None], axis=1)
    per = lam @ sys.phi.weights
    per_bar = lam @ sys.phi_bar.weights
    return per, per_bar, lox


def _partitions(sys, first_letters, threads):
    """First-letter blocks; identity is reported by the first block only."""
    letters = list(first_letters) if first_letters is not None else sys.gens.letters
    if threads <= 1:
        return [letters]
    return [[x] for x in letters]


def _run_blocks(fn, blocks, threads):
    if threads <= 1 or len(blocks) == 1:
        return [fn(b, i == 0) for i, b in enumerate(blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ib: fn(ib[1], ib[0] == 0), enumerate(blocks)))


def magnitude_precision_index(sys):
    """Last singular value needed to evaluate ``phi(kappa)`` accurately.

    In SL(2) the second singular value comes from the determinant, so only
    the top one matters; otherwise it is the largest k with ``c_k != 0``.
    """
    if sys.dimension == 2:
        return 1
    return max((k for k, c in sys.phi.coefficients.items() if c), default=1)


def depth_shells(sys, depth, *, track_words=False, first_letters=None, include_identity=True,
                 precision_index=None):
    dedup = _Dedup(1e-9) if sys.gens.presentation_hint != "free" else None
    yield from iter_shells(
        sys.gens,
        depth,
        track_words=track_words,
        first_letters=first_letters,
        include_identity=include_identity,
        dedup=dedup,
        precision_index=precision_index,
    )


def magnitude_shells(sys, radius, slack=2.0, *, track_words=False, first_letters=None,
                     include_identity=True, word_cap=MAX_WORD_LENGTH, precision_index=None):
    """Shells of the magnitude ball ``{g : phi(kappa(g)) <= radius}``.

    Words are extended while their magnitude stays below ``radius + slack``;
    the yielded shells are filtered to the ball itself.
    """
    phi = sys.phi
    dedup = _Dedup(1e-9) if sys.gens.presentation_hint != "free" else None

    def expand(shell):
        return shell_magnitudes(phi, shell) <= radius + slack

    for shell in iter_shells(
        sys.gens,
        word_cap,
        track_words=track_words,
        first_letters=first_letters,
        include_identity=include_identity,
        dedup=dedup,
        expand=expand,
        precision_index=precision_index,
    ):
        keep = shell_magnitudes(phi, shell) <= radius
        if keep.all():
            yield shell
        else:
            yield Shell(
                shell.length,
                shell.matrices[keep],
                shell.log_sv[keep],
                None if shell.words is None else shell.words[keep],
            )


@dataclass
class WeakConjugacyClass:
    canonical_word: Tuple[int, ...]
    period: float
    period_bar: float
    primitive_period: float
    primitive_root_word: Tuple[int, ...]
    power: int
    representative: np.ndarray = field(repr=False)
    theta: object = field(repr=False, default=None)
    min_magnitude: float = math.inf
    multiplicity: int = 1

    @cached_property
    def fixed_pair(self):
        """``(repelling, attracting)`` flags of the representative."""
        data = loxodromic_data(self.representative, self.theta, gap_tol=0.0)
        if data is None:
            raise EmptySpectrum("representative is not loxodromic")
        return data.repelling, data.attracting

    @property
    def pairing_det(self):
        minus, plus = self.fixed_pair
        return min(transversality(minus, plus).pairings.values())


class ClassList(list):
    """List of classes sorted by period, with the completeness certificate.

    ``certificate`` is the period below which the enumeration is believed
    complete.  ``heuristic`` marks dedup by matrix data instead of words.
    """

    def __init__(self, classes=(), *, certificate=math.inf, mode="depth", word_cap=None,
                 radius=None, final_shell_min_period=None, max_conjugacy_gap=None,
                 heuristic=False, R_max=None):
        super().__init__(classes)
        self.certificate = certificate
        self.mode = mode
        self.word_cap = word_cap
        self.radius = radius
        self.final_shell_min_period = final_shell_min_period
        self.max_conjugacy_gap = max_conjugacy_gap
        self.heuristic = heuristic
        self.R_max = R_max

    def periods(self):
        return np.array([c.period for c in self])


def _minimal_rotation_mask(words):
    """Rows of ``words`` (letters) that are their own minimal rotation."""
    n, L = words.shape
    if L <= 1 or n == 0:
        return np.ones(n, dtype=bool)
    rank = np.where(words > 0, 2 * (words - 1), 2 * (-words - 1) + 1)
    ok = np.ones(n, dtype=bool)
    for r in range(1, L):
        rot = np.roll(rank, -r, axis=1)
        diff = rot != rank
        first = np.argmax(diff, axis=1)
        has = diff.any(axis=1)
        rows = np.arange(n)
        smaller = has & (rot[rows, first] < rank[rows, first])
        ok &= ~smaller
    return ok


def _class_from_word(sys, word, period, period_bar, rep, magnitude=math.inf, multiplicity=1):
    root, power = primitive_root(word)
    if power == 1:
        prim = period
    else:
        root_el = evaluate_word(sys.gens, root)
        prim = functional_eval(sys.phi, jordan_projection(root_el))
    return WeakConjugacyClass(
        canonical_word=tuple(word),
        period=float(period),
        period_bar=float(period_bar),
        primitive_period=float(prim),
        primitive_root_word=tuple(root),
        power=power,
        representative=np.array(rep),
        theta=sys.theta,
        min_magnitude=float(magnitude),
        multiplicity=multiplicity,
    )


def enumerate_weak_classes(sys, R_max, word_cap=None, *, mode="depth", radius=None, slack=2.0,
                           safety=SAFETY_FACTOR, gap_tol=DEFAULT_GAP_TOL, threads=1,
                           heuristic=False):
    """Weak conjugacy classes of loxodromic elements with ``0 < period <= R_max``.

    ``mode="depth"`` walks cyclically reduced words up to ``word_cap``;
    ``mode="magnitude"`` walks the ball of ``phi(kappa) <= radius`` (default
    ``R_max + 1.5``), capped at ``word_cap`` letters if given.
    """
    if sys.gens.presentation_hint != "free" and not heuristic:
        raise UnsupportedPresentation(
            "weak classes require a free presentation; pass heuristic=True for fixed-pair matching"
        )
    if mode == "depth":
        if word_cap is None:
            raise ValueError("depth mode needs word_cap")
        return _classes_by_depth(sys, R_max, word_cap, safety, gap_tol, threads, heuristic)
    if mode == "magnitude":
        if radius is None:
            radius = R_max + 1.5
        return _classes_by_magnitude(sys, R_max, radius, slack, word_cap or MAX_WORD_LENGTH,
                                     gap_tol, threads, heuristic)
    raise ValueError(f"unknown enumeration mode {mode!r}")


def _classes_by_depth(sys, R_max, word_cap, safety, gap_tol, threads, heuristic):
    def block(letters, first):
        found = []
        final_min = math.inf
        for shell in depth_shells(sys, word_cap, track_words=True, first_letters=letters,
                                  include_identity=False):
            if shell.length == 0 or not len(shell):
                continue
            w = shell.words
            cyc = w[:, 0] != -w[:, -1] if shell.length > 1 else np.ones(len(w), dtype=bool)
            per, per_bar, lox = _shell_spectral(sys, shell.matrices, shell.log_sv, gap_tol)
            live = cyc & lox & (per > 0)
            if shell.length == word_cap and live.any():
                final_min = float(per[live].min())
            sel = live & (per <= R_max)
            if not sel.any():
                continue
            idx = np.nonzero(sel)[0]
            idx = idx[_minimal_rotation_mask(w[idx])]
            for i in idx:
                found.append((tuple(int(x) for x in w[i]), per[i], per_bar[i], shell.matrices[i]))
        return found, final_min

    results = _run_blocks(block, _partitions(sys, None, threads), threads)
    final_min = min(r[1] for r in results)
    found = [item for r in results for item in r[0]]
    classes = [_class_from_word(sys, *item) for item in found]
    if heuristic:
        classes = _merge_by_fixed_pair(classes)
    classes.sort(key=lambda c: (c.period, [letter_rank(x) for x in c.canonical_word]))
    cert = safety * final_min if math.isfinite(final_min) else math.inf
    out = ClassList(classes, certificate=cert, mode="depth", word_cap=word_cap,
                    final_shell_min_period=final_min, heuristic=heuristic, R_max=R_max)
    if R_max > cert:
        warnings.warn(f"R_max={R_max} exceeds the completeness certificate {cert:.4g}", stacklevel=3)
    return out


def _classes_by_magnitude(sys, R_max, radius, slack, word_cap, gap_tol, threads, heuristic):
    def block(letters, first):
        best = {}
        for shell in magnitude_shells(sys, radius, slack, track_words=True, first_letters=letters,
                                      include_identity=False, word_cap=word_cap):
            if not len(shell):
                continue
            per, per_bar, lox = _shell_spectral(sys, shell.matrices, shell.log_sv, gap_tol)
            sel = lox & (per > 0) & (per <= R_max)
            if not sel.any():
                continue
            mags = shell_magnitudes(sys.phi, shell)
            for i in np.nonzero(sel)[0]:
                word = tuple(int(x) for x in shell.words[i])
                key = canonical_rotation(cyclically_reduce(word))
                prev = best.get(key)
                if prev is None or mags[i] < prev[0]:
                    best[key] = (float(mags[i]), per[i], per_bar[i])
        return best

    results = _run_blocks(block, _partitions(sys, None, threads), threads)
    merged = {}
    for best in results:
        for key, val in best.items():
            if key not in merged or val[0] < merged[key][0]:
                merged[key] = val
    classes = []
    for key, (mag, per, per_bar) in merged.items():
        rep = evaluate_word(sys.gens, key).matrix
        classes.append(_class_from_word(sys, key, per, per_bar, rep, magnitude=mag))
    if heuristic:
        classes = _merge_by_fixed_pair(classes)
    classes.sort(key=lambda c: (c.period, [letter_rank(x) for x in c.canonical_word]))
    gap = max((c.min_magnitude - c.period for c in classes), default=0.0)
    gap = max(gap, 0.0)
    return ClassList(classes, certificate=min(radius - gap, R_max) if classes else radius,
                     mode="magnitude", word_cap=word_cap, radius=radius,
                     max_conjugacy_gap=gap, heuristic=heuristic, R_max=R_max)


def _merge_by_fixed_pair(classes, tol=1e-6):
    """Identify classes whose representatives share period and fixed pair."""
    kept = []
    for c in classes:
        minus, plus = c.fixed_pair
        for k in kept:
            if abs(k.period - c.period) > tol:
                continue
            km, kp = k.fixed_pair
            if (np.allclose(km.projections()[min(c.theta.indices)], minus.projections()[min(c.theta.indices)], atol=tol)
                    and np.allclose(kp.projections()[min(c.theta.indices)], plus.projections()[min(c.theta.indices)], atol=tol)):
                k.multiplicity += 1
                break
        else:
            kept.append(c)
    return kept


@dataclass
class CountingReport:
    grid: np.ndarray
    counts: np.ndarray
    ratios: np.ndarray
    delta_used: float
    certificate: float
    complete: np.ndarray
    word_cap: Optional[int] = None
    band: Tuple[float, float] = (0.7, 1.3)

    @property
    def accepted(self):
        """Ratio lies in the band on the upper half of the complete range."""
        R = self.grid[self.complete]
        if not len(R):
            return False
        r = self.ratios[self.complete]
        upper = R >= 0.5 * (R.min() + R.max())
        return bool(np.all((r[upper] >= self.band[0]) & (r[upper] <= self.band[1])))

    def ratio_at(self, R):
        i = int(np.argmin(np.abs(self.grid - R)))
        return float(self.ratios[i])

    def count_at(self, R):
        i = int(np.argmin(np.abs(self.grid - R)))
        return int(self.counts[i])


def counting_function(classes, delta, grid, band=(0.7, 1.3)):
    """``N(R) = #{classes : 0 < period <= R}`` and ``N(R) delta R e^(-delta R)``."""
    grid = np.asarray(grid, dtype=float)
    periods = np.sort(np.array([c.period for c in classes if c.period > 0], dtype=float))
    counts = np.searchsorted(periods, grid, side="right")
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = counts * delta * grid * np.exp(-delta * grid)
    cert = getattr(classes, "certificate", math.inf)
    complete = grid <= cert
    if not complete.all():
        warnings.warn(f"grid exceeds the completeness certificate {cert:.4g}", stacklevel=2)
    return CountingReport(grid, counts, ratios, float(delta), float(cert), complete,
                          getattr(classes, "word_cap", None), tuple(band))


class PoincareTrace(NamedTuple):
    lengths: np.ndarray
    shell_sums: np.ndarray
    partial_sums: np.ndarray
    counts: np.ndarray

    @property
    def tail_estimate(self):
        """Contribution of the last shell, the crude Cauchy-tail indicator."""
        return float(self.shell_sums[-1])


def _as_shell_magnitudes(sys, elements):
    """(length, magnitudes) pairs from shells, elements or a depth."""
    if isinstance(elements, int):
        elements = depth_shells(sys, elements, precision_index=magnitude_precision_index(sys))
    by_len = {}
    for item in elements:
        if isinstance(item, Shell):
            by_len.setdefault(item.length, []).append(shell_magnitudes(sys.phi, item))
        else:
            m = sys.magnitude(item)
            by_len.setdefault(len(item.word), []).append(np.array([m]))
    return {L: np.concatenate(v) for L, v in sorted(by_len.items())}


def poincare_series(sys, elements, s):
    """Partial sums of ``sum exp(-s ||g||)`` grouped by word length."""
    if s < 0:
        raise ValueError("s must be non-negative")
    mags = _as_shell_magnitudes(sys, elements)
    lengths = np.array(sorted(mags))
    sums = np.array([np.exp(-s * mags[L]).sum() for L in lengths])
    counts = np.array([len(mags[L]) for L in lengths])
    return PoincareTrace(lengths, sums, np.cumsum(sums), counts)


@dataclass
class ExponentEstimate:
    value: float
    method: str
    window: Tuple[float, float]
    residual: float
    details: dict = field(default_factory=dict)


def _regress_log_count(sorted_values, lo, hi, points=200):
    grid = np.linspace(lo, hi, points)
    counts = np.searchsorted(sorted_values, grid, side="right")
    ok = counts > 0
    grid, y = grid[ok], np.log(counts[ok])
    A = np.vstack([grid, np.ones_like(grid)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def critical_exponent(sys, depth, method="regression", *, radius=None, slack=2.0,
                      transient=TRANSIENT_FRACTION, min_window=MIN_WINDOW):
    """Estimate ``delta^phi`` from a word ball of the given depth.

    ``regression``: slope of ``log N(R)`` against ``R`` on the certified
    window, i.e. below the smallest magnitude in the last shell, with the
    first ``transient`` fraction of the range dropped.  With ``radius`` the
    magnitude ball is used instead and certified up to ``radius``.
    ``series_knee``: bisection for the ``s`` at which shell sums of the
    Poincare series stop growing with word length.
    """
    if depth < 6:
        raise InsufficientData("depth must be at least 6")
    if method == "regression":
        if radius is None:
            mags = _as_shell_magnitudes(sys, depth)
            top = max(mags)
            hi = float(mags[top].min()) if len(mags[top]) else 0.0
            values = np.sort(np.concatenate(list(mags.values())))
        else:
            values = np.sort(np.concatenate([shell_magnitudes(sys.phi, sh)
                                             for sh in magnitude_shells(
                                                 sys, radius, slack, precision_index=magnitude_precision_index(sys))]))
            hi = float(radius)
        lo = transient * hi
        if hi - lo < min_window:
            raise InsufficientData(f"certified window [{lo:.3g}, {hi:.3g}] spans less than {min_window} units")
        slope, resid = _regress_log_count(values, lo, hi)
        return ExponentEstimate(max(slope, 0.0), "regression", (lo, hi), resid,
                                {"elements": int(len(values))})
    if method == "series_knee":
        return _series_knee(sys, depth)
    raise ValueError(f"unknown method {method!r}")


def _shell_growth(mags_by_len, s, tail):
    lengths = sorted(L for L in mags_by_len if L > 0)[-tail:]
    y = np.array([np.log(np.exp(-s * mags_by_len[L]).sum()) for L in lengths])
    x = np.array(lengths, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(np.sqrt(np.mean((A @ coef - y) ** 2)))


def _series_knee(sys, depth, tail=None, iters=60):
    mags = _as_shell_magnitudes(sys, depth)
    tail = tail or max(3, depth // 3)
    lo, hi = 0.0, 1.0
    while _shell_growth(mags, hi, tail)[0] > 0:
        hi *= 2
        if hi > 1e6:
            raise InsufficientData("shell sums keep growing; no knee found")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _shell_growth(mags, mid, tail)[0] > 0:
            lo = mid
        else:
            hi = mid
    value = 0.5 * (lo + hi)
    lengths = sorted(L for L in mags if L > 0)[-tail:]
    return ExponentEstimate(value, "series_knee", (float(lengths[0]), float(lengths[-1])),
                            _shell_growth(mags, value, tail)[1], {"tail_shells": tail})


def _is_unipotent_like(sys, p, tol):
    lam = jordan_projection(p).entries
    return np.max(np.abs(lam)) <= tol


def parabolic_exponent(sys, p, n_max=10_000, *, tol=None, transient=TRANSIENT_FRACTION):
    """Critical exponent of the cyclic group generated by a parabolic ``p``.

    Regresses ``log #{n : ||p^n|| <= R}`` on ``R`` for ``|n| <= n_max``.
    """
    m = p.matrix if isinstance(p, GroupElement) else np.asarray(p, dtype=float)
    d = m.shape[0]
    logsv = np.log(np.linalg.svd(m, compute_uv=False))
    if tol is None:
        tol = max(1e-6, float(eigen_gap_noise(logsv)))
    if not _is_unipotent_like(sys, m, tol):
        raise NotParabolic("Jordan projection is not zero: element is loxodromic")
    mags = [0.0]
    for base in (m, np.linalg.inv(m)):
        cur = np.eye(d)
        for _ in range(n_max):
            cur = cur @ base
            mags.append(float(cartan_batch(cur)[0] @ sys.phi.weights))
    mags = np.sort(np.array(mags))
    if mags[-1] < 1.0:
        raise NotParabolic("powers stay bounded: element has finite order or is elliptic")
    # magnitudes grow with |n|, so counts are complete up to the smaller end value
    ends = [cartan_batch(np.linalg.matrix_power(b, n_max))[0] @ sys.phi.weights
            for b in (m, np.linalg.inv(m))]
    hi = float(min(ends))
    lo = transient * hi
    slope, resid = _regress_log_count(mags, lo, hi)
    return ExponentEstimate(slope, "regression", (lo, hi), resid, {"n_max": n_max})


@dataclass
class DopRow:
    label: str
    delta_parabolic: float
    delta_group: float
    margin: float
    holds: bool


def dop_check(sys, parabolics, depth=14, *, delta=None, n_max=10_000):
    """Check ``delta(P) < delta(Gamma)`` for each supplied parabolic.

    ``parabolics`` maps labels to elements (or is a list of elements).
    """
    if delta is None:
        delta = critical_exponent(sys, depth).value
    delta_value = delta.value if isinstance(delta, ExponentEstimate) else float(delta)
    if not isinstance(parabolics, dict):
        parabolics = {sys.gens.word_label(getattr(p, "word", ())) or f"p{i}": p for i, p in enumerate(parabolics)}
    rows = []
    for label, p in parabolics.items():
        est = parabolic_exponent(sys, p, n_max)
        margin = delta_value - est.value
        rows.append(DopRow(label, est.value, delta_value, margin, margin > 0))
    return rows


class Systole(NamedTuple):
    value: float
    word: Tuple[int, ...]
    certificate: float
    certified: bool


def systole(classes):
    if not classes:
        raise EmptySpectrum("no loxodromic class found to the enumeration depth")
    best = min(classes, key=lambda c: c.period)
    cert = getattr(classes, "certificate", math.inf)
    return Systole(best.period, best.canonical_word, cert, best.period <= cert)


def spectrum_sample(classes):
    """``period + period_bar`` for every class."""
    return np.array([c.period + c.period_bar for c in classes], dtype=float)


def _convergents(x, max_den):
    """Continued-fraction convergents ``(p, q)`` of ``x`` with ``q <= max_den``."""
    out = []
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    y = x
    for _ in range(64):
        a = math.floor(y)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            break
        out.append((h1, k1))
        frac = y - a
        if frac < 1e-15:
            break
        y = 1.0 / frac
    return out


def arithmeticity_gap(sample, resolution=1e-3):
    """Largest grid step ``D > resolution`` with every value within
    ``resolution`` of ``D * Z``, or ``None``.

    Ratios to the smallest value are resolved by continued fractions with
    denominators up to ``resolution ** (-1/3)``; deeper convergents would
    match any real number at this resolution.  Diagnostic only.
    """
    vals = np.sort(np.asarray(sample, dtype=float))
    vals = vals[vals > resolution]
    uniq = []
    for v in vals:
        if not uniq or v - uniq[-1] > resolution:
            uniq.append(float(v))
    if len(uniq) < 2:
        raise DegenerateSample("need at least two distinct positive values")
    base = uniq[0]
    max_den = max(1, int(resolution ** (-1.0 / 3.0) + 1e-9))
    denominators = []
    for v in uniq[1:]:
        for p, q in _convergents(v / base, max_den):
            if abs(v - p * base / q) <= resolution:
                denominators.append(q)
                break
        else:
            return None
    step = base / math.lcm(*denominators)
    if step <= resolution:
        return None
    if any(abs(v - step * round(v / step)) > resolution for v in uniq):
        return None
    return step


def mass_mR(classes, R):
    """Total mass ``sum primitive_period`` over classes with period <= R."""
    return float(sum(c.primitive_period for c in classes if 0 < c.period <= R))

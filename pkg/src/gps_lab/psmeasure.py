"""Finite-atom Patterson-Sullivan measures and fixed-point equidistribution.

Measures live on the partial flag manifold F_theta.  Atoms are stored as
a stack of ``d x kmax`` orthonormal frames (shape ``(N, d, kmax)``) so that
binning, pushing forward and cocycle evaluation stay vectorized; ``Flag``
objects are built only on request.

Two binning modes are provided.  ``circle`` applies to SL(2) with
theta = {1}: a line is recorded by its angle in [0, pi).  ``atlas`` works
in any dimension by nearest-neighbour assignment to reference flags under
the chordal distance ``sum_k ||P_k - P'_k||_F``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import centered_log_sv, weighted_rows
from .cartan import DEFAULT_GAP_TOL, ThetaSet, _matrix, root_gaps
from .counting import _shell_spectral, magnitude_shells
from .errors import DegenerateSample, EmptyBinSet, NoValidFlags
from .flags import TRANSVERSE_TOL, Flag, GpsSystem, loxodromic_data
from .group import GroupElement, Shell

FORWARD = "forward"
INVERSE = "inverse"
SIDES = (FORWARD, INVERSE)
EDGE_SNAP = 1e-9
DEFAULT_PAIRING_FLOOR = 0.3


# ---------------------------------------------------------------------------
# frame utilities


def _qr_frames(stack):
    """Orthonormalize every ``d x k`` frame of a stack, returning
    ``(q, log|diag r|)``."""
    q, r = np.linalg.qr(stack)
    diag = np.diagonal(r, axis1=1, axis2=2)
    signs = np.where(diag < 0, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(diag))
    return q * signs[:, None, :], logs


def push_frames(g, frames):
    """``g . F`` for a stack of frames."""
    q, _ = _qr_frames(np.einsum("ij,njk->nik", _matrix(g), frames))
    return q


def busemann_batch(g, frames, theta):
    """``omega_k(B(g, F))`` for every frame, shape ``(N, len(theta))``."""
    _, logs = _qr_frames(np.einsum("ij,njk->nik", _matrix(g), frames))
    cum = np.cumsum(logs, axis=1)
    return cum[:, [k - 1 for k in theta]]


def _functional_on_theta(phi, coords):
    """Evaluate ``phi`` on theta-coordinates ``(N, len(theta))``."""
    idx = {k: i for i, k in enumerate(phi.theta)}
    out = np.zeros(coords.shape[0])
    for k, c in phi.coefficients.items():
        out += c * coords[:, idx[k]]
    return out


def pairing_batch(frames_x, frames_y, theta):
    """``|det[X_(d-k) | Y_k]|`` for all pairs, shape ``(Nx, Ny, len(theta))``.

    Frames only carry the first ``kmax`` columns; the ``(d-k)``-plane of a
    frame is available because theta is symmetric.
    """
    d = theta.dimension
    nx, ny = len(frames_x), len(frames_y)
    out = np.empty((nx, ny, len(theta)))
    for i, k in enumerate(theta):
        x = frames_x[:, :, : d - k]
        y = frames_y[:, :, :k]
        m = np.concatenate(
            [np.broadcast_to(x[:, None], (nx, ny, d, d - k)), np.broadcast_to(y[None], (nx, ny, d, k))],
            axis=3,
        )
        out[:, :, i] = np.abs(np.linalg.det(m))
    return out


def _paired(frames_x, frames_y, theta):
    """Pairing determinants of matched rows, shape ``(N, len(theta))``."""
    d = theta.dimension
    out = np.empty((len(frames_x), len(theta)))
    for i, k in enumerate(theta):
        m = np.concatenate([frames_x[:, :, : d - k], frames_y[:, :, :k]], axis=2)
        out[:, i] = np.abs(np.linalg.det(m))
    return out


def line_angles(frames):
    """Angle in [0, pi) of the line spanned by each 2D frame."""
    v = frames[:, :, 0]
    return np.mod(np.arctan2(v[:, 1], v[:, 0]), np.pi)


def _angle_frames(angles):
    angles = np.asarray(angles, dtype=float)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)[:, :, None]


# ---------------------------------------------------------------------------
# measures


class EmpiricalMeasure:
    """Weighted atoms on F_theta.

    ``frames`` has shape ``(N, d, kmax)``; ``side`` records whether atoms
    sit at ``U_theta(g)`` (forward) or ``U_theta(g^-1)`` (inverse).
    """

    def __init__(self, theta, frames, weights, side=FORWARD, meta=None):
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        frames = np.asarray(frames, dtype=float)
        weights = np.asarray(weights, dtype=float)
        kmax = max(theta.indices)
        if frames.ndim != 3 or frames.shape[1:] != (theta.dimension, kmax):
            raise ValueError(f"frames must have shape (N, {theta.dimension}, {kmax}), got {frames.shape}")
        if weights.shape != (len(frames),):
            raise ValueError("one weight per atom required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        self.theta = theta
        self.frames = frames
        self.weights = weights
        self.side = side
        self.meta = dict(meta or {})
        self.total = float(weights.sum())

    def __len__(self):
        return len(self.weights)

    @property
    def atoms(self):
        """List of ``(Flag, weight)``; built on demand."""
        return [(Flag(self.theta, f, check=False), float(w)) for f, w in zip(self.frames, self.weights)]

    def normalized(self):
        if self.total <= 0:
            raise DegenerateSample("cannot normalize a measure of zero mass")
        return EmpiricalMeasure(self.theta, self.frames, self.weights / self.total, self.side, self.meta)

    def scaled(self, factor):
        return EmpiricalMeasure(self.theta, self.frames, self.weights * factor, self.side, self.meta)

    def merge(self, other):
        """Weight-additive union of the atoms of two measures."""
        if other.theta != self.theta or other.side != self.side:
            raise ValueError("measures live on different flag manifolds or sides")
        return EmpiricalMeasure(
            self.theta,
            np.concatenate([self.frames, other.frames]),
            np.concatenate([self.weights, other.weights]),
            self.side,
            self.meta,
        )

    def push(self, g):
        """Push-forward ``g_* mu``: every atom moves to ``g . F``."""
        return EmpiricalMeasure(self.theta, push_frames(g, self.frames), self.weights, self.side, self.meta)

    def coordinates(self):
        """Flattened atom coordinates: the line angle in circle geometry,
        otherwise the frame entries column by column."""
        if self.theta.dimension == 2:
            return line_angles(self.frames)[:, None]
        return self.frames.transpose(0, 2, 1).reshape(len(self), -1)

    def __repr__(self):
        return f"EmpiricalMeasure(n={len(self)}, total={self.total:.6g}, side={self.side})"


def _element_stacks(elements):
    """Yield ``(matrices, log_sv)`` blocks from shells, group elements or
    raw matrices."""
    from ._linalg import as_stack, log_singular_values

    if isinstance(elements, Shell):
        elements = [elements]
    pending = []
    for item in elements:
        if isinstance(item, Shell):
            if len(item):
                yield item.matrices, item.log_sv
            continue
        pending.append(_matrix(item) if isinstance(item, GroupElement) else np.asarray(item, dtype=float))
    if pending:
        mats = as_stack(np.array(pending))
        yield mats, log_singular_values(mats)


def build_mu_s(sys, elements, s, side=FORWARD, *, delta=None, gap_tol=DEFAULT_GAP_TOL):
    """Normalized ``sum e^{-s phi(kappa(g))} D_g`` over the given elements.

    Atoms sit at ``U_theta(g)`` (forward, approximating the sigma-PS
    measure) or ``U_theta(g^-1)`` (inverse, approximating the sigma-bar-PS
    measure).  Elements whose theta-gaps do not exceed ``gap_tol`` carry no
    well-defined flag and are skipped.  The truncated ``Q(s)`` is kept in
    ``meta["Q"]``.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    if delta is not None and s <= delta:
        warnings.warn(f"s = {s:g} <= delta = {delta:g}: weights are dominated by the truncation", stacklevel=2)
    theta = sys.theta
    kmax = max(theta.indices)
    w_phi = sys.phi.weights
    frames, weights = [], []
    skipped = 0
    for mats, log_sv in _element_stacks(elements):
        kap = centered_log_sv(log_sv)
        with np.errstate(invalid="ignore"):
            ok = np.all(root_gaps(kap, theta) > gap_tol, axis=-1)
        skipped += int((~ok).sum())
        if not ok.any():
            continue
        mats, kap = mats[ok], kap[ok]
        if side == INVERSE:
            mats = np.linalg.inv(mats)
        u = np.linalg.svd(mats)[0]
        frames.append(u[:, :, :kmax])
        weights.append(np.exp(-s * weighted_rows(kap, w_phi)))
    if not frames:
        raise NoValidFlags("no element has a theta-gap above the tolerance")
    frames = np.concatenate(frames)
    weights = np.concatenate(weights)
    q = float(weights.sum())
    return EmpiricalMeasure(theta, frames, weights / q, side, {"s": s, "Q": q, "skipped": skipped})


def s_schedule(delta_hat, steps=5):
    """``s_j = delta_hat (1 + 2^-j)`` for ``j = 0 .. steps-1``."""
    return [delta_hat * (1.0 + 2.0 ** -j) for j in range(steps)]


@dataclass
class ScheduleRow:
    s: float
    measure: EmpiricalMeasure = field(repr=False)
    tv_to_previous: float


def schedule_convergence(sys, elements, delta_hat, bins, steps=5, side=FORWARD, tol=0.05):
    """Build ``mu_s`` along the s-schedule and report successive binned TV.

    ``elements`` must be re-iterable (a list of shells, for instance).
    Returns ``(rows, converged)`` where ``converged`` means the last
    successive TV is below ``tol``.
    """
    rows, prev = [], None
    for s in s_schedule(delta_hat, steps):
        mu = build_mu_s(sys, elements, s, side)
        hist = bins.histogram(mu)
        tv = math.nan if prev is None else total_variation(hist, prev)
        rows.append(ScheduleRow(s, mu, tv))
        prev = hist
    converged = len(rows) > 1 and rows[-1].tv_to_previous < tol
    return rows, converged


# ---------------------------------------------------------------------------
# binning


class BinningScheme:
    """Partition of F_theta into cells.

    Use ``BinningScheme.circle(n)`` for SL(2), theta = {1}, and
    ``BinningScheme.atlas(theta, reference_frames)`` otherwise.
    """

    def __init__(self, mode, theta, count, references=None):
        if mode not in ("circle", "atlas"):
            raise ValueError("mode must be 'circle' or 'atlas'")
        if count < 1:
            raise ValueError("bin count must be positive")
        if mode == "circle" and (theta.dimension != 2 or theta.indices != (1,)):
            raise ValueError("circle binning needs d = 2 and theta = {1}")
        if mode == "atlas":
            references = np.asarray(references, dtype=float)
            if references.ndim != 3 or len(references) != count:
                raise ValueError("atlas binning needs one reference frame per bin")
        self.mode = mode
        self.theta = theta
        self.count = int(count)
        self.references = references

    @classmethod
    def circle(cls, count):
        return cls("circle", ThetaSet(2, (1,)), count)

    @classmethod
    def atlas(cls, theta, references):
        references = np.asarray(references, dtype=float)
        return cls("atlas", theta, len(references), references)

    @classmethod
    def atlas_from_sample(cls, sys, depth, count, rng):
        """Reference flags drawn from ``U_theta`` of a depth-limited ball."""
        from .counting import depth_shells

        mu = build_mu_s(sys, list(depth_shells(sys, depth)), 0.0)
        if len(mu) < count:
            raise DegenerateSample(f"only {len(mu)} flags available for {count} bins")
        pick = rng.choice(len(mu), size=count, replace=False)
        return cls.atlas(sys.theta, mu.frames[np.sort(pick)])

    @classmethod
    def for_system(cls, sys, count, *, depth=4, rng=None):
        if sys.dimension == 2:
            return cls.circle(count)
        rng = np.random.default_rng(0) if rng is None else rng
        return cls.atlas_from_sample(sys, depth, count, rng)

    def refined(self, factor):
        """A finer scheme whose cells nest inside these (circle mode); the
        atlas has no canonical refinement and is returned unchanged."""
        if self.mode == "circle":
            return BinningScheme.circle(self.count * factor)
        return self

    def assign(self, frames):
        """Bin index of every frame."""
        frames = np.asarray(frames, dtype=float)
        if self.mode == "circle":
            pos = line_angles(frames) * (self.count / np.pi)
            # atoms on a cell edge (common for arithmetic groups) must not flip cells under rounding noise
            edge = np.round(pos)
            pos = np.where(np.abs(pos - edge) < EDGE_SNAP, edge, pos)
            return np.floor(pos).astype(np.int64) % self.count
        return self._nearest(frames)

    def _nearest(self, frames, chunk=4096):
        refs = self.references
        out = np.empty(len(frames), dtype=np.int64)
        for lo in range(0, len(frames), chunk):
            f = frames[lo : lo + chunk]
            dist = np.zeros((len(f), len(refs)))
            for k in self.theta:
                overlap = np.einsum("nik,mil->nmkl", f[:, :, :k], refs[:, :, :k])
                sq = 2.0 * k - 2.0 * np.einsum("nmkl,nmkl->nm", overlap, overlap)
                dist += np.sqrt(np.maximum(sq, 0.0))
            out[lo : lo + chunk] = np.argmin(dist, axis=1)
        return out

    def histogram(self, measure, weights=None):
        w = measure.weights if weights is None else weights
        return np.bincount(self.assign(measure.frames), weights=w, minlength=self.count)

    def centers(self):
        """Representative coordinates per bin (angle, or flattened frame)."""
        if self.mode == "circle":
            return ((np.arange(self.count) + 0.5) * np.pi / self.count)[:, None]
        return self.references.transpose(0, 2, 1).reshape(self.count, -1)

    def representatives(self):
        """One frame per bin."""
        if self.mode == "circle":
            return _angle_frames(self.centers()[:, 0])
        return self.references

    def __repr__(self):
        return f"BinningScheme(mode={self.mode}, count={self.count})"


def total_variation(p, q):
    """Half the l1 distance between two normalized histograms."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def binned_density_tv(measure, bins, reference=None):
    """TV distance between binned ``measure`` and ``reference`` (a histogram,
    uniform when omitted)."""
    hist = bins.histogram(measure)
    ref = np.ones(bins.count) if reference is None else reference
    return total_variation(hist, ref)


# ---------------------------------------------------------------------------
# conformality


@dataclass
class ConformalityRow:
    element: int
    bin: int
    mass: float
    pushed: float
    predicted: float

    @property
    def relative(self):
        return abs(self.pushed - self.predicted) / self.predicted if self.predicted > 0 else math.inf


def conformality_table(sys, mu, test_elements, beta, bins, mass_floor=0.01):
    """Rows ``(mu(A), mu(g^-1 A), int_A e^{-beta sigma(g^-1, .)} dmu)`` for
    every test element and every bin with ``mu(A) >= mass_floor``."""
    base = bins.histogram(mu)
    keep = np.flatnonzero(base >= mass_floor)
    if not len(keep):
        raise EmptyBinSet(f"no bin carries mass >= {mass_floor:g}")
    rows = []
    for i, g in enumerate(test_elements):
        m = _matrix(g)
        pushed = np.bincount(bins.assign(push_frames(m, mu.frames)), weights=mu.weights, minlength=bins.count)
        sig = _functional_on_theta(sys.phi, busemann_batch(np.linalg.inv(m), mu.frames, sys.theta))
        predicted = bins.histogram(mu, mu.weights * np.exp(-beta * sig))
        rows.extend(ConformalityRow(i, int(b), float(base[b]), float(pushed[b]), float(predicted[b])) for b in keep)
    return rows


def conformality_residual(sys, mu, test_elements, beta, bins, mass_floor=0.01):
    """Max relative discrepancy ``|mu(g^-1 A) - int_A e^{-beta sigma(g^-1,.)} dmu|``
    divided by the prediction, over test elements and bins above the mass
    floor."""
    rows = conformality_table(sys, mu, test_elements, beta, bins, mass_floor)
    return max(r.relative for r in rows)


# ---------------------------------------------------------------------------
# fixed-point pairs


class PairMeasure:
    """Atoms at repelling/attracting flag pairs ``(g^-, g^+)``.

    ``weights`` already include the prefactor ``delta e^{-delta T}``.
    ``complete`` is True when every loxodromic element with period at
    most ``T`` and fixed pair in the compact set ``pairing >= pairing_floor``
    is known to be present, False when it is known not to be, and None
    when no certificate is available.
    """

    def __init__(self, theta, minus, plus, weights, T, delta, pairing_floor, complete=None, meta=None):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("pair weights must be positive")
        self.theta = theta
        self.minus = np.asarray(minus, dtype=float)
        self.plus = np.asarray(plus, dtype=float)
        self.weights = weights
        self.T = float(T)
        self.delta = float(delta)
        self.prefactor = self.delta * math.exp(-self.delta * self.T) if self.delta > 0 else math.nan
        self.pairing_floor = float(pairing_floor)
        self.complete = complete
        self.meta = dict(meta or {})

    @property
    def normalization_T(self):
        return self.T, self.prefactor

    @property
    def total(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    @property
    def atoms(self):
        return [
            ((Flag(self.theta, a, check=False), Flag(self.theta, b, check=False)), float(w))
            for a, b, w in zip(self.minus, self.plus, self.weights)
        ]

    def marginal(self, which):
        """``"minus"`` marginal (an inverse-side measure) or ``"plus"``."""
        if which == "minus":
            return EmpiricalMeasure(self.theta, self.minus, self.weights, INVERSE)
        if which == "plus":
            return EmpiricalMeasure(self.theta, self.plus, self.weights, FORWARD)
        raise ValueError("which must be 'minus' or 'plus'")

    def scaled(self, factor):
        return PairMeasure(self.theta, self.minus, self.plus, self.weights * factor, self.T, self.delta,
                           self.pairing_floor, self.complete, self.meta)

    def __repr__(self):
        return f"PairMeasure(n={len(self)}, T={self.T:g}, total={self.total:.6g})"


def _fixed_lines_2d(mats, lam):
    """Eigenline of each 2x2 matrix for the real eigenvalue ``lam``."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    v1 = np.stack([b, lam - a], axis=1)
    v2 = np.stack([lam - d, c], axis=1)
    pick = (np.linalg.norm(v1, axis=1) >= np.linalg.norm(v2, axis=1))[:, None]
    v = np.where(pick, v1, v2)
    return (v / np.linalg.norm(v, axis=1, keepdims=True))[:, :, None]


def _fixed_pairs(sys, mats, gap_tol):
    """``(minus, plus)`` frame stacks for loxodromic matrices."""
    if sys.dimension == 2:
        tr = mats[:, 0, 0] + mats[:, 1, 1]
        det = np.linalg.det(mats)
        lam = 0.5 * (tr + np.sign(tr) * np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
        return _fixed_lines_2d(mats, det / lam), _fixed_lines_2d(mats, lam)
    minus, plus = [], []
    for m in mats:
        data = loxodromic_data(m, sys.theta, gap_tol)
        minus.append(data.repelling.frame)
        plus.append(data.attracting.frame)
    return np.array(minus), np.array(plus)


def pair_radius(sys, T, pairing_floor):
    """Magnitude radius that certifies completeness of the pair sample.

    In SL(2) with ``phi = c omega_1`` an element with translation length
    ``l`` whose axis passes at distance ``r`` from the base point has
    ``d(o, g o) <= l + 2 r``, and ``cosh r = 1 / pairing``.  For other
    systems the same formula is used as a heuristic.
    """
    c = sys.phi.coefficients.get(1, 0.0) if sys.dimension == 2 else max(sys.phi.coefficients.values())
    return T + c * math.acosh(1.0 / pairing_floor)


def _certified_2d(sys):
    return sys.dimension == 2 and sys.phi.coefficients.get(1, 0.0) > 0


def fixedpoint_pair_measure(source, T, delta, *, pairing_floor=DEFAULT_PAIRING_FLOOR, radius=None,
                            slack=2.0, gap_tol=DEFAULT_GAP_TOL):
    """``delta e^{-delta T} sum D_{g^-} x D_{g^+}`` over loxodromic ``g`` with
    period at most ``T`` and fixed pair inside ``{pairing >= pairing_floor}``.

    ``source`` is either a ``GpsSystem`` (all group elements are enumerated
    through a magnitude ball of radius ``pair_radius``) or a ``ClassList``
    (one atom per weak class representative, weight its multiplicity).
    """
    if delta <= 0:
        raise DegenerateSample("delta must be positive; elementary groups are not supported")
    if isinstance(source, GpsSystem):
        return _pairs_from_system(source, T, delta, pairing_floor, radius, slack, gap_tol)
    return _pairs_from_classes(source, T, delta, pairing_floor)


def _pairs_from_system(sys, T, delta, pairing_floor, radius, slack, gap_tol):
    certified = radius is None and _certified_2d(sys)
    if radius is None:
        radius = pair_radius(sys, T, pairing_floor)
    minus, plus = [], []
    kmax = max(sys.theta.indices)
    for shell in magnitude_shells(sys, radius, slack):
        if not len(shell):
            continue
        periods, _, lox = _shell_spectral(sys, shell.matrices, shell.log_sv, gap_tol)
        keep = lox & (periods <= T)
        if not keep.any():
            continue
        m_minus, m_plus = _fixed_pairs(sys, shell.matrices[keep], gap_tol)
        ok = np.all(_paired(m_minus, m_plus, sys.theta) >= pairing_floor, axis=1)
        minus.append(m_minus[ok][:, :, :kmax])
        plus.append(m_plus[ok][:, :, :kmax])
    d = sys.dimension
    minus = np.concatenate(minus) if minus else np.zeros((0, d, kmax))
    plus = np.concatenate(plus) if plus else np.zeros((0, d, kmax))
    weights = np.full(len(minus), delta * math.exp(-delta * T))
    meta = {"radius": radius, "source": "elements"}
    return PairMeasure(sys.theta, minus, plus, weights, T, delta, pairing_floor,
                       complete=True if certified else None, meta=meta)


def _pairs_from_classes(classes, T, delta, pairing_floor):
    certificate = getattr(classes, "certificate", math.inf)
    complete = certificate >= T
    if not complete:
        warnings.warn(f"classes are certified only to {certificate:g} < T = {T:g}", stacklevel=3)
    minus, plus, mult = [], [], []
    theta = None
    for c in classes:
        if c.period > T:
            continue
        rep, att = c.fixed_pair
        theta = rep.theta
        if min(_pairings_single(rep, att)) < pairing_floor:
            continue
        minus.append(rep.frame)
        plus.append(att.frame)
        mult.append(c.multiplicity)
    if theta is None:
        theta = getattr(classes, "theta", None) or (classes[0].theta if len(classes) else ThetaSet(2, (1,)))
    kmax = max(theta.indices)
    shape = (0, theta.dimension, kmax)
    weights = delta * math.exp(-delta * T) * np.array(mult, dtype=float)
    return PairMeasure(theta, np.array(minus).reshape(-1, *shape[1:]), np.array(plus).reshape(-1, *shape[1:]),
                       weights, T, delta, pairing_floor, complete=complete, meta={"source": "classes"})


def _pairings_single(F, F2):
    return _paired(F.frame[None], F2.frame[None], F.theta)[0]


# ---------------------------------------------------------------------------
# equidistribution


@dataclass
class EquidistributionReport:
    tv_minus: float
    tv_plus: float
    joint_discrepancy: float
    normalization_fit: float
    relative_joint_discrepancy: float
    tv_minus_mu: float
    tv_plus_mu: float
    pair_hist: np.ndarray = field(repr=False)
    model_hist: np.ndarray = field(repr=False)
    joint_mask: np.ndarray = field(repr=False)
    marginals: dict = field(repr=False, default_factory=dict)

    def as_dict(self):
        return {
            "tv_minus": self.tv_minus,
            "tv_plus": self.tv_plus,
            "joint_discrepancy": self.joint_discrepancy,
            "normalization_fit": self.normalization_fit,
            "relative_joint_discrepancy": self.relative_joint_discrepancy,
            "tv_minus_mu": self.tv_minus_mu,
            "tv_plus_mu": self.tv_plus_mu,
        }

    def __getitem__(self, key):
        return self.as_dict()[key]


def _compress(measure, fine):
    """Masses of ``measure`` on the cells of ``fine`` and one frame per cell."""
    return fine.histogram(measure), fine.representatives()


def product_density(sys, delta, frames_x, frames_y, pairing_floor):
    """``e^{delta phi(G(x, y))}`` on all pairs, zero outside the compact set
    ``{pairing >= pairing_floor}``."""
    p = pairing_batch(frames_x, frames_y, sys.theta)
    inside = np.all(p >= pairing_floor, axis=2)
    with np.errstate(divide="ignore"):
        g = -np.log(np.where(p > 0, p, 1.0))
    idx = {k: i for i, k in enumerate(sys.theta)}
    phi_g = sum(c * g[:, :, idx[k]] for k, c in sys.phi.coefficients.items())
    return np.where(inside, np.exp(delta * phi_g), 0.0)


def product_pair_measure(sys, mu_bar, mu, delta, bins, scale=1.0, *, pairing_floor=DEFAULT_PAIRING_FLOOR,
                         refine=16, T=0.0):
    """Pair measure sampled from ``scale * e^{delta G} mu_bar x mu``.

    Atoms sit on the representative pairs of the fine cells used by
    ``equidistribution_distance``, so the comparison is exact.
    """
    fine = bins.refined(refine)
    mb, reps = _compress(mu_bar, fine)
    m, _ = _compress(mu, fine)
    dens = product_density(sys, delta, reps, reps, pairing_floor) * np.outer(mb, m) * scale
    i, j = np.nonzero(dens > 0)
    pm = PairMeasure(sys.theta, reps[i], reps[j], dens[i, j], T, delta, pairing_floor, complete=True,
                     meta={"source": "product"})
    return pm


def equidistribution_distance(pair, mu_bar, mu, sys, delta, bins, *, joint_bins=None, refine=16):
    """Compare a fixed-point pair measure with ``e^{delta G} mu_bar x mu``.

    The model is restricted to the same compact set ``pairing >=
    pair.pairing_floor`` as the pair sample, and its marginals are the
    targets of ``tv_minus`` / ``tv_plus``; ``tv_minus_mu`` / ``tv_plus_mu``
    compare against ``mu_bar`` / ``mu`` themselves.  The joint comparison
    runs on ``joint_bins`` (default: ``bins``) over cell pairs whose
    representatives are transverse; ``joint_discrepancy`` is the largest
    absolute cell error after a least-squares scale fit ``c``, and
    ``relative_joint_discrepancy`` divides it by the largest pair cell.
    """
    joint_bins = bins if joint_bins is None else joint_bins
    fine = bins.refined(refine) if bins.mode == "circle" else bins
    mb, reps = _compress(mu_bar, fine)
    m, _ = _compress(mu, fine)
    dens = product_density(sys, delta, reps, reps, pair.pairing_floor) * np.outer(mb, m)

    def coarse(scheme):
        return scheme.assign(reps)

    # marginals on ``bins``
    cb = coarse(bins)
    model_minus = np.bincount(cb, weights=dens.sum(axis=1), minlength=bins.count)
    model_plus = np.bincount(cb, weights=dens.sum(axis=0), minlength=bins.count)
    if model_minus.sum() <= 0:
        raise DegenerateSample("model measure vanishes on the compact set")
    pm_minus = bins.histogram(pair.marginal("minus"))
    pm_plus = bins.histogram(pair.marginal("plus"))
    if pm_plus.sum() <= 0:
        raise DegenerateSample("pair measure is empty")
    tv_minus = total_variation(pm_minus, model_minus)
    tv_plus = total_variation(pm_plus, model_plus)
    tv_minus_mu = total_variation(pm_minus, bins.histogram(mu_bar))
    tv_plus_mu = total_variation(pm_plus, bins.histogram(mu))

    # joint comparison
    cj = coarse(joint_bins)
    n = joint_bins.count
    model = np.zeros((n, n))
    np.add.at(model, (cj[:, None], cj[None, :]), dens)
    hist = np.zeros((n, n))
    np.add.at(hist, (joint_bins.assign(pair.minus), joint_bins.assign(pair.plus)), pair.weights)
    jr = joint_bins.representatives()
    mask = np.all(pairing_batch(jr, jr, sys.theta) > TRANSVERSE_TOL, axis=2)
    mm, hh = model[mask], hist[mask]
    denom = float(mm @ mm)
    c = float(hh @ mm) / denom if denom > 0 else math.nan
    err = np.abs(hh - c * mm)
    joint = float(err.max()) if err.size else math.nan
    peak = float(hh.max()) if hh.size else 0.0
    rel = joint / peak if peak > 0 else math.inf
    marginals = {"pair_minus": pm_minus, "pair_plus": pm_plus, "model_minus": model_minus,
                 "model_plus": model_plus}
    return EquidistributionReport(tv_minus, tv_plus, joint, c, rel, tv_minus_mu, tv_plus_mu, hist, model, mask,
                                  marginals)

"""Cartan and Jordan projections, weight functionals and the flag map U_theta.

Vectors of the Cartan subspace are trace-zero real d-vectors.  Functionals
on the theta-part are stored by their coefficients over the fundamental
weights ``omega_k(a) = a_1 + ... + a_k``.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np

from ._linalg import as_stack, centered_log_moduli, centered_log_sv, log_singular_values
from .errors import IndexMismatch, InsufficientGap
from .group import GroupElement, Shell

TRACE_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-6


def _matrix(g):
    return g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float)


class WeylVector:
    """Element of the Cartan subspace.  ``chamber`` marks vectors produced by
    a projection, whose entries are non-increasing."""

    __slots__ = ("entries", "chamber")

    def __init__(self, entries, chamber=False, tol=TRACE_TOL):
        a = np.array(entries, dtype=float)
        if a.ndim != 1:
            raise ValueError("WeylVector entries must be one-dimensional")
        if abs(a.sum()) > tol * max(1.0, np.abs(a).max(initial=0.0)):
            raise ValueError(f"entries sum to {a.sum()}, expected trace zero")
        if chamber and np.any(np.diff(a) > tol):
            raise ValueError("chamber-tagged vector must be non-increasing")
        a.setflags(write=False)
        self.entries = a
        self.chamber = chamber

    @property
    def dimension(self):
        return len(self.entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __add__(self, other):
        return WeylVector(self.entries + np.asarray(other))

    def __sub__(self, other):
        return WeylVector(self.entries - np.asarray(other))

    def __mul__(self, t):
        return WeylVector(self.entries * t, chamber=self.chamber and t >= 0)

    __rmul__ = __mul__

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self):
        return f"WeylVector({np.array2string(self.entries, precision=6)})"


@dataclass(frozen=True)
class ThetaSet:
    """Symmetric subset of {1, ..., d-1} indexing simple roots."""

    dimension: int
    indices: Tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(k) for k in self.indices)))
        object.__setattr__(self, "indices", idx)
        d = self.dimension
        if not idx:
            raise ValueError("theta must be non-empty")
        if idx[0] < 1 or idx[-1] > d - 1:
            raise ValueError(f"theta indices must lie in 1..{d - 1}")
        if any(d - k not in idx for k in idx):
            raise ValueError(f"theta {idx} is not symmetric in dimension {d}")

    @classmethod
    def full(cls, d):
        return cls(d, tuple(range(1, d)))

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k):
        return k in self.indices

    def __len__(self):
        return len(self.indices)


def symmetric_thetas(d):
    """Every non-empty symmetric theta for SL(d)."""
    pairs = sorted({tuple(sorted((k, d - k))) for k in range(1, d)})
    out = []
    for mask in range(1, 2 ** len(pairs)):
        idx = set()
        for i, p in enumerate(pairs):
            if mask >> i & 1:
                idx.update(p)
        out.append(ThetaSet(d, tuple(idx)))
    return out


@dataclass(frozen=True)
class Functional:
    """Linear functional ``sum_k c_k omega_k`` with ``k`` ranging over theta."""

    theta: ThetaSet
    coefficients: Dict[int, float] = field(hash=False)

    def __post_init__(self):
        coeffs = {int(k): float(c) for k, c in dict(self.coefficients).items()}
        bad = [k for k in coeffs if k not in self.theta]
        if bad:
            raise IndexMismatch(f"coefficients {bad} outside theta {self.theta.indices}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def dimension(self):
        return self.theta.dimension

    @property
    def weights(self):
        """Vector ``w`` with ``phi(a) = a @ w`` for trace-zero ``a``."""
        w = np.zeros(self.dimension)
        for k, c in self.coefficients.items():
            w[:k] += c
        return w

    def __call__(self, a):
        return functional_eval(self, a)

    def on_weights(self, omega_values):
        """Evaluate on theta-coordinates ``{k: omega_k(a)}``."""
        return float(sum(c * omega_values[k] for k, c in self.coefficients.items()))

    def __add__(self, other):
        coeffs = dict(self.coefficients)
        for k, c in other.coefficients.items():
            coeffs[k] = coeffs.get(k, 0.0) + c
        return Functional(self.theta, coeffs)

    def is_nonnegative(self):
        return all(c >= 0 for c in self.coefficients.values())

    def __repr__(self):
        terms = " + ".join(f"{c:g}*omega_{k}" for k, c in sorted(self.coefficients.items()))
        return f"Functional({terms or '0'})"


def omega(theta, k):
    return Functional(theta, {k: 1.0})


def alpha(theta, k):
    """Simple root ``a_k - a_(k+1)`` as a functional on the theta-part."""
    d = theta.dimension
    needed = [j for j in (k - 1, k, k + 1) if 1 <= j <= d - 1]
    if not 1 <= k <= d - 1 or any(j not in theta for j in needed):
        raise IndexMismatch(f"alpha_{k} is not in the span of theta={theta.indices} weights")
    coeffs = {k: 2.0}
    for j in (k - 1, k + 1):
        if 1 <= j <= d - 1:
            coeffs[j] = coeffs.get(j, 0.0) - 1.0
    return Functional(theta, coeffs)


def sum_omega(theta):
    return Functional(theta, {k: 1.0 for k in theta})


def functional_from_spec(spec, theta):
    """Build a functional from ``"omega_k"``, ``"alpha_k"``, ``"sum_omega"`` or
    a list of ``(k, c_k)`` pairs."""
    if isinstance(spec, Functional):
        return spec
    if isinstance(spec, str):
        name = spec.strip()
        if name == "sum_omega":
            return sum_omega(theta)
        m = re.fullmatch(r"(omega|alpha)_(\d+)", name)
        if not m:
            raise ValueError(f"unknown functional name {spec!r}")
        k = int(m.group(2))
        if m.group(1) == "omega":
            if k not in theta:
                raise IndexMismatch(f"omega_{k} requires {k} in theta")
            return omega(theta, k)
        return alpha(theta, k)
    return Functional(theta, {int(k): float(c) for k, c in spec})


def functional_eval(phi, a):
    """``sum_k c_k (a_1 + ... + a_k)``; ``a`` may be a batch ``(..., d)``."""
    arr = np.asarray(a, dtype=float)
    if arr.shape[-1] != phi.dimension:
        raise IndexMismatch(f"vector of dimension {arr.shape[-1]} for functional on SL({phi.dimension})")
    out = arr @ phi.weights
    return float(out) if np.ndim(out) == 0 else out


def opposite_involution(a):
    """Reverse-and-negate: ``iota(kappa(g)) = kappa(g^-1)``."""
    arr = np.asarray(a, dtype=float)
    chamber = isinstance(a, WeylVector) and a.chamber
    return WeylVector(-arr[::-1], chamber=chamber)


def pullback(phi):
    """``iota^* phi``: coefficient of omega_k moves to omega_(d-k)."""
    d = phi.dimension
    return Functional(phi.theta, {d - k: c for k, c in phi.coefficients.items()})


def cartan_projection(g):
    logsv = log_singular_values(_matrix(g))[0]
    logsv = logsv - logsv.mean()
    return WeylVector(logsv, chamber=True)


def jordan_projection(g):
    return WeylVector(centered_log_moduli(_matrix(g))[0], chamber=True)


def cartan_batch(mats):
    """Cartan projections of a stack, shape ``(N, d)``."""
    return centered_log_sv(log_singular_values(as_stack(mats)))


def jordan_batch(mats):
    return centered_log_moduli(as_stack(mats))


def root_gaps(a, theta):
    """``alpha_k(a) = a_k - a_(k+1)`` for k in theta; ``a`` may be a batch."""
    arr = np.asarray(a, dtype=float)
    idx = np.array(theta.indices) - 1
    return arr[..., idx] - arr[..., idx + 1]


def u_theta(g, theta, gap_tol=DEFAULT_GAP_TOL):
    """Flag spanned by the leading left-singular vectors of ``g``."""
    from .flags import Flag

    m = _matrix(g)
    u, s, _ = np.linalg.svd(m)
    gaps = np.log(s[:-1]) - np.log(s[1:])
    for k in theta:
        if gaps[k - 1] <= gap_tol:
            raise InsufficientGap(f"singular value gap alpha_{k}(kappa) = {gaps[k - 1]:.3g} <= {gap_tol:g}")
    return Flag(theta, u[:, : max(theta.indices)])


def v_theta(g, theta, gap_tol=DEFAULT_GAP_TOL):
    """Flag spanned by the leading right-singular vectors of ``g``.

    This is the flag on which the Busemann cocycle is normalized:
    ``busemann(g, v_theta(g)) == kappa_theta(g)`` exactly.  It equals
    ``u_theta(g.T)``.
    """
    return u_theta(_matrix(g).T, theta, gap_tol)


@dataclass
class DivergenceRow:
    length: int
    count: int
    min_gap: float


def divergence_report(elements: Iterable, theta):
    """Per word length, the minimum over elements of ``min_k alpha_k(kappa)``.

    Accepts group elements or enumeration shells.  A trend increasing to
    infinity is evidence of P_theta-divergence, never a proof.
    """
    best = {}
    counts = {}
    for item in elements:
        if isinstance(item, Shell):
            if not len(item):
                continue
            kap = centered_log_sv(item.log_sv)
            val = float(np.min(root_gaps(kap, theta)))
            length, n = item.length, len(item)
        else:
            val = float(np.min(root_gaps(cartan_projection(item).entries, theta)))
            length, n = len(item.word), 1
        best[length] = min(best.get(length, np.inf), val)
        counts[length] = counts.get(length, 0) + n
    return [DivergenceRow(L, counts[L], best[L]) for L in sorted(best)]

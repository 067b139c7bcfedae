"""Partial flags, Busemann cocycles, Gromov products and periods.

This realizes the GPS system ``(sigma_phi, sigma_bar_phi, phi o G_theta)``
for a discrete subgroup of SL(d, R).  Conventions:

* ``busemann(g, F)[k] = log vol_k(g | F_k)``, the log k-volume distortion.
* ``gromov_product(F, F')[k] = -log |det[F_(d-k) | F'_k]|`` pairs the
  (d-k)-plane of the first flag with the k-plane of the second.

With these, ``sigma_bar(g, F) + sigma(g, F') = G(gF, gF') - G(F, F')``
holds exactly (up to rounding).
"""

import warnings
from dataclasses import dataclass
from typing import Dict

import numpy as np
import scipy.linalg

from ._linalg import centered_log_moduli, eigen_gap_noise, log_eigen_moduli, log_singular_values, orthonormal_basis
from .cartan import (
    DEFAULT_GAP_TOL,
    ThetaSet,
    WeylVector,
    _matrix,
    cartan_projection,
    functional_eval,
    jordan_projection,
    pullback,
)
from .errors import NotTransverse, NumericalBreakdown

NEST_TOL = 1e-8
ORTHO_TOL = 1e-10
TRANSVERSE_TOL = 1e-8
RANK_TOL = 1e-12


class Flag:
    """Point of the partial flag manifold F_theta.

    Stored as one ``d x kmax`` orthonormal frame whose first ``k`` columns
    span the k-dimensional subspace, for every ``k`` in theta.
    """

    __slots__ = ("theta", "frame")

    def __init__(self, theta, frame, check=True):
        frame = np.array(frame, dtype=float)
        if frame.ndim == 1:
            frame = frame[:, None]
        d = theta.dimension
        kmax = max(theta.indices)
        if frame.shape[0] != d or frame.shape[1] < kmax:
            raise ValueError(f"frame of shape {frame.shape} cannot carry theta {theta.indices} in dimension {d}")
        frame = frame[:, :kmax]
        if check and np.max(np.abs(frame.T @ frame - np.eye(kmax))) > ORTHO_TOL:
            frame = orthonormal_basis(frame)
        frame.setflags(write=False)
        self.theta = theta
        self.frame = frame

    @classmethod
    def from_vectors(cls, theta, vectors):
        """Flag whose k-plane is spanned by the first k columns of ``vectors``."""
        vecs = np.array(vectors, dtype=float)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        kmax = max(theta.indices)
        q = orthonormal_basis(vecs[:, :kmax])
        if np.min(np.abs(np.diag(np.linalg.qr(vecs[:, :kmax])[1]))) < RANK_TOL:
            raise NumericalBreakdown("flag vectors are linearly dependent")
        return cls(theta, q, check=False)

    @classmethod
    def from_bases(cls, theta, bases):
        """Build from a map ``k -> d x k`` orthonormal basis, checking nesting."""
        d = theta.dimension
        frame = np.zeros((d, 0))
        for k in theta.indices:
            b = np.asarray(bases[k], dtype=float)
            if b.shape != (d, k):
                raise ValueError(f"basis for k={k} has shape {b.shape}")
            if np.max(np.abs(b.T @ b - np.eye(k))) > ORTHO_TOL:
                raise ValueError(f"basis for k={k} is not orthonormal")
            resid = frame - b @ (b.T @ frame)
            if frame.shape[1] and np.max(np.abs(resid)) > NEST_TOL:
                raise ValueError(f"subspaces are not nested at k={k}")
            frame = _extend_frame(frame, b, k)
        return cls(theta, frame, check=False)

    @property
    def dimension(self):
        return self.theta.dimension

    def basis(self, k):
        """Orthonormal ``d x k`` basis of the k-plane (k in theta)."""
        if k not in self.theta and k != 0 and k != self.dimension:
            raise KeyError(f"{k} not in theta {self.theta.indices}")
        if k == self.dimension:
            return np.eye(k)
        return self.frame[:, :k]

    @property
    def bases(self):
        return {k: self.basis(k) for k in self.theta}

    def transform(self, g):
        """``g . F``, re-orthonormalized by QR."""
        return Flag(self.theta, orthonormal_basis(_matrix(g) @ self.frame), check=False)

    def projections(self):
        """Orthogonal projection matrices onto each k-plane."""
        return {k: self.basis(k) @ self.basis(k).T for k in self.theta}

    def to_list(self):
        """Frame columns as lists, for serialization."""
        return [list(map(float, col)) for col in self.frame.T]

    def __repr__(self):
        return f"Flag(theta={self.theta.indices}, frame={np.array2string(self.frame, precision=4)})"


def _extend_frame(frame, basis, k):
    """Append to ``frame`` an orthonormal completion to span(basis)."""
    extra = k - frame.shape[1]
    if extra <= 0:
        return frame
    comp = basis - frame @ (frame.T @ basis)
    u, _, _ = np.linalg.svd(comp, full_matrices=False)
    return np.hstack([frame, u[:, :extra]])


def chordal_distance(F, F2):
    """``sum_k ||P_k - P'_k||_F`` over the theta-subspaces."""
    p1, p2 = F.projections(), F2.projections()
    return float(sum(np.linalg.norm(p1[k] - p2[k]) for k in F.theta))


def _pairings(F, F2):
    if F.theta != F2.theta:
        raise ValueError("flags have different theta")
    d = F.dimension
    out = {}
    for k in F.theta:
        m = np.hstack([F.basis(d - k), F2.basis(k)])
        out[k] = abs(float(np.linalg.det(m)))
    return out


@dataclass
class Transversality:
    transverse: bool
    pairings: Dict[int, float]


def transversality(F, F2, tol=TRANSVERSE_TOL):
    p = _pairings(F, F2)
    return Transversality(min(p.values()) > tol, p)


def busemann(g, F):
    """theta-coordinates ``{k: omega_k(B_theta(g, F))}``."""
    m = _matrix(g)
    r = np.linalg.qr(m @ F.frame, mode="r")
    diag = np.abs(np.diag(r))
    if np.min(diag) <= RANK_TOL * np.max(diag):
        raise NumericalBreakdown("distorted frame is rank deficient")
    cum = np.cumsum(np.log(diag))
    return {k: float(cum[k - 1]) for k in F.theta}


def gromov_product(F, F2, tol=TRANSVERSE_TOL):
    p = _pairings(F, F2)
    bad = {k: v for k, v in p.items() if v <= tol}
    if bad:
        raise NotTransverse(f"pairing determinants {bad} at or below {tol:g}")
    return {k: -float(np.log(v)) for k, v in p.items()}


class GpsSystem:
    """The triple ``(sigma_phi, sigma_bar_phi, phi o G_theta)`` over a
    generating set."""

    def __init__(self, gens, theta, phi):
        if not isinstance(theta, ThetaSet):
            theta = ThetaSet(gens.dimension, tuple(theta))
        if theta.dimension != gens.dimension:
            raise ValueError("theta dimension does not match the generators")
        if phi.theta != theta:
            raise ValueError("functional is defined over a different theta")
        self.gens = gens
        self.theta = theta
        self.phi = phi
        self.phi_bar = pullback(phi)

    @property
    def dimension(self):
        return self.theta.dimension

    def magnitude(self, g):
        """``||g||_sigma = phi(kappa(g))``."""
        return functional_eval(self.phi, cartan_projection(g))

    def magnitude_bar(self, g):
        return functional_eval(self.phi_bar, cartan_projection(g))

    def __repr__(self):
        return f"GpsSystem(d={self.dimension}, theta={self.theta.indices}, phi={self.phi})"


def sigma(sys, g, F):
    return sys.phi.on_weights(busemann(g, F))


def sigma_bar(sys, g, F):
    return sys.phi_bar.on_weights(busemann(g, F))


def gps_residual(sys, g, F, F2, tol=TRANSVERSE_TOL):
    lhs = sigma_bar(sys, g, F) + sigma(sys, g, F2)
    gF, gF2 = F.transform(g), F2.transform(g)
    rhs = sys.phi.on_weights(gromov_product(gF, gF2, tol)) - sys.phi.on_weights(gromov_product(F, F2, tol))
    return abs(lhs - rhs)


def cross_ratio(sys, x, x2, y, y2, tol=TRANSVERSE_TOL):
    G = lambda a, b: sys.phi.on_weights(gromov_product(a, b, tol))  # noqa: E731
    return G(x, y) + G(x2, y2) - G(x2, y) - G(x, y2)


@dataclass
class LoxodromicData:
    element: object
    jordan: WeylVector
    attracting: Flag
    repelling: Flag
    eigen_gaps: Dict[int, float]


def _attracting_frame(m, theta, log_mods):
    """Nested frame of top-k generalized eigenspaces via ordered real Schur."""
    d = m.shape[0]
    frame = np.zeros((d, 0))
    for k in theta.indices:
        thr = 0.5 * (log_mods[k - 1] + log_mods[k])
        try:
            _, z, sdim = scipy.linalg.schur(
                m, output="real", sort=lambda re, im: 0.5 * np.log(re * re + im * im) > thr
            )
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalBreakdown(f"Schur decomposition failed: {exc}") from exc
        if sdim != k:
            raise NumericalBreakdown(f"Schur reordering selected {sdim} eigenvalues, expected {k}")
        frame = _extend_frame(frame, z[:, :k], k)
    return frame


def loxodromic_data(g, theta, gap_tol=DEFAULT_GAP_TOL):
    """Jordan data and fixed flags of ``g``, or ``None`` if not loxodromic.

    The effective gap tolerance is raised to the rounding noise floor of
    ``g`` (see ``eigen_gap_noise``).
    """
    m = _matrix(g)
    mods = log_eigen_moduli(m)[0]
    gap_tol = max(gap_tol, float(eigen_gap_noise(log_singular_values(m)[0])))
    lam = centered_log_moduli(m)[0]
    gaps = {k: float(lam[k - 1] - lam[k]) for k in theta}
    worst = min(gaps.values())
    if worst <= gap_tol:
        return None
    if worst < 10 * gap_tol:
        warnings.warn(f"eigenvalue gap {worst:.3g} is close to the tolerance {gap_tol:g}", stacklevel=2)
    plus = Flag(theta, _attracting_frame(m, theta, mods), check=False)
    minv = np.linalg.inv(m)
    minus = Flag(theta, _attracting_frame(minv, theta, log_eigen_moduli(minv)[0]), check=False)
    return LoxodromicData(g, jordan_projection(m), plus, minus, gaps)


class Period(float):
    """Period value carrying diagnostics.

    ``loxodromic`` is False on the zero branch; ``discrepancy`` is
    ``|sigma(g, g+) - phi(lambda(g))|`` when computed.
    """

    def __new__(cls, value, loxodromic=True, discrepancy=None, data=None):
        obj = super().__new__(cls, value)
        obj.loxodromic = loxodromic
        obj.discrepancy = discrepancy
        obj.data = data
        return obj


def period(sys, g, gap_tol=DEFAULT_GAP_TOL):
    data = loxodromic_data(g, sys.theta, gap_tol)
    if data is None:
        return Period(0.0, loxodromic=False)
    value = functional_eval(sys.phi, data.jordan)
    check = sigma(sys, g, data.attracting)
    return Period(value, loxodromic=True, discrepancy=abs(check - value), data=data)


def random_flag(theta, rng):
    """Haar-random flag (QR of a Gaussian matrix)."""
    d = theta.dimension
    return Flag(theta, orthonormal_basis(rng.standard_normal((d, d))), check=False)

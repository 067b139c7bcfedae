"""Batched spectral helpers for stacks of square matrices.

All functions take arrays of shape ``(N, d, d)`` and work row-wise.  The
2x2 case uses closed forms; it is the hot path during enumeration.
"""

import numpy as np

from .errors import NumericalBreakdown, SingularMatrix


# det is trusted to ~1e-6 relative accuracy below this log condition number
DET_RELIABLE_LOG_COND = float(np.log(1e-6 / np.finfo(float).eps))


def as_stack(mats):
    mats = np.asarray(mats, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    return mats


def log_singular_values(mats):
    """Log singular values, sorted non-increasing, shape ``(N, d)``."""
    mats = as_stack(mats)
    d = mats.shape[-1]
    if d == 2:
        frob = np.einsum("nij,nij->n", mats, mats)
        det = np.abs(mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0])
        disc = np.sqrt(np.maximum(frob * frob - 4.0 * det * det, 0.0))
        s1sq = 0.5 * (frob + disc)
        log1 = 0.5 * np.log(s1sq)
        with np.errstate(divide="ignore"):
            log2 = np.log(det) - log1
        return np.stack([log1, log2], axis=1)
    try:
        sv = np.linalg.svd(mats, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"SVD failed to converge: {exc}") from exc
    with np.errstate(divide="ignore"):
        return np.log(sv)


def log_eigen_moduli(mats):
    """Log moduli of the (complex) eigenvalues, sorted non-increasing."""
    mats = as_stack(mats)
    d = mats.shape[-1]
    if d == 2:
        tr = mats[:, 0, 0] + mats[:, 1, 1]
        det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
        disc = tr * tr - 4.0 * det
        real = disc > 0
        out = np.empty((len(mats), 2))
        # real spectrum: |lambda_1| from the larger root, |lambda_2| = |det|/|lambda_1|
        root = 0.5 * (np.abs(tr) + np.sqrt(np.where(real, disc, 0.0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            top = np.where(real, np.log(root), 0.5 * np.log(np.abs(det)))
            out[:, 0] = top
            out[:, 1] = np.log(np.abs(det)) - top
        return out
    try:
        ev = np.linalg.eigvals(mats)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"eigenvalue solver failed: {exc}") from exc
    with np.errstate(divide="ignore"):
        mods = np.log(np.abs(ev))
    return -np.sort(-mods, axis=1)


def centered_log_moduli(mats):
    """Trace-zero log eigenvalue moduli of (near) unimodular matrices.

    In SL(2) the determinant of a large product is the least accurate
    quantity around, so matrices are renormalized and then treated as
    having ``det = +-1`` exactly: ``|lambda_1| = (|tr| + sqrt(tr^2 - 4 det)) / 2``
    depends only on the trace.  Discriminants within rounding of zero
    are parabolic and give a zero gap.
    """
    mats = as_stack(mats)
    if mats.shape[-1] != 2:
        mods = log_eigen_moduli(mats)
        return mods - mods.mean(axis=1, keepdims=True)
    mats = renormalize_stack(mats)
    tr = mats[:, 0, 0] + mats[:, 1, 1]
    sign = np.where(mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0] < 0, -1.0, 1.0)
    disc = np.maximum(tr * tr - 4.0 * sign, 0.0)
    top = np.log(np.maximum(0.5 * (np.abs(tr) + np.sqrt(disc)), 1.0))
    # the trace is accurate to about eps ||g||, so tr^2 - 4 to eps |tr| ||g||;
    # below that the element is parabolic
    sigma = np.exp(log_singular_values(mats)[:, 0])
    floor = 64.0 * np.finfo(float).eps * sigma * np.maximum(np.abs(tr), 2.0)
    top = np.where(disc <= floor, 0.0, top)
    return np.stack([top, -top], axis=1)


def renormalize_stack(mats):
    """Scale every matrix by ``|det|^(-1/d)``.

    The computed determinant has relative error about ``eps * cond``, so
    rows too ill-conditioned for it to be meaningful are left unscaled;
    products of unimodular generators are unimodular up to rounding anyway.
    """
    mats = as_stack(mats)
    d = mats.shape[-1]
    det = np.abs(np.linalg.det(mats))
    log_sv = log_singular_values(mats)
    reliable = (log_sv[:, 0] - log_sv[:, -1]) < DET_RELIABLE_LOG_COND
    if np.any(reliable & (det < 1e-300)):
        raise SingularMatrix("determinant below 1e-300")
    scale = np.where(reliable, np.where(det > 0, det, 1.0) ** (-1.0 / d), 1.0)
    return mats * scale[:, None, None]


def orthonormal_basis(vectors):
    """QR-orthonormalize the columns of a ``d x k`` matrix, keeping the
    orientation of the span (the sign of R's diagonal is made positive)."""
    q, r = np.linalg.qr(vectors)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def centered_log_sv(log_sv):
    """Trace-zero normalization ``log_sv - mean`` of unimodular stacks.

    For rows too ill-conditioned for the small singular values to be
    accurate the mean is not trustworthy; such rows are taken as exactly
    unimodular (in SL(2) the second value is then ``-log sigma_1``).
    """
    log_sv = np.asarray(log_sv, dtype=float)
    with np.errstate(invalid="ignore"):
        spread = log_sv[:, 0] - log_sv[:, -1]
        reliable = spread < DET_RELIABLE_LOG_COND
        centered = log_sv - log_sv.mean(axis=1, keepdims=True)
    out = np.where(reliable[:, None], centered, log_sv)
    if log_sv.shape[1] == 2:
        out[~reliable, 1] = -out[~reliable, 0]
    return out


def weighted_rows(values, weights):
    """``values @ weights`` touching only columns with non-zero weight, so
    that non-finite entries in unused columns do not leak through."""
    weights = np.asarray(weights, dtype=float)
    nz = np.flatnonzero(weights)
    return values[..., nz] @ weights[nz]


SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


def eigen_gap_noise(log_sv):
    """Noise floor for log eigenvalue-modulus gaps.

    Eigenvalues of a (near) Jordan block move by about ``sqrt(eps) * ||g||``
    under rounding, so a parabolic element with large entries can show a
    spurious gap of that size.  ``log_sv`` is ``(N, d)`` or ``(d,)``.
    """
    log_sv = np.asarray(log_sv, dtype=float)
    spread = log_sv[..., 0] - log_sv[..., -1]
    return 16.0 * SQRT_EPS * np.exp(0.5 * spread)

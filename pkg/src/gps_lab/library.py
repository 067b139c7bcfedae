"""Named example groups.

Entries are written as call expressions, e.g. ``cyclic-diag(1)``,
``theta-group``, ``schottky(1.5)``, ``sym2(theta-group)`` or
``diag-anosov(1, 0.8)``.  Arguments accept fractions (``1/2``).
"""

import math
import re

import numpy as np

from .group import GeneratorSet, parse_number


def cyclic_diag(t=1.0):
    """``<diag(e^t, e^-t)>``."""
    return GeneratorSet([np.diag([math.exp(t), math.exp(-t)])], labels=["a"])


def theta_group():
    """Level-2 congruence group generated by two unipotents."""
    return GeneratorSet([[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [2.0, 1.0]]], labels=["A", "B"])


def _rotation2(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def schottky(t=1.5):
    """Two hyperbolics with perpendicular axes through the base point.

    ``a = diag(e^t, e^-t)`` has translation length ``2t``; ``b`` is ``a``
    conjugated by the rotation of the line space by pi/4, which turns the
    axis through 90 degrees.  Ping-pong holds for ``t >= 0.89``
    (``tanh t >= 1/sqrt 2``).
    """
    a = np.diag([math.exp(t), math.exp(-t)])
    r = _rotation2(math.pi / 4)
    return GeneratorSet([a, r @ a @ r.T], labels=["a", "b"])


def sym2_matrix(g):
    """Symmetric square of a 2x2 matrix in the orthonormal basis
    ``(e1^2, sqrt2 e1 e2, e2^2)``; orthogonal matrices map to orthogonal
    ones, so singular values are ``s1^2, 1, s2^2``."""
    (a, b), (c, d) = np.asarray(g, dtype=float)
    r = math.sqrt(2.0)
    return np.array(
        [
            [a * a, r * a * b, b * b],
            [r * a * c, a * d + b * c, r * b * d],
            [c * c, r * c * d, d * d],
        ]
    )


def sym2(gens):
    if gens.dimension != 2:
        raise ValueError("the symmetric square is defined here for SL(2) generators")
    return GeneratorSet([sym2_matrix(g) for g in gens.generators], labels=gens.labels,
                        presentation_hint=gens.presentation_hint)


def _rotation3(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * k @ k


# fixed generic rotation so that the two Cartan subspaces are in general position
_ANOSOV_ROTATION = _rotation3([1.0, 2.0, 3.0], 1.1)


def diag_anosov(a=1.0, b=0.8):
    """``<diag(e^a, 1, e^-a), R diag(e^b, 1, e^-b) R^T>`` in SL(3)."""
    g1 = np.diag([math.exp(a), 1.0, math.exp(-a)])
    g2 = _ANOSOV_ROTATION @ np.diag([math.exp(b), 1.0, math.exp(-b)]) @ _ANOSOV_ROTATION.T
    return GeneratorSet([g1, g2], labels=["a", "b"], presentation_hint="unknown")


LIBRARY = {
    "cyclic-diag": (cyclic_diag, 1),
    "theta-group": (theta_group, 0),
    "schottky": (schottky, 1),
    "diag-anosov": (diag_anosov, 2),
}


def names():
    return sorted(LIBRARY) + ["sym2"]


def _split_args(text):
    """Split a comma-separated argument list at depth zero."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def load(name):
    """Build the generator set named by a library expression."""
    m = re.fullmatch(r"\s*([a-z0-9-]+)\s*(?:\((.*)\))?\s*", name)
    if not m:
        raise KeyError(f"malformed library entry {name!r}")
    key, argtext = m.group(1), m.group(2)
    args = _split_args(argtext) if argtext else []
    if key == "sym2":
        if len(args) != 1:
            raise KeyError("sym2 takes one library entry as argument")
        return sym2(load(args[0]))
    if key not in LIBRARY:
        raise KeyError(f"unknown library entry {key!r}; known: {', '.join(names())}")
    fn, max_args = LIBRARY[key]
    if len(args) > max_args:
        raise KeyError(f"{key} takes at most {max_args} arguments")
    return fn(*(float(parse_number(a)) for a in args))

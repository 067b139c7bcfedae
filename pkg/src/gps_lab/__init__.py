"""Numerical laboratory for Gromov-Patterson-Sullivan systems of discrete
subgroups of SL(d, R): cocycles, Gromov products, periods, critical
exponents, Patterson-Sullivan measures and conjugacy-class counting."""

from .cartan import (
    Functional,
    ThetaSet,
    WeylVector,
    alpha,
    cartan_projection,
    jordan_projection,
    omega,
    sum_omega,
    u_theta,
    v_theta,
)
from .errors import GpsLabError
from .flags import Flag, GpsSystem, busemann, gromov_product, period
from .group import GeneratorSet, GroupElement, evaluate_word, word_ball

__version__ = "0.1.0"

__all__ = [
    "Flag",
    "Functional",
    "GeneratorSet",
    "GpsLabError",
    "GpsSystem",
    "GroupElement",
    "ThetaSet",
    "WeylVector",
    "alpha",
    "busemann",
    "cartan_projection",
    "evaluate_word",
    "gromov_product",
    "jordan_projection",
    "omega",
    "period",
    "sum_omega",
    "u_theta",
    "v_theta",
    "word_ball",
]

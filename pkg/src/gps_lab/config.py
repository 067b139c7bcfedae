"""Run configurations: INI-style text with typed sections.

Example::

    [group]
    library = theta-group          # or: generators = 1 2; 0 1 | 1 0; 2 1

    [system]
    theta = 1
    phi = alpha_1

    [exponent]
    depth = 14

    [bands]
    delta_hat = 0.9, 1.1

Matrices are written row by row (rows separated by ``;``, generators by
``|``); entries accept rationals such as ``1/2``.  Since ``;`` separates
rows, inline comments start with ``#`` only.  Every problem is
reported as ``ConfigInvalid`` carrying the line and field.
"""

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import library
from .cartan import ThetaSet, functional_from_spec
from .errors import ConfigInvalid, IndexMismatch
from .group import GeneratorSet, parse_number

SUBCOMMANDS = ("check-gps", "exponent", "count", "spectrum", "psmeasure", "equidistribute")


def _opt(kind, default=None, positive=False):
    return {"type": kind, "default": default, "positive": positive}


SCHEMA = {
    "group": {
        "library": _opt("str"),
        "generators": _opt("str"),
        "labels": _opt("list"),
        "presentation": _opt("str", "free"),
    },
    "system": {
        "theta": _opt("intlist"),
        "phi": _opt("str", "sum_omega"),
    },
    "run": {
        "seed": _opt("int", 0),
        "threads": _opt("int", None, positive=True),
        "out": _opt("str", "gps-lab-out"),
        "gap_tol": _opt("float", 1e-6, positive=True),
    },
    "check-gps": {
        "trials": _opt("int", 1000, positive=True),
        "max_length": _opt("int", 6, positive=True),
        "period_words": _opt("int", 200, positive=True),
        "period_max_length": _opt("int", 8, positive=True),
        "pairing_floor": _opt("float", 1e-3, positive=True),
    },
    "exponent": {
        "depth": _opt("int", 12, positive=True),
        "method": _opt("str", "regression"),
        "radius": _opt("float", None, positive=True),
        "parabolics": _opt("list", []),
        "n_max": _opt("int", 10000, positive=True),
    },
    "count": {
        "R_max": _opt("float", 10.0, positive=True),
        "mode": _opt("str", "magnitude"),
        "word_cap": _opt("int", None, positive=True),
        "radius": _opt("float", None, positive=True),
        "grid_step": _opt("float", 0.1, positive=True),
        "delta": _opt("float", None),
        "delta_depth": _opt("int", 12, positive=True),
        "heuristic": _opt("bool", False),
    },
    "spectrum": {
        "R_max": _opt("float", 10.0, positive=True),
        "mode": _opt("str", "magnitude"),
        "word_cap": _opt("int", None, positive=True),
        "resolution": _opt("float", 1e-3, positive=True),
        "heuristic": _opt("bool", False),
    },
    "psmeasure": {
        "depth": _opt("int", None, positive=True),
        "radius": _opt("float", None, positive=True),
        "s": _opt("float", 1.05, positive=True),
        "side": _opt("str", "forward"),
        "bins": _opt("int", 32, positive=True),
        "conformality_bins": _opt("int", 16, positive=True),
        "beta": _opt("float", 1.0),
        "test_words": _opt("list", []),
        "mass_floor": _opt("float", 0.01, positive=True),
        "write_atoms": _opt("bool", False),
    },
    "equidistribute": {
        "T": _opt("float", 9.0, positive=True),
        "delta": _opt("float", 1.0, positive=True),
        "pairing_floor": _opt("float", 0.3, positive=True),
        "radius": _opt("float", None, positive=True),
        "bins": _opt("int", 32, positive=True),
        "joint_bins": _opt("int", 8, positive=True),
        "s": _opt("float", 1.05, positive=True),
        "mu_depth": _opt("int", None, positive=True),
        "mu_radius": _opt("float", 13.0, positive=True),
    },
}

# metric names each subcommand reports; bands may refer to any of them
METRICS = {
    "check-gps": ("max_gps_residual", "max_cocycle_residual", "max_normalization_residual",
                  "max_period_residual", "max_cross_ratio_residual"),
    "exponent": ("delta_hat", "delta_parabolic_max", "dop_margin_min"),
    "count": ("classes", "certificate", "N_at_R_max", "ratio_at_R_max", "systole", "mass_at_R_max",
              "mass_sandwich"),
    "spectrum": ("sample_size", "has_grid", "grid_step"),
    "psmeasure": ("atoms", "tv_uniform", "conformality_residual"),
    "equidistribute": ("pair_atoms", "pair_total", "tv_minus", "tv_plus", "joint_discrepancy",
                       "relative_joint_discrepancy", "normalization_fit", "tv_minus_mu", "tv_plus_mu"),
}
ALL_METRICS = {m for names in METRICS.values() for m in names}


@dataclass
class RunConfig:
    gens: GeneratorSet
    group_spec: str
    theta: ThetaSet
    phi_spec: object
    sections: Dict[str, Dict[str, object]]
    bands: Dict[str, Tuple[float, float]]
    text: str = ""
    path: Optional[str] = None
    lines: Dict[Tuple[str, str], int] = field(default_factory=dict, repr=False)

    @property
    def phi(self):
        return functional_from_spec(self.phi_spec, self.theta)

    def section(self, name):
        return self.sections[name]

    @property
    def seed(self):
        return self.sections["run"]["seed"]

    def threads(self, override=None):
        """CLI flag, then config, then ``GPS_LAB_THREADS``, then hardware."""
        if override is not None:
            return max(1, int(override))
        if self.sections["run"]["threads"] is not None:
            return self.sections["run"]["threads"]
        env = os.environ.get("GPS_LAB_THREADS")
        if env:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigInvalid(f"GPS_LAB_THREADS={env!r} is not an integer", field="GPS_LAB_THREADS") from exc
        return os.cpu_count() or 1

    def echo(self):
        """Parsed values in JSON-friendly form."""
        return {
            "group": self.group_spec,
            "theta": list(self.theta.indices),
            "phi": self.phi_spec if isinstance(self.phi_spec, str) else [list(p) for p in self.phi_spec],
            "sections": {k: dict(v) for k, v in self.sections.items()},
            "bands": {k: list(v) for k, v in self.bands.items()},
        }


def _line_index(text):
    """Map ``(section, key)`` to the 1-based line where it is set."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).strip())] = i
    return out


def _convert(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(parse_number(raw))
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "list":
            return [x.strip() for x in raw.split(",") if x.strip()]
        if kind == "intlist":
            return [int(x) for x in re.split(r"[,\s]+", raw) if x]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(f"cannot read {raw!r} as {kind}", **where) from exc
    raise AssertionError(kind)


def parse_matrices(text):
    """``"1 2; 0 1 | 1 0; 2 1"`` -> list of square arrays."""
    mats = []
    for block in text.split("|"):
        rows = [r.split() for r in block.split(";") if r.strip()]
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValueError(f"generator {block.strip()!r} is not a square matrix")
        mats.append(np.array([[parse_number(x) for x in r] for r in rows], dtype=float))
    return mats


def _parse_band(raw, where):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigInvalid("a band is written 'lo, hi' (either side may be empty)", **where)

    def side(p, default):
        if p == "":
            return default
        try:
            return float(parse_number(p))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"band bound {p!r} is not a number", **where) from exc

    lo, hi = side(parts[0], -math.inf), side(parts[1], math.inf)
    if lo > hi:
        raise ConfigInvalid(f"empty band [{lo}, {hi}]", **where)
    return lo, hi


def _parse_phi(raw, where):
    raw = raw.strip()
    if re.fullmatch(r"[\w]+", raw):
        return raw
    pairs = re.findall(r"\(\s*(-?\d+)\s*,\s*([^)]+?)\s*\)", raw)
    if not pairs:
        raise ConfigInvalid(f"phi {raw!r} is neither a name nor a list of (k, c) pairs", **where)
    try:
        return [(int(k), float(parse_number(c))) for k, c in pairs]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(f"bad coefficient in phi {raw!r}", **where) from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, path=str(path))


def parse_config(text, path=None):
    lines = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigInvalid(f"malformed configuration: {exc.message if hasattr(exc, 'message') else exc}",
                            line=line) from exc

    def where(section, key=None):
        return {"field": f"{section}.{key}" if key else section, "line": lines.get((section, key))}

    for section in parser.sections():
        if section not in SCHEMA and section != "bands":
            raise ConfigInvalid(f"unknown section [{section}]", **where(section))

    sections = {}
    for name, keys in SCHEMA.items():
        values = {}
        present = parser[name] if parser.has_section(name) else {}
        for key in present:
            if key not in keys:
                raise ConfigInvalid(f"unknown key '{key}' in [{name}]", **where(name, key))
        for key, opt in keys.items():
            if key in present:
                val = _convert(opt["type"], present[key], where(name, key))
                if opt["positive"] and val is not None and val <= 0:
                    raise ConfigInvalid(f"{key} must be positive", **where(name, key))
            else:
                val = opt["default"]
            values[key] = val
        sections[name] = values

    gens, spec = _build_group(sections["group"], where)
    theta_idx = sections["system"]["theta"]
    if theta_idx is None:
        theta_idx = list(range(1, gens.dimension))
    try:
        theta = ThetaSet(gens.dimension, tuple(theta_idx))
    except ValueError as exc:
        raise ConfigInvalid(str(exc), **where("system", "theta")) from exc
    phi_spec = _parse_phi(sections["system"]["phi"], where("system", "phi"))
    try:
        functional_from_spec(phi_spec, theta)
    except (ValueError, IndexMismatch) as exc:
        raise ConfigInvalid(str(exc), **where("system", "phi")) from exc

    _check_choices(sections, where)

    bands = {}
    if parser.has_section("bands"):
        for key, raw in parser["bands"].items():
            if key not in ALL_METRICS:
                raise ConfigInvalid(f"unknown metric '{key}'; known: {', '.join(sorted(ALL_METRICS))}",
                                    **where("bands", key))
            bands[key] = _parse_band(raw, where("bands", key))

    return RunConfig(gens, spec, theta, phi_spec, sections, bands, text, path, lines)


def _build_group(opts, where):
    lib, gen_text = opts["library"], opts["generators"]
    if (lib is None) == (gen_text is None):
        raise ConfigInvalid("give exactly one of 'library' or 'generators'", **where("group"))
    if lib is not None:
        try:
            return library.load(lib), lib
        except (KeyError, ValueError) as exc:
            raise ConfigInvalid(str(exc).strip("'\""), **where("group", "library")) from exc
    try:
        mats = parse_matrices(gen_text)
        gens = GeneratorSet(mats, labels=opts["labels"], presentation_hint=opts["presentation"])
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(str(exc), **where("group", "generators")) from exc
    except Exception as exc:  # SingularMatrix and friends
        raise ConfigInvalid(f"invalid generators: {exc}", **where("group", "generators")) from exc
    return gens, gen_text


def _check_choices(sections, where):
    choices = {
        ("exponent", "method"): ("regression", "series_knee"),
        ("count", "mode"): ("depth", "magnitude"),
        ("spectrum", "mode"): ("depth", "magnitude"),
        ("psmeasure", "side"): ("forward", "inverse"),
    }
    for (sec, key), allowed in choices.items():
        if sections[sec][key] not in allowed:
            raise ConfigInvalid(f"{key} must be one of {', '.join(allowed)}", **where(sec, key))
    for sec in ("count", "spectrum"):
        if sections[sec]["mode"] == "depth" and sections[sec]["word_cap"] is None:
            raise ConfigInvalid("depth mode needs word_cap", **where(sec, "word_cap"))
    ps = sections["psmeasure"]
    if ps["depth"] is not None and ps["radius"] is not None:
        raise ConfigInvalid("give at most one of depth and radius", **where("psmeasure", "radius"))

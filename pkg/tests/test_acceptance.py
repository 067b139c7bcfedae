"""Acceptance criteria, one test per criterion.

Every test records a single verdict line (criterion number, PASS/FAIL, the
measured values and the runtime); the lines are printed together at the end
of the pytest run.  Tolerances are the acceptance tolerances, unmodified.
Run on its own with ``python3 -m pytest tests/test_acceptance.py -v``.
"""
import math
import time

import numpy as np
import pytest

from gps_lab.cartan import ThetaSet, functional_from_spec
from gps_lab.checks import gps_property_suite, period_property_suite, random_generators
from gps_lab.counting import (
    arithmeticity_gap,
    counting_function,
    critical_exponent,
    depth_shells,
    dop_check,
    enumerate_weak_classes,
    magnitude_shells,
    mass_mR,
    spectrum_sample,
    systole,
)
from gps_lab.flags import GpsSystem
from gps_lab.group import evaluate_word
from gps_lab.psmeasure import (
    INVERSE,
    BinningScheme,
    build_mu_s,
    conformality_residual,
    equidistribution_distance,
    fixedpoint_pair_measure,
)

from conftest import make_system

VERDICTS = {}


def record(n, ok, text):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}"
    VERDICTS[n] = line
    print(line)
    return ok


def symmetric_thetas(d):
    out = []
    for mask in range(1, 2 ** (d - 1)):
        ks = tuple(k for k in range(1, d) if mask >> (k - 1) & 1)
        if all(d - k in ks for k in ks):
            out.append(ThetaSet(d, ks))
    return out


def ambient_systems():
    """Random two-generator groups in SL(2), SL(3), SL(4) under every symmetric theta."""
    for d in (2, 3, 4):
        gens = random_generators(d, 2, np.random.default_rng(100 + d))
        for theta in symmetric_thetas(d):
            yield GpsSystem(gens, theta, functional_from_spec("sum_omega", theta))


@pytest.fixture(scope="module")
def gps_corpus():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    reports = [(s, gps_property_suite(s, 1000, rng, max_length=6, pairing_floor=1e-3)) for s in ambient_systems()]
    return reports, time.perf_counter() - t0


@pytest.fixture(scope="module")
def theta():
    return make_system("theta-group")


@pytest.fixture(scope="module")
def theta_classes(theta):
    return enumerate_weak_classes(theta, 10, mode="magnitude")


@pytest.fixture(scope="module")
def theta_delta(theta):
    return critical_exponent(theta, 14)


def test_c01_gps_identity(gps_corpus):
    reports, elapsed = gps_corpus
    worst = max(r.max_gps for _, r in reports)
    trials = sum(len(r.trials) for _, r in reports)
    ok = worst < 1e-9 and elapsed < 30
    record(1, ok, f"max GPS residual {worst:.2e} (< 1e-9) over {trials} trials in {len(reports)} (d, theta) "
                  f"systems; {elapsed:.1f} s (< 30 s)")
    assert ok


def test_c02_cocycle_and_normalization(gps_corpus):
    reports, _ = gps_corpus
    coc = max(r.max_cocycle for _, r in reports)
    norm = max(r.max_normalization for _, r in reports)
    ok = coc < 1e-8 and norm < 1e-8
    record(2, ok, f"max cocycle residual {coc:.2e}, max normalization residual {norm:.2e} (< 1e-8)")
    assert ok


def test_c03_period_and_cross_ratio():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    per = cr = 0.0
    words = 0
    for s in ambient_systems():
        rep = period_property_suite(s, 200, rng, max_length=8)
        per, cr = max(per, rep.max_period), max(cr, rep.max_cross_ratio)
        words += len(rep.trials)
    ok = per < 1e-8 and cr < 1e-8
    record(3, ok, f"max period residual {per:.2e}, max cross-ratio residual {cr:.2e} (< 1e-8) on {words} "
                  f"loxodromic words; {time.perf_counter() - t0:.1f} s")
    assert ok


def test_c04_cyclic_counting_exact():
    t0 = time.perf_counter()
    s = make_system("cyclic-diag(1)")
    classes = enumerate_weak_classes(s, 20, word_cap=20)
    grid = np.arange(0.25, 20.0001, 0.25)
    counts = counting_function(classes, 1.0, grid).counts
    elapsed = time.perf_counter() - t0
    mismatches = sum(int(n) != 2 * math.floor(R / 2) for R, n in zip(grid, counts))
    ok = mismatches == 0 and elapsed < 1.0
    record(4, ok, f"N(R) = 2 floor(R/2) on {len(grid)} grid points, {mismatches} mismatches; "
                  f"{elapsed:.3f} s (< 1 s)")
    assert ok


def test_c05_theta_exponents_and_counting(theta, theta_classes, theta_delta):
    t0 = time.perf_counter()
    delta = theta_delta.value
    gens = theta.gens
    rows = dop_check(theta, {"A": evaluate_word(gens, (1,)), "B": evaluate_word(gens, (2,))}, delta=theta_delta)
    delta_p = max(r.delta_parabolic for r in rows)
    margin = min(r.margin for r in rows)
    rep = counting_function(theta_classes, delta, [10.0])
    ratio, complete = rep.ratio_at(10), bool(rep.complete[0])
    elapsed = time.perf_counter() - t0
    ok = (0.9 <= delta <= 1.1 and 0.45 <= delta_p <= 0.55 and margin >= 0.3
          and complete and 0.7 <= ratio <= 1.3)
    record(5, ok, f"delta_hat {delta:.4f} in [0.9, 1.1]; delta_P {delta_p:.4f} in [0.45, 0.55]; "
                  f"DOP margin {margin:.4f} (>= 0.3); ratio(10) {ratio:.4f} in [0.7, 1.3], "
                  f"certified {complete}; {elapsed:.1f} s")
    assert ok


def test_c06_representation_transfer():
    t0 = time.perf_counter()
    base = make_system("schottky(1.5)")
    image = make_system("sym2(schottky(3/2))", (1, 2), "omega_1")
    d2 = critical_exponent(base, 12).value
    d3 = critical_exponent(image, 12).value
    elapsed = time.perf_counter() - t0
    ok = abs(d2 - d3) <= 0.02 and elapsed <= 180
    record(6, ok, f"delta_hat SL(2) alpha_1 {d2:.5f} vs Sym2 omega_1 {d3:.5f}, |diff| {abs(d2 - d3):.2e} "
                  f"(<= 0.02); {elapsed:.1f} s (<= 180 s)")
    assert ok


def _ps_stats(sys, depth):
    mu = build_mu_s(sys, list(depth_shells(sys, depth)), 1.05)
    hist = BinningScheme.circle(32).histogram(mu)
    tv = 0.5 * float(np.abs(hist - 1.0 / 32).sum())
    tests = [evaluate_word(sys.gens, (x,)) for x in sys.gens.letters]
    conf = conformality_residual(sys, mu, tests, 1.0, BinningScheme.circle(16))
    return tv, conf


def test_c07_patterson_sullivan(theta):
    t0 = time.perf_counter()
    tv10, conf10 = _ps_stats(theta, 10)
    tv12, conf12 = _ps_stats(theta, 12)
    ok = tv12 < 0.15 and conf12 < 0.25 and conf12 < conf10
    record(7, ok, f"depth 12: TV to uniform {tv12:.4f} (< 0.15), conformality {conf12:.4f} (< 0.25); "
                  f"depth 10: conformality {conf10:.4f} (decrease {conf12 < conf10}); "
                  f"{time.perf_counter() - t0:.1f} s")
    assert ok


def test_c08_equidistribution(theta):
    t0 = time.perf_counter()
    shells = list(magnitude_shells(theta, 13))
    mu = build_mu_s(theta, shells, 1.05)
    mu_bar = build_mu_s(theta, shells, 1.05, INVERSE)
    bins, jbins = BinningScheme.circle(32), BinningScheme.circle(8)
    reps = {}
    for T in (8.0, 9.0):
        pm = fixedpoint_pair_measure(theta, T, 1.0, pairing_floor=0.3)
        assert pm.complete is True
        reps[T] = equidistribution_distance(pm, mu_bar, mu, theta, 1.0, bins, joint_bins=jbins)
    tv = {T: max(r.tv_minus, r.tv_plus) for T, r in reps.items()}
    joint = reps[9.0].relative_joint_discrepancy
    ok = tv[9.0] < 0.2 and joint < 0.3 and tv[9.0] <= tv[8.0] + 0.02
    record(8, ok, f"T = 9 (certified): marginal TV {reps[9.0].tv_minus:.4f} / {reps[9.0].tv_plus:.4f} (< 0.2), "
                  f"joint discrepancy after scale fit {joint:.4f} (< 0.3); TV(8) {tv[8.0]:.4f} -> "
                  f"TV(9) {tv[9.0]:.4f} (+0.02 band); {time.perf_counter() - t0:.1f} s")
    assert ok


def test_c09_spectrum(theta_classes):
    planted = arithmeticity_gap([2, 4, 6, 8], 1e-3)
    theta_grid = arithmeticity_gap(spectrum_sample(theta_classes), 1e-3)
    ok = planted == 2 and theta_grid is None
    record(9, ok, f"planted {{2,4,6,8}} -> {planted} (expect 2); theta spectrum to R = 10 -> {theta_grid} "
                  f"(expect no grid)")
    assert ok


def test_c10_mass_formula(cyclic_sys, theta_classes):
    cyclic = mass_mR(enumerate_weak_classes(cyclic_sys, 7, word_cap=7), 7)
    low = systole(theta_classes).value
    grid = np.arange(0.1, theta_classes.certificate + 1e-9, 0.1)
    grid = grid[grid <= 10 + 1e-9]
    counts = counting_function(theta_classes, 1.0, grid).counts
    checked = bad = 0
    for R, n in zip(grid, counts):
        if n == 0:
            continue
        checked += 1
        r = mass_mR(theta_classes, R) / n
        bad += not (low - 1e-9 <= r <= R + 1e-9)
    ok = cyclic == 12 and bad == 0 and checked > 0
    record(10, ok, f"cyclic mass_mR(7) = {cyclic} (expect 12); theta mass/N in [systole {low:.4f}, R] at "
                   f"{checked} certified R values, {bad} violations")
    assert ok


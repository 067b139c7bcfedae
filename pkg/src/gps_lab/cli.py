"""Command line front end: ``gps-lab <subcommand> --config <path>``.

Every run writes CSV artifacts and a ``manifest.json`` (config echo, seed,
thread count, library versions, wall time, metrics and band verdicts) into
the output directory.  Exit status: 0 when every configured band passes,
1 when a band fails, 2 on invalid configuration or a failed run, 3 when a
numerical breakdown stopped the run after some stages completed.
"""

import argparse
import csv
import json
import math
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .checks import gps_property_suite, period_property_suite
from .config import METRICS, SUBCOMMANDS, load_config
from .counting import (
    arithmeticity_gap,
    critical_exponent,
    counting_function,
    depth_shells,
    dop_check,
    enumerate_weak_classes,
    magnitude_shells,
    mass_mR,
    spectrum_sample,
    systole,
)
from .errors import ConfigInvalid, EmptySpectrum, GpsLabError, InsufficientData, NumericalBreakdown
from .flags import GpsSystem
from .group import evaluate_word
from .psmeasure import (
    INVERSE,
    BinningScheme,
    build_mu_s,
    conformality_table,
    equidistribution_distance,
    fixedpoint_pair_measure,
)

EXIT_OK, EXIT_BANDS, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2, 3


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


class Run:
    """Output directory, artifact bookkeeping and the shared system."""

    def __init__(self, config, out, seed, threads):
        self.config = config
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.threads = threads
        self.rng = np.random.default_rng(seed)
        self.sys = GpsSystem(config.gens, config.theta, config.phi)
        self.artifacts = []
        self.notes = []
        self.gap_tol = config.sections["run"]["gap_tol"]

    def opts(self, section):
        return self.config.sections[section]

    def write_csv(self, name, header, rows):
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(x) for x in row])
        self.artifacts.append(name)
        return path

    def label(self, word):
        return self.sys.gens.word_label(word)

    def words(self, texts):
        return {t: evaluate_word(self.sys.gens, self.sys.gens.parse_word(t)) for t in texts}


# ---------------------------------------------------------------------------
# subcommands; each returns a metrics dict


def run_check_gps(run):
    o = run.opts("check-gps")
    metrics = dict.fromkeys(METRICS["check-gps"], math.nan)
    rep = gps_property_suite(run.sys, o["trials"], run.rng, o["max_length"], o["pairing_floor"])
    run.write_csv("gps_trials.csv", ["trial", "word", "gps_residual", "cocycle_residual", "normalization_residual"],
                  [(i, run.label(t.word), t.gps, t.cocycle, t.normalization) for i, t in enumerate(rep.trials)])
    metrics.update(max_gps_residual=rep.max_gps, max_cocycle_residual=rep.max_cocycle,
                   max_normalization_residual=rep.max_normalization)
    try:
        per = period_property_suite(run.sys, o["period_words"], run.rng, o["period_max_length"], o["pairing_floor"])
    except GpsLabError as exc:
        run.notes.append(f"period suite skipped: {exc}")
        return metrics
    run.write_csv("period_trials.csv", ["trial", "word", "period", "period_bar", "period_residual",
                                        "cross_ratio_residual"],
                  [(i, run.label(t.word), t.period, t.period_bar, t.period_residual, t.cross_ratio_residual)
                   for i, t in enumerate(per.trials)])
    metrics.update(max_period_residual=per.max_period, max_cross_ratio_residual=per.max_cross_ratio)
    return metrics


def run_exponent(run):
    o = run.opts("exponent")
    metrics = dict.fromkeys(METRICS["exponent"], math.nan)
    est = critical_exponent(run.sys, o["depth"], o["method"], radius=o["radius"])
    run.write_csv("exponent.csv", ["method", "value", "window_lo", "window_hi", "residual"],
                  [(est.method, est.value, est.window[0], est.window[1], est.residual)])
    metrics["delta_hat"] = est.value
    if o["parabolics"]:
        rows = dop_check(run.sys, run.words(o["parabolics"]), delta=est, n_max=o["n_max"])
        run.write_csv("dop.csv", ["label", "delta_parabolic", "delta_group", "margin", "holds"],
                      [(r.label, r.delta_parabolic, r.delta_group, r.margin, r.holds) for r in rows])
        metrics["delta_parabolic_max"] = max(r.delta_parabolic for r in rows)
        metrics["dop_margin_min"] = min(r.margin for r in rows)
    return metrics


def _classes(run, o):
    return enumerate_weak_classes(run.sys, o["R_max"], o["word_cap"], mode=o["mode"],
                                  radius=o.get("radius"), gap_tol=run.gap_tol, threads=run.threads,
                                  heuristic=o["heuristic"])


def _class_rows(run, classes):
    return [(run.label(c.canonical_word), c.period, c.period_bar, c.primitive_period, c.power, c.multiplicity,
             c.min_magnitude) for c in classes]


CLASS_HEADER = ["word", "period", "period_bar", "primitive_period", "power", "multiplicity", "min_magnitude"]


def run_count(run):
    o = run.opts("count")
    metrics = dict.fromkeys(METRICS["count"], math.nan)
    classes = _classes(run, o)
    run.write_csv("classes.csv", CLASS_HEADER, _class_rows(run, classes))
    metrics.update(classes=len(classes), certificate=classes.certificate)
    delta = o["delta"]
    if delta is None:
        try:
            delta = critical_exponent(run.sys, o["delta_depth"]).value
        except InsufficientData as exc:
            run.notes.append(f"delta not estimated: {exc}")
            delta = math.nan
    n_steps = int(math.floor(o["R_max"] / o["grid_step"] + 1e-9))
    grid = o["grid_step"] * np.arange(1, n_steps + 1)
    if not len(grid) or grid[-1] < o["R_max"] - 1e-9:
        grid = np.append(grid, o["R_max"])
    report = counting_function(classes, delta, grid)
    masses = [mass_mR(classes, R) for R in grid]
    try:
        sys_val = systole(classes).value
    except EmptySpectrum:
        sys_val = math.nan
    run.write_csv("counting.csv", ["R", "N", "ratio", "complete", "mass"],
                  zip(grid, report.counts, report.ratios, report.complete, masses))
    sandwich = all(
        sys_val * n - 1e-9 <= m <= R * n + 1e-9
        for R, n, m, ok in zip(grid, report.counts, masses, report.complete) if ok and n > 0
    )
    metrics.update(N_at_R_max=int(report.counts[-1]), ratio_at_R_max=float(report.ratios[-1]), systole=sys_val,
                   mass_at_R_max=masses[-1], mass_sandwich=float(sandwich))
    return metrics


def run_spectrum(run):
    o = run.opts("spectrum")
    classes = _classes(run, o)
    sample = spectrum_sample(classes)
    run.write_csv("spectrum.csv", ["word", "period", "period_bar", "value"],
                  [(run.label(c.canonical_word), c.period, c.period_bar, v) for c, v in zip(classes, sample)])
    step = arithmeticity_gap(sample, o["resolution"])
    run.write_csv("arithmeticity.csv", ["resolution", "has_grid", "grid_step"],
                  [(o["resolution"], step is not None, math.nan if step is None else step)])
    return {"sample_size": len(sample), "has_grid": float(step is not None),
            "grid_step": math.nan if step is None else step}


def _element_shells(run, depth, radius):
    if radius is not None:
        return list(magnitude_shells(run.sys, radius))
    return list(depth_shells(run.sys, depth))


def _bins(run, count):
    return BinningScheme.for_system(run.sys, count, rng=np.random.default_rng(run.seed))


def _histogram_rows(bins, *columns):
    centers = bins.centers()
    return [(i, *centers[i], *(c[i] for c in columns)) for i in range(bins.count)]


def _center_header(bins):
    return ["angle"] if bins.mode == "circle" else [f"x{j}" for j in range(bins.centers().shape[1])]


def run_psmeasure(run):
    o = run.opts("psmeasure")
    depth = o["depth"] if o["depth"] is not None or o["radius"] is not None else 10
    shells = _element_shells(run, depth, o["radius"])
    mu = build_mu_s(run.sys, shells, o["s"], o["side"], gap_tol=run.gap_tol)
    bins = _bins(run, o["bins"])
    hist = bins.histogram(mu)
    run.write_csv("histogram.csv", ["bin", *_center_header(bins), "mass"], _histogram_rows(bins, hist))
    if o["write_atoms"]:
        coords = mu.coordinates()
        run.write_csv("atoms.csv", [*(f"c{j}" for j in range(coords.shape[1])), "weight"],
                      [(*c, w) for c, w in zip(coords, mu.weights)])
    tv = 0.5 * float(np.abs(hist - 1.0 / bins.count).sum())
    metrics = {"atoms": len(mu), "tv_uniform": tv, "conformality_residual": math.nan}
    texts = o["test_words"] or [run.label((x,)) for x in run.sys.gens.letters]
    tests = run.words(texts)
    cbins = _bins(run, o["conformality_bins"])
    rows = conformality_table(run.sys, mu, list(tests.values()), o["beta"], cbins, o["mass_floor"])
    run.write_csv("conformality.csv", ["element", "bin", "mass", "pushed", "predicted", "relative"],
                  [(texts[r.element], r.bin, r.mass, r.pushed, r.predicted, r.relative) for r in rows])
    metrics["conformality_residual"] = max(r.relative for r in rows)
    return metrics


def run_equidistribute(run):
    o = run.opts("equidistribute")
    pm = fixedpoint_pair_measure(run.sys, o["T"], o["delta"], pairing_floor=o["pairing_floor"],
                                 radius=o["radius"], gap_tol=run.gap_tol)
    if pm.complete is None:
        run.notes.append("pair sample has no completeness certificate for this system")
    if run.sys.dimension == 2:
        pcols = ["minus_angle", "plus_angle"]
        prow = lambda i: (pm.marginal("minus").coordinates()[i, 0], pm.marginal("plus").coordinates()[i, 0])  # noqa: E731
    else:
        n = pm.minus.shape[1] * pm.minus.shape[2]
        pcols = [f"minus_{j}" for j in range(n)] + [f"plus_{j}" for j in range(n)]
        prow = lambda i: (*pm.minus[i].T.ravel(), *pm.plus[i].T.ravel())  # noqa: E731
    run.write_csv("pairs.csv", [*pcols, "weight"], [(*prow(i), pm.weights[i]) for i in range(len(pm))])
    metrics = dict.fromkeys(METRICS["equidistribute"], math.nan)
    metrics.update(pair_atoms=len(pm), pair_total=pm.total)
    shells = _element_shells(run, o["mu_depth"], None if o["mu_depth"] is not None else o["mu_radius"])
    mu = build_mu_s(run.sys, shells, o["s"], gap_tol=run.gap_tol)
    mu_bar = build_mu_s(run.sys, shells, o["s"], INVERSE, gap_tol=run.gap_tol)
    bins = _bins(run, o["bins"])
    jbins = _bins(run, o["joint_bins"])
    rep = equidistribution_distance(pm, mu_bar, mu, run.sys, o["delta"], bins, joint_bins=jbins)
    m = rep.marginals
    run.write_csv("marginals.csv", ["bin", *_center_header(bins), "pair_minus", "pair_plus", "model_minus",
                                    "model_plus"],
                  _histogram_rows(bins, m["pair_minus"], m["pair_plus"], m["model_minus"], m["model_plus"]))
    run.write_csv("joint.csv", ["minus_bin", "plus_bin", "pair", "model", "included"],
                  [(i, j, rep.pair_hist[i, j], rep.model_hist[i, j], rep.joint_mask[i, j])
                   for i in range(jbins.count) for j in range(jbins.count)])
    metrics.update(rep.as_dict())
    return metrics


HANDLERS = {
    "check-gps": run_check_gps,
    "exponent": run_exponent,
    "count": run_count,
    "spectrum": run_spectrum,
    "psmeasure": run_psmeasure,
    "equidistribute": run_equidistribute,
}


# ---------------------------------------------------------------------------


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = __version__
    return {"gps_lab": pkg, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _json_number(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def evaluate_bands(bands, metrics):
    out, ok = {}, True
    for name, (lo, hi) in bands.items():
        if name not in metrics:
            out[name] = {"lo": _json_number(lo), "hi": _json_number(hi), "value": None, "pass": None}
            continue
        value = metrics[name]
        passed = value is not None and math.isfinite(value) and lo <= value <= hi
        ok &= passed
        out[name] = {"lo": _json_number(lo), "hi": _json_number(hi), "value": _json_number(value), "pass": passed}
    return out, ok


def build_parser():
    p = argparse.ArgumentParser(prog="gps-lab", description="GPS-system numerical laboratory")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", help="output directory (default: [run] out)")
    p.add_argument("--threads", type=int, help="worker threads (default: config, GPS_LAB_THREADS, cpu count)")
    p.add_argument("--seed", type=int, help="random seed (default: [run] seed)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        config = load_config(args.config)
        threads = config.threads(args.threads)
    except (ConfigInvalid, OSError) as exc:
        print(f"gps-lab: config-invalid: {exc}", file=sys.stderr)
        return EXIT_ERROR
    seed = config.seed if args.seed is None else args.seed
    out = args.out or config.sections["run"]["out"]
    run = Run(config, out, seed, threads)

    status, error, metrics = "complete", None, {}
    try:
        metrics = HANDLERS[args.subcommand](run)
    except NumericalBreakdown as exc:
        status, error = ("partial" if run.artifacts else "failed"), f"numerical-breakdown: {exc}"
    except GpsLabError as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"

    bands, ok = evaluate_bands(config.bands, metrics)
    manifest = {
        "subcommand": args.subcommand,
        "status": status,
        "error": error,
        "config_path": str(args.config),
        "config_text": config.text,
        "config": config.echo(),
        "seed": seed,
        "threads": threads,
        "versions": _versions(),
        "started_unix": started,
        "wall_time_s": time.time() - started,
        "metrics": {k: _json_number(v) for k, v in metrics.items()},
        "bands": bands,
        "artifacts": run.artifacts,
        "notes": run.notes,
    }
    with open(run.out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for name, value in metrics.items():
        print(f"{name} = {_cell(value)}")
    for name, res in bands.items():
        verdict = "n/a" if res["pass"] is None else ("pass" if res["pass"] else "FAIL")
        print(f"band {name} [{res['lo']}, {res['hi']}]: {verdict}")
    if error:
        print(f"gps-lab: {error}", file=sys.stderr)
        return EXIT_PARTIAL if status == "partial" else EXIT_ERROR
    return EXIT_OK if ok else EXIT_BANDS


if __name__ == "__main__":
    sys.exit(main())

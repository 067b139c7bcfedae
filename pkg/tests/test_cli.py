import csv
import json

import pytest

from gps_lab.cli import main

CYCLIC = """\
[group]
library = cyclic-diag(1)
[system]
theta = 1
phi = alpha_1
[count]
R_max = 7
grid_step = 0.5
delta = 0
"""


def run(tmp_path, text, sub, *extra, name="cfg.ini", out="out"):
    cfg = tmp_path / name
    cfg.write_text(text)
    code = main([sub, "--config", str(cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_count_cyclic(tmp_path):
    code, out = run(tmp_path, CYCLIC + "[bands]\nN_at_R_max = 6, 6\nmass_at_R_max = 12, 12\n", "count")
    assert code == 0
    rows = read_csv(out / "counting.csv")
    last = rows[-1]
    assert float(last["R"]) == 7 and int(last["N"]) == 6 and float(last["mass"]) == 12
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "complete"
    assert man["metrics"]["N_at_R_max"] == 6
    assert all(b["pass"] for b in man["bands"].values())
    assert {"python", "numpy", "scipy", "gps_lab"} <= set(man["versions"])
    assert man["config_text"].startswith("[group]")
    assert set(man["artifacts"]) == {"classes.csv", "counting.csv"}


def test_csv_format(tmp_path):
    _, out = run(tmp_path, CYCLIC, "count")
    raw = (out / "classes.csv").read_bytes()
    assert b"\r" not in raw
    rows = read_csv(out / "classes.csv")
    assert rows[0]["word"] == "a"
    text = (out / "counting.csv").read_text()
    assert "\n0.5,0,0,1,0\n" in text


def test_band_failure_exit_code(tmp_path):
    code, out = run(tmp_path, CYCLIC + "[bands]\nN_at_R_max = 7, 9\n", "count")
    assert code == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["bands"]["N_at_R_max"]["pass"] is False


def test_invalid_config_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, CYCLIC + "[count]\n", "count")
    assert code == 2
    code, _ = run(tmp_path, CYCLIC.replace("R_max = 7", "R_max = -7"), "count")
    assert code == 2
    assert "line 7" in capsys.readouterr().err


def test_check_gps_anosov(tmp_path):
    text = "[group]\nlibrary = diag-anosov(1, 0.8)\n[system]\ntheta = 1, 2\n[check-gps]\ntrials = 1000\n" \
           "period_words = 200\n[bands]\nmax_gps_residual = , 1e-9\nmax_period_residual = , 1e-8\n"
    code, out = run(tmp_path, text, "check-gps")
    assert code == 0
    assert len(read_csv(out / "gps_trials.csv")) == 1000
    assert len(read_csv(out / "period_trials.csv")) == 200


def test_exponent_theta(tmp_path):
    text = "[group]\nlibrary = theta-group\n[system]\ntheta = 1\nphi = alpha_1\n[exponent]\ndepth = 14\n" \
           "parabolics = A, B\n[bands]\ndelta_hat = 0.9, 1.1\ndop_margin_min = 0.3,\n"
    code, out = run(tmp_path, text, "exponent")
    assert code == 0
    rows = read_csv(out / "dop.csv")
    assert [r["label"] for r in rows] == ["A", "B"] and all(r["holds"] == "1" for r in rows)


def test_spectrum_psmeasure_equidistribute(tmp_path):
    text = "[group]\nlibrary = theta-group\n[system]\ntheta = 1\nphi = alpha_1\n[spectrum]\nR_max = 7\n" \
           "[psmeasure]\ndepth = 6\ns = 1.2\nwrite_atoms = yes\n[equidistribute]\nT = 6\nmu_radius = 8\n"
    code, out = run(tmp_path, text, "spectrum", out="spec")
    assert code == 0
    assert read_csv(out / "arithmeticity.csv")[0]["has_grid"] == "0"
    code, out = run(tmp_path, text, "psmeasure", out="ps")
    assert code == 0
    hist = read_csv(out / "histogram.csv")
    assert len(hist) == 32 and abs(sum(float(r["mass"]) for r in hist) - 1) < 1e-9
    assert (out / "atoms.csv").exists() and (out / "conformality.csv").exists()
    code, out = run(tmp_path, text, "equidistribute", out="eq")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["metrics"]["pair_atoms"] == len(read_csv(out / "pairs.csv"))
    assert len(read_csv(out / "joint.csv")) == 64


def test_partial_results_on_breakdown(tmp_path):
    text = "[group]\nlibrary = diag-anosov(8, 8)\n[system]\ntheta = 1, 2\n[equidistribute]\nT = 3\n" \
           "mu_depth = 4\nbins = 8\njoint_bins = 4\n"
    code, out = run(tmp_path, text, "equidistribute")
    assert code == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "partial" and man["artifacts"] == ["pairs.csv"]
    assert (out / "pairs.csv").exists()


def test_determinism_across_threads(tmp_path):
    text = "[group]\nlibrary = theta-group\n[system]\ntheta = 1\nphi = alpha_1\n[count]\nR_max = 7\n"
    run(tmp_path, text, "count", "--threads", "1", out="t1")
    run(tmp_path, text, "count", "--threads", "4", out="t4")
    for name in ("classes.csv", "counting.csv"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes()
    gps = "[group]\nlibrary = schottky(1.5)\n[system]\ntheta = 1\n[check-gps]\ntrials = 50\nperiod_words = 20\n"
    run(tmp_path, gps, "check-gps", "--seed", "9", out="g1")
    run(tmp_path, gps, "check-gps", "--seed", "9", out="g2")
    assert (tmp_path / "g1" / "gps_trials.csv").read_bytes() == (tmp_path / "g2" / "gps_trials.csv").read_bytes()
    m = json.loads((tmp_path / "g1" / "manifest.json").read_text())
    assert m["seed"] == 9


def test_unknown_subcommand(tmp_path):
    with pytest.raises(SystemExit):
        main(["plot", "--config", "x.ini"])

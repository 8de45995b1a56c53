import json
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from funkframe import cli, selftest
from funkframe.experiment import (
    ExperimentConfig,
    export_pgm,
    load_config,
    read_node_csv,
    read_pgm,
    run_experiment,
    write_node_csv,
)
from funkframe.harmonics import NodeFunction
from funkframe.phantom import default_phantom, sample, save_phantom, zero_phantom
from funkframe.sphere import InvalidInputError, grid_for_degree, save_design

SMALL = ["--N", "6", "--l-max", "20", "--m-circle", "128"]


@pytest.fixture(autouse=True)
def quiet(caplog):
    caplog.set_level(logging.ERROR)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("N = 10\nl_max = 30\nalphas = 0, 0.1 ,0.2\nnoise_level = 0.2\n# comment\n")
    cfg = load_config(path, {"seed": 9, "N": None})
    assert (cfg.N, cfg.l_max, cfg.seed, cfg.noise_level) == (10, 30, 9, 0.2)
    assert cfg.alphas == (0.0, 0.1, 0.2)


@pytest.mark.parametrize(
    "text", ["N = 0\n", "filter = spline\n", "bogus = 1\n", "noise_level = -1\n", "pinv_threshold = 2\n", "N = x\n"]
)
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(InvalidInputError):
        load_config(path).resolved()


def test_node_csv_roundtrip(tmp_path):
    g = grid_for_degree(6)
    f = sample(default_phantom(), g)
    path = tmp_path / "f.csv"
    write_node_csv(f, path)
    back = read_node_csv(path)
    assert back.grid.shape == g.shape and back.grid.exact_degree == g.exact_degree
    assert np.array_equal(back.samples, f.samples)
    assert np.array_equal(back.grid.theta, g.theta)
    header = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")][0]
    assert header == "lambda,theta,weight,value_re,value_im"


def test_experiment_report_consistency():
    cfg = ExperimentConfig(N=6, l_max=20, m_circle=128, noise_level=0.1, seed=3, alphas=(0.0, 0.05, 0.2))
    report, timings = run_experiment(cfg)
    errs = [r["relative_error"] for r in report["runs"]]
    assert report["best"]["index"] == int(np.argmin(errs))
    assert report["best"]["alpha"] == cfg.alphas[int(np.argmin(errs))]
    assert all(e >= 0 for e in errs)
    assert all(r["norm_ratio"] <= 2 for r in report["runs"])
    assert set(timings) == {"forward", "table", "reconstruct"}
    assert report["config"]["alphas"] == [0.0, 0.05, 0.2]


def test_experiment_empty_alphas_runs_unfiltered():
    report, _ = run_experiment(ExperimentConfig(N=6, l_max=20, m_circle=128))
    assert len(report["runs"]) == 1 and report["runs"][0]["filter"] == "none"


def test_experiment_design_grid(tmp_path):
    # equal weights on Gauss-Legendre nodes are not a true design; this only
    # exercises the point-set path through the pipeline
    g = grid_for_degree(20)
    path = tmp_path / "d.txt"
    save_design(path, g.nodes, 41)
    cfg = ExperimentConfig(N=4, l_max=20, m_circle=64, design=str(path))
    report, _ = run_experiment(cfg)
    assert report["grid"].startswith("design")


def test_pgm_export(tmp_path):
    g = grid_for_degree(6)
    f = NodeFunction(g, np.full(g.size, 2.5))
    path = tmp_path / "c.pgm"
    lo, hi = export_pgm(f, path, width=40, height=20, l_max=6)
    img, maxval = read_pgm(path)
    assert img.shape == (20, 40)
    assert np.all(img == img[0, 0])
    assert_allclose((lo, hi), (2.5, 2.5), rtol=1e-12)
    side = (tmp_path / "c.pgm.txt").read_text()
    assert "min" in side and "max" in side


def test_pgm_extrema_sidecar(tmp_path):
    g = grid_for_degree(20)
    f = sample(default_phantom(), g)
    path = tmp_path / "p.pgm"
    lo, hi = export_pgm(f, path, width=90, height=45, l_max=20)
    img, maxval = read_pgm(path)
    assert img.min() == 0 and img.max() == maxval == 65535
    vals = dict(ln.split() for ln in (tmp_path / "p.pgm.txt").read_text().splitlines() if ln.strip())
    assert_allclose([float(vals["min"]), float(vals["max"])], [lo, hi])


def test_cli_pipeline(tmp_path, capsys):
    out = str(tmp_path / "o")
    table = str(tmp_path / "t.frfd")
    assert cli.main(["precompute", *SMALL, "--out", out, "--table", table]) == 0
    first = open(table, "rb").read()
    assert cli.main(["precompute", *SMALL, "--out", out, "--table", table]) == 0
    assert open(table, "rb").read() == first

    assert cli.main(["forward", *SMALL, "--out", out]) == 0
    rep = json.load(open(f"{out}/forward_report.json"))
    assert rep["evenness_ok"]
    rows = [ln for ln in open(f"{out}/data.csv") if not ln.startswith("#")]
    assert len(rows) - 1 == grid_for_degree(20).size

    args = ["reconstruct", *SMALL, "--out", out, "--data", f"{out}/data.csv", "--table", table]
    assert cli.main(args + ["--filter", "tikhonov", "--alpha", "0.01"]) == 0
    rep = json.load(open(f"{out}/reconstruct_report.json"))
    assert rep["norm_ratio"] <= 2 and rep["relative_error"] < 0.5

    assert cli.main(["experiment", *SMALL, "--out", out, "--noise", "0.2", "--alphas", "0,0.1"]) == 0
    assert json.load(open(f"{out}/report.json"))["best"]["index"] in (0, 1)
    assert "reconstruct" in json.load(open(f"{out}/timings.json"))

    assert cli.main(["export", "--data", f"{out}/reconstruction.csv", "--output", f"{out}/r.pgm",
                     "--width", "32", "--height", "16"]) == 0
    assert read_pgm(f"{out}/r.pgm")[0].shape == (16, 32)


def test_cli_forward_zero_phantom(tmp_path):
    ph = tmp_path / "zero.txt"
    save_phantom(zero_phantom(), ph)
    out = str(tmp_path / "o")
    assert cli.main(["forward", *SMALL, "--out", out, "--phantom", str(ph)]) == 0
    data = read_node_csv(f"{out}/data.csv")
    assert not np.any(data.samples)


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["experiment", *SMALL, "--out", out, "--filter", "bogus"]) == 1
    bad = tmp_path / "bad.frfd"
    bad.write_bytes(b"FRFD" + bytes(40))
    assert cli.main(["forward", *SMALL, "--out", out]) == 0
    assert cli.main(["reconstruct", *SMALL, "--out", out, "--data", f"{out}/data.csv", "--table", str(bad)]) == 1
    assert cli.main(["reconstruct", *SMALL, "--out", out, "--data", str(tmp_path / "missing.csv")]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_numeric_failure_exit_code(tmp_path, monkeypatch):
    from funkframe import experiment, frame

    def boom(ratio, bound=2.0):
        raise frame.NormBoundError("forced")

    monkeypatch.setattr(experiment, "check_norm_bound", boom)
    out = str(tmp_path / "o")
    assert cli.main(["experiment", *SMALL, "--out", out]) == 2


def test_cli_incompatible_grid(tmp_path):
    out = str(tmp_path / "o")
    table = str(tmp_path / "t.frfd")
    assert cli.main(["precompute", *SMALL, "--out", out, "--table", table]) == 0
    assert cli.main(["forward", "--l-max", "10", "--m-circle", "64", "--out", out]) == 0
    args = ["reconstruct", *SMALL, "--out", out, "--data", f"{out}/data.csv", "--table", table]
    assert cli.main(args) == 1


def test_selftest_passes_and_counts(capsys):
    passed, failed = selftest.run()
    assert failed == [] and passed == len(selftest.CHECKS)
    assert f"{passed}/{len(selftest.CHECKS)} checks passed" in capsys.readouterr().out


def test_selftest_reports_failure_by_name(capsys):
    def broken():
        raise AssertionError("nope")

    passed, failed = selftest.run([selftest.grid_weights, broken])
    assert (passed, failed) == (1, ["broken"])
    assert "FAIL broken" in capsys.readouterr().out
    assert cli.main(["selftest"]) == 0


def test_exact_data_error_monotone_in_N():
    errs = [run_experiment(ExperimentConfig(N=N))[0]["runs"][0]["relative_error"] for N in (10, 25, 40)]
    assert errs[0] >= errs[1] >= errs[2]

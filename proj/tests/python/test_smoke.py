import math
import os
import pathlib

import numpy as np
import pytest

import jamfield

ROOT = pathlib.Path(os.environ.get("JAMFIELD_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_gradient_example():
    g = jamfield.clamped_rss_grad_theta([10.0, 0.0], [0.0, 0.0])
    assert g[0] == pytest.approx(20.0 / math.log(10) * 10.0 / 100.0)
    assert g[1] == pytest.approx(0.0)


def test_clamp_removes_singularity():
    assert jamfield.clamped_rss([0.0, 0.0], [0.0, 0.0]) == pytest.approx(10.0)


def test_fim_single_observer():
    fim = jamfield.fim_pathloss([[10.0, 0.0]], [0.0, 0.0], sigma=1.0)
    assert isinstance(fim, np.ndarray)
    assert fim.shape == (2, 2)
    assert fim[0, 0] == pytest.approx(400.0 / math.log(10) ** 2 / 100.0)


def test_crb_cross():
    var, rmse = jamfield.crb_2d([[1, 0], [-1, 0], [0, 1], [0, -1]], [0, 0], sigma=1.0)
    assert var[0] == pytest.approx(math.log(10) ** 2 / 800.0)
    assert rmse[1] == pytest.approx(math.sqrt(var[1]))


def test_degenerate_geometry_raises():
    with pytest.raises(ValueError):
        jamfield.crb_2d([[10.0, 0.0]], [0.0, 0.0], sigma=1.0)


def test_raytrace_single_wall():
    p = jamfield.raytrace_rss(
        [20.0, 0.0],
        [0.0, 0.0],
        [[[9, -5], [11, -5], [11, 8], [9, 8]], [[-10, 20], [30, 20], [30, 30], [-10, 30]]],
        reflection_loss_db=6.0,
        max_reflections=1,
    )
    assert p == pytest.approx(10.0 - 10.0 * math.log10(2000.0) - 6.0, abs=1e-6)


def test_parameter_count():
    assert jamfield.mlp_parameter_count([2, 200, 100, 1]) == 20801


def test_config_round_trip_and_sweep(tmp_path):
    cfg = jamfield.ExperimentConfig.load(str(ROOT / "tests" / "data" / "tiny.json"))
    assert cfg.estimator_names == ["MLE", "PL-only"]
    again = jamfield.ExperimentConfig.parse(cfg.dump())
    assert again.dump() == cfg.dump()
    cfg.n_mc = 2
    cfg.record_timing = False
    res = jamfield.run_sweep(cfg, str(tmp_path))
    assert len(res["cells"]) == 2 * len(cfg.inr_grid_db)
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header == "estimator,inr_db,dim,rmse_m,crb_rmse_m,converged_frac,mean_ms"
    assert len(jamfield.crb_table(cfg)) == len(cfg.inr_grid_db)


def test_estimate_reports():
    cfg = jamfield.ExperimentConfig.load(str(ROOT / "tests" / "data" / "tiny.json"))
    cfg.keep_estimators(["MLE"])
    data = jamfield.dataset(cfg, realization=1, inr_db=30.0)
    assert len(data["positions"]) == 10
    reports = jamfield.estimate(cfg, realization=1, inr_db=30.0)
    assert len(reports) == 1
    assert reports[0]["estimator"] == "MLE"
    assert math.dist(reports[0]["theta_hat"], [50.0, 50.0]) < 2.0


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        jamfield.ExperimentConfig.load(str(ROOT / "tests" / "data" / "bad_schema.json"))

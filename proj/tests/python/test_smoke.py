import json
import math

import numpy as np
import pytest

finelab = pytest.importorskip("finelab")


def test_radial_annulus_capacity():
    s = finelab.radial_grid(2, 0.5, 1.0, 1.0 / 256)
    A = list(range(s.size - 1))
    r = finelab.variational_capacity(s, [0], A, p=2.0, tol=1e-10)
    assert r["value"] == pytest.approx(2 * math.pi / math.log(2), rel=5e-3)
    assert r["minimizer"][0] == 1.0
    assert r["minimizer"].shape == (s.size,)


def test_space_and_potential():
    s = finelab.cube_grid(2, 1.0, 0.125)
    assert s.positions().shape == (s.size, 2)
    assert s.total_measure() == pytest.approx(np.sum(s.measures()))
    E = finelab.AnalyticSet.ball([0.0, 0.0], 0.25).nodes(s)
    B = finelab.ball_nodes(s, [0.0, 0.0], 0.9)
    u = finelab.capacitary_potential(s, E, B, p=3.0)
    assert np.all(u["field"] >= -1e-8)
    assert np.all(u["field"] <= 1 + 1e-8)
    assert all(u["field"][i] == 1.0 for i in E)


def test_obstacle_and_errors():
    s = finelab.cube_grid(1, 1.0, 0.25)
    n = s.size
    r = finelab.solve_obstacle(s, list(range(1, n - 1)), [-math.inf] * n, [0.0] * n)
    assert np.allclose(r["field"], 0.0)
    with pytest.raises(finelab.FinelabError) as info:
        finelab.variational_capacity(s, [0, 1, 2], [1], p=2.0)
    assert info.value.code == "EnotInA"


def test_wiener_and_classification():
    rep = finelab.wiener_terms("sector", [0.0, 0.0], scales=4, resolution=32)
    assert len(rep["terms"]) == 4
    assert rep["classification"]["verdict"] == "Thick"
    assert finelab.classify_terms([0.5**j for j in range(1, 13)])["verdict"] == "Thin"


def test_cartan_reports():
    cert = finelab.weak_cartan("diskchain:count=12", [0.0, 0.0], resolution=32)
    assert cert["valid"]
    bounds = finelab.product_bounds("diskchain:count=12", [0.0, 0.0], resolution=32)
    assert bounds["partial_product_holds"]
    strong = finelab.strong_cartan(finelab.AnalyticSet.empty(), [0.0, 0.0], resolution=32)
    assert strong["valid"]


def test_run_scenario(tmp_path):
    cfg = {"problem": {"operation": "wiener", "set": "cusp", "x0": [0.0, 0.0], "scales": 3, "resolution": 16}}
    manifest = finelab.run_scenario(cfg, tmp_path)
    names = {f["name"] for f in manifest["files"]}
    assert "terms.csv" in names
    assert json.loads((tmp_path / "manifest.json").read_text())["version"] == finelab.__version__
    assert "wiener" in finelab.defaults()

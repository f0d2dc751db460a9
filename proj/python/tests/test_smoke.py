import math

import numpy as np
import pytest

import stochtr


def test_kernel_unit_mass_and_functionals():
    k = stochtr.Kernel.isotropic(2)
    assert k.mass() == pytest.approx(1.0, abs=1e-6)
    assert k([0.0, 0.0]) > 0
    assert k([1.2, 0.0]) == 0.0
    # Lambda(I, theta) = d for isotropic kernels
    assert k.lambda_functional([1, 0, 0, 1]) == pytest.approx(2.0, rel=1e-3)
    best, lam, aspect = stochtr.minimize_lambda_rank_one([1, 0], [0, 1], 20)
    assert lam <= 0.2 * k.lambda_functional([0, 1, 0, 0])
    assert aspect > 1


def test_drift_catalog():
    assert set(stochtr.drift_names()) >= {"shear_flow", "sign_1d", "constant"}
    b = stochtr.drift("shear_flow")
    assert b.dim == 2
    # sign(y) (1, 2 sqrt|y|)
    assert b([0.0, 0.25]) == pytest.approx([1.0, 1.0])
    assert b([0.0, -0.25]) == pytest.approx([-1.0, -1.0])
    assert stochtr.drift("constant", [0.5])([3.0]) == [0.5]
    with pytest.raises(KeyError):
        stochtr.drift("vortex")


def test_constant_drift_commutator_vanishes():
    h = 1 / 128
    g = stochtr.Grid([-1.5 + h / 2], h, [384])
    x = np.array(g.axis(0))
    u = np.sign(x)
    r = stochtr.commutator_study(g, u, stochtr.drift("constant", [0.3]), stochtr.Kernel.isotropic(1),
                                 [0.2, 0.1], [-1.0], [1.0])
    assert max(r["l1"]) <= 1e-10


def test_heat_oracle_and_maximum_principle():
    g = stochtr.Grid([-4.0], 1 / 64, [513])
    x = np.array(g.axis(0))
    v0 = np.exp(-8 * x**2)
    out = stochtr.solve_fd(stochtr.drift("constant", [0.0]), g, v0, 0.1)
    assert out["violations"] == 0
    exact = stochtr.heat_exact(g, v0, 0.1)
    assert np.max(np.abs(out["v"] - exact)) <= 2e-3
    assert out["v"].shape == (513,)


def test_feynman_kac_is_seeded():
    b = stochtr.drift("smooth_sin")
    u0 = stochtr.datum("sin", 1)
    a = stochtr.feynman_kac(b, u0, "identity", 0.25, [0.3], 2000, 1e-2, 11)
    c = stochtr.feynman_kac(b, u0, "identity", 0.25, [0.3], 2000, 1e-2, 11)
    assert a == c
    assert abs(a["mean"]) <= 1 and a["stderr"] > 0


def test_shear_branches_split():
    up = stochtr.shear_branches(0.0, 0.5, "up")
    down = stochtr.shear_branches(0.0, 0.5, "down")
    assert up[1] == pytest.approx(0.25) and down[1] == pytest.approx(-0.25)


def test_lab_round_trip(tmp_path):
    ids = {e["id"] for e in stochtr.experiments()}
    assert "anisotropy-study" in ids
    cfg = stochtr.default_config("anisotropy-study", seed=3)
    assert stochtr.validate(cfg) == []
    cfg["random_trials"] = 5
    rep = stochtr.run(cfg, tmp_path)
    assert rep["passed"]
    assert (tmp_path / "metrics.csv").exists()
    bad = dict(cfg, budget=-1)
    assert stochtr.validate(bad)
    with pytest.raises(ValueError):
        stochtr.run(bad, tmp_path / "bad")

import numpy as np
import pytest

ccdf = pytest.importorskip("ccdf")


def test_schedule_endpoints():
    vp = ccdf.make_vp_schedule()
    ve = ccdf.make_ve_schedule()
    assert vp.beta(1) == 1e-4 and vp.beta(1000) == 0.02
    assert ve.sigma(1) == 0.01 and ve.sigma(1000) == 378.0
    assert vp.kind == "ddpm" and ve.kind == "smld"
    assert vp.index_for_time(0.02) == 20


def test_contraction_and_shortcut():
    vp = ccdf.make_vp_schedule()
    assert ccdf.step_contraction(vp, "ddpm", 1) == 0.0
    rep = ccdf.contraction_report(vp, "ddpm", 200, 64, 10.0)
    assert rep["lambda"] == pytest.approx(0.99009452962654642, rel=1e-12)
    assert rep["bound_recursive"] <= rep["bound_simple"]
    ddim_ve = ccdf.make_ve_schedule().with_kind("ddim")
    r = ccdf.minimal_shortcut(12.8, 1.0, ddim_ve, "ddim", 1.0, 64)
    assert r["feasible"] and r["n_prime"] == 329


def test_mri_ccdf_is_consistent():
    img = ccdf.make_phantom("ellipses", 32, 32, seed=0)
    assert img.shape == (32, 32) and img.min() >= 0 and img.max() <= 1
    mask = ccdf.gaussian1d_mask(32, 32)
    op = ccdf.MriProjection(mask, img)
    assert op.tau == pytest.approx(1 - mask.sum() / mask.size)
    oracle = ccdf.GaussianScoreOracle(np.full(img.size, 0.5), 0.1)
    out = ccdf.ccdf_sample(op.zero_filled, op, ccdf.make_ve_schedule(), oracle, 0.02, seed=1,
                           corrector_rule="squared")
    assert out["reverse_steps"] == 20
    assert out["x"].shape == (32, 32)
    assert op.consistency_residual(out["x"]) < 1e-10


def test_mri_demo_and_error_curve():
    d = ccdf.run_mri_demo(height=32, width=32)
    assert d["reverse_steps"] == 20 and d["max_residual"] < 1e-10
    c = ccdf.error_curve("ddpm", 0.1, trials=200, n=16, op="inpaint", seed=3)
    assert c["n_prime"] == 100 and len(c["mean"]) == 101
    assert np.all(np.isfinite(c["mean"]))


def test_validation_errors_map_to_value_error():
    with pytest.raises(ValueError):
        ccdf.make_vp_schedule(0.5, 0.1, 10)
    with pytest.raises(ValueError):
        ccdf.MriProjection(np.zeros((4, 4), bool), np.zeros((4, 4)))

import numpy as np
import pytest

import gatedsim as gs


@pytest.fixture(scope="module")
def ramp():
    scene = gs.make_scene("depth_ramp", 32, 48, ramp_near=10.0, ramp_far=120.0,
                          albedo=0.6, ambient=0.05)
    frame = gs.render(scene["depth"], scene["albedo"], scene["ambient"])
    return scene, frame


def test_profiles_peak_and_support():
    profiles = gs.default_profiles()
    assert len(profiles) == 3
    lo, hi = profiles[2].visible_range
    assert (lo, hi) == pytest.approx((57.0, 176.0))
    r = np.linspace(0.0, 200.0, 2001)
    exact = profiles[1](r, analytic=True)
    assert exact.max() == pytest.approx(1.0, abs=1e-3)
    assert np.max(np.abs(profiles[1](r) - exact)) <= 0.02


def test_render_shapes_and_passive(ramp):
    scene, frame = ramp
    assert frame["slices"].shape == (3, 48, 32)
    np.testing.assert_allclose(frame["passive"], scene["ambient"])
    assert frame["slices"].min() >= 0.0 and frame["slices"].max() <= 1.0


def test_noise_is_seeded(ramp):
    scene, _ = ramp
    a = gs.render(scene["depth"], scene["albedo"], scene["ambient"], noise=True, seed=4)
    b = gs.render(scene["depth"], scene["albedo"], scene["ambient"], noise=True, seed=4,
                  threads=3)
    c = gs.render(scene["depth"], scene["albedo"], scene["ambient"], noise=True, seed=5)
    np.testing.assert_array_equal(a["slices"], b["slices"])
    assert not np.array_equal(a["slices"], c["slices"])


def test_solve_round_trip(ramp):
    scene, frame = ramp
    out = gs.solve(frame["slices"], frame["passive"], threads=2)
    valid = out["validity"]
    assert valid.mean() > 0.5
    err = np.abs(out["depth"][valid] - scene["depth"][valid])
    assert err.mean() < 0.05


def test_solve_pixel_and_ratio():
    est = gs.solve_pixel(0.5, 0.5, 0.5, 0.5)
    assert not est["converged"]
    slices = np.zeros((3, 1, 1))
    slices[2] = 0.5
    r = gs.ratio_depth(slices, np.zeros((1, 1)))
    assert 123.0 <= r[0, 0] <= 176.0


def test_masks_identities(ramp):
    _, frame = ramp
    depth = gs.ratio_depth(frame["slices"], frame["passive"])
    m = gs.masks(frame["slices"], frame["passive"], depth)
    np.testing.assert_array_equal(m["b_prime"], m["D"] & m["M"])
    np.testing.assert_array_equal(m["b"], m["b_prime"] & ~m["E"])
    np.testing.assert_array_equal(m["m"], m["S1"] | m["S2"])
    assert not np.any(m["v"] & ~m["m"])


def test_losses(ramp):
    scene, frame = ramp
    x = np.random.default_rng(0).random((16, 16))
    assert gs.photometric_loss(x, x) == 0.0
    r = gs.cyclic_loss(frame["slices"], frame["passive"], scene["depth"], scene["albedo"],
                       scene["ambient"], gradient=True)
    assert r["total"] == pytest.approx(0.0, abs=1e-12)
    assert r["gradient"].shape == scene["depth"].shape
    with pytest.raises(ValueError):
        gs.photometric_loss(x, x[:8], None)


def test_warp_identity_and_metrics():
    img = np.random.default_rng(1).random((12, 20))
    values, valid = gs.warp(img, np.full((12, 20), 30.0), np.eye(4))
    assert valid.all()
    np.testing.assert_array_equal(values, img)

    pred = np.full((4, 4), 10.0)
    gt = np.array([[0, 0, 10.0], [1, 1, 12.0], [2, 2, 100.0]])
    rep = gs.metrics(pred, np.ones((4, 4), bool), gt)
    assert rep["n_points"] == 2
    assert rep["mae"] == pytest.approx(1.0)
    assert rep["delta1"] == pytest.approx(1.0)


def test_bad_scene_kind():
    with pytest.raises(ValueError):
        gs.make_scene("volcano", 4, 4)
    with pytest.raises(ValueError):
        gs.make_scene("flat_wall", 4, 4, colour=1.0)

import math

import numpy as np
import pytest

import hvio


def test_rodrigues_round_trip():
    r = np.array([0.1, -0.2, 0.3])
    m = hvio.rodrigues_to_matrix(r)
    assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
    assert np.allclose(hvio.matrix_to_rodrigues(m), r, atol=1e-12)


def test_identity_warp_is_identity():
    h = hvio.build_homography(hvio.CameraIntrinsics(), hvio.WarpParams(), hvio.PlaneNormal())
    assert np.allclose(h, np.eye(3), atol=1e-12)
    assert np.allclose(hvio.warp_point(h, 12.5, 40.0), [12.5, 40.0])


def test_pure_translation_shifts_pixels():
    k = hvio.CameraIntrinsics()
    n = hvio.PlaneNormal(0.0, math.pi / 2)
    assert np.allclose(n.vector(), [0.0, 0.0, 1.0], atol=1e-12)
    h = hvio.build_homography(k, hvio.WarpParams(t=[0.01, 0.0, 0.0]), n)
    x, y = hvio.warp_point(h, k.cx, k.cy)
    assert x == pytest.approx(k.cx + k.fx * 0.01)
    assert y == pytest.approx(k.cy)


def test_image_round_trip_and_gradient():
    a = np.tile(np.arange(16, dtype=float) / 16.0, (8, 1))
    img = hvio.GrayImage(a, timestamp=0.5)
    assert (img.width, img.height, img.timestamp) == (16, 8, 0.5)
    assert np.array_equal(img.to_array(), a)
    gx, gy = hvio.gradient(img)
    assert np.allclose(gx[2:-2, 2:-2], 1.0 / 16.0)
    assert np.allclose(gy, 0.0)


def test_bad_image_shape_raises():
    with pytest.raises(hvio.DimensionError):
        hvio.GrayImage(np.zeros(4))


def test_self_alignment_converges_at_identity():
    frame = hvio.render_preset_frame("p1-ideal", 0.0)
    img = hvio.GrayImage(frame)
    pts = hvio.select_pixels(img)
    assert 0 < pts.shape[0] <= 2000
    res = hvio.align(img, img)
    assert res.converged
    assert res.failure_reason is None
    assert np.allclose(res.p.to_vector(), 0.0, atol=1e-9)


def test_ekf_update_shrinks_covariance():
    s = hvio.EkfState(d=1.0)
    p = hvio.initial_covariance()
    new_s, new_p, accepted = hvio.ekf_update(s, p, [0.0, 0.0, 0.0125], l_m=1.0)
    assert accepted
    assert np.all(np.linalg.eigvalsh(0.5 * (new_p + new_p.T)) > 0.0)
    assert np.trace(new_p) < np.trace(p)
    assert new_s.v[2] > 0.0


def test_presets_listed():
    assert "p1-ideal" in hvio.preset_names()


def test_generate_track_metrics(tmp_path):
    ds = tmp_path / "ds"
    hvio.generate("p1-ideal", ds, duration=1.0, seed=3)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"dataset.path = {ds}\noutput.dir = {tmp_path / 'out'}\n")
    result = hvio.track(cfg)
    assert result["frames"] > 10
    assert all(result["converged"])
    m = result["metrics"]
    assert m["failure_rate"] == 0.0
    assert m["velocity_rmse"] < 0.05
    again = hvio.metrics(tmp_path / "out" / "track.csv", ds / "groundtruth.csv")
    assert again["velocity_rmse"] == pytest.approx(m["velocity_rmse"])

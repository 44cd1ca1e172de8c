import math
import warnings

import numpy as np
import pytest

from conftest import rand_alpha, rand_mask
from matteforge import oracles
from matteforge.errors import EmptyRegionError, ShapeMismatchError
from matteforge.metrics import (
    conn_metric,
    evaluate,
    gaussian_derivative_kernel,
    grad_metric,
    gradient_magnitude,
    mse,
    sad,
)


def test_kernel_tap_invariants():
    k = gaussian_derivative_kernel(1.4)
    assert abs(math.fsum(k.gaussian)) == pytest.approx(1.0, abs=1e-15)
    assert abs(math.fsum(k.derivative)) < 1e-15
    assert k.radius == 3
    assert len(k.gaussian) == len(k.derivative) == 2 * k.radius + 1


def test_kernel_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_derivative_kernel(0.0)


def test_sad_zero_when_equal(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    assert sad(pred, pred, np.ones((8, 8), dtype=bool)) == 0.0


def test_sad_forced_arithmetic():
    region = np.zeros((100, 100), dtype=bool)
    region[:, :] = True  # 10 000 px
    assert sad(np.ones((100, 100)), np.zeros((100, 100)), region) == pytest.approx(10.0)


def test_sad_matches_direct_summation(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    gt = rand_alpha(np_rng, 8, 8)
    region = rand_mask(np_rng, 8, 8)
    assert sad(pred, gt, region) == pytest.approx(oracles.sad_direct(pred, gt, region), abs=0)


def test_mse_zero_when_equal(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    assert mse(pred, pred, np.ones((8, 8), dtype=bool)) == 0.0


def test_mse_constant_error():
    pred = np.full((10, 10), 0.6)
    gt = np.full((10, 10), 0.5)
    assert mse(pred, gt, np.ones((10, 10), dtype=bool)) == pytest.approx(0.01)


def test_mse_matches_direct(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    gt = rand_alpha(np_rng, 8, 8)
    region = rand_mask(np_rng, 8, 8)
    region[0, 0] = True
    assert mse(pred, gt, region) == pytest.approx(oracles.mse_direct(pred, gt, region), abs=1e-12)


def test_mse_errors_on_empty_region(np_rng):
    with pytest.raises(EmptyRegionError):
        mse(rand_alpha(np_rng, 4, 4), rand_alpha(np_rng, 4, 4), np.zeros((4, 4), dtype=bool))


def test_grad_zero_when_equal(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    assert grad_metric(pred, pred, np.ones((8, 8), dtype=bool)) == 0.0


def test_grad_zero_for_constants():
    a = np.full((12, 12), 0.3)
    b = np.full((12, 12), 0.9)
    assert grad_metric(a, b, np.ones((12, 12), dtype=bool)) == pytest.approx(0.0, abs=1e-15)


def test_grad_step_edge_matches_dense_convolution_oracle():
    pred = np.zeros((16, 16))
    pred[:, 8:] = 1.0
    xs = np.arange(16, dtype=np.float64)
    gt = np.clip((xs[None, :] - 4.0) / 8.0, 0.0, 1.0) * np.ones((16, 1))
    region = np.ones((16, 16), dtype=bool)
    expected = oracles.grad_metric_direct(pred, gt, region, 1.4)
    assert grad_metric(pred, gt, region, sigma=1.4) == pytest.approx(expected, abs=1e-9)


def test_gradient_magnitude_matches_dense_oracle(np_rng):
    img = rand_alpha(np_rng, 10, 12)
    kernel = gaussian_derivative_kernel(1.4)
    fast = gradient_magnitude(img, kernel)
    slow = oracles.gradient_magnitude_direct(img, 1.4)
    assert np.abs(fast - slow).max() < 1e-12


def test_conn_zero_when_equal(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    assert conn_metric(pred, pred, np.ones((8, 8), dtype=bool)) == 0.0


def test_conn_zero_for_identical_binary_blobs():
    blob = np.zeros((10, 10))
    blob[2:5, 2:5] = 1.0
    blob[7:9, 7:9] = 1.0
    assert conn_metric(blob, blob.copy(), np.ones((10, 10), dtype=bool)) == 0.0


def test_conn_two_blob_case_matches_flood_fill_oracle():
    pred = np.zeros((8, 8))
    pred[1:4, 1:4] = 1.0  # main blob
    pred[6:8, 6:8] = 0.6  # detached faint blob
    gt = np.zeros((8, 8))
    gt[1:4, 1:4] = 1.0
    gt[6:8, 6:8] = 0.3
    region = np.ones((8, 8), dtype=bool)
    expected = oracles.conn_metric_direct(pred, gt, region, 0.15, 10)
    assert expected > 0.0
    assert conn_metric(pred, gt, region) == pytest.approx(expected, abs=1e-12)


def test_metrics_match_oracles_on_random_instances(np_rng):
    for _ in range(10):
        h, w = int(np_rng.integers(4, 17)), int(np_rng.integers(4, 17))
        pred = rand_alpha(np_rng, h, w)
        gt = rand_alpha(np_rng, h, w)
        region = rand_mask(np_rng, h, w, p=0.7)
        region[0, 0] = True
        assert sad(pred, gt, region) == oracles.sad_direct(pred, gt, region)
        assert mse(pred, gt, region) == pytest.approx(
            oracles.mse_direct(pred, gt, region), abs=1e-12
        )
        assert grad_metric(pred, gt, region) == pytest.approx(
            oracles.grad_metric_direct(pred, gt, region, 1.4), abs=1e-9
        )
        assert conn_metric(pred, gt, region) == pytest.approx(
            oracles.conn_metric_direct(pred, gt, region, 0.15, 10), abs=1e-9
        )


def test_metrics_symmetric_under_swap(np_rng):
    pred = rand_alpha(np_rng, 10, 10)
    gt = rand_alpha(np_rng, 10, 10)
    region = rand_mask(np_rng, 10, 10)
    region[0, 0] = True
    assert sad(pred, gt, region) == sad(gt, pred, region)
    assert mse(pred, gt, region) == mse(gt, pred, region)
    assert grad_metric(pred, gt, region) == grad_metric(gt, pred, region)
    assert conn_metric(pred, gt, region) == conn_metric(gt, pred, region)


def test_sad_region_monotone(np_rng):
    pred = rand_alpha(np_rng, 12, 12)
    gt = rand_alpha(np_rng, 12, 12)
    small = rand_mask(np_rng, 12, 12, p=0.3)
    large = small | rand_mask(np_rng, 12, 12, p=0.3)
    assert sad(pred, gt, large) >= sad(pred, gt, small)


def test_sad_positive_when_different_on_region():
    pred = np.zeros((6, 6))
    gt = np.zeros((6, 6))
    gt[3, 3] = 0.5
    region = np.ones((6, 6), dtype=bool)
    assert sad(pred, gt, region) > 0.0
    assert mse(pred, gt, region) > 0.0


def test_empty_region_warns_and_returns_zero(np_rng):
    pred = rand_alpha(np_rng, 4, 4)
    gt = rand_alpha(np_rng, 4, 4)
    empty = np.zeros((4, 4), dtype=bool)
    for fn in (sad, grad_metric, conn_metric):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            assert fn(pred, gt, empty) == 0.0
        assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_shape_mismatch_raises(np_rng):
    with pytest.raises(ShapeMismatchError):
        sad(np.zeros((4, 4)), np.zeros((4, 5)), np.zeros((4, 4), dtype=bool))
    with pytest.raises(ShapeMismatchError):
        grad_metric(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((5, 4), dtype=bool))


def test_evaluate_zero_report_at_equality(np_rng):
    pred = rand_alpha(np_rng, 12, 12)
    tri = np.full((12, 12), 0.5)
    report = evaluate(pred, pred.copy(), tri)
    assert (report.sad, report.mse, report.grad, report.conn) == (0.0, 0.0, 0.0, 0.0)
    assert report.pixels_t == 144


def test_evaluate_uses_transition_region(np_rng):
    pred = rand_alpha(np_rng, 8, 8)
    gt = rand_alpha(np_rng, 8, 8)
    tri = np.full((8, 8), 0.5)
    tri[:4] = 1.0
    report = evaluate(pred, gt, tri)
    assert report.pixels_t == 32
    assert report.sad == sad(pred, gt, tri == 0.5)


def test_evaluate_deterministic(np_rng):
    pred = rand_alpha(np_rng, 10, 10)
    gt = rand_alpha(np_rng, 10, 10)
    tri = np.full((10, 10), 0.5)
    a = evaluate(pred, gt, tri)
    b = evaluate(pred.copy(), gt.copy(), tri.copy())
    assert a == b

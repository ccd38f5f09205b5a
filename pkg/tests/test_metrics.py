"""PSNR and on-thread tip/point distance metrics."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from threadtrace import metrics_to_json, ottp, psnr
from threadtrace.raster import GradientMap, Polyline

from conftest import densify


def line_polyline(n=100, y=0.0):
    pts = np.stack([np.linspace(0, 99, n), np.full(n, y)], axis=1)
    return Polyline(pts, np.linspace(0, 1, n))


def test_psnr_identical_is_infinite():
    field = np.random.default_rng(0).random((32, 32))
    assert math.isinf(psnr(field, field))


def test_psnr_uniform_shift_closed_form():
    a = np.zeros((64, 64))
    b = np.full((64, 64), 0.1)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)  # MSE 0.01 -> 20 dB
    assert psnr(a, np.full((64, 64), 1.0)) == pytest.approx(0.0, abs=1e-9)


def test_psnr_symmetry_and_monotonicity():
    base = np.zeros((16, 16))
    assert psnr(base, base + 0.2) == psnr(base + 0.2, base)
    assert psnr(base, base + 0.05) > psnr(base, base + 0.2)


def test_psnr_accepts_gradient_maps():
    a = GradientMap(np.zeros((8, 8)))
    b = GradientMap(np.full((8, 8), 0.5))
    assert psnr(a, b) == pytest.approx(10.0 * math.log10(1.0 / 0.25))


def test_psnr_shape_mismatch_raises():
    with pytest.raises(ValueError, match="shape mismatch"):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ottp_identity_is_zero():
    line = line_polyline()
    report = ottp(line, line)
    assert report.overall == 0.0
    assert report.needle_end == 0.0 and report.tail_end == 0.0


def test_ottp_perpendicular_shift():
    gt = line_polyline(n=1000)
    pred_pts = gt.points.copy()
    pred_pts[:, 1] += 3.0
    pred_pts[-1, 1] = 4.0  # tail end pushed further out
    report = ottp(Polyline(pred_pts, gt.params), gt)
    assert 2.99 <= report.overall <= 3.01
    assert report.needle_end == pytest.approx(3.0)
    assert report.tail_end == pytest.approx(4.0)


def test_ottp_swapped_prediction_ends():
    gt = line_polyline(n=200)
    report = ottp(Polyline(gt.points[::-1].copy(), None), gt)
    assert report.overall == pytest.approx(0.0, abs=1e-12)
    assert report.needle_end == pytest.approx(99.0)
    assert report.tail_end == pytest.approx(99.0)


def test_ottp_empty_raises():
    line = line_polyline()
    empty = Polyline(np.empty((0, 2)))
    with pytest.raises(ValueError, match="non-empty"):
        ottp(empty, line)
    with pytest.raises(ValueError, match="non-empty"):
        ottp(line, empty)


def test_ottp_requires_gt_parameters():
    line = line_polyline()
    with pytest.raises(ValueError, match="parameters"):
        ottp(line, Polyline(line.points.copy(), None))


def test_ottp_gt_point_permutation_invariant_overall():
    gt = line_polyline(n=50)
    local = np.random.default_rng(4)
    perm = local.permutation(50)
    shuffled = Polyline(gt.points[perm].copy(), gt.params[perm].copy())
    pred_pts = gt.points + np.array([0.0, 1.0])
    pred = Polyline(pred_pts, None)
    a = ottp(pred, gt)
    b = ottp(pred, shuffled)
    assert a.overall == pytest.approx(b.overall, abs=1e-12)
    assert a.needle_end == pytest.approx(b.needle_end, abs=1e-12)
    assert a.tail_end == pytest.approx(b.tail_end, abs=1e-12)


def test_ottp_stable_under_gt_densification():
    # A radial (curve-normal) displacement keeps its distance as the ground
    # truth densifies; extra samples can only shrink nearest distances.
    theta = np.linspace(0, np.pi / 2, 40)
    gt_pts = np.stack([50 * np.cos(theta), 50 * np.sin(theta)], axis=1)
    pred = Polyline(gt_pts * (1.0 + 0.5 / 50.0), None)
    coarse = ottp(pred, Polyline(gt_pts, np.linspace(0, 1, 40)))
    dense_pts, s = densify(gt_pts, spacing=0.1)
    dense = ottp(pred, Polyline(dense_pts, s))
    assert coarse.overall == pytest.approx(0.5, abs=1e-9)
    assert dense.overall == pytest.approx(0.5, abs=1e-3)
    assert dense.overall <= coarse.overall + 1e-12


def test_report_rejects_negative_distances():
    from threadtrace.metrics import OttpReport

    with pytest.raises(ValueError, match="non-negative"):
        OttpReport(overall=-0.1, needle_end=0.0, tail_end=0.0)


def test_metrics_json_shape_and_inf_sentinel():
    from threadtrace.metrics import OttpReport

    report = OttpReport(overall=0.5, needle_end=1.0, tail_end=2.0)
    payload = json.loads(metrics_to_json(math.inf, report))
    assert payload["psnr_db"] == "inf"
    assert payload["ottp"] == {"overall": 0.5, "needle_end": 1.0, "tail_end": 2.0}
    payload = json.loads(metrics_to_json(31.25, report))
    assert payload["psnr_db"] == 31.25

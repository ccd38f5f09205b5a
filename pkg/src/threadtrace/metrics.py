"""Evaluation metrics: PSNR on gradient maps, OTTP on reconstructed curves."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .raster import GradientMap, Polyline

_PEAK = 1.0  # maps live in [0, 1]


def psnr(a, b) -> float:
    """10*log10(PEAK^2 / MSE); identical inputs give the +inf sentinel."""
    av = a.values if isinstance(a, GradientMap) else np.asarray(a, dtype=np.float64)
    bv = b.values if isinstance(b, GradientMap) else np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    mse = float(np.mean((av - bv) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_PEAK * _PEAK / mse)


@dataclass(frozen=True)
class OttpReport:
    overall: float
    needle_end: float
    tail_end: float

    def __post_init__(self):
        if self.overall < 0 or self.needle_end < 0 or self.tail_end < 0:
            raise ValueError("distances must be non-negative")

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "needle_end": self.needle_end,
            "tail_end": self.tail_end,
        }


def ottp(pred: Polyline, gt: Polyline) -> OttpReport:
    """Mean nearest distance from predicted points to ground-truth points.

    needle_end / tail_end compare the predicted first/last point against the
    ground-truth points at parameters 0 and 1.
    """
    if len(pred.points) == 0 or len(gt.points) == 0:
        raise ValueError("polylines must be non-empty")
    if gt.params is None:
        raise ValueError("ground truth polyline needs parameters")
    dists, _ = cKDTree(gt.points).query(pred.points)
    gt_first = gt.points[int(np.argmin(gt.params))]
    gt_last = gt.points[int(np.argmax(gt.params))]
    return OttpReport(
        overall=float(np.mean(dists)),
        needle_end=float(np.hypot(*(pred.points[0] - gt_first))),
        tail_end=float(np.hypot(*(pred.points[-1] - gt_last))),
    )


def metrics_to_json(psnr_db: float, report: OttpReport) -> str:
    payload = {
        "psnr_db": "inf" if math.isinf(psnr_db) else psnr_db,
        "ottp": report.to_dict(),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

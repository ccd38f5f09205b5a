"""Reconstruction pipeline: fusion, ridge extraction, search, linking, fit.

The ridge detector runs on the fused gray field (near-constant on the
thread, an ideal ridge), while segment ordering uses intensities re-sampled
from the denoised directional map, which carries the thread parameter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import NoSegmentsError
from .linking import LinkParams, OrderedThreadPoints, link_segments
from .raster import BinaryMask, GradientMap, Polyline, remap_param, unremap_value
from .ridge import LinePointSet, StegerParams, extract_line_points, sample_bilinear, sigma_from_width
from .search import CurveSegment, SearchParams, extract_segments
from .splinefit import ThreadSpline, fit_spline, sample


@dataclass(frozen=True)
class PipelineConfig:
    w: float = 4.0
    t_l: float = 0.039
    t_u: float = 0.196
    t_d: float = 2.0
    t_v: float = 0.1
    t_c: int = 14
    mask_tolerance: float = 0.2
    mask_threshold: float = 0.5
    smoothing: float = 0.0
    n_samples: int = 200

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("w must be positive")
        if not (0 <= self.t_l <= self.t_u):
            raise ValueError("thresholds must satisfy 0 <= t_l <= t_u")
        if self.t_d <= 0 or self.t_v <= 0:
            raise ValueError("t_d and t_v must be positive")
        if self.t_c < 1:
            raise ValueError("t_c must be at least 1")
        if self.mask_tolerance < 0 or self.mask_threshold < 0:
            raise ValueError("mask parameters must be non-negative")
        if self.smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")


@dataclass(frozen=True)
class ReconstructionResult:
    spline: ThreadSpline | None
    sampled: Polyline | None
    segments: list[CurveSegment]
    ordered: OrderedThreadPoints | None
    fused_field: np.ndarray
    mask: BinaryMask
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def detected(self) -> bool:
        return self.sampled is not None


def fuse_conjugate(
    g: GradientMap, g_conj: GradientMap, cfg: PipelineConfig
) -> tuple[GradientMap, np.ndarray, BinaryMask]:
    """Denoise by the conjugate-sum identity.

    Pixels inside the coarse mask whose unremapped parameters do not sum to
    1 within mask_tolerance are treated as noise: zeroed in both maps and
    cleared from the mask. Returns (denoised g, gray field, mask).
    """
    if g.values.shape != g_conj.values.shape:
        raise ValueError(
            f"dimension mismatch: {g.values.shape} vs {g_conj.values.shape}"
        )
    total = g.values + g_conj.values
    mask = total > cfg.mask_threshold
    deviation = np.abs(unremap_value(g.values) + unremap_value(g_conj.values) - 1.0)
    bad = mask & (deviation > cfg.mask_tolerance)
    cleaned = g.values.copy()
    cleaned[bad] = 0.0
    gray = np.clip(np.where(bad, 0.0, total), 0.0, 1.0)
    return GradientMap(cleaned), gray, BinaryMask(mask & ~bad)


def _single_map_gray(g: GradientMap) -> np.ndarray:
    presence = (g.values > 0).astype(np.float64)
    return ndimage.gaussian_filter(presence, 1.0, mode="reflect")


def reconstruct(
    g: GradientMap, g_conj: GradientMap | None, cfg: PipelineConfig | None = None
) -> ReconstructionResult:
    """Full reconstruction pass; returns a no-thread result instead of
    raising when nothing is detected."""
    cfg = cfg or PipelineConfig()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if g_conj is not None:
        denoised, gray, mask = fuse_conjugate(g, g_conj, cfg)
    else:
        denoised, gray, mask = g, _single_map_gray(g), BinaryMask(g.values > 0)
    timings["fuse_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    params = StegerParams(sigma=sigma_from_width(cfg.w), t_l=cfg.t_l, t_u=cfg.t_u)
    points = extract_line_points(gray, params)
    # Ordering information lives in the directional map, not the gray field.
    # With a conjugate present the sampled value is normalized by the sampled
    # surviving pair sum: edge pixels are attenuated by rasterization, and the
    # raw sample would lose the exact mirror between the two maps there. On
    # interior support the pair sum is the full-scale constant, so the value
    # equals the plain sample.
    sampled_dir = sample_bilinear(denoised.values, points.positions)
    if g_conj is not None:
        pair_sum = np.where(gray > 0.0, g.values + g_conj.values, 0.0)
        den = sample_bilinear(pair_sum, points.positions)
        # A point whose support holds no surviving pair mass has no parameter
        # reading at all; it is edge debris and is dropped.
        keep = den > 1e-9
        if not keep.all():
            points = points.subset(np.flatnonzero(keep))
            sampled_dir = sampled_dir[keep]
            den = den[keep]
        full = remap_param(0.0) + remap_param(1.0)
        sampled_dir = full * sampled_dir / den
    points = LinePointSet(
        points.positions,
        points.tangents,
        points.responses,
        np.clip(sampled_dir, 0.0, 1.0),
        points.source_dims,
    )
    timings["ridge_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    segments = extract_segments(points, SearchParams(t_d=cfg.t_d, t_v=cfg.t_v))
    timings["search_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    try:
        ordered = link_segments(segments, LinkParams(t_c=cfg.t_c))
    except NoSegmentsError:
        ordered = None
    timings["link_ms"] = (time.perf_counter() - t0) * 1e3

    if ordered is None or len(ordered) < 4:
        timings["fit_ms"] = 0.0
        return ReconstructionResult(
            spline=None,
            sampled=None,
            segments=segments,
            ordered=ordered,
            fused_field=gray,
            mask=mask,
            timings=timings,
        )

    t0 = time.perf_counter()
    spline = fit_spline(ordered, smoothing=cfg.smoothing)
    sampled = sample(spline, cfg.n_samples)
    timings["fit_ms"] = (time.perf_counter() - t0) * 1e3
    return ReconstructionResult(
        spline=spline,
        sampled=sampled,
        segments=segments,
        ordered=ordered,
        fused_field=gray,
        mask=mask,
        timings=timings,
    )

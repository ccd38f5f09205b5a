"""Shared fixtures and fixture builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from threadtrace.raster import GradientMap
from threadtrace.ridge import LinePointSet
from threadtrace.scenes import _render_passes


def densify(points: np.ndarray, spacing: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Resample a polyline at roughly uniform arclength spacing.

    Returns (points, s) with s the normalized arclength parameter. Segments
    longer than the spacing are subdivided; the input vertex order is kept.
    """
    pts = np.asarray(points, dtype=np.float64)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(np.ceil(np.hypot(*(b - a)) / spacing)))
        t = np.linspace(0.0, 1.0, n + 1)[1:, None]
        out.append(a + t * (b - a))
    dense = np.concatenate(out)
    seg = np.hypot(*np.diff(dense, axis=0).T)
    keep = np.concatenate([[True], seg > 1e-12])
    dense = dense[keep]
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(dense, axis=0).T))])
    return dense, arc / arc[-1]


def render_pair(
    points: np.ndarray, width: int, height: int, w: float = 4.0,
    s: np.ndarray | None = None,
) -> tuple[GradientMap, GradientMap]:
    """Rasterize an explicit centerline into (gradient, conjugate) maps.

    The polyline is densified first unless explicit parameters are given,
    in which case the caller is responsible for density.
    """
    if s is None:
        pts, s = densify(points)
    else:
        pts = np.asarray(points, dtype=np.float64)
    grad, conj, _, _ = _render_passes(pts, np.asarray(s, float), width, height, w)
    return GradientMap(grad), GradientMap(conj)


def chain_points(
    positions: np.ndarray,
    intensities: np.ndarray | None = None,
    tangents: np.ndarray | None = None,
    dims: tuple[int, int] = (512, 384),
) -> LinePointSet:
    """Build a LinePointSet from explicit positions for search/link tests."""
    pos = np.asarray(positions, dtype=np.float64)
    n = len(pos)
    if intensities is None:
        intensities = np.full(n, 0.5)
    if tangents is None:
        d = np.gradient(pos, axis=0) if n > 1 else np.tile([1.0, 0.0], (n, 1))
        d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
        flip = (d[:, 1] < 0) | ((d[:, 1] == 0) & (d[:, 0] < 0))
        d[flip] *= -1
        tangents = d
    return LinePointSet(
        pos,
        np.asarray(tangents, dtype=np.float64),
        np.ones(n),
        np.asarray(intensities, dtype=np.float64),
        dims,
    )


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)

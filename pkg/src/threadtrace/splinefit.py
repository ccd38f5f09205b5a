"""Cubic spline fitting of ordered thread points and uniform resampling.

Each coordinate is fit separately against the normalized cumulative
chord-length parameter. The spline is stored as per-interval power-basis
cubics so it can be serialized and evaluated without scipy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PPoly, make_smoothing_spline

from .raster import Polyline


@dataclass(frozen=True)
class ThreadSpline:
    """Piecewise cubic in local power basis.

    Interval i covers [knots[i], knots[i+1]]; row i of coeffs_x/coeffs_y is
    [a, b, c, d] evaluating a*dt^3 + b*dt^2 + c*dt + d at dt = t - knots[i].
    """

    knots: np.ndarray
    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    n_points: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64)
        if knots.ndim != 1 or len(knots) < 2 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing with >= 2 entries")
        for name in ("coeffs_x", "coeffs_y"):
            c = np.asarray(getattr(self, name), dtype=np.float64)
            if c.shape != (len(knots) - 1, 4):
                raise ValueError(f"{name} must have shape (n_intervals, 4)")
        for a in (self.knots, self.coeffs_x, self.coeffs_y):
            a.setflags(write=False)

    @property
    def domain(self) -> tuple[float, float]:
        return (float(self.knots[0]), float(self.knots[-1]))

    def evaluate(self, t) -> np.ndarray:
        """Positions (N, 2) at parameters t, clamped to the domain."""
        tt = np.clip(np.asarray(t, dtype=np.float64).reshape(-1), *self.domain)
        k = np.clip(np.searchsorted(self.knots, tt, side="right") - 1, 0, len(self.knots) - 2)
        dt = tt - self.knots[k]
        out = np.empty((len(tt), 2), dtype=np.float64)
        for col, coeffs in ((0, self.coeffs_x), (1, self.coeffs_y)):
            a, b, c, d = (coeffs[k, m] for m in range(4))
            out[:, col] = ((a * dt + b) * dt + c) * dt + d
        return out


def _chord_parameter(positions: np.ndarray) -> np.ndarray:
    deltas = np.hypot(*np.diff(positions, axis=0).T)
    zero = np.flatnonzero(deltas == 0)
    if len(zero):
        raise ValueError(f"consecutive points {zero[0]} and {zero[0] + 1} coincide")
    arc = np.concatenate([[0.0], np.cumsum(deltas)])
    return arc / arc[-1]


def _ppoly_rows(pp: PPoly) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints and per-interval rows, dropping zero-width intervals."""
    keep = np.diff(pp.x) > 0
    knots = np.concatenate([pp.x[:-1][keep], pp.x[-1:]])
    return knots, pp.c[:, keep].T


def fit_spline(pts, smoothing: float = 0.0) -> ThreadSpline:
    """Fit cubics per coordinate over normalized chord-length parameters.

    smoothing=0 interpolates (natural boundary); smoothing>0 is the roughness
    penalty weight of a penalized least-squares cubic.
    """
    positions = getattr(pts, "positions", None)
    if positions is None:
        positions = np.asarray(pts, dtype=np.float64)
    positions = positions.reshape(-1, 2)
    if len(positions) < 4:
        raise ValueError("spline fitting needs at least 4 points")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    u = _chord_parameter(positions)

    def fit_axis(values):
        if smoothing == 0:
            pp = CubicSpline(u, values, bc_type="natural")
        else:
            pp = PPoly.from_spline(make_smoothing_spline(u, values, lam=smoothing))
        return _ppoly_rows(pp)

    knots_x, cx = fit_axis(positions[:, 0])
    knots_y, cy = fit_axis(positions[:, 1])
    if len(knots_x) != len(knots_y) or not np.allclose(knots_x, knots_y):
        raise RuntimeError("coordinate splines produced mismatched knots")
    return ThreadSpline(knots=knots_x, coeffs_x=cx, coeffs_y=cy, n_points=len(positions))


def sample(spline: ThreadSpline, n: int) -> Polyline:
    """n points at uniform parameter spacing across the spline domain."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    t = np.linspace(spline.domain[0], spline.domain[1], n)
    return Polyline(spline.evaluate(t), t)


def spline_to_json(spline: ThreadSpline) -> str:
    payload = {
        "knots": [float(v) for v in spline.knots],
        "cx": [[float(v) for v in row] for row in spline.coeffs_x],
        "cy": [[float(v) for v in row] for row in spline.coeffs_y],
        "n_points": int(spline.n_points),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def spline_from_json(text: str) -> ThreadSpline:
    payload = json.loads(text)
    return ThreadSpline(
        knots=np.asarray(payload["knots"], dtype=np.float64),
        coeffs_x=np.asarray(payload["cx"], dtype=np.float64),
        coeffs_y=np.asarray(payload["cy"], dtype=np.float64),
        n_points=int(payload["n_points"]),
    )

"""Segment ordering and concatenation into one needle-to-tail sequence.

Surviving segments are oriented so intensity ascends along their points,
sorted by mean intensity, and concatenated. Intensity encodes the thread
parameter, so the result runs from the needle end (low) to the tail (high).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NoSegmentsError
from .ridge import LinePoint
from .search import CurveSegment


class Direction(enum.Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"


@dataclass(frozen=True)
class LinkParams:
    t_c: int = 14

    def __post_init__(self):
        if self.t_c < 1:
            raise ValueError("t_c must be at least 1")


@dataclass(frozen=True)
class OrderedThreadPoints:
    """Concatenated points ordered needle end to tail end.

    segment_boundaries holds the start index of each segment after the
    first, i.e. the join positions.
    """

    positions: np.ndarray
    tangents: np.ndarray
    intensities: np.ndarray
    responses: np.ndarray
    segment_boundaries: tuple[int, ...]

    def __post_init__(self):
        for a in (self.positions, self.tangents, self.intensities, self.responses):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def points(self) -> list[LinePoint]:
        return [
            LinePoint(
                position=tuple(self.positions[i]),
                tangent=tuple(self.tangents[i]),
                response=float(self.responses[i]),
                intensity=float(self.intensities[i]),
            )
            for i in range(len(self))
        ]


def segment_direction(seg: CurveSegment) -> Direction:
    """Least-squares slope of intensity against collection index."""
    n = len(seg)
    if n < 2:
        raise ValueError("direction needs at least 2 points")
    x = np.arange(n, dtype=np.float64)
    y = seg.intensities
    slope = float(np.cov(x, y, bias=True)[0, 1] / np.var(x))
    return Direction.DESCENDING if slope < 0 else Direction.ASCENDING


def link_segments(segments: list[CurveSegment], params: LinkParams) -> OrderedThreadPoints:
    """Filter by t_c, orient ascending, sort by mean intensity, concatenate.

    An empty input succeeds with an empty result; a non-empty input whose
    segments are all dropped raises NoSegmentsError.
    """
    min_len = max(params.t_c, 2)
    kept = [s for s in segments if len(s) >= min_len]
    if not kept:
        if segments:
            raise NoSegmentsError(
                f"all {len(segments)} segments dropped by t_c={params.t_c}"
            )
        empty2 = np.empty((0, 2), dtype=np.float64)
        empty1 = np.empty(0, dtype=np.float64)
        return OrderedThreadPoints(empty2, empty2.copy(), empty1, empty1.copy(), ())

    oriented = []
    for seg in kept:
        if segment_direction(seg) is Direction.DESCENDING:
            seg = CurveSegment(
                positions=seg.positions[::-1].copy(),
                tangents=seg.tangents[::-1].copy(),
                intensities=seg.intensities[::-1].copy(),
                responses=seg.responses[::-1].copy(),
            )
        oriented.append(seg)

    def sort_key(seg: CurveSegment):
        cx, cy = seg.positions.mean(axis=0)
        return (seg.mean_intensity, cy, cx)

    oriented.sort(key=sort_key)

    boundaries = []
    offset = 0
    for seg in oriented[:-1]:
        offset += len(seg)
        boundaries.append(offset)
    return OrderedThreadPoints(
        positions=np.concatenate([s.positions for s in oriented]),
        tangents=np.concatenate([s.tangents for s in oriented]),
        intensities=np.concatenate([s.intensities for s in oriented]),
        responses=np.concatenate([s.responses for s in oriented]),
        segment_boundaries=tuple(boundaries),
    )

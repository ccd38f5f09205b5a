"""Polarity-based endpoint detection and region-growing segment collection.

Points are collected one segment at a time: the most salient endpoint of the
remaining set (maximal polarity) seeds a single-ended growth that repeatedly
appends the nearest remaining point within the distance and intensity
thresholds. Collected points leave the set; the process repeats until empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .ridge import LinePoint, LinePointSet

POLARITY_ISOLATED = math.inf  # sentinel polarity of a point with no neighbors

_REFRESH_EVERY = 16  # full polarity refresh cadence, in segments


@dataclass(frozen=True)
class SearchParams:
    t_d: float = 2.0
    t_v: float = 0.1

    def __post_init__(self):
        if self.t_d <= 0 or self.t_v <= 0:
            raise ValueError("search thresholds must be positive")


@dataclass(frozen=True)
class CurveSegment:
    """Points in order of collection, stored as parallel arrays."""

    positions: np.ndarray
    tangents: np.ndarray
    intensities: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        for a in (self.positions, self.tangents, self.intensities, self.responses):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def mean_intensity(self) -> float:
        return float(self.intensities.mean())

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


def polarity(p: LinePoint, point_set: LinePointSet, params: SearchParams) -> float:
    """Absolute mean signed projection of neighbor offsets onto p's tangent.

    Neighbors are the other points within t_d spatially and t_v in intensity
    (both inclusive). A point with no neighbors returns the sentinel maximum.
    """
    pos = np.asarray(p.position)
    d = np.hypot(*(point_set.positions - pos).T)
    dv = np.abs(point_set.intensities - p.intensity)
    neigh = (d <= params.t_d) & (dv <= params.t_v) & (d > 0)
    if not neigh.any():
        return POLARITY_ISOLATED
    offsets = point_set.positions[neigh] - pos
    proj = offsets @ np.asarray(p.tangent)
    return abs(float(proj.mean()))


class _SearchIndex:
    """CSR adjacency over points with edges satisfying both thresholds.

    Neighbor lists are presorted by (distance, |dv|, y, x), so the first
    remaining neighbor during growth is the correct next point.
    """

    def __init__(self, point_set: LinePointSet, params: SearchParams):
        self.point_set = point_set
        self.params = params
        n = len(point_set)
        pos = point_set.positions
        intens = point_set.intensities
        if n >= 2:
            pairs = cKDTree(pos).query_pairs(params.t_d, output_type="ndarray")
        else:
            pairs = np.empty((0, 2), dtype=np.intp)
        ii = np.concatenate([pairs[:, 0], pairs[:, 1]])
        jj = np.concatenate([pairs[:, 1], pairs[:, 0]])
        dv = np.abs(intens[ii] - intens[jj])
        keep = dv <= params.t_v
        ii, jj, dv = ii[keep], jj[keep], dv[keep]
        dist = np.hypot(*(pos[ii] - pos[jj]).T)
        order = np.lexsort((pos[jj, 0], pos[jj, 1], dv, dist, ii))
        ii, jj = ii[order], jj[order]
        self.nbr = jj
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(ii, minlength=n))])
        # Signed projection of each edge onto the source point's tangent.
        tang = point_set.tangents
        self.proj = np.einsum("ij,ij->i", pos[jj] - pos[ii], tang[ii])
        self.alive = np.ones(n, dtype=bool)
        self.polarity = np.empty(n, dtype=np.float64)
        self._nbr_list = self.nbr.tolist()
        self._indptr_list = self.indptr.tolist()
        self._alive_list = [True] * n

    def refresh_polarity(self, idx=None) -> None:
        """Recompute polarity for idx (default: all alive points)."""
        if idx is None:
            idx = np.flatnonzero(self.alive)
        else:
            idx = np.asarray(idx, dtype=np.intp)
        if len(idx) == 0:
            return
        starts = self.indptr[idx]
        counts = self.indptr[idx + 1] - starts
        total = int(counts.sum())
        if total == 0:
            self.polarity[idx] = POLARITY_ISOLATED
            return
        flat = np.repeat(starts, counts) + (
            np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        )
        ok = self.alive[self.nbr[flat]]
        contrib = np.where(ok, self.proj[flat], 0.0)
        bounds = np.concatenate([[0], np.cumsum(counts)[:-1]])
        sums = np.add.reduceat(np.concatenate([contrib, [0.0]]), bounds)[: len(idx)]
        ms = np.add.reduceat(np.concatenate([ok, [False]]).astype(np.int64), bounds)[: len(idx)]
        vals = np.where(ms > 0, np.abs(sums / np.maximum(ms, 1)), POLARITY_ISOLATED)
        vals[counts == 0] = POLARITY_ISOLATED
        self.polarity[idx] = vals

    def best_seed(self) -> int:
        pol = np.where(self.alive, self.polarity, -1.0)
        top = pol.max()
        cand = np.flatnonzero(pol == top)
        pos = self.point_set.positions[cand]
        return int(cand[np.lexsort((pos[:, 0], pos[:, 1]))[0]])

    def grow(self, seed: int) -> list[int]:
        """Collect the chain from seed; marks collected points dead."""
        nbr = self._nbr_list
        indptr = self._indptr_list
        alive = self._alive_list
        collected = [seed]
        alive[seed] = False
        cur = seed
        while True:
            nxt = -1
            for k in range(indptr[cur], indptr[cur + 1]):
                j = nbr[k]
                if alive[j]:
                    nxt = j
                    break
            if nxt < 0:
                break
            alive[nxt] = False
            collected.append(nxt)
            cur = nxt
        self.alive[collected] = False
        return collected

    def alive_neighbors_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.intp)
        if len(idx) == 0:
            return idx
        chunks = [self.nbr[self.indptr[i] : self.indptr[i + 1]] for i in idx]
        if not chunks:
            return np.empty(0, dtype=np.intp)
        cat = np.unique(np.concatenate(chunks))
        return cat[self.alive[cat]]

    def segment_from(self, indices) -> CurveSegment:
        ps = self.point_set
        idx = np.asarray(indices, dtype=np.intp)
        return CurveSegment(
            positions=ps.positions[idx].copy(),
            tangents=ps.tangents[idx].copy(),
            intensities=ps.intensities[idx].copy(),
            responses=ps.responses[idx].copy(),
        )


def most_salient_endpoint(point_set: LinePointSet, params: SearchParams) -> LinePoint:
    """Point with maximal polarity; ties broken by lowest y, then lowest x."""
    if len(point_set) == 0:
        raise ValueError("point set is empty")
    index = _SearchIndex(point_set, params)
    index.refresh_polarity()
    return point_set.point(index.best_seed())


def grow_segment(
    seed: LinePoint, point_set: LinePointSet, params: SearchParams
) -> tuple[CurveSegment, LinePointSet]:
    """Grow one segment from seed; returns it plus the set of leftovers."""
    pos = np.asarray(seed.position)
    matches = np.flatnonzero(
        (point_set.positions[:, 0] == pos[0]) & (point_set.positions[:, 1] == pos[1])
    )
    if len(matches) == 0:
        raise ValueError("seed point is not a member of the set")
    index = _SearchIndex(point_set, params)
    collected = index.grow(int(matches[0]))
    segment = index.segment_from(collected)
    remaining = point_set.subset(np.flatnonzero(index.alive))
    return segment, remaining


def extract_segments(point_set: LinePointSet, params: SearchParams) -> list[CurveSegment]:
    """Partition all points into segments by repeated seed-and-grow.

    Polarity is recomputed incrementally: after each segment only the alive
    neighbors of removed points are refreshed, with a full refresh every
    16 segments.
    """
    if len(point_set) == 0:
        return []
    index = _SearchIndex(point_set, params)
    index.refresh_polarity()
    segments: list[CurveSegment] = []
    since_refresh = 0
    while index.alive.any():
        if since_refresh >= _REFRESH_EVERY:
            index.refresh_polarity()
            since_refresh = 0
        seed = index.best_seed()
        collected = index.grow(seed)
        segments.append(index.segment_from(collected))
        index.refresh_polarity(index.alive_neighbors_of(collected))
        since_refresh += 1
    return segments

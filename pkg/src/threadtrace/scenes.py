"""Deterministic synthetic thread scenes with exact ground truth.

A scene is a random smooth open curve rasterized into a gradient map (thread
pixels carry the remapped arclength parameter), a conjugate map (parameter
inverted), a 3-class overlap map and a binary mask. Rendering uses painter's
order along the curve: where the thread crosses itself, the higher-parameter
pass is drawn on top, and the conjugate render keeps that same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import interpolate, ndimage
from scipy.spatial import cKDTree

from .errors import SceneGenerationError
from .raster import (
    BinaryMask,
    GradientMap,
    OverlapMap,
    Polyline,
    SceneGroundTruth,
    remap_param,
)

_MAX_ATTEMPTS = 64
_TARGET_SPACING = 0.30  # dense centerline sample spacing, px


@dataclass(frozen=True)
class SceneConfig:
    width: int = 512
    height: int = 384
    thread_width: float = 4.0
    n_control_points: int = 12
    min_self_intersections: int = 0
    max_self_intersections: int = 2
    occlusion_rects: int = 0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("frame must be at least 32x32 pixels")
        if self.thread_width < 1:
            raise ValueError("thread width must be >= 1 pixel")
        if self.n_control_points < 4:
            raise ValueError("need at least 4 control points")
        if self.min_self_intersections > self.max_self_intersections:
            raise ValueError("min self-intersections exceeds max")
        if self.min_self_intersections < 0 or self.occlusion_rects < 0:
            raise ValueError("counts must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def _rng_for(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))


def _random_walk(rng: np.random.Generator, cfg: SceneConfig) -> np.ndarray | None:
    """Bounded random walk of key points with limited per-step turning."""
    w = cfg.thread_width
    margin = w / 2 + 6.0
    lo = np.array([margin, margin])
    hi = np.array([cfg.width - 1 - margin, cfg.height - 1 - margin])
    diag = math.hypot(cfg.width, cfg.height)

    want_loops = cfg.max_self_intersections > 0
    lo_f, hi_f = (1.0, 1.9) if want_loops else (0.55, 0.95)
    if cfg.min_self_intersections > 0:
        lo_f = 1.25
    total = rng.uniform(lo_f, hi_f) * diag
    n = cfg.n_control_points
    step = total / (n - 1)
    # Per-step turn capped so the control polygon keeps a turning radius of
    # at least 3x the thread width (resolvable by the ridge detector's sigma).
    max_turn = min(step / (3.0 * w), 1.15)
    drift = rng.uniform(-0.55, 0.55) * max_turn if want_loops else 0.0

    pos = rng.uniform(lo + 0.15 * (hi - lo), hi - 0.15 * (hi - lo))
    heading = rng.uniform(0.0, 2.0 * math.pi)
    pts = [pos.copy()]
    for _ in range(n - 1):
        heading += drift + rng.uniform(-max_turn, max_turn)
        nxt = pos
        for _bounce in range(8):
            nxt = pos + step * np.array([math.cos(heading), math.sin(heading)])
            if lo[0] <= nxt[0] <= hi[0] and lo[1] <= nxt[1] <= hi[1]:
                break
            if nxt[0] < lo[0] or nxt[0] > hi[0]:
                heading = math.pi - heading
            if nxt[1] < lo[1] or nxt[1] > hi[1]:
                heading = -heading
        pos = np.clip(nxt, lo, hi)
        pts.append(pos.copy())
    walk = np.array(pts)
    if np.min(np.hypot(*np.diff(walk, axis=0).T)) < 0.2 * step:
        return None  # cornered walk, degenerate spacing
    return walk


def _dense_curve(walk: np.ndarray):
    """Interpolating cubic spline through the walk, densely sampled.

    Returns (points, s, key_s): dense sub-pixel samples, their normalized
    arclength parameters (strictly increasing), and the arclength parameter
    of each walk point.
    """
    tck, u = interpolate.splprep(list(walk.T), s=0.0, k=3)

    def eval_at(tt):
        return np.stack(interpolate.splev(tt, tck), axis=1)

    coarse = eval_at(np.linspace(0.0, 1.0, 1024))
    length = float(np.sum(np.hypot(*np.diff(coarse, axis=0).T)))
    n_eval = max(512, int(length / _TARGET_SPACING) + 1)
    for _ in range(3):
        tt = np.linspace(0.0, 1.0, n_eval)
        pts = eval_at(tt)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        if seg.max() < 0.5:
            break
        n_eval *= 2
    keep = np.concatenate([[True], seg > 1e-12])
    pts = pts[keep]
    tt = tt[keep]
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    s = arc / arc[-1]
    key_s = np.interp(u, tt, s)
    return pts, s, key_s, float(arc[-1])


def _pair_candidates(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs (i, j) of segments whose grid cells are 3x3-adjacent."""
    kx, ky = keys[:, 0], keys[:, 1]
    span = ky.max() - ky.min() + 3
    flat = (kx - kx.min()) * span + (ky - ky.min())
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    n = len(flat)
    ii_all, jj_all = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            target = flat + dx * span + dy
            beg = np.searchsorted(sorted_flat, target, side="left")
            end = np.searchsorted(sorted_flat, target, side="right")
            cnt = end - beg
            total = int(cnt.sum())
            if total == 0:
                continue
            ii = np.repeat(np.arange(n), cnt)
            offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            jj = order[np.repeat(beg, cnt) + offs]
            ii_all.append(ii)
            jj_all.append(jj)
    if not ii_all:
        return np.empty(0, int), np.empty(0, int)
    return np.concatenate(ii_all), np.concatenate(jj_all)


def count_self_intersections(points: np.ndarray) -> int:
    """Count proper crossings between non-adjacent segments of a polyline.

    Candidate pairs are pruned on a 2 px midpoint grid, so segments must be
    short (densely sampled, length below ~2 px) for the count to be exact.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 4:
        return 0
    a, b = pts[:-1], pts[1:]
    mid = (a + b) / 2.0
    keys = np.floor(mid / 2.0).astype(np.int64)
    ii, jj = _pair_candidates(keys)
    sel = jj > ii + 1
    ii, jj = ii[sel], jj[sel]
    if len(ii) == 0:
        return 0
    p, q = a[ii], b[ii]
    r, t = a[jj], b[jj]

    def cross(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    d1 = cross(q - p, r - p)
    d2 = cross(q - p, t - p)
    d3 = cross(t - r, p - r)
    d4 = cross(t - r, q - r)
    return int(np.count_nonzero((d1 * d2 < 0) & (d3 * d4 < 0)))


_MIN_CROSSING_COS = math.cos(math.radians(30.0))


def has_tangential_self_approach(points: np.ndarray, w: float) -> bool:
    """True when two far-apart stretches of the curve run close and near-parallel.

    Two passes of the thread closer than one footprint width are only
    resolvable when they cross transversally; near-parallel approaches merge
    into a single ridge at the detection scale, so curves containing them are
    rejected at generation time. A pair of dense samples counts as an approach
    when they are within ``w + 2`` px but more than four clearances apart in
    arclength, and their tangents meet at less than 30 degrees.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 4:
        return False
    clearance = w + 2.0
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    pairs = cKDTree(pts).query_pairs(clearance, output_type="ndarray")
    if len(pairs) == 0:
        return False
    sep = np.abs(arc[pairs[:, 0]] - arc[pairs[:, 1]])
    pairs = pairs[sep > 4.0 * clearance]
    if len(pairs) == 0:
        return False
    tang = np.gradient(pts, arc, axis=0)
    tang /= np.maximum(np.linalg.norm(tang, axis=1, keepdims=True), 1e-12)
    cos = np.abs(np.einsum("ij,ij->i", tang[pairs[:, 0]], tang[pairs[:, 1]]))
    return bool(np.any(cos > _MIN_CROSSING_COS))


def _render_passes(points: np.ndarray, s: np.ndarray, width: int, height: int, w: float):
    """Rasterize the curve; returns (gradient, conjugate, coverage count, pass records).

    Pass records are (pixel_y, pixel_x, s_at_pass, distance) arrays for every
    curve pass over a pixel, used for occlusion bookkeeping.
    """
    grad = np.zeros((height, width), np.float64)
    conj = np.zeros((height, width), np.float64)
    cov = np.zeros((height, width), np.int32)
    empty_rec = (np.empty(0, int), np.empty(0, int), np.empty(0), np.empty(0))
    if len(points) < 2:
        return grad, conj, cov, empty_rec

    r_core = w / 2.0
    r_aa = r_core + 1.0
    n = len(points)
    spacing = max(np.mean(np.hypot(*np.diff(points, axis=0).T)), 1e-6)
    gap_n = max(2, int(math.ceil(1.5 * w / spacing)))

    xi = np.clip(np.rint(points[:, 0]).astype(int), 0, width - 1)
    yi = np.clip(np.rint(points[:, 1]).astype(int), 0, height - 1)
    occ = np.zeros((height, width), bool)
    occ[yi, xi] = True
    near = ndimage.distance_transform_edt(~occ) <= r_aa + 1.5
    cand = np.argwhere(near)
    centers = cand[:, ::-1].astype(np.float64)

    pairs = cKDTree(centers).sparse_distance_matrix(
        cKDTree(points), max_distance=r_aa + 0.6, output_type="ndarray"
    )
    if len(pairs) == 0:
        return grad, conj, cov, empty_rec
    order = np.lexsort((pairs["j"], pairs["i"]))
    pix = pairs["i"][order].astype(np.int64)
    smp = pairs["j"][order].astype(np.int64)
    dist = pairs["v"][order]

    new_run = np.ones(len(pix), bool)
    new_run[1:] = (pix[1:] != pix[:-1]) | ((smp[1:] - smp[:-1]) > gap_n)
    run_id = np.cumsum(new_run) - 1
    counts = np.bincount(run_id)
    group_starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    best_pos = np.lexsort((dist, run_id))[group_starts]
    run_pix = pix[best_pos]
    run_smp = smp[best_pos]

    # Exact distance/parameter against the two segments adjacent to the best
    # sample of each pass (polyline chords approximate the curve closely).
    p = centers[run_pix]

    def seg_project(k):
        k = np.clip(k, 0, n - 2)
        a = points[k]
        ab = points[k + 1] - a
        denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-30)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(*(p - proj).T)
        sv = s[k] + t * (s[np.minimum(k + 1, n - 1)] - s[k])
        return d, sv

    d0, s0 = seg_project(run_smp - 1)
    d1, s1 = seg_project(run_smp)
    use1 = d1 < d0
    d_exact = np.where(use1, d1, d0)
    s_exact = np.where(use1, s1, s0)

    alpha = np.clip(r_aa - d_exact, 0.0, 1.0)
    keep = alpha > 0.0
    run_pix, d_exact, s_exact, alpha = run_pix[keep], d_exact[keep], s_exact[keep], alpha[keep]
    if len(run_pix) == 0:
        return grad, conj, cov, empty_rec
    covered = d_exact <= r_core

    # Composite passes bottom-up in ascending parameter order (painter).
    depth_order = np.lexsort((s_exact, run_pix))
    rp = run_pix[depth_order]
    starts = np.ones(len(rp), bool)
    starts[1:] = rp[1:] != rp[:-1]
    start_idx = np.flatnonzero(starts)
    pos_in_group = np.arange(len(rp)) - np.repeat(start_idx, np.diff(np.append(start_idx, len(rp))))
    gval = np.zeros(len(centers), np.float64)
    cval = np.zeros(len(centers), np.float64)
    ccount = np.zeros(len(centers), np.int32)
    max_depth = int(pos_in_group.max()) + 1
    for depth in range(max_depth):
        at = depth_order[pos_in_group == depth]
        px = run_pix[at]
        a = alpha[at]
        gval[px] = a * remap_param(s_exact[at]) + (1 - a) * gval[px]
        cval[px] = a * remap_param(1.0 - s_exact[at]) + (1 - a) * cval[px]
        ccount[px] += covered[at]

    ys, xs = cand[:, 0], cand[:, 1]
    grad[ys, xs] = gval
    conj[ys, xs] = cval
    cov[ys, xs] = ccount
    records = (cand[run_pix, 0], cand[run_pix, 1], s_exact, d_exact)
    return grad, conj, cov, records


def _render_all(points, s, width, height, w):
    grad, conj, cov, records = _render_passes(points, s, width, height, w)
    overlap = np.minimum(cov, 2).astype(np.uint8)
    return (
        GradientMap(grad),
        GradientMap(conj),
        OverlapMap(overlap),
        BinaryMask(grad > 0.0),
        records,
    )


def render_gradient_map(gt: SceneGroundTruth, w: float) -> GradientMap:
    """Rasterize the scene's centerline at thread width w."""
    grad, _, _, _ = _render_passes(
        gt.centerline.points, gt.centerline.params, gt.gradient.width, gt.gradient.height, w
    )
    return GradientMap(grad)


def render_overlap_map(gt: SceneGroundTruth, w: float) -> OverlapMap:
    _, _, cov, _ = _render_passes(
        gt.centerline.points, gt.centerline.params, gt.gradient.width, gt.gradient.height, w
    )
    return OverlapMap(np.minimum(cov, 2).astype(np.uint8))


def conjugate_ground_truth(gt: SceneGroundTruth) -> GradientMap:
    """Render the same curve with the parameter inverted, same occlusion order."""
    _, conj, _, _ = _render_passes(
        gt.centerline.points,
        gt.centerline.params,
        gt.gradient.width,
        gt.gradient.height,
        gt.thread_width,
    )
    return GradientMap(conj)


def generate_scene_pair(cfg: SceneConfig) -> tuple[SceneGroundTruth, GradientMap]:
    """Generate one scene plus its conjugate map in a single rendering pass.

    Retries derived sub-seeds until the achieved self-intersection count
    lands in [min, max].
    """
    achieved: list[int] = []
    m2 = cfg.thread_width / 2 + 1.5
    for attempt in range(_MAX_ATTEMPTS):
        rng = _rng_for(cfg.seed, attempt)
        walk = _random_walk(rng, cfg)
        if walk is None:
            continue
        pts, s, key_s, curve_length = _dense_curve(walk)
        if (
            pts[:, 0].min() < m2
            or pts[:, 1].min() < m2
            or pts[:, 0].max() > cfg.width - 1 - m2
            or pts[:, 1].max() > cfg.height - 1 - m2
        ):
            continue
        n_cross = count_self_intersections(pts)
        achieved.append(n_cross)
        if not (cfg.min_self_intersections <= n_cross <= cfg.max_self_intersections):
            continue
        if has_tangential_self_approach(pts, cfg.thread_width):
            continue

        grad, conj, overlap, mask, records = _render_all(
            pts, s, cfg.width, cfg.height, cfg.thread_width
        )
        occluded = _occluded_flags(walk, key_s, records, curve_length, cfg.thread_width)
        gt = SceneGroundTruth(
            control_points=walk,
            occluded_flags=occluded,
            gradient=grad,
            overlap=overlap,
            mask=mask,
            centerline=Polyline(pts, s),
            thread_width=cfg.thread_width,
        )
        return gt, conj
    raise SceneGenerationError(
        f"no curve with {cfg.min_self_intersections}..{cfg.max_self_intersections} "
        f"self-intersections found in {_MAX_ATTEMPTS} attempts "
        f"(achieved counts: {achieved})",
        achieved,
    )


def generate_scene(cfg: SceneConfig) -> SceneGroundTruth:
    """Generate one scene; see generate_scene_pair."""
    return generate_scene_pair(cfg)[0]


def _occluded_flags(walk, key_s, records, curve_length, w):
    """A key point is occluded when a later pass covers its pixel.

    Passes over a pixel count as distinct when their parameters differ by
    more than the normalized arclength of two thread widths.
    """
    rec_y, rec_x, rec_s, rec_d = records
    flags = np.zeros(len(walk), bool)
    if len(rec_y) == 0:
        return flags
    s_gap = min(0.25, 2.0 * w / max(curve_length, 1e-9))
    for j, (pt, sj) in enumerate(zip(walk, key_s)):
        py, px = int(round(pt[1])), int(round(pt[0]))
        sel = (rec_y == py) & (rec_x == px) & (rec_d <= w / 2.0)
        if not sel.any():
            continue
        flags[j] = bool(np.any(rec_s[sel] > sj + s_gap))
    return flags


def apply_degradation(
    gmap: GradientMap,
    noise_sigma: float,
    rects: list[tuple[int, int, int, int]],
    seed: int,
) -> GradientMap:
    """Additive clamped Gaussian noise, then zeroed occlusion rectangles."""
    if noise_sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    out = gmap.values.copy()
    if noise_sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
        out = np.clip(out + rng.normal(0.0, noise_sigma, out.shape), 0.0, 1.0)
    for x0, y0, rw, rh in rects:
        out[max(y0, 0) : y0 + rh, max(x0, 0) : x0 + rw] = 0.0
    return GradientMap(out)


def place_occluders(
    gt: SceneGroundTruth,
    count: int,
    size: int,
    seed: int,
    endpoint_margin: float = 3.0,
) -> list[tuple[int, int, int, int]]:
    """Pick occlusion rectangles centered on the thread, away from endpoints."""
    if count <= 0:
        return []
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x0CC1,)))
    pts = gt.centerline.points
    ends = np.array([pts[0], pts[-1]])
    w, h = gt.gradient.width, gt.gradient.height
    rects = []
    n = len(pts)
    for _ in range(count):
        for _try in range(64):
            k = int(rng.integers(int(0.15 * n), int(0.85 * n)))
            cx, cy = pts[k]
            x0 = int(round(cx - size / 2))
            y0 = int(round(cy - size / 2))
            x0 = max(0, min(x0, w - size))
            y0 = max(0, min(y0, h - size))
            inside = (
                (ends[:, 0] >= x0 - endpoint_margin)
                & (ends[:, 0] <= x0 + size + endpoint_margin)
                & (ends[:, 1] >= y0 - endpoint_margin)
                & (ends[:, 1] <= y0 + size + endpoint_margin)
            )
            if not inside.any():
                rects.append((x0, y0, size, size))
                break
        else:
            rects.append((0, 0, 0, 0))
    return [r for r in rects if r[2] > 0]


def scene_config_for_index(cfg: SceneConfig, scene_index: int) -> SceneConfig:
    """Per-scene config with a seed derived from the dataset seed."""
    derived = int(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(scene_index,)).generate_state(1)[0])
    return replace(cfg, seed=derived)

"""Release acceptance gate: one test per shipped accuracy/performance claim.

Each test evaluates one claim at its stated tolerance and emits a single
pass/fail line with the measured numbers (printed, and repeated in the
assertion message on failure). The suites are seeded, so the measured
values are reproducible bit for bit.
"""

from __future__ import annotations

import math
import statistics
import time
from types import SimpleNamespace

import numpy as np
import pytest

from threadtrace import (
    GradientMap,
    LinePointSet,
    LinkParams,
    NoSegmentsError,
    PipelineConfig,
    Polyline,
    SceneConfig,
    StegerParams,
    apply_degradation,
    extract_line_points,
    generate_scene_pair,
    link_segments,
    ottp,
    place_occluders,
    psnr,
    reconstruct,
    remap_param,
    scene_config_for_index,
    sigma_from_width,
)
from threadtrace.cli import main
from threadtrace.dataset import MANIFEST_NAME, load_manifest
from threadtrace.search import CurveSegment, SearchParams, _SearchIndex, polarity

STEGER = StegerParams(sigma_from_width(4.0), 0.039, 0.196)


def check(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:02d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def clean_suite():
    """200 clean scenes, reconstructed from ground-truth map pairs."""
    base = SceneConfig(width=512, height=384, seed=20260814)
    t0 = time.perf_counter()
    overall, needle, tail = [], [], []
    n_frames = 200
    for i in range(n_frames):
        cfg = scene_config_for_index(base, i)
        gt, conj = generate_scene_pair(cfg)
        res = reconstruct(gt.gradient, conj)
        if not res.detected:
            continue
        rep = ottp(res.sampled, gt.centerline)
        overall.append(rep.overall)
        needle.append(rep.needle_end)
        tail.append(rep.tail_end)
    return SimpleNamespace(
        n_frames=n_frames,
        elapsed=time.perf_counter() - t0,
        overall=np.asarray(overall),
        needle=np.asarray(needle),
        tail=np.asarray(tail),
    )


def test_criterion_01_clean_accuracy(clean_suite):
    s = clean_suite
    mean = s.overall.mean() if len(s.overall) else math.inf
    # Undetected frames count against the within-3px fraction.
    frac3 = float(np.sum(s.overall <= 3.0)) / s.n_frames
    ok = mean <= 2.0 and frac3 >= 0.95 and s.elapsed <= 300.0
    check(
        1,
        ok,
        f"mean overall OTTP {mean:.3f} px (<= 2.0), "
        f"{frac3 * 100:.1f}% of {s.n_frames} frames <= 3 px (>= 95%), "
        f"suite {s.elapsed:.1f} s (<= 300 s)",
    )


def test_criterion_02_endpoint_accuracy(clean_suite):
    s = clean_suite
    needle = s.needle.mean() if len(s.needle) else math.inf
    tail = s.tail.mean() if len(s.tail) else math.inf
    check(
        2,
        needle <= 6.0 and tail <= 6.0,
        f"needle-end mean {needle:.3f} px, tail-end mean {tail:.3f} px (both <= 6.0)",
    )


def test_criterion_03_occlusion_robustness():
    base = SceneConfig(width=512, height=384, seed=4242)
    n_frames = 40
    detected, overall = 0, []
    for i in range(n_frames):
        cfg = scene_config_for_index(base, i)
        gt, conj = generate_scene_pair(cfg)
        rects = place_occluders(gt, 1, 40, seed=cfg.seed ^ 0x0CC1)
        g = apply_degradation(gt.gradient, 0.0, rects, seed=cfg.seed)
        gc = apply_degradation(conj, 0.0, rects, seed=cfg.seed)
        res = reconstruct(g, gc)
        if res.detected:
            detected += 1
            overall.append(ottp(res.sampled, gt.centerline).overall)
    rate = detected / n_frames
    mean = statistics.fmean(overall) if overall else math.inf
    check(
        3,
        rate >= 0.90 and mean <= 4.0,
        f"detection {detected}/{n_frames} (>= 90%), mean overall OTTP {mean:.3f} px (<= 4.0)",
    )


def oriented_ridge(angle: float, size: int = 161, sigma_r: float = 1.5) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    d = -(xx - c) * math.sin(angle) + (yy - c) * math.cos(angle)
    return np.exp(-(d**2) / (2.0 * sigma_r**2))


def test_criterion_04_ridge_accuracy():
    # Odd size keeps the axis-aligned orientations on the pixel grid.
    margin, size = 12.0, 161
    sq_errors, max_tan_deg = [], 0.0
    monotone = True
    strict = StegerParams(STEGER.sigma, 0.08, 0.30)
    for k in range(8):
        angle = k * math.pi / 8.0
        gmap = oriented_ridge(angle, size)
        pts = extract_line_points(gmap, STEGER)
        interior = np.all(
            (pts.positions >= margin) & (pts.positions <= size - 1 - margin), axis=1
        )
        assert interior.sum() > 50
        pos = pts.positions[interior]
        c = (size - 1) / 2.0
        dist = -(pos[:, 0] - c) * math.sin(angle) + (pos[:, 1] - c) * math.cos(angle)
        sq_errors.append(dist**2)
        u = np.array([math.cos(angle), math.sin(angle)])
        cross = np.abs(pts.tangents[interior, 0] * u[1] - pts.tangents[interior, 1] * u[0])
        max_tan_deg = max(max_tan_deg, math.degrees(np.arcsin(np.clip(cross, 0, 1)).max()))
        loose_set = {tuple(p) for p in pts.positions.round(9).tolist()}
        strict_set = {
            tuple(p) for p in extract_line_points(gmap, strict).positions.round(9).tolist()
        }
        monotone = monotone and strict_set <= loose_set
    rmse = math.sqrt(np.mean(np.concatenate(sq_errors)))
    check(
        4,
        rmse <= 0.2 and max_tan_deg <= 2.0 and monotone,
        f"8-orientation positional RMSE {rmse:.4f} px (<= 0.2), "
        f"max tangent error {max_tan_deg:.3f} deg (<= 2.0), "
        f"raised thresholds add no points: {monotone}",
    )


def ideal_chain(gt) -> LinePointSet:
    """Unit-arclength chain along the true centerline with exact attributes."""
    pts = gt.centerline.points
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    tgrid = np.arange(0.0, arc[-1], 1.0)
    x = np.interp(tgrid, arc, pts[:, 0])
    y = np.interp(tgrid, arc, pts[:, 1])
    s = np.interp(tgrid, arc, gt.centerline.params)
    pos = np.stack([x, y], axis=1)
    tan = np.gradient(pos, tgrid, axis=0)
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    flip = (tan[:, 1] < 0) | ((tan[:, 1] == 0) & (tan[:, 0] < 0))
    tan[flip] *= -1
    return LinePointSet(
        pos, tan, np.ones(len(pos)), remap_param(s), (gt.gradient.width, gt.gradient.height)
    )


def test_criterion_05_polarity_endpoints():
    params = SearchParams(t_d=2.0, t_v=0.1)
    base = SceneConfig(width=512, height=384, seed=90909)
    n_frames, hits = 100, 0
    for i in range(n_frames):
        cfg = scene_config_for_index(base, i)
        gt, _ = generate_scene_pair(cfg)
        chain = ideal_chain(gt)
        index = _SearchIndex(chain, params)
        index.refresh_polarity()
        # The isolated-point sentinel is growth bookkeeping, not a score.
        pol = np.where(np.isinf(index.polarity), -1.0, index.polarity)
        best = chain.positions[int(np.argmax(pol))]
        ends = np.stack([gt.centerline.points[0], gt.centerline.points[-1]])
        if np.hypot(*(ends - best).T).min() <= params.t_d:
            hits += 1

    # Interior points of a symmetric chain score zero.
    n = 21
    sym = LinePointSet(
        np.stack([np.arange(n, dtype=np.float64), np.full(n, 8.0)], axis=1),
        np.tile([1.0, 0.0], (n, 1)),
        np.ones(n),
        np.full(n, 0.5),
        (64, 16),
    )
    interior = max(abs(polarity(p, sym, params)) for p in list(sym)[2:-2])
    check(
        5,
        hits / n_frames >= 0.99 and interior <= 1e-9,
        f"polarity max within t_d of a true endpoint in {hits}/{n_frames} frames "
        f"(>= 99%), interior symmetric score {interior:.2e} (<= 1e-9)",
    )


def make_segment(intensities, x0: float, y: float) -> CurveSegment:
    intens = np.asarray(intensities, dtype=np.float64)
    n = len(intens)
    pos = np.stack([x0 + np.arange(n, dtype=np.float64), np.full(n, y)], axis=1)
    return CurveSegment(
        positions=pos,
        tangents=np.tile([1.0, 0.0], (n, 1)),
        intensities=intens,
        responses=np.ones(n),
    )


def reversed_segment(seg: CurveSegment) -> CurveSegment:
    return CurveSegment(
        positions=seg.positions[::-1].copy(),
        tangents=seg.tangents[::-1].copy(),
        intensities=seg.intensities[::-1].copy(),
        responses=seg.responses[::-1].copy(),
    )


def test_criterion_06_linking_properties():
    rng = np.random.default_rng(616161)
    params = LinkParams()
    n_trials, exact = 1000, True
    for _ in range(n_trials):
        n_seg = int(rng.integers(2, 6))
        slots = rng.permutation(n_seg)
        segments, meta = [], []
        for j in range(n_seg):
            n = int(rng.integers(10, 22))
            lo = 0.05 + 0.9 * slots[j] / n_seg
            intens = np.linspace(lo, lo + 0.05, n)
            if rng.random() < 0.5:
                intens = intens[::-1]
            y = 7.0 * j
            segments.append(make_segment(intens, float(rng.uniform(0, 300)), y))
            meta.append((y, n))
        expected_ys = {y for y, n in meta if n >= params.t_c}
        try:
            base = link_segments(segments, params)
        except NoSegmentsError:
            exact = exact and not expected_ys
            continue
        kept = set(np.unique(base.positions[:, 1])) == expected_ys and len(
            base.positions
        ) == sum(n for y, n in meta if n >= params.t_c)
        order = [segments[k] for k in rng.permutation(n_seg)]
        permuted = link_segments(order, params)
        rev = link_segments([reversed_segment(s) for s in segments], params)
        exact = (
            exact
            and kept
            and np.array_equal(permuted.positions, base.positions)
            and np.array_equal(permuted.intensities, base.intensities)
            and np.array_equal(rev.positions, base.positions)
            and np.array_equal(rev.intensities, base.intensities)
        )
    check(
        6,
        exact,
        f"permutation/reversal invariance and exact t_c filtering over {n_trials} "
        f"randomized segment sets: {exact}",
    )


def test_criterion_07_metric_identities():
    rng = np.random.default_rng(77)
    a = GradientMap(rng.uniform(0.0, 0.9, size=(64, 80)))
    b = GradientMap(a.values + 0.1)
    psnr_id = psnr(a, a)
    psnr_shift = psnr(b, a)
    line = Polyline(
        np.stack([np.linspace(5, 90, 40), 20 + 8 * np.sin(np.linspace(0, 3, 40))], axis=1),
        np.linspace(0.0, 1.0, 40),
    )
    ottp_id = ottp(line, line).overall
    gt = Polyline(
        np.stack([25.0 * np.arange(8), np.zeros(8)], axis=1), np.linspace(0, 1, 8)
    )
    shifted = Polyline(gt.points + np.array([3.0, 4.0]), gt.params)
    rep = ottp(shifted, gt)
    ok = (
        math.isinf(psnr_id)
        and abs(psnr_shift - 20.0) <= 1e-9
        and ottp_id == 0.0
        and abs(rep.overall - 5.0) <= 0.01
    )
    check(
        7,
        ok,
        f"psnr identity {psnr_id}, 0.1-shift {psnr_shift:.12f} dB (20 +/- 1e-9), "
        f"ottp identity {ottp_id}, (3,4)-shift {rep.overall:.6f} px (5.0 +/- 0.01)",
    )


def test_criterion_08_performance():
    gt, conj = generate_scene_pair(SceneConfig(width=512, height=384, seed=0))
    for _ in range(2):  # warm caches and allocator
        reconstruct(gt.gradient, conj)
    totals = []
    for _ in range(15):
        res = reconstruct(gt.gradient, conj)
        totals.append(sum(res.timings.values()))
    median = statistics.median(totals)
    check(8, median <= 66.0, f"median reconstruct {median:.1f} ms on 512x384 (<= 66 ms)")


def salt_bars(values, seed, fraction=0.01, bar_h=3, bar_w=15, value=0.7):
    """Structured false positives: 1% of pixels as bright bars in g only."""
    rng = np.random.default_rng(seed)
    out = values.copy()
    h, w = out.shape
    n_bars = int(round(fraction * h * w / (bar_h * bar_w)))
    for _ in range(n_bars):
        horizontal = rng.random() < 0.5
        bh, bw = (bar_h, bar_w) if horizontal else (bar_w, bar_h)
        y = int(rng.integers(0, h - bh))
        x = int(rng.integers(0, w - bw))
        out[y : y + bh, x : x + bw] = value
    return GradientMap(np.clip(out, 0.0, 1.0))


def test_criterion_09_fusion_denoising():
    base = SceneConfig(width=512, height=384, seed=5150)
    nofuse = PipelineConfig(mask_tolerance=1e9)
    n_frames = 30
    deltas_fused, deltas_nofuse = [], []
    det_fused = det_nofuse = 0
    for i in range(n_frames):
        cfg = scene_config_for_index(base, i)
        gt, conj = generate_scene_pair(cfg)
        clean_fused = ottp(reconstruct(gt.gradient, conj).sampled, gt.centerline).overall
        clean_nofuse = ottp(
            reconstruct(gt.gradient, conj, nofuse).sampled, gt.centerline
        ).overall
        g = salt_bars(gt.gradient.values, cfg.seed ^ 0x5A17)
        fused = reconstruct(g, conj)
        plain = reconstruct(g, conj, nofuse)
        det_fused += fused.detected
        det_nofuse += plain.detected
        if fused.detected:
            deltas_fused.append(ottp(fused.sampled, gt.centerline).overall - clean_fused)
        if plain.detected:
            deltas_nofuse.append(ottp(plain.sampled, gt.centerline).overall - clean_nofuse)
    mean_fused = statistics.fmean(deltas_fused) if deltas_fused else math.inf
    mean_nofuse = statistics.fmean(deltas_nofuse) if deltas_nofuse else math.inf
    ok = (
        det_fused == n_frames
        and det_nofuse == n_frames
        and mean_fused < 0.5
        and mean_nofuse > mean_fused
    )
    check(
        9,
        ok,
        f"salt-noise OTTP degradation: fused {mean_fused:+.3f} px (< 0.5), "
        f"without fusion {mean_nofuse:+.3f} px (strictly more), "
        f"detection {det_fused}/{n_frames} fused, {det_nofuse}/{n_frames} unfused",
    )


def tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("THREADTRACE_THREADS", "1")
    gen_args = ["--count", "2", "--seed", "909"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen", "--out", str(a), *gen_args]) == 0
    assert main(["gen", "--out", str(b), *gen_args]) == 0
    ta, tb = tree_bytes(a), tree_bytes(b)
    gen_ok = list(ta) == list(tb) and all(ta[k] == tb[k] for k in ta)

    files, _ = load_manifest(a / MANIFEST_NAME)
    outputs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        out.mkdir()
        rc = main(
            [
                "reconstruct",
                "--gradient",
                str(files[0].gradient),
                "--conjugate",
                str(files[0].conjugate),
                "--out-spline",
                str(out / "spline.json"),
                "--out-overlay",
                str(out / "overlay.png"),
            ]
        )
        assert rc == 0
        outputs.append((out / "spline.json").read_bytes() + (out / "overlay.png").read_bytes())
    rec_ok = outputs[0] == outputs[1]
    check(
        10,
        gen_ok and rec_ok,
        f"gen --seed twice byte-identical: {gen_ok}, "
        f"reconstruct outputs byte-identical: {rec_ok}",
    )

"""Command-line interface: gen, reconstruct, eval, bench.

Exit codes: 0 success, 1 input/usage error, 2 internal error. Pipeline
parameters may come from a JSON config file (keys identical to the flag
names) with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import report
from .dataset import (
    load_manifest,
    load_prediction_points,
    load_scene,
    resolve_workers,
    write_manifest,
    write_scene,
)
from .errors import MapFormatError, ThreadTraceError
from .metrics import ottp, psnr
from .pipeline import PipelineConfig, reconstruct
from .raster import read_gradient_map
from .scenes import (
    SceneConfig,
    apply_degradation,
    generate_scene_pair,
    place_occluders,
    scene_config_for_index,
)
from .splinefit import spline_to_json

_CONFIG_FIELDS = {f.name for f in dataclass_fields(PipelineConfig)}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON file with pipeline keys")
    p.add_argument("--w", type=float, default=None, help="thread width in pixels")
    p.add_argument("--t-l", dest="t_l", type=float, default=None, help="lower response threshold")
    p.add_argument("--t-u", dest="t_u", type=float, default=None, help="upper response threshold")
    p.add_argument("--t-d", dest="t_d", type=float, default=None, help="growth distance threshold")
    p.add_argument("--t-v", dest="t_v", type=float, default=None, help="growth intensity threshold")
    p.add_argument("--t-c", dest="t_c", type=int, default=None, help="minimum points per segment")
    p.add_argument("--mask-tolerance", type=float, default=None, help="conjugate-sum tolerance")
    p.add_argument("--mask-threshold", type=float, default=None, help="mask sum threshold")
    p.add_argument("--smoothing", type=float, default=None, help="spline roughness weight")
    p.add_argument("--n-samples", type=int, default=None, help="spline sample count")


def _build_config(args) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MapFormatError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise MapFormatError("config file must hold a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for name in _CONFIG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return PipelineConfig(**values)


def build_parser() -> _Parser:
    parser = _Parser(prog="threadtrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset directory")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--count", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--frame-width", type=int, default=512)
    gen.add_argument("--frame-height", type=int, default=384)
    gen.add_argument("--control-points", type=int, default=12)
    gen.add_argument("--min-crossings", type=int, default=0)
    gen.add_argument("--max-crossings", type=int, default=2)
    gen.add_argument("--noise-sigma", type=float, default=0.0)
    gen.add_argument("--occluders", type=int, default=0)
    gen.add_argument("--occluder-size", type=int, default=40)
    _add_pipeline_flags(gen)
    gen.set_defaults(func=_cmd_gen)

    rec = sub.add_parser("reconstruct", help="reconstruct a spline from gradient maps")
    rec.add_argument("--gradient", type=Path, required=True)
    rec.add_argument("--conjugate", type=Path, default=None)
    rec.add_argument("--out-spline", type=Path, default=None)
    rec.add_argument("--out-overlay", type=Path, default=None)
    _add_pipeline_flags(rec)
    rec.set_defaults(func=_cmd_reconstruct)

    ev = sub.add_parser("eval", help="evaluate reconstructions over a dataset manifest")
    ev.add_argument("--manifest", type=Path, required=True)
    ev.add_argument("--out", type=Path, required=True)
    _add_pipeline_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    bench = sub.add_parser("bench", help="time the reconstruction stages")
    bench.add_argument("--frame-width", type=int, default=512)
    bench.add_argument("--frame-height", type=int, default=384)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--repeats", type=int, default=20)
    bench.add_argument("--out", type=Path, default=None)
    _add_pipeline_flags(bench)
    bench.set_defaults(func=_cmd_bench)
    return parser


def _gen_payload(task):
    index, scfg, occluder_size = task
    gt, conj = generate_scene_pair(scfg)
    grad_out, conj_out = gt.gradient, conj
    if scfg.occlusion_rects > 0 or scfg.noise_sigma > 0:
        rects = (
            place_occluders(gt, scfg.occlusion_rects, occluder_size, scfg.seed)
            if scfg.occlusion_rects > 0
            else []
        )
        grad_out = apply_degradation(grad_out, scfg.noise_sigma, rects, scfg.seed ^ 0xA5A5)
        conj_out = apply_degradation(conj_out, scfg.noise_sigma, rects, scfg.seed ^ 0x5A5A)
    return index, scfg.seed, gt, grad_out, conj_out


def _cmd_gen(args) -> int:
    cfg = _build_config(args)
    base = SceneConfig(
        width=args.frame_width,
        height=args.frame_height,
        thread_width=cfg.w,
        n_control_points=args.control_points,
        min_self_intersections=args.min_crossings,
        max_self_intersections=args.max_crossings,
        occlusion_rects=args.occluders,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    if args.count < 1:
        raise ValueError("--count must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (i, scene_config_for_index(base, i), args.occluder_size) for i in range(args.count)
    ]
    workers = resolve_workers(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            produced = list(ex.map(_gen_payload, tasks))
    else:
        produced = [_gen_payload(t) for t in tasks]
    entries = [
        write_scene(out, index, seed, gt, grad_out, conj_out)
        for index, seed, gt, grad_out, conj_out in produced
    ]
    manifest_cfg = {
        "count": args.count,
        "seed": args.seed,
        "width": args.frame_width,
        "height": args.frame_height,
        "thread_width": cfg.w,
        "n_control_points": args.control_points,
        "min_self_intersections": args.min_crossings,
        "max_self_intersections": args.max_crossings,
        "noise_sigma": args.noise_sigma,
        "occluders": args.occluders,
        "occluder_size": args.occluder_size,
    }
    manifest = write_manifest(out, entries, manifest_cfg)
    print(f"wrote {len(entries)} scenes and {manifest.name} to {out}")
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _build_config(args)
    g = read_gradient_map(args.gradient)
    g_conj = read_gradient_map(args.conjugate) if args.conjugate else None
    result = reconstruct(g, g_conj, cfg)
    stem = args.gradient.parent / args.gradient.stem
    spline_path = args.out_spline or Path(f"{stem}_spline.json")
    overlay_path = args.out_overlay or Path(f"{stem}_overlay.png")
    report.save_overlay(overlay_path, result.fused_field, result.sampled)
    if result.detected:
        spline_path.write_text(spline_to_json(result.spline))
        print(f"spline: {spline_path}")
    else:
        print("no thread detected")
    print(f"overlay: {overlay_path}")
    total = sum(result.timings.values())
    stages = ", ".join(f"{k} {v:.1f}" for k, v in result.timings.items())
    print(f"timings: total {total:.1f} ms ({stages})")
    return 0


def _eval_one(task):
    files, cfg, thread_w = task
    gt, conj = load_scene(files, thread_w)
    entry = {"index": files.index, "seed": files.seed, "detected": False,
             "psnr_db": math.inf, "ottp_overall": None, "ottp_needle_end": None,
             "ottp_tail_end": None, "reconstruct_ms": None}
    pred = None
    if files.prediction_points is not None:
        pred = load_prediction_points(files.prediction_points)
        if files.prediction_gradient is not None:
            entry["psnr_db"] = psnr(read_gradient_map(files.prediction_gradient), gt.gradient)
    elif files.prediction_gradient is not None:
        pg = read_gradient_map(files.prediction_gradient)
        pc = (
            read_gradient_map(files.prediction_conjugate)
            if files.prediction_conjugate is not None
            else None
        )
        entry["psnr_db"] = psnr(pg, gt.gradient)
        result = reconstruct(pg, pc, cfg)
        pred = result.sampled
        entry["reconstruct_ms"] = sum(result.timings.values())
    else:
        result = reconstruct(gt.gradient, conj, cfg)
        pred = result.sampled
        entry["reconstruct_ms"] = sum(result.timings.values())
    if pred is not None and len(pred) > 0:
        rep = ottp(pred, gt.centerline)
        entry.update(
            detected=True,
            ottp_overall=rep.overall,
            ottp_needle_end=rep.needle_end,
            ottp_tail_end=rep.tail_end,
        )
    return entry


def _cmd_eval(args) -> int:
    scene_files, mconfig = load_manifest(args.manifest)
    if not scene_files:
        raise MapFormatError(f"manifest {args.manifest} holds no scenes")
    cfg = _build_config(args)
    thread_w = float(mconfig.get("thread_width", cfg.w))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(files, cfg, thread_w) for files in scene_files]
    workers = resolve_workers(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            frames = list(ex.map(_eval_one, tasks))
    else:
        frames = [_eval_one(t) for t in tasks]
    frames.sort(key=lambda f: f["index"])

    detected = [f for f in frames if f["detected"]]
    finite_psnr = [f["psnr_db"] for f in frames if math.isfinite(f["psnr_db"])]
    agg_psnr = statistics.fmean(finite_psnr) if finite_psnr else math.inf

    def agg(key):
        vals = [f[key] for f in detected]
        return statistics.fmean(vals) if vals else math.nan

    doc = {
        "psnr_db": "inf" if math.isinf(agg_psnr) else agg_psnr,
        "ottp": {
            "overall": agg("ottp_overall"),
            "needle_end": agg("ottp_needle_end"),
            "tail_end": agg("ottp_tail_end"),
        },
        "n_frames": len(frames),
        "n_detected": len(detected),
        "frames": [
            {**f, "psnr_db": "inf" if math.isinf(f["psnr_db"]) else f["psnr_db"]}
            for f in frames
        ],
    }
    (out / "metrics.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    report.write_per_frame_csv(out / "per_frame.csv", frames)
    report.save_eval_figures(out, frames)
    print(
        f"frames: {len(frames)}, detected: {len(detected)}, "
        f"OTTP overall: {doc['ottp']['overall']:.3f} px "
        f"(needle {doc['ottp']['needle_end']:.3f}, tail {doc['ottp']['tail_end']:.3f}), "
        f"PSNR: {doc['psnr_db']}"
    )
    print(f"report written to {out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _build_config(args)
    if args.repeats < 1:
        raise ValueError("--repeats must be at least 1")
    scfg = SceneConfig(
        width=args.frame_width,
        height=args.frame_height,
        thread_width=cfg.w,
        seed=args.seed,
    )
    gt, conj = generate_scene_pair(scfg)
    for _ in range(2):  # warm caches and allocator
        reconstruct(gt.gradient, conj, cfg)
    totals = []
    stages: dict[str, list[float]] = {}
    for _ in range(args.repeats):
        result = reconstruct(gt.gradient, conj, cfg)
        totals.append(sum(result.timings.values()))
        for key, val in result.timings.items():
            stages.setdefault(key, []).append(val)
    summary = {
        "frame": [args.frame_width, args.frame_height],
        "repeats": args.repeats,
        "total_ms": {
            "median": statistics.median(totals),
            "mean": statistics.fmean(totals),
            "min": min(totals),
            "max": max(totals),
        },
        "stages_ms": {k: statistics.median(v) for k, v in stages.items()},
    }
    print(
        f"reconstruct {args.frame_width}x{args.frame_height}: "
        f"median {summary['total_ms']['median']:.1f} ms over {args.repeats} runs "
        f"(mean {summary['total_ms']['mean']:.1f}, min {summary['total_ms']['min']:.1f}, "
        f"max {summary['total_ms']['max']:.1f})"
    )
    for key, val in summary["stages_ms"].items():
        print(f"  {key}: {val:.1f} ms")
    if args.out is not None:
        Path(args.out).write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
        print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ThreadTraceError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"threadtrace: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Dataset directory layout: per-scene map files plus a manifest JSON.

A dataset directory holds, per scene, the gradient and conjugate maps as
16-bit PNGs, the overlap map as an 8-bit PNG, and the ground-truth JSON.
The manifest lists relative paths and the per-scene seeds. Evaluation may
read an optional "prediction" entry per scene: either replacement gradient
maps or an explicit polyline JSON to score directly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MapFormatError
from .raster import (
    BinaryMask,
    GradientMap,
    Polyline,
    SceneGroundTruth,
    ground_truth_from_json,
    ground_truth_to_json,
    read_gradient_map,
    read_overlap_map,
    write_gradient_map,
    write_overlap_map,
)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class SceneFiles:
    """Resolved absolute paths and metadata for one manifest entry."""

    index: int
    seed: int
    gradient: Path
    conjugate: Path
    overlap: Path
    ground_truth: Path
    prediction_gradient: Path | None = None
    prediction_conjugate: Path | None = None
    prediction_points: Path | None = None


def write_scene(
    out_dir: str | Path,
    index: int,
    seed: int,
    gt: SceneGroundTruth,
    gradient: GradientMap,
    conjugate: GradientMap,
) -> dict:
    """Write one scene's files; returns its manifest entry (relative paths).

    The written gradient/conjugate may differ from gt.gradient when
    degradation was applied.
    """
    out = Path(out_dir)
    stem = f"scene_{index:04d}"
    names = {
        "gradient": f"{stem}_gradient.png",
        "conjugate": f"{stem}_conjugate.png",
        "overlap": f"{stem}_overlap.png",
        "ground_truth": f"{stem}_gt.json",
    }
    write_gradient_map(out / names["gradient"], gradient)
    write_gradient_map(out / names["conjugate"], conjugate)
    write_overlap_map(out / names["overlap"], gt.overlap)
    (out / names["ground_truth"]).write_text(ground_truth_to_json(gt) + "\n")
    return {"index": index, "seed": seed, **names}


def write_manifest(out_dir: str | Path, entries: list[dict], config: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    doc = {"config": config, "scenes": entries}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def load_manifest(manifest_path: str | Path) -> tuple[list[SceneFiles], dict]:
    """Parse a manifest; returns resolved per-scene paths and the config."""
    path = Path(manifest_path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MapFormatError(f"cannot read manifest {path}: {exc}") from exc
    scenes = doc.get("scenes")
    if not isinstance(scenes, list):
        raise MapFormatError(f"manifest {path} lacks a 'scenes' list")
    base = path.parent
    out = []
    for i, entry in enumerate(scenes):
        try:
            out.append(
                SceneFiles(
                    index=int(entry.get("index", i)),
                    seed=int(entry.get("seed", 0)),
                    gradient=base / entry["gradient"],
                    conjugate=base / entry["conjugate"],
                    overlap=base / entry["overlap"],
                    ground_truth=base / entry["ground_truth"],
                    prediction_gradient=(
                        base / entry["prediction_gradient"]
                        if "prediction_gradient" in entry
                        else None
                    ),
                    prediction_conjugate=(
                        base / entry["prediction_conjugate"]
                        if "prediction_conjugate" in entry
                        else None
                    ),
                    prediction_points=(
                        base / entry["prediction"] if "prediction" in entry else None
                    ),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MapFormatError(f"manifest scene entry {i} is malformed: {exc}") from exc
    return out, doc.get("config", {})


def load_scene(files: SceneFiles, thread_width: float = 4.0) -> tuple[SceneGroundTruth, GradientMap]:
    """Load one scene's ground truth plus its conjugate map.

    The mask is derived from the stored gradient, which matches the render
    exactly for clean datasets (degraded ones only feed curve metrics).
    """
    gradient = read_gradient_map(files.gradient)
    conjugate = read_gradient_map(files.conjugate)
    overlap = read_overlap_map(files.overlap)
    gt = ground_truth_from_json(
        files.ground_truth.read_text(),
        gradient,
        overlap,
        BinaryMask(gradient.values > 0),
        thread_width=thread_width,
    )
    return gt, conjugate


def load_prediction_points(path: str | Path) -> Polyline:
    """Read a polyline JSON: {"points": [[x, y], ...], "params": [...]?}."""
    try:
        doc = json.loads(Path(path).read_text())
        pts = np.asarray(doc["points"], dtype=np.float64)
        params = doc.get("params")
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"cannot read prediction polyline {path}: {exc}") from exc
    return Polyline(pts, None if params is None else np.asarray(params, dtype=np.float64))


def resolve_workers(n_tasks: int) -> int:
    """Worker count for fan-out, capped by THREADTRACE_THREADS."""
    cap = os.environ.get("THREADTRACE_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise ValueError(f"THREADTRACE_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))

"""Scene tensors for toy training, derived from a threadtrace dataset.

The network input is a synthetic camera-like image: the thread rendered over
a textured noise background, alpha-blended with the exact coverage implied by
the paired gradient maps. The thread color ramps along the arclength; a flat
color would leave the travel direction invisible to a per-pixel estimator and
the ordered maps unlearnable. The maps themselves are the regression targets,
never part of the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from threadtrace.dataset import MANIFEST_NAME, SceneFiles, load_manifest
from threadtrace.raster import read_gradient_map, read_overlap_map, remap_param

# Paired maps sum to this constant on fully covered thread pixels.
FULL_SCALE = remap_param(0.0) + remap_param(1.0)
NEEDLE_COLOR = np.array([0.13, 0.52, 0.18])
TAIL_COLOR = np.array([0.82, 0.30, 0.55])
_INPUT_SEED = 0x1A6E
_TEXTURE_CELL = 8


@dataclass(frozen=True)
class ToyScene:
    """One training sample; tensors carry a leading batch axis of 1."""

    index: int
    seed: int
    files: SceneFiles
    image: torch.Tensor  # (1, 3, H, W)
    gradient: torch.Tensor  # (1, 1, H, W)
    conjugate: torch.Tensor  # (1, 1, H, W)
    overlap: torch.Tensor  # (1, 3, H, W) one-hot
    mask: torch.Tensor  # (1, 1, H, W) binary float


def _background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    cells_y = height // _TEXTURE_CELL + 1
    cells_x = width // _TEXTURE_CELL + 1
    coarse = rng.uniform(0.25, 0.75, size=(cells_y, cells_x, 3))
    tex = np.kron(coarse, np.ones((_TEXTURE_CELL, _TEXTURE_CELL, 1)))[:height, :width]
    tex = tex + rng.normal(0.0, 0.02, size=(height, width, 3))
    return np.clip(tex, 0.0, 1.0)


def synthesize_image(gradient: np.ndarray, conjugate: np.ndarray, seed: int) -> np.ndarray:
    """Arclength-tinted thread over a textured background; returns (H, W, 3)."""
    rng = np.random.default_rng(seed ^ _INPUT_SEED)
    height, width = gradient.shape
    coverage = np.clip((gradient + conjugate) / FULL_SCALE, 0.0, 1.0)
    # Coverage scales both maps equally on anti-aliased fringes, so dividing
    # it out recovers the encoded parameter before inverting the remap.
    full = np.where(coverage > 1e-6, gradient / np.maximum(coverage, 1e-6), 0.0)
    s = np.clip((full - remap_param(0.0)) / (remap_param(1.0) - remap_param(0.0)), 0.0, 1.0)
    color = NEEDLE_COLOR + s[..., None] * (TAIL_COLOR - NEEDLE_COLOR)
    alpha = coverage[..., None]
    return (1.0 - alpha) * _background(rng, height, width) + alpha * color


def _to_scene(files: SceneFiles) -> ToyScene:
    g = read_gradient_map(files.gradient).values
    gc = read_gradient_map(files.conjugate).values
    labels = read_overlap_map(files.overlap).labels
    image = synthesize_image(g, gc, files.seed)
    one_hot = np.moveaxis(np.eye(3, dtype=np.float32)[labels], -1, 0)
    mask = ((g + gc) > 0.5).astype(np.float32)
    as_t = lambda a: torch.from_numpy(np.ascontiguousarray(a, dtype=np.float32))
    return ToyScene(
        index=files.index,
        seed=files.seed,
        files=files,
        image=as_t(np.moveaxis(image, -1, 0)).unsqueeze(0),
        gradient=as_t(g).view(1, 1, *g.shape),
        conjugate=as_t(gc).view(1, 1, *gc.shape),
        overlap=as_t(one_hot).unsqueeze(0),
        mask=as_t(mask).view(1, 1, *mask.shape),
    )


def load_toy_scenes(data_dir: str | Path) -> tuple[list[ToyScene], dict]:
    """Load every manifest scene as tensors; fails before any training."""
    files, config = load_manifest(Path(data_dir) / MANIFEST_NAME)
    return [_to_scene(f) for f in files], config

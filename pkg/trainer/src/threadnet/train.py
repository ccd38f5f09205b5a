"""Joint training of the twin two-stage estimators, with artifact export.

Training follows the documented recipe: Adam, batch size 1, both stages and
both twins optimized jointly, plus the paired-sum consistency term. All
artifacts (checkpoint, training log, exported maps, export manifest) are
written atomically via a temp file and rename.
"""

from __future__ import annotations

import json
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from threadtrace.raster import GradientMap, encode_gradient_map

from .data import ToyScene, load_toy_scenes
from .losses import (
    LossWeights,
    conjugate_constraint_loss,
    loss_gradient,
    loss_overlap,
    loss_refined,
    total_loss,
)
from .model import DmsdModel

CHECKPOINT_NAME = "checkpoint.pt"
LOG_NAME = "training_log.json"
EXPORT_MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4
    seed: int = 0
    lr: float = 2e-3
    holdout_fraction: float = 0.2
    base_channels: int = 8
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout fraction must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Path
    log: Path
    export_manifest: Path
    epoch_totals: list[float]
    holdout_constraint: float


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    # Nondeterministic kernels are refused outright where the backend allows.
    try:
        torch.use_deterministic_algorithms(True)
    except (AttributeError, RuntimeError):
        pass


def _atomic_bytes(path: Path, data: bytes) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path


def _atomic_torch_save(path: Path, payload) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def _scene_loss(model: DmsdModel, scene: ToyScene, weights: LossWeights):
    out = model(scene.image)
    branch = total_loss(
        loss_overlap(out.overlap[0], scene.overlap[0], weights),
        loss_gradient(out.gradient, scene.gradient),
        loss_refined(out.refined, scene.gradient),
    )
    conj = total_loss(
        loss_overlap(out.conj_overlap[0], scene.overlap[0], weights),
        loss_gradient(out.conj_gradient, scene.conjugate),
        loss_refined(out.conj_refined, scene.conjugate),
    )
    constraint = conjugate_constraint_loss(out.refined, out.conj_refined, scene.mask)
    return branch + conj + constraint, float(constraint.detach())


def _export_scene(model: DmsdModel, scene: ToyScene, out_dir: Path) -> dict:
    with torch.no_grad():
        out = model(scene.image)
    names = {}
    for kind, tensor in (("gradient", out.refined), ("conjugate", out.conj_refined)):
        values = np.clip(tensor[0, 0].numpy().astype(np.float64), 0.0, 1.0)
        name = f"pred_{scene.index:04d}_{kind}.png"
        _atomic_bytes(out_dir / name, encode_gradient_map(GradientMap(values)))
        names[kind] = name
    rel = lambda p: os.path.relpath(p, out_dir)
    return {
        "index": scene.index,
        "seed": scene.seed,
        "gradient": rel(scene.files.gradient),
        "conjugate": rel(scene.files.conjugate),
        "overlap": rel(scene.files.overlap),
        "ground_truth": rel(scene.files.ground_truth),
        "prediction_gradient": names["gradient"],
        "prediction_conjugate": names["conjugate"],
    }


def train_toy(
    data_dir: str | Path,
    out_dir: str | Path,
    cfg: TrainConfig | None = None,
    quiet: bool = False,
) -> TrainResult:
    """Train on a scene dataset; export held-out predictions and artifacts."""
    cfg = cfg or TrainConfig()
    scenes, data_config = load_toy_scenes(data_dir)
    n_holdout = max(1, round(cfg.holdout_fraction * len(scenes)))
    if len(scenes) - n_holdout < 1:
        raise ValueError(f"dataset of {len(scenes)} scenes is too small to split")
    train_scenes, held_scenes = scenes[:-n_holdout], scenes[-n_holdout:]

    _seed_everything(cfg.seed)
    model = DmsdModel(cfg.base_channels)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    # Annealing the step size settles the final epochs near a local optimum
    # instead of bouncing on the gradient-noise floor of a fixed rate.
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs)
    order_rng = np.random.default_rng(cfg.seed)

    epoch_rows = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        totals, constraints = [], []
        for i in order_rng.permutation(len(train_scenes)):
            optimizer.zero_grad(set_to_none=True)
            loss, constraint = _scene_loss(model, train_scenes[int(i)], cfg.weights)
            loss.backward()
            optimizer.step()
            totals.append(float(loss.detach()))
            constraints.append(constraint)
        scheduler.step()
        row = {
            "epoch": epoch,
            "total": statistics.fmean(totals),
            "constraint": statistics.fmean(constraints),
        }
        epoch_rows.append(row)
        if not quiet:
            print(f"epoch {epoch}/{cfg.epochs}: total {row['total']:.1f} "
                  f"constraint {row['constraint']:.4f}")

    model.eval()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    held_constraints = []
    entries = []
    for scene in held_scenes:
        with torch.no_grad():
            pred = model(scene.image)
            held_constraints.append(
                float(conjugate_constraint_loss(pred.refined, pred.conj_refined, scene.mask))
            )
        entries.append(_export_scene(model, scene, out))
    holdout_constraint = statistics.fmean(held_constraints)

    manifest_doc = {
        "config": {**data_config, "holdout_scenes": len(held_scenes)},
        "scenes": entries,
    }
    export_manifest = _atomic_bytes(
        out / EXPORT_MANIFEST_NAME,
        (json.dumps(manifest_doc, sort_keys=True, indent=1) + "\n").encode(),
    )
    checkpoint = _atomic_torch_save(
        out / CHECKPOINT_NAME,
        {"model": model.state_dict(), "base_channels": cfg.base_channels,
         "seed": cfg.seed, "epochs": cfg.epochs},
    )
    log_doc = {
        "config": {
            "epochs": cfg.epochs,
            "seed": cfg.seed,
            "lr": cfg.lr,
            "holdout_fraction": cfg.holdout_fraction,
            "base_channels": cfg.base_channels,
            "weights": [cfg.weights.background, cfg.weights.non_overlap, cfg.weights.overlap],
            "train_scenes": len(train_scenes),
            "holdout_scenes": len(held_scenes),
        },
        "epochs": epoch_rows,
        "holdout": {"constraint": holdout_constraint, "n_scenes": len(held_scenes)},
    }
    log = _atomic_bytes(out / LOG_NAME, (json.dumps(log_doc, indent=1) + "\n").encode())
    if not quiet:
        print(f"holdout constraint {holdout_constraint:.4f} over {len(held_scenes)} scenes")
        print(f"artifacts written to {out}")
    return TrainResult(
        checkpoint=checkpoint,
        log=log,
        export_manifest=export_manifest,
        epoch_totals=[row["total"] for row in epoch_rows],
        holdout_constraint=holdout_constraint,
    )

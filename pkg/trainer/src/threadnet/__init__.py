"""threadnet: toy twin two-stage estimator of gradient road maps, trained on
threadtrace scenes and exporting maps in the threadtrace file formats."""

from .data import FULL_SCALE, ToyScene, load_toy_scenes, synthesize_image
from .losses import (
    LossWeights,
    conjugate_constraint_loss,
    loss_gradient,
    loss_overlap,
    loss_refined,
    total_loss,
)
from .model import (
    DOWNSAMPLE_FACTOR,
    IMAGE_CHANNELS,
    OVERLAP_CLASSES,
    STAGE2_CHANNELS,
    DmsdModel,
    DmsdOutputs,
)
from .train import (
    CHECKPOINT_NAME,
    EXPORT_MANIFEST_NAME,
    LOG_NAME,
    TrainConfig,
    TrainResult,
    train_toy,
)

__all__ = [
    "FULL_SCALE",
    "ToyScene",
    "load_toy_scenes",
    "synthesize_image",
    "LossWeights",
    "conjugate_constraint_loss",
    "loss_gradient",
    "loss_overlap",
    "loss_refined",
    "total_loss",
    "DOWNSAMPLE_FACTOR",
    "IMAGE_CHANNELS",
    "OVERLAP_CLASSES",
    "STAGE2_CHANNELS",
    "DmsdModel",
    "DmsdOutputs",
    "CHECKPOINT_NAME",
    "EXPORT_MANIFEST_NAME",
    "LOG_NAME",
    "TrainConfig",
    "TrainResult",
    "train_toy",
]

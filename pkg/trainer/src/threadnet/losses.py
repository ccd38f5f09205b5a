"""Training losses for the two-stage gradient-map estimator.

The gradient terms are kept in their sum-over-pixels form (per-pixel means
are derived for logging only), so the documented unit examples evaluate
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

# Floor for log() of the predicted class probability; one-hot targets zero
# out every other class term, so a perfect prediction still scores exactly 0.
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Per-class weights of the overlap loss, broadcast over pixels."""

    background: float = 1.0
    non_overlap: float = 2.0
    overlap: float = 10.0

    def __post_init__(self):
        if min(self.background, self.non_overlap, self.overlap) <= 0:
            raise ValueError("class weights must be positive")
        if self.overlap <= max(self.background, self.non_overlap):
            raise ValueError("overlap weight must exceed the other class weights")

    def as_tensor(self, dtype=torch.float32) -> torch.Tensor:
        return torch.tensor(
            [self.background, self.non_overlap, self.overlap], dtype=dtype
        ).view(3, 1, 1)


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def loss_gradient(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum of absolute per-pixel differences between gradient maps."""
    _check_same_shape(pred, target, "gradient map")
    return (pred - target).abs().sum()


def loss_refined(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum of squared per-pixel differences for the refined gradient map."""
    _check_same_shape(pred, target, "refined gradient map")
    return ((pred - target) ** 2).sum()


def loss_overlap(
    probs: torch.Tensor, target_one_hot: torch.Tensor, weights: LossWeights
) -> torch.Tensor:
    """Weighted cross entropy between a per-pixel class distribution and a
    one-hot truth; class weights broadcast over pixels.

    Expects channel-first (3, H, W) tensors.
    """
    _check_same_shape(probs, target_one_hot, "overlap map")
    if probs.shape[0] != 3:
        raise ValueError(f"expected 3 class channels, got {probs.shape[0]}")
    w = weights.as_tensor(dtype=probs.dtype).to(probs.device)
    log_p = torch.log(probs.clamp_min(_LOG_FLOOR))
    return -(w * target_one_hot * log_p).sum()


def total_loss(l_o, l_g, l_g_refined):
    """Exact sum of the three stage losses."""
    terms = (l_o, l_g, l_g_refined)
    for t in terms:
        value = t.detach() if isinstance(t, torch.Tensor) else torch.as_tensor(t)
        if not torch.isfinite(value).all():
            raise ValueError("loss terms must be finite")
    return l_o + l_g + l_g_refined


def conjugate_constraint_loss(
    g: torch.Tensor, g_conj: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Mean absolute deviation of the paired-map sum from the thread mask."""
    _check_same_shape(g, g_conj, "gradient map pair")
    _check_same_shape(g, mask, "gradient map / mask")
    return (g + g_conj - mask).abs().mean()

"""Training loss: binary cross-entropy plus soft Dice, summed unweighted.

Definitions mirror the pipeline's metrics module so the two agree on any
fixed batch: BCE clamps probabilities to [1e-7, 1 - 1e-7] and averages over
pixels; Dice uses additive smoothing 1.0 and is computed per sample, then
averaged over the batch.
"""

from __future__ import annotations

import torch

BCE_EPSILON = 1e-7
DICE_SMOOTHING = 1.0


def bce_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    clamped = probs.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON)
    terms = labels * torch.log(clamped) + (1.0 - labels) * torch.log(1.0 - clamped)
    return -terms.mean()


def dice_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    flat_p = probs.reshape(probs.shape[0], -1)
    flat_y = labels.reshape(labels.shape[0], -1)
    inter = (flat_p * flat_y).sum(dim=1)
    total = flat_p.sum(dim=1) + flat_y.sum(dim=1)
    per_sample = 1.0 - (2.0 * inter + DICE_SMOOTHING) / (total + DICE_SMOOTHING)
    return per_sample.mean()


def combined_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return bce_loss(probs, labels) + dice_loss(probs, labels)

"""Seeded training loop: RMSProp, batch 16, BCE + Dice, plateau-driven LR.

The learning rate is adjusted by checking validation loss every two epochs;
on a plateau (no improvement over the previous check) it halves.  Runs are
fully deterministic for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch

from .data import load_arrays, pair_stacks_with_labels
from .losses import combined_loss
from .model import CHANNELS_BY_SATELLITE, SegmentationUNet, save_model


@dataclass(frozen=True)
class TrainSpec:
    satellite: str
    epochs: int
    seed: int = 0
    batch_size: int = 16
    lr: float = 2e-3
    val_fraction: float = 0.1
    lr_check_every: int = 2  # epochs between validation-loss checks
    plateau_factor: float = 0.5
    plateau_patience: int = 1  # checks without improvement before decay

    def __post_init__(self) -> None:
        if self.satellite not in CHANNELS_BY_SATELLITE:
            raise ValueError(f"unknown satellite {self.satellite!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainResult:
    model: SegmentationUNet
    curve: List[dict] = field(default_factory=list)

    def save_curve(self, path) -> None:
        Path(path).write_text(json.dumps(self.curve, indent=2) + "\n")


def _epoch_batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train(spec: TrainSpec, stacks_dir, corpus_dir) -> TrainResult:
    pairs = pair_stacks_with_labels(stacks_dir, corpus_dir, spec.satellite)
    if not pairs:
        raise ValueError(f"empty pair set for {spec.satellite} under {stacks_dir}")

    inputs_np, labels_np = load_arrays(pairs)
    channels = CHANNELS_BY_SATELLITE[spec.satellite]
    if inputs_np.shape[1] != channels:
        raise ValueError(
            f"channel mismatch: stacks have {inputs_np.shape[1]}, "
            f"{spec.satellite} needs {channels}"
        )

    torch.manual_seed(spec.seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    inputs = torch.from_numpy(inputs_np)
    labels = torch.from_numpy(labels_np)

    n_val = int(round(len(pairs) * spec.val_fraction))
    # pairs arrive sorted by stack path; hold out a deterministic tail slice
    train_x, train_y = inputs[: len(pairs) - n_val], labels[: len(pairs) - n_val]
    val_x, val_y = inputs[len(pairs) - n_val :], labels[len(pairs) - n_val :]

    model = SegmentationUNet(in_channels=channels)
    optimizer = torch.optim.RMSprop(model.parameters(), lr=spec.lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=spec.plateau_factor, patience=spec.plateau_patience
    )
    shuffler = torch.Generator().manual_seed(spec.seed)

    result = TrainResult(model=model)
    for epoch in range(spec.epochs):
        model.train()
        losses = []
        for batch in _epoch_batches(len(train_x), spec.batch_size, shuffler):
            optimizer.zero_grad()
            out = model(train_x[batch])
            loss = combined_loss(out, train_y[batch])
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_loss": None,
            "lr": optimizer.param_groups[0]["lr"],
        }

        if len(val_x) and (epoch + 1) % spec.lr_check_every == 0:
            model.eval()
            with torch.no_grad():
                val_losses = [
                    float(combined_loss(model(val_x[i : i + spec.batch_size]),
                                        val_y[i : i + spec.batch_size]))
                    for i in range(0, len(val_x), spec.batch_size)
                ]
            entry["val_loss"] = float(np.mean(val_losses))
            scheduler.step(entry["val_loss"])
        result.curve.append(entry)
    return result


def train_to_files(spec: TrainSpec, stacks_dir, corpus_dir, model_path, curve_path=None) -> TrainResult:
    result = train(spec, stacks_dir, corpus_dir)
    save_model(result.model, spec.satellite, model_path)
    if curve_path:
        result.save_curve(curve_path)
    return result

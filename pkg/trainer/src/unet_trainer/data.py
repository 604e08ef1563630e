"""Pair preprocessed stacks with their monthly label tiles."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .fgio import StackFile, find_labels, list_stacks, read_label


@dataclass(frozen=True)
class TrainingPair:
    stack: StackFile
    label_path: Path


def pair_stacks_with_labels(
    stacks_dir, corpus_dir, satellite: str
) -> List[TrainingPair]:
    """Every stack of `satellite` matched to the label of its cell and month.

    Stacks without a label tile are dropped; the caller decides whether an
    empty result is an error.
    """
    labels = find_labels(Path(corpus_dir))
    pairs = []
    for stack in list_stacks(Path(stacks_dir), satellite):
        label = labels.get((stack.lon, stack.lat, stack.year, stack.month))
        if label is not None:
            pairs.append(TrainingPair(stack=stack, label_path=label))
    return pairs


def load_arrays(pairs: List[TrainingPair]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack inputs (N, C, 256, 256) and labels (N, 1, 256, 256) as float32."""
    if not pairs:
        raise ValueError("empty pair set")
    inputs = np.stack([p.stack.values for p in pairs]).astype(np.float32)
    labels = np.stack([read_label(p.label_path)[None, :, :] for p in pairs])
    return inputs, labels

"""Run a trained model over preprocessed stacks and emit FGPM masks."""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np
import torch

from .fgio import list_stacks, write_mask
from .model import SegmentationUNet


def export_masks(
    model: SegmentationUNet,
    satellite: str,
    stacks_dir,
    out_dir,
    batch_size: int = 16,
) -> List[Path]:
    """One FGPM mask plus sidecar per stack of the model's satellite."""
    stacks = list_stacks(Path(stacks_dir), satellite)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    model.eval()
    source = f"unet-{satellite}"
    for start in range(0, len(stacks), batch_size):
        chunk = stacks[start : start + batch_size]
        batch = torch.from_numpy(np.stack([s.values for s in chunk]))
        with torch.no_grad():
            probs = model(batch).numpy()[:, 0]
        for stack, plane in zip(chunk, probs):
            name = stack.path.stem.replace("stack_", "mask_", 1) + ".fgpm"
            out_path = out_dir / name
            write_mask(plane, stack, source, out_path)
            written.append(out_path)
    return written

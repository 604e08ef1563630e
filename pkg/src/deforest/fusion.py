"""Ensemble fusion of per-image predictions into one binary map per query.

The stages, in fixed order:

1. two-stage sigma filtering on the predictions' deforestation ratios,
   first with a wide multiplier (default 3), then with a tight one
   (default 1) and statistics recomputed over the first stage's survivors;
2. pixel-wise averaging of the surviving probability masks, summed in a
   deterministic order (sorted by source identifier);
3. thresholding: a pixel becomes 1 only when its averaged probability is
   strictly over the threshold (default 0.40);
4. morphological opening (erosion then dilation) with a small structuring
   element to drop speckle noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .catalog import Query, grid_key
from .errors import EmptyEnsembleError, NoDataError
from .raster import BinaryMask, ProbabilityMask
from .segment import Prediction

STD_MODES = ("population", "sample")
BOUNDARIES = ("inclusive", "exclusive")


@dataclass(frozen=True)
class StructuringElement:
    """Small odd-sized binary neighborhood anchored at its center."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.matrix)
        if arr.ndim != 2:
            raise ValueError("structuring element must be 2-D")
        if arr.shape[0] % 2 == 0 or arr.shape[1] % 2 == 0:
            raise ValueError(f"structuring element needs odd dimensions, got {arr.shape}")
        if not bool(np.isin(arr, (0, 1)).all()):
            raise ValueError("structuring element entries must be 0 or 1")
        if arr[arr.shape[0] // 2, arr.shape[1] // 2] != 1:
            raise ValueError("structuring element center must be 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def center(self) -> Tuple[int, int]:
        return (self.matrix.shape[0] // 2, self.matrix.shape[1] // 2)

    def offsets(self) -> List[Tuple[int, int]]:
        cy, cx = self.center
        return [(int(y) - cy, int(x) - cx) for y, x in np.argwhere(self.matrix == 1)]

    def reflected(self) -> "StructuringElement":
        return StructuringElement(matrix=self.matrix[::-1, ::-1])

    @staticmethod
    def square(size: int = 3) -> "StructuringElement":
        return StructuringElement(matrix=np.ones((size, size), dtype=np.uint8))


@dataclass(frozen=True)
class FusionConfig:
    """All fusion knobs; defaults follow the stage description above."""

    k1: float = 3.0
    k2: float = 1.0
    pixel_threshold: float = 0.40
    ratio_binarize_level: float = 0.5
    structuring_element: StructuringElement = field(default_factory=StructuringElement.square)
    std_mode: str = "population"
    boundary: str = "inclusive"

    def __post_init__(self) -> None:
        if not (self.k1 >= self.k2 > 0):
            raise ValueError(f"need k1 >= k2 > 0, got k1={self.k1}, k2={self.k2}")
        if not 0.0 < self.pixel_threshold < 1.0:
            raise ValueError(f"pixel threshold must be inside (0, 1), got {self.pixel_threshold}")
        if not 0.0 < self.ratio_binarize_level < 1.0:
            raise ValueError(
                f"ratio binarize level must be inside (0, 1), got {self.ratio_binarize_level}"
            )
        if self.std_mode not in STD_MODES:
            raise ValueError(f"std_mode must be one of {STD_MODES}, got {self.std_mode!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")


def sigma_filter(
    ratios: Sequence[float],
    k: float,
    std_mode: str = "population",
    boundary: str = "inclusive",
) -> List[int]:
    """Indices whose values stay within k standard deviations of the mean.

    Population std divides by n, sample std by n - 1 (defined as 0 for a
    single value).  Inclusive boundary keeps exact ties; with zero spread it
    keeps everything.  Should the inclusive rule ever select nothing (possible
    only for k < 1), the values nearest the mean are kept so the filter never
    empties its input.

    The comparison |x - mu| <= k * sigma is evaluated in exact rational
    arithmetic.  Exact ties are structural here, not a corner case (with two
    values both always sit exactly one sigma from the mean), and float
    rounding would resolve them arbitrarily.
    """
    if len(ratios) == 0:
        raise EmptyEnsembleError("sigma_filter needs at least one ratio")
    if std_mode not in STD_MODES:
        raise ValueError(f"std_mode must be one of {STD_MODES}, got {std_mode!r}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")

    from fractions import Fraction

    values = [Fraction(float(r)) for r in ratios]
    n = len(values)
    mu = sum(values) / n
    dev_sq = [(v - mu) ** 2 for v in values]
    if std_mode == "population":
        var = sum(dev_sq) / n
    else:
        var = sum(dev_sq) / (n - 1) if n > 1 else Fraction(0)
    bound = Fraction(float(k)) ** 2 * var
    if boundary == "inclusive":
        keep = [d <= bound for d in dev_sq]
        if not any(keep):
            nearest = min(dev_sq)
            keep = [d == nearest for d in dev_sq]
    else:
        keep = [d < bound for d in dev_sq]
    return [i for i, kept in enumerate(keep) if kept]


def two_stage_filter_indices(
    ratios: Sequence[float],
    k1: float = 3.0,
    k2: float = 1.0,
    std_mode: str = "population",
    boundary: str = "inclusive",
) -> Tuple[List[int], List[int], List[int]]:
    """Run both filter stages on a ratio vector.

    Returns (retained, removed_stage1, removed_stage2), all as sorted indices
    into the input.  Stage 2 statistics are recomputed over stage 1 survivors.
    """
    if len(ratios) == 0:
        raise EmptyEnsembleError("two-stage filter needs at least one ratio")
    stage1 = sigma_filter(ratios, k1, std_mode, boundary)
    removed1 = sorted(set(range(len(ratios))) - set(stage1))
    survivors = [ratios[i] for i in stage1]
    stage2_rel = sigma_filter(survivors, k2, std_mode, boundary)
    retained = sorted(stage1[j] for j in stage2_rel)
    removed2 = sorted(set(stage1) - set(retained))
    return retained, removed1, removed2


@dataclass(frozen=True)
class FusionReport:
    """Audit trail of one fused query."""

    query: Query
    sources: Tuple[str, ...]
    satellites: Tuple[str, ...]
    dates: Tuple[str, ...]
    ratios: Tuple[float, ...]
    removed_stage1: Tuple[int, ...]
    removed_stage2: Tuple[int, ...]
    retained: int
    output_path: Optional[str] = None

    def __post_init__(self) -> None:
        if set(self.removed_stage1) & set(self.removed_stage2):
            raise ValueError("an index cannot be removed by both stages")
        expected = len(self.ratios) - len(self.removed_stage1) - len(self.removed_stage2)
        if self.retained != expected:
            raise ValueError(
                f"retained count {self.retained} inconsistent with removals ({expected} expected)"
            )

    @property
    def candidate_count(self) -> int:
        return len(self.ratios)

    def to_json(self) -> dict:
        return {
            "query": {
                "lon": self.query.lon_text,
                "lat": self.query.lat_text,
                "year": self.query.year,
                "month": self.query.month,
            },
            "candidates": [
                {
                    "source": self.sources[i],
                    "satellite": self.satellites[i],
                    "date": self.dates[i],
                    "ratio": self.ratios[i],
                }
                for i in range(len(self.ratios))
            ],
            "counts": {
                "candidates": self.candidate_count,
                "after_stage1": self.candidate_count - len(self.removed_stage1),
                "retained": self.retained,
            },
            "removed_stage1": list(self.removed_stage1),
            "removed_stage2": list(self.removed_stage2),
            "output": self.output_path,
        }

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def two_stage_filter(
    predictions: Sequence[Prediction], cfg: FusionConfig = FusionConfig()
) -> Tuple[List[Prediction], Tuple[List[int], List[int]]]:
    """Filter predictions by their cached ratios; input order is preserved."""
    if not predictions:
        raise EmptyEnsembleError("two-stage filter needs at least one prediction")
    ratios = [p.ratio for p in predictions]
    retained, removed1, removed2 = two_stage_filter_indices(
        ratios, cfg.k1, cfg.k2, cfg.std_mode, cfg.boundary
    )
    return [predictions[i] for i in retained], (removed1, removed2)


def average_masks(masks: Sequence[ProbabilityMask]) -> ProbabilityMask:
    """Pixel-wise arithmetic mean, accumulated in float64 in list order."""
    if not masks:
        raise EmptyEnsembleError("average_masks needs at least one mask")
    shape = masks[0].values.shape
    for m in masks[1:]:
        if m.values.shape != shape:
            raise ValueError(f"mask dimensions differ: {m.values.shape} vs {shape}")
    acc = np.zeros(shape, dtype=np.float64)
    for m in masks:
        acc += m.values
    mean = acc / len(masks)
    return ProbabilityMask(values=np.clip(mean, 0.0, 1.0).astype(np.float32))


def binarize(prob: ProbabilityMask, threshold: float) -> BinaryMask:
    """1 where the probability is strictly over the threshold, else 0."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be inside (0, 1), got {threshold}")
    # Compare in the mask's own precision so a mask holding exactly the
    # threshold value stays below it.
    return BinaryMask(values=(prob.values > np.float32(threshold)).astype(np.uint8))


def _shift_reduce(values: np.ndarray, offsets, pad_value: int, combine_any: bool) -> np.ndarray:
    h, w = values.shape
    max_dy = max(abs(dy) for dy, _ in offsets)
    max_dx = max(abs(dx) for _, dx in offsets)
    padded = np.pad(values, ((max_dy, max_dy), (max_dx, max_dx)), constant_values=pad_value)
    if combine_any:
        acc = np.zeros((h, w), dtype=bool)
        for dy, dx in offsets:
            acc |= padded[max_dy + dy : max_dy + dy + h, max_dx + dx : max_dx + dx + w] == 1
    else:
        acc = np.ones((h, w), dtype=bool)
        for dy, dx in offsets:
            acc &= padded[max_dy + dy : max_dy + dy + h, max_dx + dx : max_dx + dx + w] == 1
    return acc.astype(np.uint8)


def erode(mask: BinaryMask, element: StructuringElement, _pad_value: int = 0) -> BinaryMask:
    """1 where every 1-cell of the centered element lands on a 1 of the mask.

    Pixels outside the image count as `_pad_value` (0 by default).
    """
    out = _shift_reduce(mask.values, element.offsets(), _pad_value, combine_any=False)
    return BinaryMask(values=out)


def dilate(mask: BinaryMask, element: StructuringElement) -> BinaryMask:
    """1 where any 1-cell of the reflected element lands on a 1 of the mask."""
    offsets = [(-dy, -dx) for dy, dx in element.offsets()]
    out = _shift_reduce(mask.values, offsets, 0, combine_any=True)
    return BinaryMask(values=out)


def opening(mask: BinaryMask, element: StructuringElement) -> BinaryMask:
    """Erosion followed by dilation; removes objects smaller than the element."""
    return dilate(erode(mask, element), element)


def fuse_query(
    query: Query, predictions: Sequence[Prediction], cfg: FusionConfig = FusionConfig()
) -> Tuple[BinaryMask, FusionReport]:
    """Run the full fusion chain for one query.

    Raises NoDataError when no predictions are given; a fused output is never
    invented.
    """
    if not predictions:
        raise NoDataError(f"no data for query {query.lon_text}/{query.lat_text} "
                          f"{query.year}-{query.month:02d}")
    for p in predictions:
        if (grid_key(p.lon), grid_key(p.lat)) != query.loc_key or (
            p.date.year,
            p.date.month,
        ) != (query.year, query.month):
            raise ValueError(
                f"prediction {p.source!r} does not match query "
                f"{query.lon_text}/{query.lat_text} {query.year}-{query.month:02d}"
            )

    survivors, (removed1, removed2) = two_stage_filter(predictions, cfg)
    ordered = sorted(survivors, key=lambda p: (p.source, p.satellite.value, p.date.isoformat()))
    mean = average_masks([p.mask for p in ordered])
    binary = binarize(mean, cfg.pixel_threshold)
    opened = opening(binary, cfg.structuring_element)

    report = FusionReport(
        query=query,
        sources=tuple(p.source for p in predictions),
        satellites=tuple(p.satellite.value for p in predictions),
        dates=tuple(p.date.isoformat() for p in predictions),
        ratios=tuple(p.ratio for p in predictions),
        removed_stage1=tuple(removed1),
        removed_stage2=tuple(removed2),
        retained=len(survivors),
    )
    return opened, report

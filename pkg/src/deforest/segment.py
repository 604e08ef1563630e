"""Per-image deforestation prediction.

Predictors turn one normalized image stack into one 256 x 256 probability
mask.  The built-in index segmenter needs optical bands; SAR stacks get their
masks from an external model via import_mask.  Every prediction caches its
deforestation ratio, the fraction of pixels at or above the binarization
level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Optional, Protocol, Tuple, Union

import numpy as np

from .errors import OpticalBandsRequiredError, SidecarError
from .indices import BAND_ROLES, nbr_map
from .preprocess import ImageStack
from .raster import ProbabilityMask, Satellite, read_raw, require_tile_shape, write_raw

DEFAULT_BINARIZE_LEVEL = 0.5

SIDECAR_KEYS = ("satellite", "band_set", "lon", "lat", "year", "month", "day", "source")


class Predictor(Protocol):
    """A deterministic mapping from one image stack to one probability mask."""

    name: str

    def predict(self, stack: ImageStack) -> ProbabilityMask: ...


@dataclass(frozen=True)
class IndexSegmenterParams:
    """NBR ramp endpoints: probability 1 at or below t_low, 0 at or above t_high."""

    t_low: float = 0.1
    t_high: float = 0.3

    def __post_init__(self) -> None:
        if not self.t_low < self.t_high:
            raise ValueError(f"need t_low < t_high, got [{self.t_low}, {self.t_high}]")


def deforestation_ratio(mask: ProbabilityMask, binarize_level: float = DEFAULT_BINARIZE_LEVEL) -> float:
    """Fraction of pixels whose probability reaches the binarization level."""
    if not 0.0 < binarize_level < 1.0:
        raise ValueError(f"binarize level must be inside (0, 1), got {binarize_level}")
    hits = np.count_nonzero(mask.values >= np.float32(binarize_level))
    return hits / mask.values.size


@dataclass(frozen=True)
class Prediction:
    """One mask plus provenance and its cached deforestation ratio."""

    mask: ProbabilityMask
    satellite: Satellite
    date: Date
    lon: float
    lat: float
    source: str
    ratio: float

    @staticmethod
    def from_mask(
        mask: ProbabilityMask,
        satellite: Satellite,
        date: Date,
        lon: float,
        lat: float,
        source: str,
        binarize_level: float = DEFAULT_BINARIZE_LEVEL,
    ) -> "Prediction":
        return Prediction(
            mask=mask,
            satellite=satellite,
            date=date,
            lon=lon,
            lat=lat,
            source=source,
            ratio=deforestation_ratio(mask, binarize_level),
        )


def index_predict(stack: ImageStack, params: IndexSegmenterParams = IndexSegmenterParams()) -> ProbabilityMask:
    """Spectral-index segmentation for optical stacks.

    NBR is computed on de-normalized NIR/SWIR values and mapped through a
    linear ramp: probability 1 at NBR <= t_low, 0 at NBR >= t_high.
    """
    roles = BAND_ROLES.get(stack.satellite)
    if roles is None:
        raise OpticalBandsRequiredError(
            f"index segmenter requires optical bands, got {stack.satellite.value}"
        )
    bands = stack.bands
    nir_i = bands.index(roles["NIR"])
    swir_i = bands.index(roles["SWIR"])

    def denorm(i: int) -> np.ndarray:
        lo, hi = stack.ranges[i]
        return stack.channels[i].values.astype(np.float64) * (hi - lo) + lo

    ratio = nbr_map(denorm(nir_i), denorm(swir_i))
    prob = np.clip((params.t_high - ratio) / (params.t_high - params.t_low), 0.0, 1.0)
    return ProbabilityMask(values=prob.astype(np.float32))


@dataclass(frozen=True)
class IndexSegmenter:
    """Predictor wrapper around index_predict."""

    params: IndexSegmenterParams = IndexSegmenterParams()
    name: str = "index"

    def predict(self, stack: ImageStack) -> ProbabilityMask:
        return index_predict(stack, self.params)


def sidecar_for(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def write_prediction(pred: Prediction, band_set: Tuple[str, ...], path: Union[str, Path]) -> None:
    """Write a prediction as FGPM plus its metadata sidecar."""
    path = Path(path)
    write_raw(pred.mask, path)
    meta = {
        "satellite": pred.satellite.value,
        "band_set": list(band_set),
        "lon": f"{pred.lon:.2f}",
        "lat": f"{pred.lat:.2f}",
        "year": pred.date.year,
        "month": pred.date.month,
        "day": pred.date.day,
        "source": pred.source,
        "ratio": pred.ratio,
    }
    sidecar_for(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def import_mask(
    path: Union[str, Path],
    sidecar_path: Optional[Union[str, Path]] = None,
    binarize_level: float = DEFAULT_BINARIZE_LEVEL,
) -> Prediction:
    """Load an externally produced FGPM mask and its sidecar into a Prediction.

    The sidecar must carry satellite, band_set, lon, lat, year, month, day
    and source; the deforestation ratio is recomputed from the mask payload.
    """
    path = Path(path)
    mask = read_raw(path)
    require_tile_shape(mask, f"imported mask {path}")

    sidecar = Path(sidecar_path) if sidecar_path else sidecar_for(path)
    try:
        meta = json.loads(sidecar.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SidecarError(f"unreadable sidecar {sidecar}: {exc}") from exc
    missing = [k for k in SIDECAR_KEYS if k not in meta]
    if missing:
        raise SidecarError(f"sidecar {sidecar} missing key(s): {', '.join(missing)}")
    try:
        satellite = Satellite(meta["satellite"])
        day = Date(int(meta["year"]), int(meta["month"]), int(meta["day"]))
        lon = float(meta["lon"])
        lat = float(meta["lat"])
        source = str(meta["source"])
    except (TypeError, ValueError) as exc:
        raise SidecarError(f"malformed sidecar {sidecar}: {exc}") from exc

    return Prediction.from_mask(
        mask=mask,
        satellite=satellite,
        date=day,
        lon=lon,
        lat=lat,
        source=source,
        binarize_level=binarize_level,
    )

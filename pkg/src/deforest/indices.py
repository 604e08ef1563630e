"""Spectral indices on non-negative band values.

NBR = (NIR - SWIR) / (NIR + SWIR), near 1 over closed forest canopy and low
or negative over cleared ground.  NDVI = (NIR - RED) / (NIR + RED), the usual
greenness indicator.  Both are defined as 0 when the denominator is 0.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .raster import Satellite

# Concrete bands filling the NIR / SWIR / RED roles per optical satellite.
BAND_ROLES: Dict[Satellite, Dict[str, str]] = {
    Satellite.SENTINEL2: {"NIR": "B8", "SWIR": "B11", "RED": "B4"},
    Satellite.LANDSAT8: {"NIR": "B5", "SWIR": "B6", "RED": "B4"},
}


def _normalized_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (a - b) / denom
    return np.where(denom == 0.0, 0.0, ratio)


def nbr(nir: float, swir: float) -> float:
    """Normalized burn ratio of one pixel."""
    return float(_normalized_difference(nir, swir))


def ndvi(nir: float, red: float) -> float:
    """Normalized difference vegetation index of one pixel."""
    return float(_normalized_difference(nir, red))


def nbr_map(nir: np.ndarray, swir: np.ndarray) -> np.ndarray:
    """Element-wise NBR over two band planes."""
    return _normalized_difference(nir, swir)


def ndvi_map(nir: np.ndarray, red: np.ndarray) -> np.ndarray:
    """Element-wise NDVI over two band planes."""
    return _normalized_difference(nir, red)

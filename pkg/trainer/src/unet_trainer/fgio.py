"""File exchange with the mapping pipeline.

The trainer talks to the pipeline only through documented file formats:

* FGPS stacks (input): magic ``FGPS``, u32 version 1, u32 channels,
  u32 width, u32 height, all little endian, then channel-major float32 LE
  values; a JSON sidecar next to it carries satellite, bands, lon, lat,
  year, month, day and per-channel normalization ranges.
* FGPM masks (output): magic ``FGPM``, u32 version 1, u32 width, u32 height,
  then float32 LE probabilities in [0, 1]; the sidecar carries satellite,
  band_set, lon, lat, year, month, day and source.
* Label tiles (training targets): binary single-plane TIFFs named
  ``Deforestation_{lon}_{lat}_{year}_{month}.tiff``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import tifffile

FGPS_HEADER = struct.Struct("<4sIIII")
FGPM_HEADER = struct.Struct("<4sIII")
TILE = 256


@dataclass(frozen=True)
class StackFile:
    """One preprocessed multi-band tile plus its sidecar metadata."""

    path: Path
    satellite: str
    bands: Tuple[str, ...]
    lon: str
    lat: str
    year: int
    month: int
    day: int
    values: np.ndarray  # (channels, 256, 256) float32 in [0, 1]


def read_stack(path: Path) -> StackFile:
    blob = path.read_bytes()
    magic, version, channels, width, height = FGPS_HEADER.unpack_from(blob)
    if magic != b"FGPS" or version != 1:
        raise ValueError(f"not an FGPS v1 file: {path}")
    payload = blob[FGPS_HEADER.size:]
    if len(payload) != 4 * channels * width * height:
        raise ValueError(f"FGPS payload length mismatch: {path}")
    values = np.frombuffer(payload, dtype="<f4").reshape(channels, height, width)
    meta = json.loads(path.with_suffix(".json").read_text())
    return StackFile(
        path=path,
        satellite=str(meta["satellite"]),
        bands=tuple(meta["bands"]),
        lon=str(meta["lon"]),
        lat=str(meta["lat"]),
        year=int(meta["year"]),
        month=int(meta["month"]),
        day=int(meta["day"]),
        values=values,
    )


def list_stacks(stacks_dir: Path, satellite: str) -> List[StackFile]:
    stacks = []
    for path in sorted(Path(stacks_dir).glob("*.fgps")):
        meta = json.loads(path.with_suffix(".json").read_text())
        if meta["satellite"] == satellite:
            stacks.append(read_stack(path))
    return stacks


def write_mask(
    values: np.ndarray,
    stack: StackFile,
    source: str,
    out_path: Path,
) -> None:
    """Write one probability mask as FGPM plus the import sidecar."""
    if values.shape != (TILE, TILE):
        raise ValueError(f"mask must be {TILE}x{TILE}, got {values.shape}")
    header = FGPM_HEADER.pack(b"FGPM", 1, TILE, TILE)
    payload = np.ascontiguousarray(np.clip(values, 0.0, 1.0), dtype="<f4").tobytes()
    out_path.write_bytes(header + payload)
    meta = {
        "satellite": stack.satellite,
        "band_set": list(stack.bands),
        "lon": stack.lon,
        "lat": stack.lat,
        "year": stack.year,
        "month": stack.month,
        "day": stack.day,
        "source": source,
    }
    out_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def find_labels(corpus_dir: Path) -> Dict[Tuple[str, str, int, int], Path]:
    """Index label tiles by (lon, lat, year, month) as printed in their names."""
    labels = {}
    for path in sorted(Path(corpus_dir).rglob("Deforestation_*.tiff")):
        stem = path.stem.split("_")
        if len(stem) != 5:
            continue
        _, lon, lat, year, month = stem
        labels[(lon, lat, int(year), int(month))] = path
    return labels


def read_label(path: Path) -> np.ndarray:
    arr = np.asarray(tifffile.imread(path))
    if arr.ndim == 3:  # two-plane labels carry the class in plane 1
        arr = arr[1] if arr.shape[0] == 2 else arr[:, :, 1]
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"label tile is not binary: {path}")
    return arr.astype(np.float32)

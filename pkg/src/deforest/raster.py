"""Core raster value types and the on-disk formats the pipeline touches.

Formats:

* single-band TIFF tiles (read, plus a small writer used by the synthetic
  generator and tests),
* FGPM, the probability-mask exchange format: 16-byte header
  (magic ``FGPM``, u32 version, u32 width, u32 height, all little endian)
  followed by ``width * height`` float32 LE values in row-major order,
* 8-bit grayscale PNG for final binary maps (0 or 255 only).

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from datetime import date as Date
from pathlib import Path
from typing import Optional, Union

import numpy as np
import tifffile
from PIL import Image

from .errors import (
    BadMagicError,
    MultiBandTiffError,
    PayloadMismatchError,
    RasterIOError,
    UnreadableFileError,
    UnsupportedSampleFormatError,
)

TILE_SIZE = 256
MAX_TIFF_DIM = 1024

FGPM_MAGIC = b"FGPM"
FGPM_VERSION = 1
_FGPM_HEADER = struct.Struct("<4sIII")


class Satellite(enum.Enum):
    """Imagery sources the pipeline ingests."""

    SENTINEL1 = "Sentinel1"
    SENTINEL2 = "Sentinel2"
    LANDSAT8 = "Landsat8"

    def __str__(self) -> str:
        return self.value


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class BandRaster:
    """One single-band 2-D tile of real values, optionally geo/date stamped.

    Raw ingested tiles may contain non-finite pixels; those are mapped to 0
    during normalization, so only normalized rasters are guaranteed finite.
    """

    values: np.ndarray
    satellite: Optional[Satellite] = None
    band: Optional[str] = None
    lon: Optional[float] = None
    lat: Optional[float] = None
    date: Optional[Date] = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"BandRaster values must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("BandRaster must contain at least one pixel")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def with_metadata(
        self,
        satellite: Satellite,
        band: str,
        lon: float,
        lat: float,
        date: Date,
    ) -> "BandRaster":
        return replace(self, satellite=satellite, band=band, lon=lon, lat=lat, date=date)


@dataclass(frozen=True)
class ProbabilityMask:
    """Per-pixel deforestation probabilities, every value in [0, 1]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"ProbabilityMask values must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("ProbabilityMask must contain at least one pixel")
        # NaN fails both comparisons, so this also rejects non-finite input.
        if not bool(np.all(arr >= 0.0)) or not bool(np.all(arr <= 1.0)):
            raise ValueError("ProbabilityMask values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """A 0/1 labelling; class 1 marks deforested pixels."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError(f"BinaryMask values must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("BinaryMask must contain at least one pixel")
        if not bool(np.isin(arr, (0, 1)).all()):
            raise ValueError("BinaryMask values must be 0 or 1")
        object.__setattr__(self, "values", _freeze(arr.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def require_tile_shape(mask: Union[ProbabilityMask, BinaryMask, BandRaster], what: str) -> None:
    """Enforce the fixed 256 x 256 working grid at pipeline boundaries."""
    if mask.height != TILE_SIZE or mask.width != TILE_SIZE:
        raise ValueError(
            f"{what} must be {TILE_SIZE}x{TILE_SIZE}, got {mask.height}x{mask.width}"
        )


# ---------------------------------------------------------------------------
# TIFF


def read_tiff(path: Union[str, Path]) -> BandRaster:
    """Read a single-band TIFF tile into a raster with raw, un-normalized values.

    Metadata fields (satellite, band, location, date) are left unset; the
    catalog layer populates them from the file name.
    """
    path = Path(path)
    try:
        arr = tifffile.imread(path)
    except (OSError, ValueError, tifffile.TiffFileError) as exc:
        raise UnreadableFileError(f"unreadable TIFF: {path}: {exc}") from exc
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise MultiBandTiffError(f"multi-band TIFF not supported: {path} (shape {arr.shape})")
    if arr.dtype.kind not in "uif":
        raise UnsupportedSampleFormatError(
            f"unsupported sample format: {path} (dtype {arr.dtype})"
        )
    if arr.shape[0] > MAX_TIFF_DIM or arr.shape[1] > MAX_TIFF_DIM:
        raise UnsupportedSampleFormatError(
            f"unsupported sample format: {path} (tile {arr.shape} exceeds {MAX_TIFF_DIM})"
        )
    if arr.size == 0:
        raise UnreadableFileError(f"unreadable TIFF: {path}: empty image")
    return BandRaster(values=arr.astype(np.float32))


def write_tiff(values: np.ndarray, path: Union[str, Path]) -> None:
    """Write a single-band TIFF; the synthetic generator's and tests' helper.

    Pipeline outputs never use TIFF, only PNG and FGPM.
    """
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"single-band TIFF writer needs a 2-D array, got shape {arr.shape}")
    try:
        tifffile.imwrite(Path(path), arr, photometric="minisblack")
    except OSError as exc:
        raise RasterIOError(f"cannot write TIFF: {path}: {exc}") from exc


def read_label_tiff(path: Union[str, Path]) -> BinaryMask:
    """Read a label tile as a binary mask.

    Label files are single-plane 0/1 images; two-plane label files also occur
    in the wild, in which case plane index 1 carries the deforestation class.
    """
    path = Path(path)
    try:
        arr = np.asarray(tifffile.imread(path))
    except (OSError, ValueError, tifffile.TiffFileError) as exc:
        raise UnreadableFileError(f"unreadable label TIFF: {path}: {exc}") from exc
    if arr.ndim == 3:
        if arr.shape[0] == 2:
            arr = arr[1]
        elif arr.shape[2] == 2:
            arr = arr[:, :, 1]
        else:
            raise MultiBandTiffError(f"label TIFF must have 1 or 2 planes: {path} (shape {arr.shape})")
    elif arr.ndim != 2:
        raise MultiBandTiffError(f"label TIFF must be 2-D: {path} (shape {arr.shape})")
    if not bool(np.isin(arr, (0, 1)).all()):
        raise UnsupportedSampleFormatError(f"label TIFF must be binary 0/1: {path}")
    return BinaryMask(values=arr.astype(np.uint8))


# ---------------------------------------------------------------------------
# FGPM


def write_raw(mask: ProbabilityMask, path: Union[str, Path]) -> None:
    """Serialize a probability mask to FGPM; read_raw(write_raw(m)) is bit-exact."""
    header = _FGPM_HEADER.pack(FGPM_MAGIC, FGPM_VERSION, mask.width, mask.height)
    payload = np.ascontiguousarray(mask.values, dtype="<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise RasterIOError(f"cannot write FGPM: {path}: {exc}") from exc


def read_raw(path: Union[str, Path]) -> ProbabilityMask:
    """Read an FGPM probability mask file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise UnreadableFileError(f"unreadable FGPM: {path}: {exc}") from exc
    if len(blob) < _FGPM_HEADER.size or blob[:4] != FGPM_MAGIC:
        raise BadMagicError(f"bad magic: {path}")
    magic, version, width, height = _FGPM_HEADER.unpack_from(blob)
    if version != FGPM_VERSION:
        raise RasterIOError(f"unsupported FGPM version {version}: {path}")
    expected = 4 * width * height
    payload = blob[_FGPM_HEADER.size:]
    if width == 0 or height == 0 or len(payload) != expected:
        raise PayloadMismatchError(
            f"length mismatch: {path}: header says {width}x{height} "
            f"({expected} bytes), payload has {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    return ProbabilityMask(values=values)


# ---------------------------------------------------------------------------
# PNG


def write_mask_png(mask: BinaryMask, path: Union[str, Path]) -> None:
    """Write a binary mask as 8-bit grayscale PNG: 255 where 1, 0 where 0."""
    img = Image.fromarray(mask.values * np.uint8(255), mode="L")
    try:
        img.save(Path(path), format="PNG")
    except OSError as exc:
        raise RasterIOError(f"cannot write PNG: {path}: {exc}") from exc


def read_mask_png(path: Union[str, Path]) -> BinaryMask:
    """Read a binary-map PNG produced by write_mask_png."""
    try:
        with Image.open(Path(path)) as img:
            arr = np.asarray(img.convert("L"))
    except (OSError, ValueError) as exc:
        raise UnreadableFileError(f"unreadable PNG: {path}: {exc}") from exc
    if not bool(np.isin(arr, (0, 255)).all()):
        raise UnsupportedSampleFormatError(f"mask PNG must contain only 0 and 255: {path}")
    return BinaryMask(values=(arr == 255).astype(np.uint8))

"""Stack preparation: band selection, resizing to the 256 grid, normalization.

Per-satellite band selection (and channel order):

* Sentinel-1: VV, VH
* Sentinel-2: B4, B7, B8, B11, B12
* Landsat-8:  B4, B5, B6, B7

Landsat tiles arrive smaller than 256 x 256 and are upsampled with
corner-aligned bilinear interpolation before normalization.  Normalization
maps each band's physical range onto [0, 1] with clamping; non-finite source
pixels become 0.

Stacks move between CLI stages as FGPS files: magic ``FGPS``, u32 version,
u32 channels, u32 width, u32 height (little endian), then channel-major
float32 LE values, plus a JSON sidecar with satellite/location/date/band
metadata and the normalization ranges.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    DuplicateBandError,
    ExcludedCollectionError,
    MissingBandError,
    MixedDatesError,
    PayloadMismatchError,
    RasterIOError,
    StackError,
    UnreadableFileError,
)
from .raster import TILE_SIZE, BandRaster, Satellite, read_tiff

if TYPE_CHECKING:
    from .catalog import TileRecord

SELECTED_BANDS: Dict[Satellite, Tuple[str, ...]] = {
    Satellite.SENTINEL1: ("VV", "VH"),
    Satellite.SENTINEL2: ("B4", "B7", "B8", "B11", "B12"),
    Satellite.LANDSAT8: ("B4", "B5", "B6", "B7"),
}

# Physical value ranges mapped onto [0, 1]: surface-reflectance scaling for
# the optical bands, typical backscatter dynamic range for SAR.
DEFAULT_OPTICAL_RANGE = (0.0, 10000.0)
DEFAULT_SAR_RANGE = (-30.0, 0.0)

FGPS_MAGIC = b"FGPS"
FGPS_VERSION = 1
_FGPS_HEADER = struct.Struct("<4sIIII")


def select_bands(satellite: Union[Satellite, str]) -> Tuple[str, ...]:
    """Ordered band list used for the given satellite."""
    if isinstance(satellite, Satellite):
        return SELECTED_BANDS[satellite]
    try:
        return SELECTED_BANDS[Satellite(satellite)]
    except ValueError:
        raise ExcludedCollectionError(f"excluded collection: {satellite!r}") from None


@dataclass(frozen=True)
class NormalizationTable:
    """Map from (satellite, band) to the (lo, hi) physical range."""

    ranges: Mapping[Tuple[Satellite, str], Tuple[float, float]]

    def __post_init__(self) -> None:
        for satellite, bands in SELECTED_BANDS.items():
            for band in bands:
                if (satellite, band) not in self.ranges:
                    raise ConfigError(f"normalization table misses {satellite.value}/{band}")
        for (satellite, band), (lo, hi) in self.ranges.items():
            if not hi > lo:
                raise ConfigError(
                    f"normalization range for {satellite.value}/{band} needs hi > lo, got [{lo}, {hi}]"
                )
        object.__setattr__(self, "ranges", dict(self.ranges))

    def range_for(self, satellite: Satellite, band: str) -> Tuple[float, float]:
        try:
            return self.ranges[(satellite, band)]
        except KeyError:
            raise ConfigError(
                f"no normalization entry for {satellite.value}/{band}"
            ) from None

    @staticmethod
    def default() -> "NormalizationTable":
        ranges = {}
        for satellite, bands in SELECTED_BANDS.items():
            default = DEFAULT_SAR_RANGE if satellite is Satellite.SENTINEL1 else DEFAULT_OPTICAL_RANGE
            for band in bands:
                ranges[(satellite, band)] = default
        return NormalizationTable(ranges=ranges)


DEFAULT_NORMALIZATION = NormalizationTable.default()


def _resize_plane(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of one plane.

    Interpolation uses the a + w*(b - a) form so constant input reproduces
    exactly, and the result is clipped to the input range so rounding can
    never push a sample outside it.
    """
    h, w = values.shape
    src = values.astype(np.float64)
    ys = np.linspace(0.0, h - 1, out_h)
    xs = np.linspace(0.0, w - 1, out_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    rows = src[:, x0]
    rows += wx * (src[:, x1] - src[:, x0])
    out = rows[y0]
    out += wy * (rows[y1] - rows[y0])
    np.clip(out, src.min(), src.max(), out=out)
    return out.astype(np.float32)


def resize_bilinear(raster: BandRaster, size: Tuple[int, int] = (TILE_SIZE, TILE_SIZE)) -> BandRaster:
    """Resample a raster to `size` (height, width); identity when sizes match."""
    out_h, out_w = size
    if raster.height < 2 or raster.width < 2:
        raise StackError(f"cannot resize a {raster.height}x{raster.width} raster, need at least 2x2")
    if (raster.height, raster.width) == (out_h, out_w):
        return raster
    return BandRaster(
        values=_resize_plane(raster.values, out_h, out_w),
        satellite=raster.satellite,
        band=raster.band,
        lon=raster.lon,
        lat=raster.lat,
        date=raster.date,
    )


def normalize(raster: BandRaster, table: NormalizationTable = DEFAULT_NORMALIZATION) -> BandRaster:
    """Map values onto [0, 1] via the band's physical range, clamping outside.

    Non-finite source pixels map to 0.
    """
    if raster.satellite is None or raster.band is None:
        raise StackError("normalize needs a raster with satellite and band metadata")
    lo, hi = table.range_for(raster.satellite, raster.band)
    src = raster.values.astype(np.float64)
    with np.errstate(invalid="ignore"):
        scaled = np.clip((src - lo) / (hi - lo), 0.0, 1.0)
    scaled[~np.isfinite(src)] = 0.0
    return BandRaster(
        values=scaled.astype(np.float32),
        satellite=raster.satellite,
        band=raster.band,
        lon=raster.lon,
        lat=raster.lat,
        date=raster.date,
    )


@dataclass(frozen=True)
class ImageStack:
    """Normalized multi-band tile; channel count fixed per satellite (2/5/4).

    `ranges` keeps each channel's (lo, hi) so consumers can recover physical
    values, e.g. for spectral indices.
    """

    satellite: Satellite
    channels: Tuple[BandRaster, ...]
    lon: float
    lat: float
    date: Date
    ranges: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        wanted = select_bands(self.satellite)
        got = tuple(c.band for c in self.channels)
        if got != wanted:
            raise StackError(f"channel order must be {wanted}, got {got}")
        if len(self.ranges) != len(self.channels):
            raise StackError("one (lo, hi) range per channel required")
        for chan in self.channels:
            if chan.height != TILE_SIZE or chan.width != TILE_SIZE:
                raise StackError(
                    f"stack channels must be {TILE_SIZE}x{TILE_SIZE}, "
                    f"got {chan.height}x{chan.width} for {chan.band}"
                )
            if not bool(np.all(chan.values >= 0.0)) or not bool(np.all(chan.values <= 1.0)):
                raise StackError(f"channel {chan.band} has values outside [0, 1]")

    @property
    def bands(self) -> Tuple[str, ...]:
        return tuple(c.band for c in self.channels)

    def channel(self, band: str) -> BandRaster:
        for chan in self.channels:
            if chan.band == band:
                return chan
        raise MissingBandError(f"stack has no band {band!r}")

    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.channels])


def assemble_stack(
    records: Sequence["TileRecord"],
    table: NormalizationTable = DEFAULT_NORMALIZATION,
) -> ImageStack:
    """Read a band-complete record set into a normalized stack.

    Landsat channels are resized to the 256 grid before normalization.
    """
    if not records:
        raise MissingBandError("no records given")
    satellites = {r.satellite for r in records}
    if len(satellites) != 1 or None in satellites:
        raise StackError("records must share one satellite")
    satellite = next(iter(satellites))
    if len({(r.loc_key) for r in records}) != 1:
        raise StackError("records must share one grid cell")
    if len({r.date for r in records}) != 1:
        raise MixedDatesError("records must share one acquisition date")

    wanted = select_bands(satellite)
    by_band = {}
    for rec in records:
        if rec.band in by_band:
            raise DuplicateBandError(f"duplicate band {rec.band!r}")
        by_band[rec.band] = rec
    missing = [b for b in wanted if b not in by_band]
    if missing:
        raise MissingBandError(f"missing band(s): {', '.join(missing)}")
    extra = sorted(set(by_band) - set(wanted))
    if extra:
        raise StackError(f"unexpected band(s): {', '.join(extra)}")

    channels = []
    ranges = []
    for band in wanted:
        rec = by_band[band]
        raster = read_tiff(rec.path).with_metadata(
            satellite=satellite, band=band, lon=rec.lon, lat=rec.lat, date=rec.date
        )
        if (raster.height, raster.width) != (TILE_SIZE, TILE_SIZE):
            raster = resize_bilinear(raster)
        channels.append(normalize(raster, table))
        ranges.append(table.range_for(satellite, band))

    first = records[0]
    return ImageStack(
        satellite=satellite,
        channels=tuple(channels),
        lon=first.lon,
        lat=first.lat,
        date=first.date,
        ranges=tuple(ranges),
    )


# ---------------------------------------------------------------------------
# FGPS stack files


def stack_filename(stack: ImageStack) -> str:
    return (
        f"stack_{stack.satellite.value}_{stack.lon:.2f}_{stack.lat:.2f}"
        f"_{stack.date.year:04d}_{stack.date.month:02d}_{stack.date.day:02d}.fgps"
    )


def write_stack(stack: ImageStack, path: Union[str, Path]) -> None:
    """Write a stack as FGPS plus a JSON metadata sidecar next to it."""
    path = Path(path)
    header = _FGPS_HEADER.pack(
        FGPS_MAGIC, FGPS_VERSION, len(stack.channels), TILE_SIZE, TILE_SIZE
    )
    payload = np.ascontiguousarray(stack.array(), dtype="<f4").tobytes()
    meta = {
        "satellite": stack.satellite.value,
        "bands": list(stack.bands),
        "lon": f"{stack.lon:.2f}",
        "lat": f"{stack.lat:.2f}",
        "year": stack.date.year,
        "month": stack.date.month,
        "day": stack.date.day,
        "ranges": [[lo, hi] for lo, hi in stack.ranges],
    }
    try:
        path.write_bytes(header + payload)
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise RasterIOError(f"cannot write stack: {path}: {exc}") from exc


def read_stack(path: Union[str, Path]) -> ImageStack:
    """Read an FGPS stack and its sidecar back into an ImageStack."""
    path = Path(path)
    try:
        blob = path.read_bytes()
        meta = json.loads(path.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UnreadableFileError(f"unreadable stack: {path}: {exc}") from exc
    if len(blob) < _FGPS_HEADER.size or blob[:4] != FGPS_MAGIC:
        raise BadMagicError(f"bad magic: {path}")
    _, version, n_channels, width, height = _FGPS_HEADER.unpack_from(blob)
    if version != FGPS_VERSION:
        raise RasterIOError(f"unsupported FGPS version {version}: {path}")
    payload = blob[_FGPS_HEADER.size:]
    if len(payload) != 4 * n_channels * width * height:
        raise PayloadMismatchError(f"length mismatch: {path}")
    cube = np.frombuffer(payload, dtype="<f4").reshape(n_channels, height, width)

    try:
        satellite = Satellite(meta["satellite"])
        bands = list(meta["bands"])
        lon = float(meta["lon"])
        lat = float(meta["lat"])
        day = Date(int(meta["year"]), int(meta["month"]), int(meta["day"]))
        ranges = tuple((float(lo), float(hi)) for lo, hi in meta["ranges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UnreadableFileError(f"malformed stack sidecar: {path}: {exc}") from exc

    channels = tuple(
        BandRaster(values=cube[i], satellite=satellite, band=bands[i], lon=lon, lat=lat, date=day)
        for i in range(n_channels)
    )
    return ImageStack(
        satellite=satellite, channels=channels, lon=lon, lat=lat, date=day, ranges=ranges
    )

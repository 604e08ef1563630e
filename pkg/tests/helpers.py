"""Shared builders for tests: records, stacks, masks."""

from __future__ import annotations

from datetime import date as Date

import numpy as np

from deforest.catalog import RecordKind, TileRecord
from deforest.preprocess import ImageStack, select_bands
from deforest.raster import BandRaster, BinaryMask, ProbabilityMask, Satellite


def imagery_record(
    satellite=Satellite.SENTINEL2,
    band="B4",
    lon=-54.80,
    lat=-3.67,
    year=2020,
    month=8,
    day=15,
    path=None,
) -> TileRecord:
    if path is None:
        path = (
            f"{satellite.value}_{band}_{lon:.2f}_{lat:.2f}_{year:04d}_{month:02d}_{day:02d}.tiff"
        )
    return TileRecord(
        satellite=satellite,
        band=band,
        lon=lon,
        lat=lat,
        year=year,
        month=month,
        day=day,
        path=path,
        kind=RecordKind.IMAGERY,
    )


def label_record(lon=-54.80, lat=-3.67, year=2020, month=8, path=None) -> TileRecord:
    if path is None:
        path = f"Deforestation_{lon:.2f}_{lat:.2f}_{year:04d}_{month:02d}.tiff"
    return TileRecord(
        satellite=None,
        band=None,
        lon=lon,
        lat=lat,
        year=year,
        month=month,
        day=None,
        path=path,
        kind=RecordKind.LABEL,
    )


def band_set_records(satellite, lon=-54.80, lat=-3.67, year=2020, month=8, day=15, prefix=""):
    return [
        imagery_record(satellite, band, lon, lat, year, month, day, path=f"{prefix}" + (
            f"{satellite.value}_{band}_{lon:.2f}_{lat:.2f}_{year:04d}_{month:02d}_{day:02d}.tiff"
        ))
        for band in select_bands(satellite)
    ]


def make_stack(
    channel_values,
    satellite=Satellite.SENTINEL2,
    lon=-54.80,
    lat=-3.67,
    date=Date(2020, 8, 15),
    ranges=None,
) -> ImageStack:
    """Build a stack from per-band value arrays (dict band -> 256x256 array)."""
    bands = select_bands(satellite)
    if ranges is None:
        ranges = tuple((0.0, 10000.0) for _ in bands)
    channels = tuple(
        BandRaster(
            values=np.asarray(channel_values[b], dtype=np.float32),
            satellite=satellite,
            band=b,
            lon=lon,
            lat=lat,
            date=date,
        )
        for b in bands
    )
    return ImageStack(
        satellite=satellite, channels=channels, lon=lon, lat=lat, date=date, ranges=ranges
    )


def uniform_stack(value=0.5, satellite=Satellite.SENTINEL2, **kwargs) -> ImageStack:
    plane = np.full((256, 256), value, dtype=np.float32)
    return make_stack({b: plane for b in select_bands(satellite)}, satellite, **kwargs)


def rand_prob_mask(rng: np.random.Generator, h=256, w=256) -> ProbabilityMask:
    return ProbabilityMask(values=rng.random((h, w), dtype=np.float32))


def rand_binary_mask(rng: np.random.Generator, h=256, w=256, p=0.5) -> BinaryMask:
    return BinaryMask(values=(rng.random((h, w)) < p).astype(np.uint8))

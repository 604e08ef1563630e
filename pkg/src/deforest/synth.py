"""Deterministic synthetic corpus with known deforestation ground truth.

Each scene is one grid cell.  Its deforested region is a union of seeded
random rectangles that only grows from month to month.  Per month the scene
emits one binary label tile and, per satellite and acquisition day, the
selected band tiles, with band values chosen so that deforested ground sits
at NBR around -0.2 / NDVI around -0.1 and forest at NBR around 0.6 / NDVI
around 0.7, plus Gaussian noise.

Optical acquisitions can be flipped into cloud-failure stand-ins: with
probability `outlier_rate` a date's imagery shows intact forest everywhere,
which downstream turns into an all-black (zero deforestation) prediction.
The manifest records every emitted file and every injected outlier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .catalog import grid_key
from .errors import PipelineError
from .preprocess import select_bands
from .raster import TILE_SIZE, Satellite, write_tiff

LANDSAT_TILE = 85  # Landsat arrives coarser and is upsampled by preprocess

# (forest, deforested) band levels; optical in reflectance units, SAR in dB.
BAND_LEVELS: Dict[Tuple[Satellite, str], Tuple[float, float]] = {
    (Satellite.SENTINEL2, "B4"): (700.0, 2400.0),
    (Satellite.SENTINEL2, "B7"): (2500.0, 2100.0),
    (Satellite.SENTINEL2, "B8"): (4000.0, 2000.0),
    (Satellite.SENTINEL2, "B11"): (1000.0, 3000.0),
    (Satellite.SENTINEL2, "B12"): (700.0, 2700.0),
    (Satellite.LANDSAT8, "B4"): (700.0, 2400.0),
    (Satellite.LANDSAT8, "B5"): (4000.0, 2000.0),
    (Satellite.LANDSAT8, "B6"): (1000.0, 3000.0),
    (Satellite.LANDSAT8, "B7"): (700.0, 2700.0),
    (Satellite.SENTINEL1, "VV"): (-7.0, -13.0),
    (Satellite.SENTINEL1, "VH"): (-12.0, -19.0),
}

# Noise drawn as noise_sigma scaled by each band family's dynamic range so
# one knob covers reflectance and dB alike.
_SAR_NOISE_SCALE = 30.0 / 10000.0

_SATELLITE_ORDER = (Satellite.SENTINEL1, Satellite.SENTINEL2, Satellite.LANDSAT8)
_OPTICAL = (Satellite.SENTINEL2, Satellite.LANDSAT8)


@dataclass(frozen=True)
class DateCounts:
    """Acquisition dates emitted per month for each satellite."""

    sentinel1: int = 2
    sentinel2: int = 5
    landsat8: int = 6

    def of(self, satellite: Satellite) -> int:
        return {
            Satellite.SENTINEL1: self.sentinel1,
            Satellite.SENTINEL2: self.sentinel2,
            Satellite.LANDSAT8: self.landsat8,
        }[satellite]


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    lon: float
    lat: float
    months: Tuple[Tuple[int, int], ...] = ((2020, 8),)
    dates: DateCounts = field(default_factory=DateCounts)
    noise_sigma: float = 150.0
    outlier_rate: float = 0.008

    def __post_init__(self) -> None:
        for _, month in self.months:
            if not 1 <= month <= 12:
                raise ValueError(f"month out of range: {month}")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValueError(f"outlier rate must be in [0, 1], got {self.outlier_rate}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise sigma must be non-negative, got {self.noise_sigma}")


def _grow_region(mask: np.ndarray, rng: np.random.Generator, n_rects: int) -> np.ndarray:
    grown = mask.copy()
    for _ in range(n_rects):
        h = int(rng.integers(30, 91))
        w = int(rng.integers(30, 91))
        y = int(rng.integers(0, TILE_SIZE - h + 1))
        x = int(rng.integers(0, TILE_SIZE - w + 1))
        grown[y : y + h, x : x + w] = 1
    return grown


def _landsat_downsample(mask: np.ndarray) -> np.ndarray:
    idx = np.rint(np.linspace(0, TILE_SIZE - 1, LANDSAT_TILE)).astype(np.intp)
    return mask[np.ix_(idx, idx)]


def _band_plane(
    satellite: Satellite,
    band: str,
    mask: np.ndarray,
    rng: np.random.Generator,
    noise_sigma: float,
) -> np.ndarray:
    forest, deforested = BAND_LEVELS[(satellite, band)]
    base = np.where(mask == 1, deforested, forest).astype(np.float32)
    if satellite is Satellite.SENTINEL1:
        sigma = noise_sigma * _SAR_NOISE_SCALE
        if sigma > 0:
            base = base + rng.standard_normal(base.shape, dtype=np.float32) * np.float32(sigma)
        return np.clip(base, -30.0, 0.0).astype(np.float32)
    if noise_sigma > 0:
        base = base + rng.standard_normal(base.shape, dtype=np.float32) * np.float32(noise_sigma)
    return np.clip(np.rint(base), 0, 65535).astype(np.uint16)


def generate_scene(spec: SceneSpec, out_dir) -> dict:
    """Emit one scene's tiles under `out_dir` and return its manifest entry."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError(f"cannot create scene directory {out_dir}: {exc}") from exc

    rng = np.random.default_rng(spec.seed)
    lon_s, lat_s = grid_key(spec.lon), grid_key(spec.lat)
    files: List[str] = []
    outliers: List[dict] = []

    region = np.zeros((TILE_SIZE, TILE_SIZE), dtype=np.uint8)
    for month_i, (year, month) in enumerate(spec.months):
        n_rects = int(rng.integers(4, 7)) if month_i == 0 else int(rng.integers(1, 3))
        region = _grow_region(region, rng, n_rects)

        label_name = f"Deforestation_{lon_s}_{lat_s}_{year:04d}_{month:02d}.tiff"
        write_tiff(region, out_dir / label_name)
        files.append(label_name)

        for satellite in _SATELLITE_ORDER:
            count = spec.dates.of(satellite)
            if count <= 0:
                continue
            days = sorted(int(d) for d in rng.choice(np.arange(1, 29), size=count, replace=False))
            for day in days:
                is_outlier = False
                if satellite in _OPTICAL:
                    # Draw unconditionally so the region layout does not
                    # depend on the outlier rate.
                    is_outlier = bool(rng.random() < spec.outlier_rate)
                scene_mask = np.zeros_like(region) if is_outlier else region
                if satellite is Satellite.LANDSAT8:
                    scene_mask = _landsat_downsample(scene_mask)
                if is_outlier:
                    outliers.append(
                        {
                            "satellite": satellite.value,
                            "year": year,
                            "month": month,
                            "day": day,
                        }
                    )
                for band in select_bands(satellite):
                    plane = _band_plane(satellite, band, scene_mask, rng, spec.noise_sigma)
                    name = (
                        f"{satellite.value}_{band}_{lon_s}_{lat_s}"
                        f"_{year:04d}_{month:02d}_{day:02d}.tiff"
                    )
                    write_tiff(plane, out_dir / name)
                    files.append(name)

    return {
        "seed": spec.seed,
        "lon": lon_s,
        "lat": lat_s,
        "months": [[y, m] for y, m in spec.months],
        "files": files,
        "outliers": outliers,
    }


def scene_grid(index: int) -> Tuple[float, float]:
    """Distinct 2-decimal grid coordinates for scene `index`."""
    lon = round(-58.0 + 0.02 * (index % 100), 2)
    lat = round(-4.0 - 0.02 * (index // 100), 2)
    return lon, lat


def _emit_scene(item: Tuple[int, SceneSpec, str]) -> dict:
    i, spec, out_dir = item
    scene_dir = Path(out_dir) / f"scene_{i:04d}"
    entry = generate_scene(spec, scene_dir)
    entry["files"] = [f"scene_{i:04d}/{name}" for name in entry["files"]]
    return entry


def generate_corpus(
    out_dir,
    n_scenes: int,
    base_seed: int,
    months: Sequence[Tuple[int, int]] = ((2020, 8),),
    dates: DateCounts = DateCounts(),
    noise_sigma: float = 150.0,
    outlier_rate: float = 0.008,
    parallelism: int = 1,
) -> dict:
    """Generate `n_scenes` independent scenes plus the aggregate manifest.

    Writes manifest.json and a queries.csv covering every scene-month; the
    same arguments always reproduce a byte-identical tree.
    """
    if n_scenes < 0:
        raise ValueError("n_scenes must be non-negative")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    specs = []
    for i in range(n_scenes):
        lon, lat = scene_grid(i)
        specs.append(
            SceneSpec(
                seed=base_seed * 1_000_003 + i,
                lon=lon,
                lat=lat,
                months=tuple(months),
                dates=dates,
                noise_sigma=noise_sigma,
                outlier_rate=outlier_rate,
            )
        )

    items = [(i, spec, str(out_dir)) for i, spec in enumerate(specs)]
    if parallelism > 1 and n_scenes > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            scenes = list(pool.map(_emit_scene, items, chunksize=8))
    else:
        scenes = [_emit_scene(item) for item in items]

    manifest = {"scenes": scenes}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    lines = ["lat,lon,year,month"]
    for spec in specs:
        for year, month in spec.months:
            lines.append(f"{grid_key(spec.lat)},{grid_key(spec.lon)},{year},{month:02d}")
    (out_dir / "queries.csv").write_text("\n".join(lines) + "\n")
    return manifest

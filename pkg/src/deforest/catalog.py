"""Tile catalog: filename grammar, directory indexing, pairing, query resolution.

File names follow ``{Collection}_{Band}_{Lon}_{Lat}_{Year}_{Month}[_{Day}].tiff``
where label tiles (collection ``Deforestation``) carry neither band nor day.
Longitude and latitude are fixed 2-decimal grid values; two tiles cover the
same cell exactly when those printed values are string-equal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date as Date
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import CatalogError, ExcludedCollectionError, FilenameError
from .preprocess import select_bands
from .raster import Satellite

LABEL_COLLECTION = "Deforestation"
EXCLUDED_COLLECTIONS = frozenset({"Landsat5"})

_GRID_RE = re.compile(r"^-?\d+\.\d{2}$")
_YEAR_RE = re.compile(r"^\d{4}$")
_TWO_DIGIT_RE = re.compile(r"^\d{2}$")


class RecordKind(Enum):
    IMAGERY = "Imagery"
    LABEL = "Label"

    def __str__(self) -> str:
        return self.value


def grid_key(value: float) -> str:
    """Canonical 2-decimal grid coordinate used for location equality."""
    return f"{value:.2f}"


@dataclass(frozen=True)
class FilenameGrammar:
    """Separator and field order of tile names; defaults match the dataset."""

    separator: str = "_"
    extension: str = ".tiff"
    imagery_fields: Tuple[str, ...] = ("band", "lon", "lat", "year", "month", "day")
    label_fields: Tuple[str, ...] = ("lon", "lat", "year", "month")

    def __post_init__(self) -> None:
        if not self.separator:
            raise ValueError("grammar separator must be non-empty")
        if set(self.imagery_fields) != {"band", "lon", "lat", "year", "month", "day"}:
            raise ValueError("imagery_fields must be a permutation of band/lon/lat/year/month/day")
        if set(self.label_fields) != {"lon", "lat", "year", "month"}:
            raise ValueError("label_fields must be a permutation of lon/lat/year/month")


DEFAULT_GRAMMAR = FilenameGrammar()


@dataclass(frozen=True)
class TileRecord:
    """One catalogued file: an imagery band tile or a monthly label tile."""

    satellite: Optional[Satellite]
    band: Optional[str]
    lon: float
    lat: float
    year: int
    month: int
    day: Optional[int]
    path: str
    kind: RecordKind

    def __post_init__(self) -> None:
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.kind is RecordKind.IMAGERY:
            if self.satellite is None or self.band is None or self.day is None:
                raise ValueError("imagery records need satellite, band and day")
            Date(self.year, self.month, self.day)
        else:
            if self.band is not None or self.day is not None:
                raise ValueError("label records carry neither band nor day")

    @property
    def loc_key(self) -> Tuple[str, str]:
        return (grid_key(self.lon), grid_key(self.lat))

    @property
    def date(self) -> Optional[Date]:
        if self.day is None:
            return None
        return Date(self.year, self.month, self.day)


@dataclass(frozen=True)
class Query:
    """A (longitude, latitude, year, month) request for one fused output.

    The source text of lon/lat is kept verbatim so output files can echo the
    query exactly; matching always goes through the canonical grid key.
    """

    lon: float
    lat: float
    year: int
    month: int
    lon_text: str = ""
    lat_text: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if not self.lon_text:
            object.__setattr__(self, "lon_text", grid_key(self.lon))
        if not self.lat_text:
            object.__setattr__(self, "lat_text", grid_key(self.lat))

    @property
    def loc_key(self) -> Tuple[str, str]:
        return (grid_key(self.lon), grid_key(self.lat))


@dataclass(frozen=True)
class CandidateSet:
    """A band-complete imagery set for one satellite on one date."""

    satellite: Satellite
    date: Date
    records: Tuple[TileRecord, ...]


@dataclass(frozen=True)
class TrainingPair:
    """One dated, band-complete imagery set matched to its monthly label."""

    stack_source: Tuple[TileRecord, ...]
    label: TileRecord

    def __post_init__(self) -> None:
        keys = {(r.satellite, r.loc_key, r.date) for r in self.stack_source}
        if len(keys) != 1:
            raise ValueError("stack_source records must share satellite, location and date")
        rec = self.stack_source[0]
        if rec.loc_key != self.label.loc_key or (rec.year, rec.month) != (
            self.label.year,
            self.label.month,
        ):
            raise ValueError("label must share the stack's location and month")


@dataclass(frozen=True)
class PairingResult:
    pairs: Tuple[TrainingPair, ...]
    incomplete_dates: int


def _parse_grid(token: str, what: str, name: str) -> float:
    if not _GRID_RE.match(token):
        raise FilenameError(f"bad {what} field {token!r} in {name!r}")
    return float(token)


def parse_filename(name: str, grammar: FilenameGrammar = DEFAULT_GRAMMAR) -> TileRecord:
    """Parse one tile file name into a record; `path` is set to the name given."""
    base = Path(name).name
    if not base.endswith(grammar.extension):
        raise FilenameError(f"missing {grammar.extension} extension: {name!r}")
    stem = base[: -len(grammar.extension)]
    tokens = stem.split(grammar.separator)
    if len(tokens) < 2:
        raise FilenameError(f"not enough fields: {name!r}")
    collection = tokens[0]
    if collection in EXCLUDED_COLLECTIONS:
        raise ExcludedCollectionError(f"excluded collection {collection!r}: {name!r}")

    if collection == LABEL_COLLECTION:
        fields = grammar.label_fields
        kind = RecordKind.LABEL
        satellite = None
    else:
        try:
            satellite = Satellite(collection)
        except ValueError:
            raise FilenameError(f"unknown collection {collection!r}: {name!r}") from None
        fields = grammar.imagery_fields
        kind = RecordKind.IMAGERY

    values = tokens[1:]
    if len(values) != len(fields):
        raise FilenameError(
            f"expected {len(fields)} fields after the collection, got {len(values)}: {name!r}"
        )
    parts = dict(zip(fields, values))

    lon = _parse_grid(parts["lon"], "longitude", name)
    lat = _parse_grid(parts["lat"], "latitude", name)
    if not _YEAR_RE.match(parts["year"]):
        raise FilenameError(f"bad year field {parts['year']!r} in {name!r}")
    if not _TWO_DIGIT_RE.match(parts["month"]):
        raise FilenameError(f"bad month field {parts['month']!r} in {name!r}")
    year = int(parts["year"])
    month = int(parts["month"])
    day = None
    band = None
    if kind is RecordKind.IMAGERY:
        band = parts["band"]
        if not band or grammar.separator in band:
            raise FilenameError(f"bad band field in {name!r}")
        if not _TWO_DIGIT_RE.match(parts["day"]):
            raise FilenameError(f"bad day field {parts['day']!r} in {name!r}")
        day = int(parts["day"])

    try:
        return TileRecord(
            satellite=satellite,
            band=band,
            lon=lon,
            lat=lat,
            year=year,
            month=month,
            day=day,
            path=name,
            kind=kind,
        )
    except ValueError as exc:
        raise FilenameError(f"{exc}: {name!r}") from exc


def format_filename(record: TileRecord, grammar: FilenameGrammar = DEFAULT_GRAMMAR) -> str:
    """Inverse of parse_filename for valid records."""
    parts: Dict[str, str] = {
        "lon": grid_key(record.lon),
        "lat": grid_key(record.lat),
        "year": f"{record.year:04d}",
        "month": f"{record.month:02d}",
    }
    if record.kind is RecordKind.LABEL:
        tokens = [LABEL_COLLECTION] + [parts[f] for f in grammar.label_fields]
    else:
        parts["band"] = record.band or ""
        parts["day"] = f"{record.day:02d}"
        tokens = [record.satellite.value] + [parts[f] for f in grammar.imagery_fields]
    return grammar.separator.join(tokens) + grammar.extension


@dataclass(frozen=True)
class Catalog:
    """Immutable index of all parseable tiles under one root."""

    records: Tuple[TileRecord, ...]
    skipped: Tuple[str, ...] = ()
    _index: Dict[Tuple[str, str, int, int], Tuple[int, ...]] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        paths = [r.path for r in self.records]
        if len(set(paths)) != len(paths):
            raise CatalogError("duplicate paths in catalog")
        index: Dict[Tuple[str, str, int, int], List[int]] = {}
        for i, rec in enumerate(self.records):
            key = rec.loc_key + (rec.year, rec.month)
            index.setdefault(key, []).append(i)
        object.__setattr__(
            self, "_index", {k: tuple(v) for k, v in index.items()}
        )

    def __len__(self) -> int:
        return len(self.records)

    def at_month(self, lon_key: str, lat_key: str, year: int, month: int) -> List[TileRecord]:
        ids = self._index.get((lon_key, lat_key, year, month), ())
        return [self.records[i] for i in ids]

    def labels(self) -> List[TileRecord]:
        return [r for r in self.records if r.kind is RecordKind.LABEL]

    def to_json(self) -> dict:
        return {
            "records": [
                {
                    "satellite": r.satellite.value if r.satellite else None,
                    "band": r.band,
                    "lon": grid_key(r.lon),
                    "lat": grid_key(r.lat),
                    "year": r.year,
                    "month": r.month,
                    "day": r.day,
                    "path": r.path,
                    "kind": r.kind.value,
                }
                for r in self.records
            ],
            "skipped": list(self.skipped),
        }

    @staticmethod
    def from_json(doc: dict) -> "Catalog":
        try:
            records = tuple(
                TileRecord(
                    satellite=Satellite(item["satellite"]) if item["satellite"] else None,
                    band=item["band"],
                    lon=float(item["lon"]),
                    lat=float(item["lat"]),
                    year=int(item["year"]),
                    month=int(item["month"]),
                    day=None if item["day"] is None else int(item["day"]),
                    path=item["path"],
                    kind=RecordKind(item["kind"]),
                )
                for item in doc["records"]
            )
            skipped = tuple(doc.get("skipped", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"malformed catalog document: {exc}") from exc
        return Catalog(records=records, skipped=skipped)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def load(path) -> "Catalog":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CatalogError(f"cannot load catalog {path}: {exc}") from exc
        return Catalog.from_json(doc)


def build_catalog(root, grammar: FilenameGrammar = DEFAULT_GRAMMAR) -> Catalog:
    """Index every parseable tile under `root` (recursive, deterministic order).

    Files that do not parse, including excluded collections, land on the
    skipped list instead of aborting the build.
    """
    root = Path(root)
    if not root.is_dir():
        raise CatalogError(f"unreadable catalog root: {root}")
    records: List[TileRecord] = []
    skipped: List[str] = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        full = str(path.resolve().as_posix())
        try:
            parsed = parse_filename(path.name, grammar)
        except (FilenameError, ExcludedCollectionError):
            skipped.append(full)
            continue
        records.append(
            TileRecord(
                satellite=parsed.satellite,
                band=parsed.band,
                lon=parsed.lon,
                lat=parsed.lat,
                year=parsed.year,
                month=parsed.month,
                day=parsed.day,
                path=full,
                kind=parsed.kind,
            )
        )
    records.sort(key=lambda r: r.path)
    return Catalog(records=tuple(records), skipped=tuple(sorted(skipped)))


def _complete_sets_at(records: Sequence[TileRecord]) -> Tuple[List[CandidateSet], int]:
    """Group imagery by (satellite, date) and keep band-complete groups."""
    groups: Dict[Tuple[str, Date], List[TileRecord]] = {}
    for rec in records:
        if rec.kind is not RecordKind.IMAGERY:
            continue
        groups.setdefault((rec.satellite.value, rec.date), []).append(rec)
    complete: List[CandidateSet] = []
    incomplete = 0
    for (sat_name, day), members in sorted(groups.items()):
        satellite = Satellite(sat_name)
        wanted = select_bands(satellite)
        by_band = {}
        duplicate = False
        for rec in members:
            if rec.band in by_band:
                duplicate = True
            by_band[rec.band] = rec
        if duplicate or set(by_band) != set(wanted):
            incomplete += 1
            continue
        ordered = tuple(by_band[b] for b in wanted)
        complete.append(CandidateSet(satellite=satellite, date=day, records=ordered))
    return complete, incomplete


def complete_sets(catalog: Catalog) -> Tuple[List[CandidateSet], int]:
    """All band-complete (satellite, date) sets in the catalog, sorted."""
    sets: List[CandidateSet] = []
    incomplete = 0
    for key in sorted(catalog._index):
        found, missing = _complete_sets_at(catalog.at_month(*key))
        sets.extend(found)
        incomplete += missing
    return sets, incomplete


def pair_training(catalog: Catalog) -> PairingResult:
    """Match every dated band-complete imagery set to its monthly label."""
    pairs: List[TrainingPair] = []
    incomplete = 0
    for label in sorted(catalog.labels(), key=lambda r: r.path):
        candidates = catalog.at_month(*label.loc_key, label.year, label.month)
        found, missing = _complete_sets_at(candidates)
        incomplete += missing
        for cand in found:
            pairs.append(TrainingPair(stack_source=cand.records, label=label))
    return PairingResult(pairs=tuple(pairs), incomplete_dates=incomplete)


def resolve_query(catalog: Catalog, query: Query) -> List[CandidateSet]:
    """Every band-complete imagery set at the query's grid cell and month.

    An empty list means no data for the query.
    """
    records = catalog.at_month(*query.loc_key, query.year, query.month)
    found, _ = _complete_sets_at(records)
    return found

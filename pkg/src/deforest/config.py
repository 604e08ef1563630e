"""Run configuration: one JSON file covering every tunable knob.

Layout (all sections optional, unknown keys anywhere are rejected):

    {
      "normalization": {"Sentinel2": {"B4": [0, 10000]}, ...},
      "resize": {"kernel": "bilinear"},
      "filename_grammar": {"separator": "_",
                           "imagery_fields": [...], "label_fields": [...]},
      "segmenter": {"t_low": 0.1, "t_high": 0.3},
      "fusion": {"k1": 3, "k2": 1, "pixel_threshold": 0.4,
                 "ratio_binarize_level": 0.5, "std_mode": "population",
                 "boundary": "inclusive",
                 "structuring_element": [[1,1,1],[1,1,1],[1,1,1]]},
      "parallelism": 4
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .catalog import DEFAULT_GRAMMAR, FilenameGrammar
from .errors import ConfigError
from .fusion import FusionConfig, StructuringElement
from .preprocess import DEFAULT_NORMALIZATION, NormalizationTable, select_bands
from .raster import Satellite
from .segment import IndexSegmenterParams

_TOP_KEYS = {"normalization", "resize", "filename_grammar", "segmenter", "fusion", "parallelism"}
_FUSION_KEYS = {
    "k1",
    "k2",
    "pixel_threshold",
    "ratio_binarize_level",
    "std_mode",
    "boundary",
    "structuring_element",
}
_GRAMMAR_KEYS = {"separator", "imagery_fields", "label_fields"}
_SEGMENTER_KEYS = {"t_low", "t_high"}
_RESIZE_KEYS = {"kernel"}


@dataclass(frozen=True)
class RunConfig:
    normalization: NormalizationTable = DEFAULT_NORMALIZATION
    fusion: FusionConfig = field(default_factory=FusionConfig)
    segmenter: IndexSegmenterParams = field(default_factory=IndexSegmenterParams)
    grammar: FilenameGrammar = DEFAULT_GRAMMAR
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _build_normalization(section: dict) -> NormalizationTable:
    ranges = dict(DEFAULT_NORMALIZATION.ranges)
    _require(isinstance(section, dict), "normalization must be an object")
    for sat_name, bands in section.items():
        try:
            satellite = Satellite(sat_name)
        except ValueError:
            raise ConfigError(f"unknown key(s) in normalization: {sat_name}") from None
        _require(isinstance(bands, dict), f"normalization.{sat_name} must be an object")
        known = set(select_bands(satellite))
        for band, pair in bands.items():
            _require(band in known, f"unknown key(s) in normalization.{sat_name}: {band}")
            _require(
                isinstance(pair, (list, tuple)) and len(pair) == 2,
                f"normalization.{sat_name}.{band} must be a [lo, hi] pair",
            )
            ranges[(satellite, band)] = (float(pair[0]), float(pair[1]))
    return NormalizationTable(ranges=ranges)


def _build_fusion(section: dict) -> FusionConfig:
    _require(isinstance(section, dict), "fusion must be an object")
    _reject_unknown(section, _FUSION_KEYS, "fusion")
    kwargs = {}
    for key in ("k1", "k2", "pixel_threshold", "ratio_binarize_level"):
        if key in section:
            kwargs[key] = float(section[key])
    for key in ("std_mode", "boundary"):
        if key in section:
            kwargs[key] = str(section[key])
    if "structuring_element" in section:
        try:
            kwargs["structuring_element"] = StructuringElement(
                matrix=np.asarray(section["structuring_element"])
            )
        except ValueError as exc:
            raise ConfigError(f"fusion.structuring_element: {exc}") from exc
    try:
        return FusionConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"fusion: {exc}") from exc


def _build_grammar(section: dict) -> FilenameGrammar:
    _require(isinstance(section, dict), "filename_grammar must be an object")
    _reject_unknown(section, _GRAMMAR_KEYS, "filename_grammar")
    kwargs = {}
    if "separator" in section:
        kwargs["separator"] = str(section["separator"])
    for key in ("imagery_fields", "label_fields"):
        if key in section:
            _require(isinstance(section[key], list), f"filename_grammar.{key} must be a list")
            kwargs[key] = tuple(str(x) for x in section[key])
    try:
        return FilenameGrammar(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"filename_grammar: {exc}") from exc


def _build_segmenter(section: dict) -> IndexSegmenterParams:
    _require(isinstance(section, dict), "segmenter must be an object")
    _reject_unknown(section, _SEGMENTER_KEYS, "segmenter")
    kwargs = {k: float(v) for k, v in section.items()}
    try:
        return IndexSegmenterParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"segmenter: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    _require(isinstance(doc, dict), "run configuration must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "run configuration")

    if "resize" in doc:
        _require(isinstance(doc["resize"], dict), "resize must be an object")
        _reject_unknown(doc["resize"], _RESIZE_KEYS, "resize")
        kernel = doc["resize"].get("kernel", "bilinear")
        _require(kernel == "bilinear", f"unsupported resize kernel: {kernel!r}")

    parallelism = doc.get("parallelism", 1)
    _require(
        isinstance(parallelism, int) and not isinstance(parallelism, bool),
        "parallelism must be an integer",
    )

    return RunConfig(
        normalization=_build_normalization(doc.get("normalization", {})),
        fusion=_build_fusion(doc.get("fusion", {})),
        segmenter=_build_segmenter(doc.get("segmenter", {})),
        grammar=_build_grammar(doc.get("filename_grammar", {})),
        parallelism=parallelism,
    )


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Load and validate a run configuration; None gives all defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)

"""Band selection, bilinear resize, normalization, stack assembly, FGPS IO."""

from datetime import date as Date

import numpy as np
import pytest

from deforest.errors import (
    ConfigError,
    DuplicateBandError,
    ExcludedCollectionError,
    MissingBandError,
    MixedDatesError,
    StackError,
)
from deforest.preprocess import (
    DEFAULT_NORMALIZATION,
    NormalizationTable,
    assemble_stack,
    normalize,
    read_stack,
    resize_bilinear,
    select_bands,
    stack_filename,
    write_stack,
)
from deforest.raster import BandRaster, Satellite, write_tiff

from helpers import band_set_records, make_stack
from oracles import oracle_bilinear


class TestSelectBands:
    def test_sentinel1(self):
        assert select_bands(Satellite.SENTINEL1) == ("VV", "VH")

    def test_sentinel2(self):
        assert select_bands(Satellite.SENTINEL2) == ("B4", "B7", "B8", "B11", "B12")

    def test_landsat8(self):
        assert select_bands(Satellite.LANDSAT8) == ("B4", "B5", "B6", "B7")

    def test_string_names_accepted(self):
        assert select_bands("Sentinel2") == ("B4", "B7", "B8", "B11", "B12")

    @pytest.mark.parametrize("name", ["Landsat5", "Modis", ""])
    def test_excluded_or_unknown(self, name):
        with pytest.raises(ExcludedCollectionError, match="excluded collection"):
            select_bands(name)


class TestResize:
    def test_constant_input_is_constant(self):
        raster = BandRaster(values=np.full((85, 85), 5.0, dtype=np.float32))
        out = resize_bilinear(raster)
        assert out.values.shape == (256, 256)
        assert np.all(out.values == 5.0)

    def test_identity_when_sizes_match(self):
        rng = np.random.default_rng(0)
        raster = BandRaster(values=rng.random((256, 256), dtype=np.float32))
        out = resize_bilinear(raster)
        assert out.values is raster.values

    def test_two_by_two_gradient(self):
        raster = BandRaster(values=np.array([[0, 1], [0, 1]], dtype=np.float32))
        out = resize_bilinear(raster).values
        assert np.all(out[:, 0] == 0.0)
        assert np.all(out[:, -1] == 1.0)
        assert np.all(np.diff(out, axis=1) >= 0)

    @pytest.mark.parametrize("shape,target", [((85, 85), (256, 256)), ((7, 13), (31, 17)),
                                              ((300, 200), (256, 256))])
    def test_matches_closed_form_oracle(self, shape, target):
        rng = np.random.default_rng(shape[0] * 1000 + shape[1])
        src = rng.random(shape, dtype=np.float32) * 100
        raster = BandRaster(values=src)
        got = resize_bilinear(raster, target).values
        expected = oracle_bilinear(src.astype(np.float64), *target)
        np.testing.assert_allclose(got, expected, atol=1e-4)

    def test_output_range_within_input_range(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            src = rng.random((9, 9), dtype=np.float32) * 50 - 25
            out = resize_bilinear(BandRaster(values=src), (64, 64)).values
            assert out.min() >= src.min()
            assert out.max() <= src.max()

    def test_too_small_rejected(self):
        with pytest.raises(StackError):
            resize_bilinear(BandRaster(values=np.zeros((1, 5), dtype=np.float32)))


def _raster(value, satellite=Satellite.SENTINEL2, band="B4"):
    return BandRaster(
        values=np.full((4, 4), value, dtype=np.float32),
        satellite=satellite,
        band=band,
        lon=-54.80,
        lat=-3.67,
        date=Date(2020, 8, 15),
    )


class TestNormalize:
    def test_endpoints(self):
        assert np.all(normalize(_raster(0.0)).values == 0.0)
        assert np.all(normalize(_raster(10000.0)).values == 1.0)

    def test_midpoint(self):
        assert np.all(normalize(_raster(5000.0)).values == 0.5)

    def test_sar_clamp(self):
        raster = _raster(-45.0, Satellite.SENTINEL1, "VV")
        assert np.all(normalize(raster).values == 0.0)

    def test_above_range_clamps_to_one(self):
        assert np.all(normalize(_raster(20000.0)).values == 1.0)

    def test_non_finite_maps_to_zero(self):
        values = np.full((2, 2), 5000.0, dtype=np.float32)
        values[0, 0] = np.nan
        values[0, 1] = np.inf
        values[1, 0] = -np.inf
        raster = BandRaster(
            values=values, satellite=Satellite.SENTINEL2, band="B4",
            lon=0.0, lat=0.0, date=Date(2020, 8, 1),
        )
        out = normalize(raster).values
        assert out[0, 0] == 0.0 and out[0, 1] == 0.0 and out[1, 0] == 0.0
        assert out[1, 1] == 0.5

    def test_monotone_in_input(self):
        rng = np.random.default_rng(1)
        a = rng.random((8, 8), dtype=np.float32) * 12000 - 1000
        b = a + rng.random((8, 8), dtype=np.float32) * 500
        na = normalize(BandRaster(values=a, satellite=Satellite.SENTINEL2, band="B4",
                                  lon=0.0, lat=0.0, date=Date(2020, 8, 1))).values
        nb = normalize(BandRaster(values=b, satellite=Satellite.SENTINEL2, band="B4",
                                  lon=0.0, lat=0.0, date=Date(2020, 8, 1))).values
        assert np.all(nb >= na)

    def test_missing_entry(self):
        table = NormalizationTable(ranges=DEFAULT_NORMALIZATION.ranges)
        raster = BandRaster(
            values=np.zeros((2, 2), dtype=np.float32),
            satellite=Satellite.SENTINEL2,
            band="B99",
            lon=0.0, lat=0.0, date=Date(2020, 8, 1),
        )
        with pytest.raises(ConfigError):
            normalize(raster, table)

    def test_table_rejects_inverted_range(self):
        bad = dict(DEFAULT_NORMALIZATION.ranges)
        bad[(Satellite.SENTINEL2, "B4")] = (10.0, 10.0)
        with pytest.raises(ConfigError):
            NormalizationTable(ranges=bad)

    def test_table_requires_all_selected_bands(self):
        partial = {(Satellite.SENTINEL2, "B4"): (0.0, 1.0)}
        with pytest.raises(ConfigError):
            NormalizationTable(ranges=partial)


def _write_band_files(tmp_path, satellite, value=5000.0, size=(256, 256), day=15):
    records = []
    for rec in band_set_records(satellite, day=day):
        path = tmp_path / rec.path
        if satellite is Satellite.SENTINEL1:
            write_tiff(np.full(size, -15.0, dtype=np.float32), path)
        else:
            write_tiff(np.full(size, value, dtype=np.uint16), path)
        records.append(
            type(rec)(**{**rec.__dict__, "path": str(path)})
        )
    return records


class TestAssemble:
    def test_sentinel2_order(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.SENTINEL2)
        stack = assemble_stack(records)
        assert stack.bands == ("B4", "B7", "B8", "B11", "B12")
        assert stack.array().shape == (5, 256, 256)
        assert np.all(stack.array() == 0.5)

    def test_landsat_is_resized(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.LANDSAT8, size=(85, 85))
        stack = assemble_stack(records)
        assert stack.array().shape == (4, 256, 256)
        assert np.all(stack.array() == 0.5)

    def test_sentinel1_channel_count(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.SENTINEL1)
        stack = assemble_stack(records)
        assert stack.array().shape == (2, 256, 256)
        assert np.all(stack.array() == 0.5)

    def test_missing_band(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.SENTINEL2)
        with pytest.raises(MissingBandError, match="B11"):
            assemble_stack([r for r in records if r.band != "B11"])

    def test_duplicate_band(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.SENTINEL2)
        with pytest.raises(DuplicateBandError):
            assemble_stack(records + [records[0]])

    def test_mixed_dates(self, tmp_path):
        a = _write_band_files(tmp_path, Satellite.SENTINEL2, day=15)
        b = _write_band_files(tmp_path, Satellite.SENTINEL2, day=16)
        mixed = a[:-1] + [b[-1]]
        with pytest.raises(MixedDatesError):
            assemble_stack(mixed)

    def test_stack_round_trips_through_fgps(self, tmp_path):
        records = _write_band_files(tmp_path, Satellite.SENTINEL2)
        stack = assemble_stack(records)
        path = tmp_path / stack_filename(stack)
        write_stack(stack, path)
        back = read_stack(path)
        assert back.satellite == stack.satellite
        assert back.bands == stack.bands
        assert back.date == stack.date
        assert back.ranges == stack.ranges
        assert np.array_equal(back.array(), stack.array())

    def test_stack_invariant_rejects_out_of_range(self):
        bad = np.full((256, 256), 1.5, dtype=np.float32)
        with pytest.raises(StackError):
            make_stack({b: bad for b in select_bands(Satellite.SENTINEL2)})

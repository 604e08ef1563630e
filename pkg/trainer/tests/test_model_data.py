"""Model shape contracts and stack/label pairing."""

import numpy as np
import pytest
import torch

from unet_trainer.data import load_arrays, pair_stacks_with_labels
from unet_trainer.fgio import list_stacks, read_stack
from unet_trainer.model import CHANNELS_BY_SATELLITE, SegmentationUNet, load_model, save_model


class TestModel:
    @pytest.mark.parametrize("satellite,channels", sorted(CHANNELS_BY_SATELLITE.items()))
    def test_output_shape_fixed_at_256(self, satellite, channels):
        model = SegmentationUNet(in_channels=channels)
        with torch.no_grad():
            out = model(torch.rand(2, channels, 256, 256))
        assert out.shape == (2, 1, 256, 256)
        assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0

    def test_channel_mismatch_rejected(self):
        model = SegmentationUNet(in_channels=5)
        with pytest.raises(ValueError, match="channels"):
            model(torch.rand(1, 4, 256, 256))

    def test_artifact_round_trip(self, tmp_path):
        model = SegmentationUNet(in_channels=4)
        save_model(model, "Landsat8", tmp_path / "m.pt")
        loaded, satellite = load_model(tmp_path / "m.pt")
        assert satellite == "Landsat8"
        x = torch.rand(1, 4, 256, 256)
        with torch.no_grad():
            assert torch.equal(model.eval()(x), loaded(x))


class TestData:
    def test_pairing_counts(self, small_corpus):
        pairs = pair_stacks_with_labels(
            small_corpus["stacks"], small_corpus["corpus"], "Sentinel2"
        )
        assert len(pairs) == 8  # 2 scenes x 4 dates
        inputs, labels = load_arrays(pairs)
        assert inputs.shape == (8, 5, 256, 256)
        assert labels.shape == (8, 1, 256, 256)
        assert inputs.min() >= 0.0 and inputs.max() <= 1.0
        assert set(np.unique(labels)) <= {0.0, 1.0}

    def test_no_pairs_for_missing_satellite(self, small_corpus):
        pairs = pair_stacks_with_labels(
            small_corpus["stacks"], small_corpus["corpus"], "Sentinel1"
        )
        assert pairs == []
        with pytest.raises(ValueError, match="empty pair set"):
            load_arrays(pairs)

    def test_stack_reader_matches_sidecar(self, small_corpus):
        stacks = list_stacks(small_corpus["stacks"], "Sentinel2")
        assert stacks, "corpus should contain Sentinel2 stacks"
        one = read_stack(stacks[0].path)
        assert one.bands == ("B4", "B7", "B8", "B11", "B12")
        assert one.values.shape == (5, 256, 256)

"""Desk-scale U-Net trainer for the deforestation mapping pipeline.

Consumes the pipeline's file interfaces only: FGPS stacks and label tiles in,
FGPM probability masks with import sidecars out.
"""

from .data import TrainingPair, pair_stacks_with_labels
from .export import export_masks
from .losses import bce_loss, combined_loss, dice_loss
from .model import CHANNELS_BY_SATELLITE, SegmentationUNet, load_model, save_model
from .train import TrainResult, TrainSpec, train

__version__ = "0.1.0"

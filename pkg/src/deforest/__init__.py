"""Multi-satellite deforestation mapping pipeline.

Turns daily satellite tile collections into one binary deforestation map per
(longitude, latitude, year, month) query: catalog ingestion, band selection
and normalization, per-image segmentation, two-stage sigma-filtered ensemble
fusion with thresholding and morphological opening, plus evaluation tooling
and a synthetic test corpus generator.
"""

from .catalog import (
    Catalog,
    FilenameGrammar,
    Query,
    TileRecord,
    TrainingPair,
    build_catalog,
    pair_training,
    parse_filename,
    resolve_query,
)
from .config import RunConfig, load_run_config
from .fusion import (
    FusionConfig,
    FusionReport,
    StructuringElement,
    average_masks,
    binarize,
    dilate,
    erode,
    fuse_query,
    opening,
    sigma_filter,
    two_stage_filter,
)
from .indices import nbr, nbr_map, ndvi, ndvi_map
from .metrics import (
    ConfusionCounts,
    EvalReport,
    bce_loss,
    combined_loss,
    confusion,
    dice_loss,
    f1,
    iou,
    pixel_accuracy,
)
from .preprocess import (
    ImageStack,
    NormalizationTable,
    assemble_stack,
    normalize,
    resize_bilinear,
    select_bands,
)
from .raster import (
    BandRaster,
    BinaryMask,
    ProbabilityMask,
    Satellite,
    read_raw,
    read_tiff,
    write_mask_png,
    write_raw,
)
from .segment import (
    IndexSegmenter,
    IndexSegmenterParams,
    Prediction,
    deforestation_ratio,
    import_mask,
    index_predict,
)
from .synth import DateCounts, SceneSpec, generate_corpus, generate_scene

__version__ = "0.1.0"

"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class RasterIOError(PipelineError):
    """A raster file could not be read or written."""


class UnreadableFileError(RasterIOError):
    """File missing, truncated, or not decodable at all."""


class MultiBandTiffError(RasterIOError):
    """TIFF holds more than one sample plane; only single-band tiles are accepted."""


class UnsupportedSampleFormatError(RasterIOError):
    """TIFF sample format is neither integer nor floating point, or the tile is oversized."""


class BadMagicError(RasterIOError):
    """Binary mask file does not start with the expected magic bytes."""


class PayloadMismatchError(RasterIOError):
    """Binary mask header dimensions disagree with the payload length."""


class FilenameError(PipelineError):
    """A file name does not match the tile naming grammar."""


class ExcludedCollectionError(PipelineError):
    """Collection is recognized but deliberately not ingested (Landsat 5)."""


class CatalogError(PipelineError):
    """Catalog cannot be built or loaded."""


class StackError(PipelineError):
    """A band set cannot be assembled into an image stack."""


class MissingBandError(StackError):
    pass


class DuplicateBandError(StackError):
    pass


class MixedDatesError(StackError):
    pass


class OpticalBandsRequiredError(PipelineError):
    """The index segmenter was handed a stack without optical bands."""


class SidecarError(PipelineError):
    """Mask sidecar metadata is missing or incomplete."""


class EmptyEnsembleError(PipelineError):
    """An operation that needs at least one prediction received none."""


class NoDataError(PipelineError):
    """A query resolved to zero candidate images."""


class ConfigError(PipelineError):
    """Run configuration file is malformed or contains unknown keys."""

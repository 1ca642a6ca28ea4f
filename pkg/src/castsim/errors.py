"""Exception hierarchy shared by every pipeline stage."""


class PipelineError(Exception):
    """Base class for all castsim errors."""


# raster / image I/O

class EmptyRaster(PipelineError):
    pass


class UnsupportedFormat(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


# photometric stereo

class InvalidSlant(PipelineError):
    pass


class TooFewLights(PipelineError):
    pass


class RankDeficientRig(PipelineError):
    pass


class NoValidPixels(PipelineError):
    pass


# texture synthesis

class MapTooSmall(PipelineError):
    pass


class EmptyInput(PipelineError):
    pass


class EmptyDictionary(PipelineError):
    pass


class SeedLargerThanTarget(PipelineError):
    pass


# defect generation

class ResolutionTooLow(PipelineError):
    pass


class InvalidRange(PipelineError):
    pass


# rendering

class FootprintOutsideChart(PipelineError):
    pass


class SubdivisionBudgetExceeded(PipelineError):
    pass


class EmptyMesh(PipelineError):
    pass


class NoLights(PipelineError):
    pass


# dataset assembly

class PlacementFailed(PipelineError):
    pass


class EmptyManifest(PipelineError):
    pass


class ConfigError(PipelineError):
    pass

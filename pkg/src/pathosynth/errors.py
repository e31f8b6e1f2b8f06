"""Exception types raised across the package."""


class PathosynthError(Exception):
    """Base class for all package-specific errors."""


class VolumeError(PathosynthError):
    """Invalid volume construction or mismatched grids."""


class NiftiFormatError(PathosynthError):
    """File is not a readable NIfTI-1 volume."""


class VocabularyError(PathosynthError):
    """Label codes and role vocabulary disagree."""


class PlanError(PathosynthError):
    """A pathology plan violates its invariants."""


class SynthesisError(PathosynthError):
    """Pathology synthesis could not satisfy its constraints."""


class ScheduleError(PathosynthError):
    """Invalid noise schedule parameters."""


class PluginError(PathosynthError):
    """External denoiser plugin misbehaved or the stream is malformed."""


class EvaluationError(PathosynthError):
    """Evaluation inputs are malformed."""

"""Error hierarchy shared by every stage of the pipeline."""
from typing import Optional


class VadgsError(Exception):
    """Base class for all pipeline errors"""


class UsageError(VadgsError):
    """Bad invocation: unknown subcommand, malformed flag or config key"""


class ConfigError(UsageError):
    """Unknown or invalid configuration override"""


class DataError(VadgsError):
    """Raised by readers and algorithms when the input data cannot be processed"""


class NonPositiveDepth(DataError):
    """Point lies on or behind the camera plane"""


class EmptyInput(DataError):
    """No usable element (point, voxel, pixel) in the input"""


class NoObservingView(DataError):
    """No view observes any voxel of the instance"""


class SingularCovariance(DataError):
    """A Gaussian primitive has a degenerate scale"""


class NoValidPixels(DataError):
    """No pixel carries a comparable pair of values"""


class TooFewCandidates(DataError):
    """Fewer candidate views than the requested subset size"""


class GrazingPlane(DataError):
    """Plane is parallel to the pixel ray"""


class BehindCamera(DataError):
    """A transferred point has nonpositive depth in the target camera"""


class DegeneratePlane(DataError):
    """Plane offset is zero, the plane passes through the camera center"""


class NoSupportingViews(DataError):
    """Patch matching was called without supporting views"""


class TrackGap(DataError):
    """An object track has no pose close enough to a view timestamp"""


class DimensionMismatch(DataError):
    """Rasters or images that must share a shape do not"""


class FormatError(DataError):
    """A file does not follow the expected binary or JSON layout"""


class InvalidSpec(DataError):
    """A simulator scene specification is inconsistent"""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ManifestError(DataError):
    """A scene manifest entry is missing, unreadable or inconsistent"""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path

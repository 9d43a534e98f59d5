"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`GarmentWarpError`, which is itself a :class:`ValueError`, so callers
that only care about "bad input" can catch that.
"""


class GarmentWarpError(ValueError):
    """Base class for all package errors. ``stage`` names the pipeline stage
    that raised it, when it passed through the pipeline."""

    stage = None

    @property
    def kind(self):
        return type(self).__name__


class InvalidParams(GarmentWarpError):
    pass


# contour extraction
class NoForeground(GarmentWarpError):
    pass


class ComponentTooSmall(GarmentWarpError):
    pass


class WindowTooLarge(GarmentWarpError):
    pass


# registration
class DegenerateScale(GarmentWarpError):
    pass


class SingularSystem(GarmentWarpError):
    pass


class AllOutliers(GarmentWarpError):
    pass


# warping
class DegenerateControls(GarmentWarpError):
    pass


class GridMismatch(GarmentWarpError):
    pass


# pipeline / metrics
class DimensionMismatch(GarmentWarpError):
    pass


class LengthMismatch(GarmentWarpError):
    pass


class EmptyTargetRegion(GarmentWarpError):
    pass


class MaskOutsideGarment(GarmentWarpError):
    pass


# io / cli
class MalformedCsv(GarmentWarpError):
    pass


class ConfigError(GarmentWarpError):
    pass

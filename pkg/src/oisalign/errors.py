"""Exception and warning types shared across the package.

Every error carries a ``module`` tag so the CLI can emit module-qualified
messages without inspecting tracebacks.
"""


class OisAlignError(Exception):
    """Base class for package-specific failures."""

    module = "oisalign"


class GyroLogError(OisAlignError):
    """Malformed or mis-ordered gyroscope log content."""

    module = "gyro"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GyroCoverageError(OisAlignError):
    """Integration requested but no samples are available."""

    module = "gyro"


class FrameStampError(OisAlignError):
    """Malformed frame-stamp file content."""

    module = "gyro"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(OisAlignError):
    """Bad or incomplete camera configuration."""

    module = "config"


class DegenerateWarpError(OisAlignError):
    """A homography maps pixels to (or through) the plane at infinity."""

    module = "geometry"

    def __init__(self, patch, row=None):
        detail = f"patch {patch} produces a degenerate warp"
        if row is not None:
            detail += f" at row {row}"
        super().__init__(detail)
        self.patch = patch
        self.row = row


class FlowFormatError(OisAlignError):
    """Invalid optical-flow file content."""

    module = "flowio"


class CorrespondenceError(OisAlignError):
    """Malformed correspondence file content."""

    module = "mixtures"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AmbiguousSolutionError(OisAlignError):
    """The constraint system has more than a one-dimensional null space."""

    module = "mixtures"


class RankDeficiencyError(AmbiguousSolutionError):
    """Too few constraint rows to determine a mixture.

    A special case of ambiguity: an under-determined system always has a
    null space of dimension at least two.
    """

    module = "mixtures"


class CheiralityError(OisAlignError):
    """No essential-matrix candidate places a majority of points in front."""

    module = "mixtures"


class CorrectionFitError(OisAlignError):
    """Correction fitting failed or produced a degenerate result."""

    module = "compensator"


class AnnotationError(OisAlignError):
    """Invalid annotation content or a point outside the flow domain."""

    module = "eval"


class DegeneracyWarning(UserWarning):
    """Near-degenerate estimation problem (for example pure rotation)."""


class CoverageWarning(UserWarning):
    """Gyro integration extended beyond the sampled time range."""

"""Exception types raised across the package."""


class ColocovError(Exception):
    """Base class for package errors."""


class EmptyWindowError(ColocovError, ValueError):
    """The maximal-visibility window along the lumen is empty."""


class PoseOutsideMeshError(ColocovError, ValueError):
    """A camera pose does not lie inside the colon mesh."""


class TrajectoryExitError(ColocovError, ValueError):
    """A generated trajectory would leave the colon."""


class FormatError(ColocovError, ValueError):
    """A file does not match the expected on-disk format."""


class HashMismatchError(ColocovError):
    """A dataset file does not match its manifest entry."""

    def __init__(self, mismatches):
        self.mismatches = list(mismatches)
        super().__init__(f"{len(self.mismatches)} file(s) failed verification: {self.mismatches[:5]}")


class DegenerateCovarianceError(ColocovError, ValueError):
    """A covariance matrix is rank-deficient beyond the eigenvalue floor."""

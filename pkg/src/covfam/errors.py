"""Exception types shared across the package."""


class CovfamError(Exception):
    """Base class for all package-specific errors."""


class SingularInput(CovfamError):
    """A matrix that must be nonsingular is numerically singular."""


class RankDeficient(CovfamError):
    """A factor that must have full column rank does not."""


class DegenerateCubic(CovfamError):
    """All polynomial coefficients above the constant vanish; no root exists."""


class IllConditioned(CovfamError):
    """A linear solve is too ill conditioned to trust."""


class CutLocus(CovfamError):
    """A logarithm or projection is undefined for the given pair of points.

    Raised when the Gram product of two factors is numerically singular,
    so the connecting geodesic (and hence any construction built on it)
    is not well defined. Never patched over silently.
    """

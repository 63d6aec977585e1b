"""Quotient geometry of rank-r PSD matrices in factored form.

A PSD matrix A of rank r is carried around as a tall factor Y with
A = Y Y^T. The factor is determined only up to Y -> Y Q for orthogonal
Q, and every operation below is invariant to that choice. Geodesics are
straight lines in factor space after aligning the endpoint factors with
a polar decomposition; sections are affine slices on which plain
Euclidean interpolation is valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CutLocus, RankDeficient, SingularInput
from .numerics import as_matrix, frob_dist_sq_lowrank, polar_decompose, truncated_svd

__all__ = [
    "FactorPoint",
    "GeodesicSegment",
    "Section",
    "log_map",
    "exp_map",
    "geodesic",
    "project_to_section",
    "arithmetic_mean",
    "inductive_mean",
]

RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FactorPoint:
    """A tall factor y (n x r) standing for the PSD matrix y @ y.T.

    Construction does not reject rank-deficient factors, because interior
    points of geodesics may legitimately drop rank; such points are
    reported through ``degenerate``. Callers that require a proper rank-r
    representative use ``require_full_rank``.
    """

    y: np.ndarray

    def __post_init__(self):
        y = as_matrix(self.y, "factor")
        if y.shape[1] < 1 or y.shape[0] < y.shape[1]:
            raise ValueError(f"factor must be tall (n >= r >= 1), got {y.shape}")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def r(self) -> int:
        return self.y.shape[1]

    @cached_property
    def _sv_bounds(self) -> tuple[float, float]:
        s = np.linalg.svd(self.y, compute_uv=False)
        return float(s[0]), float(s[-1])

    @property
    def degenerate(self) -> bool:
        """True when the factor has lost full column rank numerically."""
        smax, smin = self._sv_bounds
        return smax == 0.0 or smin <= RANK_RTOL * smax

    def require_full_rank(self, what: str = "factor") -> "FactorPoint":
        if self.degenerate:
            raise RankDeficient(f"{what} does not have full column rank")
        return self

    def gram(self) -> np.ndarray:
        return self.y.T @ self.y

    def matrix(self) -> np.ndarray:
        """The represented n x n PSD matrix. For tests and small n only."""
        return self.y @ self.y.T

    def rotated(self, q) -> "FactorPoint":
        """Another representative of the same matrix, y @ q."""
        return FactorPoint(self.y @ np.asarray(q, dtype=np.float64))

    def dist_sq(self, other: "FactorPoint") -> float:
        return frob_dist_sq_lowrank(self.y, other.y)


def log_map(from_point: FactorPoint, to_point: FactorPoint) -> np.ndarray:
    """Velocity of the geodesic from one point to another.

    With q the orthogonal polar factor of Y_from^T Y_to, the velocity is
    Y_to q^T - Y_from. The resulting geodesic matrix curve does not depend
    on the representatives chosen for either endpoint.

    Raises
    ------
    CutLocus
        If Y_from^T Y_to is numerically singular, in which case the
        logarithm is not well defined.
    """
    if from_point.n != to_point.n:
        raise ValueError("points live in different ambient dimensions")
    try:
        factors = polar_decompose(from_point.y.T @ to_point.y)
    except SingularInput as exc:
        raise CutLocus("logarithm undefined: singular Gram product") from exc
    return to_point.y @ factors.q.T - from_point.y


def exp_map(base: FactorPoint, velocity, t: float = 1.0) -> FactorPoint:
    """Straight-line step in factor space, Y + t * velocity.

    May be rank-deficient for isolated t; that is reported through the
    returned point's ``degenerate`` flag, not as an error.
    """
    velocity = as_matrix(velocity, "velocity")
    if velocity.shape != base.y.shape:
        raise ValueError(f"velocity shape {velocity.shape} != factor shape {base.y.shape}")
    return FactorPoint(base.y + t * velocity)


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """The curve t -> (Y + t V)(Y + t V)^T, with V a log-map velocity."""

    base: FactorPoint
    velocity: np.ndarray

    def evaluate(self, t: float) -> FactorPoint:
        return FactorPoint(self.base.y + t * self.velocity)


def geodesic(a: FactorPoint, b: FactorPoint) -> GeodesicSegment:
    """Minimizing geodesic from a to b; evaluate(0) is a, evaluate(1) is b."""
    return GeodesicSegment(base=a, velocity=log_map(a, b))


@dataclass(frozen=True, eq=False)
class Section:
    """Affine slice of the quotient through a base factor.

    A factor lies in the section exactly when base^T Y is symmetric
    positive definite; projection onto the section rotates a factor
    without changing the matrix it represents. The orthonormal complement
    of the base is only ever materialized on demand (it is not needed for
    projection).
    """

    base: FactorPoint

    @cached_property
    def complement(self) -> np.ndarray:
        q = np.linalg.qr(self.base.y, mode="complete")[0]
        return q[:, self.base.r:]

    def contains(self, point: FactorPoint, rtol: float = 1e-10) -> bool:
        s = self.base.y.T @ point.y
        scale = np.linalg.norm(s)
        if np.linalg.norm(s - s.T) > rtol * (scale + 1e-300):
            return False
        return bool(np.linalg.eigvalsh(0.5 * (s + s.T))[0] > 0.0)


def project_to_section(section: Section, point: FactorPoint) -> FactorPoint:
    """The representative of ``point`` lying in ``section``.

    Returns Y q^T with q the orthogonal polar factor of base^T Y. The
    represented PSD matrix is unchanged; the operation is idempotent.

    Raises
    ------
    CutLocus
        If base^T Y is numerically singular.
    """
    try:
        factors = polar_decompose(section.base.y.T @ point.y)
    except SingularInput as exc:
        raise CutLocus("projection undefined: singular Gram product") from exc
    return FactorPoint(point.y @ factors.q.T)


def arithmetic_mean(points: Sequence[FactorPoint], rank: int) -> FactorPoint:
    """Best rank-``rank`` factor of the average of the represented matrices.

    Works on the column-stacked scaled factors, never forming n x n.
    """
    if not points:
        raise ValueError("need at least one point")
    n = points[0].n
    if any(p.n != n for p in points):
        raise ValueError("points live in different ambient dimensions")
    stacked = np.hstack([p.y for p in points]) / np.sqrt(len(points))
    return FactorPoint(truncated_svd(stacked, rank))


def inductive_mean(points: Sequence[FactorPoint]) -> FactorPoint:
    """Sequential geodesic average: M_1 = A_1, M_k = geodesic(M_{k-1}, A_k)(1/k).

    Deterministic for a given ordering; callers document the order they
    use (grids pass lower-left, lower-right, upper-left, upper-right).
    """
    if not points:
        raise ValueError("need at least one point")
    current = points[0]
    for count, point in enumerate(points[1:], start=2):
        current = geodesic(current, point).evaluate(1.0 / count)
    return current

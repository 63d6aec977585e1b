"""Dense small-matrix kernels everything else is built on.

All routines operate on plain float64 numpy arrays. Tall factors are
n x r with r << n; nothing in here ever forms an n x n product of two
tall factors. Tolerances are relative to the input scale, with an
absolute floor of 1e-14.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCubic, IllConditioned, RankDeficient, SingularInput

__all__ = [
    "PolarFactors",
    "CubicCoefficients",
    "as_matrix",
    "polar_decompose",
    "truncated_svd",
    "cubic_real_roots",
    "solve_sylvester_sym",
    "frob_dist_sq_lowrank",
]

ABS_FLOOR = 1e-14


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce input to a finite float64 2-D array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class PolarFactors:
    """Factors of m = h @ q, with h symmetric PSD and q orthogonal."""

    h: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class CubicCoefficients:
    """Coefficients of a*t^3 + b*t^2 + c*t + d."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for value in (self.a, self.b, self.c, self.d):
            if not math.isfinite(value):
                raise ValueError("cubic coefficients must be finite")


def polar_decompose(m) -> PolarFactors:
    """Polar factors of a square matrix, symmetric factor on the left.

    Computed from the SVD m = u s v^T as h = u s u^T, q = u v^T, so that
    h @ q == m. For nonsingular input the decomposition is unique.

    Raises
    ------
    SingularInput
        If the smallest singular value is below 1e-14 times the largest;
        the caller decides whether that is fatal.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"polar decomposition needs a square matrix, got {m.shape}")
    u, s, vt = np.linalg.svd(m)
    if s[0] == 0.0 or s[-1] < ABS_FLOOR * s[0]:
        raise SingularInput(
            f"matrix is numerically singular (sigma_min/sigma_max = "
            f"{0.0 if s[0] == 0.0 else s[-1] / s[0]:.3e})"
        )
    h = (u * s) @ u.T
    h = 0.5 * (h + h.T)
    q = u @ vt
    return PolarFactors(h=h, q=q)


def polar_orthogonal(m) -> np.ndarray:
    """Orthogonal polar factor(s) of square matrices, batched over leading axes.

    Accepts shape (..., r, r). Raises SingularInput if any member of the
    batch is numerically singular.
    """
    m = np.asarray(m, dtype=np.float64)
    u, s, vt = np.linalg.svd(m)
    smax = s[..., 0]
    bad = (smax == 0.0) | (s[..., -1] < ABS_FLOOR * smax)
    if np.any(bad):
        raise SingularInput("singular Gram product in batched polar decomposition")
    return u @ vt


def truncated_svd(m, target_rank: int) -> np.ndarray:
    """Best rank-``target_rank`` factor of m @ m.T.

    Returns y (n x target_rank) such that y @ y.T is the closest PSD
    matrix of rank target_rank to m @ m.T in Frobenius norm. Columns are
    ordered by decreasing singular value; the sign of each column is
    fixed so its largest-magnitude entry is positive.

    Raises
    ------
    RankDeficient
        If the target_rank-th singular value is below 1e-14 times the
        largest, i.e. the returned factor would not have full column rank.
    """
    m = as_matrix(m)
    n, k = m.shape
    if not 1 <= target_rank <= min(n, k):
        raise ValueError(f"target_rank {target_rank} out of range for shape {m.shape}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0 or s[target_rank - 1] < ABS_FLOOR * s[0]:
        raise RankDeficient(
            f"rank-{target_rank} truncation of a matrix with numerical rank "
            f"< {target_rank}"
        )
    u = u[:, :target_rank].copy()
    lead = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[lead, np.arange(target_rank)])
    signs[signs == 0.0] = 1.0
    u *= signs
    return u * s[:target_rank]


def _cubic_eval(a: float, b: float, c: float, d: float, t: float) -> float:
    return ((a * t + b) * t + c) * t + d


def _polish_root(a: float, b: float, c: float, d: float, t: float) -> float:
    # One or two Newton steps from a companion-matrix eigenvalue; keeps the
    # iterate only while the residual strictly improves.
    best = t
    best_res = abs(_cubic_eval(a, b, c, d, t))
    for _ in range(3):
        slope = (3.0 * a * t + 2.0 * b) * t + c
        if slope == 0.0:
            break
        t_next = t - _cubic_eval(a, b, c, d, t) / slope
        if not math.isfinite(t_next):
            break
        res = abs(_cubic_eval(a, b, c, d, t_next))
        if res >= best_res:
            break
        t, best, best_res = t_next, t_next, res
    return best


def cubic_real_roots(coeffs: CubicCoefficients) -> list[float]:
    """All real roots of a cubic, via companion eigenvalues plus Newton polish.

    Degenerates gracefully to the quadratic or linear case when the
    leading coefficients are below 1e-14 times the coefficient scale
    (a degenerate quadratic with negative discriminant yields an empty
    list). Duplicate roots are collapsed. Roots are returned sorted.

    Raises
    ------
    DegenerateCubic
        If a, b and c all vanish: a constant polynomial has no root.
    """
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0.0 or max(abs(a), abs(b), abs(c)) <= ABS_FLOOR * scale:
        raise DegenerateCubic("constant polynomial: no root")

    if abs(a) > ABS_FLOOR * scale:
        poly = [a, b, c, d]
    elif abs(b) > ABS_FLOOR * scale:
        poly = [b, c, d]
    else:
        poly = [c, d]
    raw = np.roots(poly)

    order = np.argsort(np.abs(raw.imag), kind="stable")
    candidates: list[float] = []
    for rank_pos, idx in enumerate(order):
        z = raw[idx]
        # A real cubic always has at least one real root; force the most-real
        # companion eigenvalue in regardless of its imaginary part.
        forced = rank_pos == 0 and len(poly) == 4
        if forced or abs(z.imag) <= 1e-8 * (1.0 + abs(z.real)):
            candidates.append(float(z.real))

    polished = [_polish_root(a, b, c, d, t) for t in candidates]
    roots: list[float] = []
    for i, t in enumerate(polished):
        residual = abs(_cubic_eval(a, b, c, d, t))
        tol = 1e-9 * scale * (1.0 + abs(t)) ** 3
        if residual <= tol or (i == 0 and len(poly) == 4):
            roots.append(t)

    roots.sort()
    collapsed: list[float] = []
    for t in roots:
        if collapsed and abs(t - collapsed[-1]) <= 1e-7 * (1.0 + abs(t)):
            continue
        collapsed.append(t)
    return collapsed


def solve_sylvester_sym(h, rhs) -> np.ndarray:
    """Solve h @ x + x @ h = rhs for symmetric positive definite h, skew rhs.

    Solved in the eigenbasis of h, where the equation decouples entrywise.
    The result is skew-symmetrized before it is returned; the solution is
    unique because h and -h share no eigenvalues.

    Raises
    ------
    IllConditioned
        If the smallest eigenvalue of h is below 1e-12 times the largest.
    """
    h = as_matrix(h, "h")
    rhs = as_matrix(rhs, "rhs")
    if h.shape[0] != h.shape[1] or h.shape != rhs.shape:
        raise ValueError(f"shape mismatch: h {h.shape}, rhs {rhs.shape}")
    h_scale = np.linalg.norm(h)
    if np.linalg.norm(h - h.T) > 1e-8 * (h_scale + ABS_FLOOR):
        raise ValueError("h must be symmetric")
    rhs_scale = np.linalg.norm(rhs)
    if np.linalg.norm(rhs + rhs.T) > 1e-8 * (rhs_scale + ABS_FLOOR):
        raise ValueError("rhs must be skew-symmetric")

    lam, vec = np.linalg.eigh(0.5 * (h + h.T))
    if lam[-1] <= 0.0 or lam[0] < 1e-12 * lam[-1]:
        raise IllConditioned(
            f"eigenvalue spread of h too large (lambda_min/lambda_max = "
            f"{lam[0] / lam[-1] if lam[-1] > 0 else -np.inf:.3e})"
        )
    r_hat = vec.T @ (0.5 * (rhs - rhs.T)) @ vec
    omega = vec @ (r_hat / (lam[:, None] + lam[None, :])) @ vec.T
    return 0.5 * (omega - omega.T)


def frob_dist_sq_lowrank(y, z) -> float:
    """Squared Frobenius distance between y @ y.T and z @ z.T.

    Uses the Gram identity ||yy^T - zz^T||_F^2 =
    ||y^T y||_F^2 + ||z^T z||_F^2 - 2 ||y^T z||_F^2, which costs
    O(n (r+s)^2) instead of O(n^2 (r+s)). Clamped to be nonnegative.
    """
    y = as_matrix(y, "y")
    z = as_matrix(z, "z")
    if y.shape[0] != z.shape[0]:
        raise ValueError(f"row counts differ: {y.shape[0]} vs {z.shape[0]}")
    gy = y.T @ y
    gz = z.T @ z
    cross = y.T @ z
    value = float(np.sum(gy * gy) + np.sum(gz * gz) - 2.0 * np.sum(cross * cross))
    return max(value, 0.0)

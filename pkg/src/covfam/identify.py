"""Minimum Frobenius distance identification against covariance surfaces.

The one-parameter problem has a closed form: the squared distance along a
geodesic is an explicit quartic in t (coefficients from r x r Grams, cost
O(n (r+q')^2)), so its stationary points are roots of a cubic. The
two-parameter problems run projected gradient descent per patch with
Armijo backtracking; the geodesic surface eliminates t2 exactly at every
t1 (the inner optimum solves the same cubic) and descends the resulting
one-variable envelope; the manifold Bezier surface has no analytic
gradient and falls back to central finite differences.

Internally every cost is normalized by ||C_hat||_F^4 so the pinned
gradient tolerance is scale free; reported distances are unnormalized.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .covfun import CovarianceSurface, bernstein3, bernstein3_deriv, bilinear_weights
from .errors import CutLocus, DegenerateCubic, IllConditioned, SingularInput
from .manifold import FactorPoint, log_map
from .numerics import (
    CubicCoefficients,
    as_matrix,
    cubic_real_roots,
    frob_dist_sq_lowrank,
    polar_decompose,
    solve_sylvester_sym,
)

__all__ = [
    "SampleCovariance",
    "IdentificationResult",
    "DescentSettings",
    "identify_1p",
    "identify_ls",
    "identify_lg",
    "identify_bs",
    "identify_bg",
    "identify",
]


@dataclass(frozen=True, eq=False)
class SampleCovariance:
    """A sample covariance held in factored form, C_hat = factor @ factor.T."""

    factor: np.ndarray
    sample_count: int

    def __post_init__(self):
        factor = as_matrix(self.factor, "factor")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        object.__setattr__(self, "factor", factor)

    @property
    def n(self) -> int:
        return self.factor.shape[0]

    @classmethod
    def from_factor(cls, factor, sample_count: int | None = None) -> "SampleCovariance":
        factor = as_matrix(factor, "factor")
        count = factor.shape[1] if sample_count is None else sample_count
        return cls(factor=factor, sample_count=count)

    @classmethod
    def from_point(cls, point: FactorPoint) -> "SampleCovariance":
        return cls(factor=point.y, sample_count=point.r)

    @classmethod
    def from_samples(cls, samples) -> "SampleCovariance":
        """Build (1/q) sum y_i y_i^T from columns of raw samples.

        When q > n the factor is compressed losslessly to its numerical
        rank, keeping O(n) columns at most.
        """
        samples = as_matrix(samples, "samples")
        n, q = samples.shape
        factor = samples / np.sqrt(q)
        if q > n:
            u, s, _ = np.linalg.svd(factor, full_matrices=False)
            keep = s >= 1e-14 * (s[0] if s[0] > 0 else 1.0)
            keep[0] = True
            factor = u[:, keep] * s[keep]
        return cls(factor=factor, sample_count=q)


@dataclass(frozen=True)
class IdentificationResult:
    """Outcome of one identification run.

    ``t`` is in global grid coordinates (one or two entries); ``patch``
    names the patch whose formula attains the distance (None for the
    plain one-parameter problem); ``iterations`` counts descent
    iterations summed over every start and patch searched.
    """

    t: tuple[float, ...]
    distance: float
    patch: tuple[int, int] | None
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "t": list(self.t),
            "distance": self.distance,
            "patch": None if self.patch is None else list(self.patch),
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class DescentSettings:
    """Armijo backtracking parameters for the per-patch descents."""

    armijo_c: float = 1e-4
    shrink: float = 0.5
    grad_tol: float = 1e-8
    max_iters: int = 500


# ---------------------------------------------------------------------------
# the closed-form quartic along a factor line


def _quartic_from_grams(p0, p1, p2, kyz, kvz, cz) -> np.ndarray:
    """Coefficients [q4..q0] of f(t) = ||(y+tv)(y+tv)^T - zz^T||_F^2.

    p0 = y^T y, p1 = y^T v + v^T y, p2 = v^T v, kyz = y^T z, kvz = v^T z,
    cz = ||z^T z||_F^2.
    """
    q4 = np.sum(p2 * p2)
    q3 = 2.0 * np.sum(p1 * p2)
    q2 = np.sum(p1 * p1) + 2.0 * np.sum(p0 * p2) - 2.0 * np.sum(kvz * kvz)
    q1 = 2.0 * np.sum(p0 * p1) - 4.0 * np.sum(kyz * kvz)
    q0 = np.sum(p0 * p0) - 2.0 * np.sum(kyz * kyz) + cz
    return np.array([q4, q3, q2, q1, q0])


def _segment_quartic(y: np.ndarray, v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Quartic coefficients for the squared distance along y + t v."""
    p1h = y.T @ v
    zz = z.T @ z
    return _quartic_from_grams(
        p0=y.T @ y,
        p1=p1h + p1h.T,
        p2=v.T @ v,
        kyz=y.T @ z,
        kvz=v.T @ z,
        cz=float(np.sum(zz * zz)),
    )


def _minimize_quartic(
    coeffs: np.ndarray, constrained: bool = False, lo: float = 0.0, hi: float = 1.0
) -> tuple[float, float]:
    """Global minimizer of the quartic via the real roots of its derivative.

    Ties within 1e-12 of the optimal value break toward smaller t. With
    ``constrained`` the candidates are clipped to [lo, hi] and the
    endpoints are added.
    """
    q4, q3, q2, q1, _ = coeffs
    try:
        roots = cubic_real_roots(
            CubicCoefficients(4.0 * q4, 3.0 * q3, 2.0 * q2, q1)
        )
    except DegenerateCubic:
        roots = []
    if constrained:
        candidates = sorted({min(max(t, lo), hi) for t in roots} | {lo, hi})
    else:
        candidates = roots if roots else [0.0]
    values = [float(np.polyval(coeffs, t)) for t in candidates]
    fmin = min(values)
    tol = 1e-12 * (1.0 + abs(fmin))
    best_t = min(t for t, f in zip(candidates, values) if f <= fmin + tol)
    return best_t, float(np.polyval(coeffs, best_t))


def identify_1p(
    a: FactorPoint, b: FactorPoint, c_hat: SampleCovariance
) -> IdentificationResult:
    """Closed-form identification along the geodesic family from a to b.

    The minimizer over all of R is returned; no iteration is involved.
    """
    v = log_map(a, b)
    coeffs = _segment_quartic(a.y, v, c_hat.factor)
    t, f = _minimize_quartic(coeffs)
    return IdentificationResult(
        t=(float(t),),
        distance=math.sqrt(max(f, 0.0)),
        patch=None,
        iterations=0,
        converged=True,
    )


# ---------------------------------------------------------------------------
# descent machinery


class _GradFailure(Exception):
    """Gradient unavailable at the current iterate; the run stops early."""


def _safe_value(obj, u) -> float:
    # Candidates that step onto a rank-drop set are rejected by the line
    # search rather than aborting the whole identification.
    try:
        return obj.value(u)
    except (CutLocus, IllConditioned):
        return math.inf


def _newton_polish(obj, u, f, lo, hi, tol: float):
    """Finish an interior descent with damped Newton steps.

    The Hessian is a central difference of the analytic gradient; a step
    is kept only while the gradient norm strictly shrinks and the value
    does not grow beyond noise. Plain gradient descent stalls at the
    floating-point noise floor of the cost well before the gradient
    tolerance; the gradient itself stays accurate there, so polishing on
    the gradient norm recovers the remaining digits.
    """
    dim = len(u)
    try:
        g = obj.grad(u)
    except (_GradFailure, IllConditioned, CutLocus):
        return u, None, f, math.inf
    gn = float(np.linalg.norm(g))
    for _ in range(6):
        if gn <= tol:
            break
        if np.any(u - lo < 1e-12) or np.any(hi - u < 1e-12):
            break
        hess = np.empty((dim, dim))
        h = 1e-5
        try:
            for i in range(dim):
                up, um = u.copy(), u.copy()
                up[i] += h
                um[i] -= h
                hess[:, i] = (obj.grad(up) - obj.grad(um)) / (2.0 * h)
        except (_GradFailure, IllConditioned, CutLocus):
            break
        hess = 0.5 * (hess + hess.T)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            break
        cand = np.clip(u - step, lo, hi)
        fc = _safe_value(obj, cand)
        if not math.isfinite(fc) or fc > f + 1e-12 * (1.0 + abs(f)):
            break
        try:
            g_new = obj.grad(cand)
        except (_GradFailure, IllConditioned, CutLocus):
            break
        gn_new = float(np.linalg.norm(g_new))
        if not math.isfinite(gn_new) or gn_new >= gn:
            break
        u, g, gn, f = cand, g_new, gn_new, min(f, fc)
    return u, g, f, gn


def _projected_descent(obj, start, lo, hi, settings: DescentSettings, stop_below=None):
    """Armijo projected gradient descent on a box.

    Returns (u, f, iterations, converged). ``converged`` means the
    projected gradient met the tolerance (or the value reached
    ``stop_below``); running out of iterations or stalling at the
    floating-point noise floor reports False. Objectives with analytic
    gradients get a Newton polish when plain descent stalls short of the
    tolerance.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    u = np.clip(np.asarray(start, dtype=np.float64), lo, hi)
    f = obj.value(u)  # failures at the start point propagate to the caller
    target = -math.inf if stop_below is None else stop_below
    if f <= target:
        return u, f, 0, True
    step = 1.0
    iters = 0
    converged = False
    stalls = 0
    g = None

    def try_polish(u, f):
        u2, g2, f2, _ = _newton_polish(obj, u, f, lo, hi, settings.grad_tol)
        done = g2 is not None and (
            np.linalg.norm(u2 - np.clip(u2 - g2, lo, hi)) <= settings.grad_tol
        )
        return u2, min(f, f2), done

    for _ in range(settings.max_iters):
        iters += 1
        try:
            g = obj.grad(u)
        except (_GradFailure, IllConditioned):
            g = None
            break
        if not np.all(np.isfinite(g)):
            g = None
            break
        if np.linalg.norm(u - np.clip(u - g, lo, hi)) <= settings.grad_tol:
            converged = True
            break
        moved = False
        while step >= 1e-14:
            cand = np.clip(u - step * g, lo, hi)
            fc = _safe_value(obj, cand)
            if fc <= f + settings.armijo_c * float(g @ (cand - u)):
                moved = True
                break
            step *= settings.shrink
        if not moved:
            break
        if f - fc <= 4e-15 * (abs(f) + 1e-300):
            stalls += 1
        else:
            stalls = 0
        u, f = cand, fc
        step = min(step / settings.shrink, 1e3)
        if f <= target:
            converged = True
            break
        if stalls >= 3:
            break
        if iters % 60 == 0:
            # descent on a narrow quartic valley converges linearly at best;
            # a periodic Newton attempt finishes interior minima early
            u, f, converged = try_polish(u, f)
            if converged or f <= target:
                converged = converged or f <= target
                break
            step = 1.0
    if not converged and g is not None:
        u, f, converged = try_polish(u, f)
        if not converged and f <= target:
            converged = True
    return u, f, iters, converged


class _GramObjective:
    """Cost over a fixed set of factors combined with scalar weights.

    With Y(u) = sum_a c_a(u) F_a, the cost ||Y Y^T - Z Z^T||_F^2 and its
    gradient reduce to r x r contractions of precomputed pairwise Grams,
    so each evaluation is independent of n.
    """

    def __init__(self, factors, z: np.ndarray, s0: float, weight_fn):
        stack = np.stack(factors)
        self.grams = np.einsum("anr,bns->abrs", stack, stack, optimize=True)
        self.kz = np.einsum("nq,anr->aqr", z, stack, optimize=True)
        zz = z.T @ z
        self.cz = float(np.sum(zz * zz))
        self.s0 = s0
        self.weight_fn = weight_fn

    def _assemble(self, w):
        gw = np.tensordot(w, self.grams, axes=(0, 0))  # (A, r, r)
        g = np.tensordot(w, gw, axes=(0, 0))
        k = np.tensordot(w, self.kz, axes=(0, 0))
        return g, k, gw

    def raw_value(self, u) -> float:
        w, _, _ = self.weight_fn(u)
        g, k, _ = self._assemble(w)
        return float(np.sum(g * g) - 2.0 * np.sum(k * k) + self.cz)

    def value(self, u) -> float:
        return self.raw_value(u) / self.s0

    def grad(self, u) -> np.ndarray:
        w, d1, d2 = self.weight_fn(u)
        g, k, gw = self._assemble(w)
        out = np.empty(2)
        for i, dw in enumerate((d1, d2)):
            # dG = sum_ab (dw_a w_b + w_a dw_b) G[a,b]; the second term is the
            # transpose of the first because G[b,a] = G[a,b]^T
            half = np.tensordot(dw, gw, axes=(0, 0))
            gd = half + half.T
            kd = np.tensordot(dw, self.kz, axes=(0, 0))
            out[i] = 2.0 * np.sum(g * gd) - 4.0 * np.sum(k * kd)
        return out / self.s0


def _ls_weight_fn(u):
    return bilinear_weights(u[0], u[1])


def _bs_weight_fn(u):
    b1, b2 = bernstein3(u[0]), bernstein3(u[1])
    db1, db2 = bernstein3_deriv(u[0]), bernstein3_deriv(u[1])
    return (
        np.outer(b1, b2).ravel(),
        np.outer(db1, b2).ravel(),
        np.outer(b1, db2).ravel(),
    )


def _ls_objective(surface: CovarianceSurface, l: int, m: int, z, s0) -> _GramObjective:
    return _GramObjective(surface.patch_factors(l, m), z, s0, _ls_weight_fn)


def _bs_objective(surface: CovarianceSurface, l: int, m: int, z, s0) -> _GramObjective:
    net = surface.patch_factors(l, m)
    return _GramObjective(net.reshape(16, *net.shape[2:]), z, s0, _bs_weight_fn)


class _BsGlobalObjective:
    """The sectional Bezier cost over the whole domain (it is C1 there)."""

    def __init__(self, surface: CovarianceSurface, z, s0):
        self.surface = surface
        self.z = z
        self.s0 = s0
        self.cache: dict[tuple[int, int], _GramObjective] = {}

    def _local(self, u):
        l, m, u1, u2 = self.surface.patch_of(u[0], u[1])
        key = (l, m)
        if key not in self.cache:
            self.cache[key] = _bs_objective(self.surface, l, m, self.z, self.s0)
        return self.cache[key], np.array([u1, u2])

    def value(self, u) -> float:
        obj, local = self._local(u)
        return obj.value(local)

    def grad(self, u) -> np.ndarray:
        obj, local = self._local(u)
        return obj.grad(local)


class _LgObjective:
    """Envelope cost of the geodesic surface on one patch.

    For each t1, the optimal t2 solves a cubic exactly (the inner problem
    is the one-parameter closed form along the connecting geodesic); the
    outer derivative is the partial in t1 evaluated at that optimum,
    which needs the derivative of the orthogonal polar factor, obtained
    from a Sylvester solve.
    """

    def __init__(self, patch, z: np.ndarray, s0: float, constrained_t2: bool):
        self.patch = patch
        self.z = z
        self.s0 = s0
        self.constrained_t2 = constrained_t2
        self.vdot_b = patch.yt10 - patch.y00
        self.vdot_t = patch.yt11 - patch.y01

    def _state(self, u1: float):
        yb = self.patch.bottom(u1)
        yt = self.patch.top(u1)
        try:
            factors = polar_decompose(yb.T @ yt)
        except SingularInput as exc:
            raise CutLocus("geodesic surface undefined at this t1") from exc
        ytq = yt @ factors.q.T
        v2 = ytq - yb
        coeffs = _segment_quartic(yb, v2, self.z)
        t2, f = _minimize_quartic(coeffs, constrained=self.constrained_t2)
        return yb, yt, ytq, v2, factors, t2, f

    def solution(self, u1: float) -> tuple[float, float]:
        *_, t2, f = self._state(u1)
        return t2, f / self.s0

    def value(self, u) -> float:
        *_, f = self._state(float(u[0]))
        return f / self.s0

    def grad(self, u) -> np.ndarray:
        yb, yt, ytq, v2, factors, t2, _ = self._state(float(u[0]))
        mdot = self.vdot_b.T @ yt + yb.T @ self.vdot_t
        rhs = mdot @ factors.q.T
        rhs = rhs - rhs.T
        omega = solve_sylvester_sym(factors.h, rhs)  # IllConditioned ends the run
        y = yb + t2 * v2
        d1 = (1.0 - t2) * self.vdot_b + t2 * (self.vdot_t @ factors.q.T) - t2 * (ytq @ omega)
        df = 4.0 * (np.sum((y.T @ d1) * (y.T @ y)) - np.sum((self.z.T @ d1) * (self.z.T @ y)))
        return np.array([df / self.s0])


class _BgObjective:
    """Finite-difference cost of the manifold Bezier surface on one patch."""

    def __init__(self, surface: CovarianceSurface, l: int, m: int, z, s0: float):
        self.surface = surface
        self.l = l
        self.m = m
        self.z = z
        self.s0 = s0

    def value(self, u) -> float:
        point = self.surface.evaluate_patch(self.l, self.m, float(u[0]), float(u[1]))
        return frob_dist_sq_lowrank(point.y, self.z) / self.s0

    def grad(self, u) -> np.ndarray:
        out = np.empty(2)
        for i in range(2):
            h = 1e-6 * (1.0 + abs(float(u[i])))
            up = np.array(u, dtype=np.float64)
            um = np.array(u, dtype=np.float64)
            up[i] += h
            um[i] -= h
            out[i] = (_safe_value(self, up) - _safe_value(self, um)) / (2.0 * h)
        if not np.all(np.isfinite(out)):
            raise _GradFailure("finite differences hit an undefined evaluation")
        return out


# ---------------------------------------------------------------------------
# patchwise drivers


def _start_lattice(start_grid: int, dim: int):
    pts = np.linspace(0.0, 1.0, start_grid + 2)[1:-1]
    if dim == 1:
        return [np.array([p]) for p in pts]
    return [np.array(pair) for pair in itertools.product(pts, pts)]


def _norm_scale(z: np.ndarray) -> float:
    zz = z.T @ z
    return max(float(np.sum(zz * zz)), 1e-300)


def _identify_patchwise(
    surface: CovarianceSurface,
    c_hat: SampleCovariance,
    objective_factory: Callable,
    settings: DescentSettings,
    extra_starts: Mapping[tuple[int, int], Sequence] | None,
    start_grid: int,
    stop_below: float | None,
    univariate: bool = False,
    global_pass: bool = False,
) -> IdentificationResult:
    grid = surface.grid
    z = c_hat.factor
    if z.shape[0] != grid.n:
        raise ValueError("sample covariance dimension does not match the grid")
    s0 = _norm_scale(z)
    stop_hat = None if stop_below is None else stop_below / s0
    extra_starts = extra_starts or {}

    dim = 1 if univariate else 2
    lattice = _start_lattice(start_grid, dim)
    total_iters = 0
    best = None  # (f_hat, (l, m), u_vec, t2_extra, converged)

    done = False
    for l in range(grid.n1):
        if done:
            break
        for m in range(max(grid.n2, 1)):
            obj = objective_factory(surface, l, m, z, s0)
            starts = list(lattice)
            for extra in extra_starts.get((l, m), ()):
                vec = np.atleast_1d(np.asarray(extra, dtype=np.float64))
                starts.append(vec[:dim])
            for start in starts:
                u, f, iters, conv = _projected_descent(
                    obj, start, 0.0, 1.0, settings, stop_hat
                )
                total_iters += iters
                if univariate:
                    t2, f_sol = obj.solution(float(u[0]))
                    coords = (l + float(u[0]), m + float(t2))
                    f = f_sol
                else:
                    coords = (l + float(u[0]), m + float(u[1]))
                if best is None or f < best[0] - 1e-12 * (1.0 + abs(best[0])):
                    best = (f, (l, m), coords, conv)
                if stop_hat is not None and best[0] <= stop_hat:
                    done = True
                    break
            if done:
                break

    if global_pass and not done and grid.n1 * max(grid.n2, 1) > 1:
        glob = _BsGlobalObjective(surface, z, s0)
        lo = np.zeros(2)
        hi = np.array([float(grid.n1), float(grid.n2)])
        for l in range(grid.n1):
            for m in range(grid.n2):
                start = np.array([l + 0.5, m + 0.5])
                u, f, iters, conv = _projected_descent(glob, start, lo, hi, settings, stop_hat)
                total_iters += iters
                if best is None or f < best[0] - 1e-12 * (1.0 + abs(best[0])):
                    pl, pm, _, _ = surface.patch_of(float(u[0]), float(u[1]))
                    best = (f, (pl, pm), (float(u[0]), float(u[1])), conv)

    f_hat, patch, coords, conv = best
    return IdentificationResult(
        t=tuple(coords),
        distance=math.sqrt(max(f_hat * s0, 0.0)),
        patch=patch,
        iterations=total_iters,
        converged=conv,
    )


def _identify_curve(surface: CovarianceSurface, c_hat: SampleCovariance) -> IdentificationResult:
    """Closed-form identification against a piecewise geodesic family."""
    z = c_hat.factor
    best = None
    for l, segment in enumerate(surface._payload):
        coeffs = _segment_quartic(segment.base, segment.velocity, z)
        t, f = _minimize_quartic(coeffs)
        if best is None or f < best[0] - 1e-12 * (1.0 + abs(best[0])):
            best = (f, l, t)
    f, l, t = best
    return IdentificationResult(
        t=(float(l + t),),
        distance=math.sqrt(max(f, 0.0)),
        patch=(l, 0),
        iterations=0,
        converged=True,
    )


def identify_ls(
    surface: CovarianceSurface,
    c_hat: SampleCovariance,
    *,
    settings: DescentSettings | None = None,
    extra_starts=None,
    start_grid: int = 1,
    stop_below: float | None = None,
) -> IdentificationResult:
    """Per-patch projected gradient descent on the sectional surface.

    ``extra_starts`` maps patch indices to additional local start points
    (the benchmark seeds the label-mapped point so the optimum can never
    be worse than plain interpolation); ``start_grid`` = k places a k x k
    lattice of starts on every patch (default one start at the center).
    ``stop_below`` stops the search once the squared distance falls below
    the given unnormalized value.
    """
    if surface.kind != "ls":
        raise ValueError("surface is not a sectional first-order surface")
    if surface.grid.one_parameter:
        return _identify_curve(surface, c_hat)
    return _identify_patchwise(
        surface, c_hat, _ls_objective, settings or DescentSettings(),
        extra_starts, start_grid, stop_below,
    )


def identify_lg(
    surface: CovarianceSurface,
    c_hat: SampleCovariance,
    *,
    settings: DescentSettings | None = None,
    extra_starts=None,
    start_grid: int = 1,
    stop_below: float | None = None,
    constrained_t2: bool = False,
) -> IdentificationResult:
    """Variable projection on the geodesic surface: exact t2, descent in t1.

    By default the inner t2 is unconstrained (its optimum may leave the
    patch); ``constrained_t2`` clips the inner candidates to [0, 1] and
    adds the boundary values.
    """
    if surface.kind != "lg":
        raise ValueError("surface is not a geodesic first-order surface")
    if surface.grid.one_parameter:
        return _identify_curve(surface, c_hat)

    def factory(srf, l, m, z, s0):
        return _LgObjective(srf._payload[l][m], z, s0, constrained_t2)

    return _identify_patchwise(
        surface, c_hat, factory, settings or DescentSettings(),
        extra_starts, start_grid, stop_below, univariate=True,
    )


def identify_bs(
    surface: CovarianceSurface,
    c_hat: SampleCovariance,
    *,
    settings: DescentSettings | None = None,
    extra_starts=None,
    start_grid: int = 1,
    stop_below: float | None = None,
) -> IdentificationResult:
    """Gradient descent on the sectional Bezier surface.

    The cost is C1 on the whole domain, so besides the per-patch runs a
    multi-start descent over the full domain is run as well and the best
    result kept.
    """
    if surface.kind != "bs":
        raise ValueError("surface is not a sectional Bezier surface")
    return _identify_patchwise(
        surface, c_hat, _bs_objective, settings or DescentSettings(),
        extra_starts, start_grid, stop_below, global_pass=True,
    )


def identify_bg(
    surface: CovarianceSurface,
    c_hat: SampleCovariance,
    *,
    settings: DescentSettings | None = None,
    extra_starts=None,
    start_grid: int = 1,
    stop_below: float | None = None,
) -> IdentificationResult:
    """Per-patch descent on the manifold Bezier surface with FD gradients."""
    if surface.kind != "bg":
        raise ValueError("surface is not a manifold Bezier surface")

    def factory(srf, l, m, z, s0):
        return _BgObjective(srf, l, m, z, s0)

    return _identify_patchwise(
        surface, c_hat, factory, settings or DescentSettings(),
        extra_starts, start_grid, stop_below,
    )


_DISPATCH = {
    "ls": identify_ls,
    "lg": identify_lg,
    "bs": identify_bs,
    "bg": identify_bg,
}


def identify(surface: CovarianceSurface, c_hat: SampleCovariance, **kwargs) -> IdentificationResult:
    """Dispatch identification on the surface kind."""
    if surface.grid.one_parameter:
        return _identify_curve(surface, c_hat)
    return _DISPATCH[surface.kind](surface, c_hat, **kwargs)

"""Covariance surfaces over a grid of rank-r anchor matrices.

Four surface kinds are built over an anchor grid:

``ls``
    Patchwise bilinear interpolation of the corner factors projected onto
    a per-patch section.
``lg``
    Patchwise composition of geodesics: two edge geodesics in t1 feed a
    connecting geodesic in t2.
``bs``
    Patchwise cubic Bezier surface in one global section, control points
    from a tensorized natural-spline fit of the projected anchors.
``bg``
    Patchwise cubic Bezier surface on the quotient: the same control
    offsets are formed in the tangent space at each anchor, and the
    surface is evaluated by geodesic de Casteljau, first along t1 (four
    curves), then along t2 (one curve).

Grid axis conventions used throughout: index i runs along t1 (label
theta), index j along t2 (label W). Patch (l, m) covers
[l, l+1] x [m, m+1]; its corner at local (a, b) is ``anchors[l+a][m+b]``.
Out-of-domain coordinates are evaluated with the formula of the nearest
patch (no clamping of the coordinates themselves). Grids with a single
node along the W axis describe one-parameter families (piecewise
geodesics); the cubic kinds require at least a 2 x 2 grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CutLocus, SingularInput
from .manifold import (
    FactorPoint,
    Section,
    arithmetic_mean,
    geodesic,
    inductive_mean,
    log_map,
    project_to_section,
)
from .numerics import polar_decompose, polar_orthogonal

__all__ = [
    "SECTION_POLICIES",
    "SURFACE_KINDS",
    "LabelMap",
    "AnchorGrid",
    "CovarianceSurface",
    "build_surface",
    "build_bezier_section",
    "build_bezier_geodesic",
    "eval_bezier_section",
    "eval_geodesic_1p",
    "eval_ls_patch",
    "eval_lg_patch",
    "map_label",
    "bernstein3",
    "bernstein3_deriv",
    "bilinear_weights",
]

SECTION_POLICIES = ("one", "arithm", "inductive")
SURFACE_KINDS = ("ls", "lg", "bs", "bg")


# ---------------------------------------------------------------------------
# basis helpers


def bernstein3(u: float) -> np.ndarray:
    """The four cubic Bernstein weights at u."""
    v = 1.0 - u
    return np.array([v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u])


def bernstein3_deriv(u: float) -> np.ndarray:
    """Derivatives of the four cubic Bernstein weights at u."""
    v = 1.0 - u
    return np.array(
        [-3.0 * v * v, 3.0 * v * v - 6.0 * u * v, 6.0 * u * v - 3.0 * u * u, 3.0 * u * u]
    )


def bilinear_weights(u1: float, u2: float):
    """Bilinear weights and their partials for corners (c00, c01, c10, c11)."""
    w = np.array([(1 - u1) * (1 - u2), (1 - u1) * u2, u1 * (1 - u2), u1 * u2])
    d1 = np.array([-(1 - u2), -u2, (1 - u2), u2])
    d2 = np.array([-(1 - u1), (1 - u1), -u1, u1])
    return w, d1, d2


def _natural_spline_controls(num_nodes: int) -> np.ndarray:
    """Matrix mapping node values to C1 cubic Bezier control values.

    Standard interpolating-spline construction: node tangents d solve the
    tridiagonal system with natural end conditions (zero second derivative
    at both ends), and each segment [k, k+1] gets the control values
    (p_k, p_k + d_k/3, p_{k+1} - d_{k+1}/3, p_{k+1}). The returned matrix
    has shape (3*(num_nodes-1) + 1, num_nodes). Reproduces affine data
    exactly.
    """
    m = num_nodes - 1
    if m < 1:
        return np.eye(1)
    tri = np.zeros((m + 1, m + 1))
    rhs = np.zeros((m + 1, m + 1))
    tri[0, 0], tri[0, 1] = 2.0, 1.0
    rhs[0, 0], rhs[0, 1] = -3.0, 3.0
    for k in range(1, m):
        tri[k, k - 1], tri[k, k], tri[k, k + 1] = 1.0, 4.0, 1.0
        rhs[k, k - 1], rhs[k, k + 1] = -3.0, 3.0
    tri[m, m - 1], tri[m, m] = 1.0, 2.0
    rhs[m, m - 1], rhs[m, m] = -3.0, 3.0
    tangents = np.linalg.solve(tri, rhs)

    controls = np.zeros((3 * m + 1, m + 1))
    for k in range(m + 1):
        controls[3 * k, k] = 1.0
    for k in range(m):
        controls[3 * k + 1] = controls[3 * k] + tangents[k] / 3.0
        controls[3 * k + 2, k + 1] = 1.0
        controls[3 * k + 2] -= tangents[k + 1] / 3.0
    return controls


def _control_owner(index: int) -> int:
    """Grid node owning a global control index (offsets -1, 0, +1 mod 3)."""
    node, rem = divmod(index, 3)
    return node if rem <= 1 else node + 1


# ---------------------------------------------------------------------------
# labels and grids


@dataclass(frozen=True)
class LabelMap:
    """Affine map between physical labels (theta, W) and grid coordinates.

    Grid labels land exactly on integer coordinates; the map extends to
    all of label space (extrapolation is permitted and flagged by
    ``in_domain``). ``w_step`` is None for one-parameter grids.
    """

    theta0: float
    theta_step: float
    w0: float
    w_step: float | None
    n1: int
    n2: int

    def to_coords(self, theta: float, w: float | None = None) -> tuple[float, float]:
        t1 = (theta - self.theta0) / self.theta_step
        if self.w_step is None or w is None:
            return (t1, 0.0)
        return (t1, (w - self.w0) / self.w_step)

    def to_labels(self, t1: float, t2: float = 0.0) -> tuple[float, float]:
        theta = self.theta0 + t1 * self.theta_step
        w = self.w0 if self.w_step is None else self.w0 + t2 * self.w_step
        return (theta, w)

    def in_domain(self, t1: float, t2: float = 0.0) -> bool:
        if not 0.0 <= t1 <= self.n1:
            return False
        if self.n2 == 0:
            return t2 == 0.0
        return 0.0 <= t2 <= self.n2


def map_label(label_map: LabelMap, theta: float, w: float | None = None):
    """Affine image of a physical label in grid coordinates."""
    return label_map.to_coords(theta, w)


def _validate_axis_labels(values: np.ndarray, name: str) -> None:
    if len(values) < 2:
        return
    if not np.all(np.diff(values) > 0):
        raise ValueError(f"{name} labels must be strictly increasing")
    span = values[-1] - values[0]
    step = span / (len(values) - 1)
    affine = values[0] + step * np.arange(len(values))
    if np.max(np.abs(values - affine)) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"{name} labels must be uniformly spaced for an affine label map")


@dataclass(frozen=True, eq=False)
class AnchorGrid:
    """A (N1+1) x (N2+1) grid of rank-r anchors labelled by (theta, W).

    ``anchors[i][j]`` carries label (thetas[i], ws[j]). All anchors share
    n and r and must have full column rank. Labels are uniformly spaced
    per axis so that the label map sends them exactly to integer grid
    coordinates. A single node along the W axis yields a one-parameter
    grid.
    """

    anchors: tuple[tuple[FactorPoint, ...], ...]
    thetas: np.ndarray
    ws: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=np.float64)
        ws = np.asarray(self.ws, dtype=np.float64)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "ws", ws)
        anchors = tuple(tuple(row) for row in self.anchors)
        object.__setattr__(self, "anchors", anchors)

        if len(anchors) != len(thetas) or len(anchors) < 2:
            raise ValueError("need at least two nodes along the theta axis")
        if len(ws) < 1 or any(len(row) != len(ws) for row in anchors):
            raise ValueError("anchor rows must all match the W label count")
        first = anchors[0][0]
        for row in anchors:
            for point in row:
                if point.n != first.n or point.r != first.r:
                    raise ValueError("all anchors must share n and r")
                point.require_full_rank("anchor")
        _validate_axis_labels(thetas, "theta")
        _validate_axis_labels(ws, "W")

    @property
    def nodes1(self) -> int:
        return len(self.thetas)

    @property
    def nodes2(self) -> int:
        return len(self.ws)

    @property
    def n1(self) -> int:
        """Patch count along t1."""
        return self.nodes1 - 1

    @property
    def n2(self) -> int:
        """Patch count along t2 (zero for one-parameter grids)."""
        return self.nodes2 - 1

    @property
    def n(self) -> int:
        return self.anchors[0][0].n

    @property
    def r(self) -> int:
        return self.anchors[0][0].r

    @property
    def one_parameter(self) -> bool:
        return self.nodes2 == 1

    @cached_property
    def label_map(self) -> LabelMap:
        theta_step = (self.thetas[-1] - self.thetas[0]) / self.n1
        w_step = None if self.one_parameter else (self.ws[-1] - self.ws[0]) / self.n2
        return LabelMap(
            theta0=float(self.thetas[0]),
            theta_step=float(theta_step),
            w0=float(self.ws[0]),
            w_step=None if w_step is None else float(w_step),
            n1=self.n1,
            n2=self.n2,
        )

    def patch_corners(self, l: int, m: int) -> tuple[FactorPoint, ...]:
        """Corners (c00, c01, c10, c11) of patch (l, m)."""
        return (
            self.anchors[l][m],
            self.anchors[l][m + 1] if self.n2 else self.anchors[l][m],
            self.anchors[l + 1][m],
            self.anchors[l + 1][m + 1] if self.n2 else self.anchors[l + 1][m],
        )

    def label_of(self, i: int, j: int) -> tuple[float, float]:
        return (float(self.thetas[i]), float(self.ws[j]))


# ---------------------------------------------------------------------------
# single-patch evaluators


def eval_geodesic_1p(a: FactorPoint, b: FactorPoint, t: float) -> FactorPoint:
    """The one-parameter geodesic family between two anchors, at t.

    t may be any real number; values outside [0, 1] extrapolate along the
    same straight factor line.
    """
    return geodesic(a, b).evaluate(t)


def _section_base_patch(corners: Sequence[FactorPoint], policy: str) -> FactorPoint:
    c00, c01, c10, c11 = corners
    if policy == "one":
        return c00
    if policy == "arithm":
        return arithmetic_mean([c00, c01, c10, c11], c00.r)
    if policy == "inductive":
        # documented order: lower-left, lower-right, upper-left, upper-right
        return inductive_mean([c00, c10, c01, c11])
    raise ValueError(f"unknown section policy {policy!r}")


def eval_ls_patch(
    corners: Sequence[FactorPoint], section_policy: str, t1: float, t2: float
) -> FactorPoint:
    """Bilinear interpolation of four corners projected onto one section.

    Corner order is (c00, c01, c10, c11): first index along t1, second
    along t2, so (t1, t2) = (0, 1) reproduces the second corner and
    (1, 0) the third.
    """
    if len(corners) != 4:
        raise ValueError("need exactly four corners")
    base = _section_base_patch(corners, section_policy)
    section = Section(base)
    projected = [project_to_section(section, c).y for c in corners]
    w, _, _ = bilinear_weights(t1, t2)
    return FactorPoint(sum(wk * yk for wk, yk in zip(w, projected)))


def _connect_geodesic(yb: np.ndarray, yt: np.ndarray, t: float) -> np.ndarray:
    """One geodesic step between two raw factors, (1-t) yb + t yt q^T."""
    try:
        q = polar_decompose(yb.T @ yt).q
    except SingularInput as exc:
        raise CutLocus("geodesic step undefined: singular Gram product") from exc
    return (1.0 - t) * yb + t * (yt @ q.T)


def eval_lg_patch(corners: Sequence[FactorPoint], t1: float, t2: float) -> FactorPoint:
    """Composition of geodesics over a patch.

    Corner order is (c00, c10, c01, c11): the first edge geodesic runs
    c00 -> c10 along t1 at t2 = 0, the second c01 -> c11 along t1 at
    t2 = 1, and the connecting geodesic between the two edge points runs
    along t2.
    """
    if len(corners) != 4:
        raise ValueError("need exactly four corners")
    c00, c10, c01, c11 = corners
    bottom = geodesic(c00, c10)
    top = geodesic(c01, c11)
    yb = bottom.evaluate(t1).y
    yt = top.evaluate(t1).y
    return FactorPoint(_connect_geodesic(yb, yt, t2))


# ---------------------------------------------------------------------------
# patchwise payloads


@dataclass(frozen=True, eq=False)
class _LsPatch:
    c00: np.ndarray
    c01: np.ndarray
    c10: np.ndarray
    c11: np.ndarray

    def factor(self, u1: float, u2: float) -> np.ndarray:
        w, _, _ = bilinear_weights(u1, u2)
        return w[0] * self.c00 + w[1] * self.c01 + w[2] * self.c10 + w[3] * self.c11

    @property
    def factors(self) -> tuple[np.ndarray, ...]:
        return (self.c00, self.c01, self.c10, self.c11)


@dataclass(frozen=True, eq=False)
class _LgPatch:
    y00: np.ndarray
    yt10: np.ndarray
    y01: np.ndarray
    yt11: np.ndarray

    def bottom(self, u1: float) -> np.ndarray:
        return (1.0 - u1) * self.y00 + u1 * self.yt10

    def top(self, u1: float) -> np.ndarray:
        return (1.0 - u1) * self.y01 + u1 * self.yt11

    def factor(self, u1: float, u2: float) -> np.ndarray:
        return _connect_geodesic(self.bottom(u1), self.top(u1), u2)


def _bg_decasteljau(net: np.ndarray, u1: float, u2: float) -> np.ndarray:
    """Type-II reconstruction on a 4 x 4 control net of factors.

    Four geodesic de Casteljau curves along t1 (one per control row in
    t2), then one curve along t2 through their results.
    """
    arr = net.transpose(1, 0, 2, 3)  # (rows in t2, points in t1, n, r)
    while arr.shape[1] > 1:
        arr = _geodesic_avg_batch(arr[:, :-1], arr[:, 1:], u1)
    pts = arr[:, 0]
    while pts.shape[0] > 1:
        pts = _geodesic_avg_batch(pts[:-1], pts[1:], u2)
    return pts[0]


def _geodesic_avg_batch(ya: np.ndarray, yb: np.ndarray, t: float) -> np.ndarray:
    """Batched geodesic average between factor arrays of shape (..., n, r)."""
    grams = np.swapaxes(ya, -1, -2) @ yb
    try:
        q = polar_orthogonal(grams)
    except SingularInput as exc:
        raise CutLocus("geodesic average undefined: singular Gram product") from exc
    return (1.0 - t) * ya + t * (yb @ np.swapaxes(q, -1, -2))


@dataclass(frozen=True, eq=False)
class _CurveSegment:
    base: np.ndarray
    velocity: np.ndarray

    def factor(self, u1: float) -> np.ndarray:
        return self.base + u1 * self.velocity


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True, eq=False)
class CovarianceSurface:
    """A patchwise two-parameter map from grid coordinates to PSD matrices.

    Immutable after build; evaluation is pure and safe to call
    concurrently. ``control_points`` is populated for the cubic kinds
    (shape (3*N1+1, 3*N2+1, n, r)).
    """

    kind: str
    grid: AnchorGrid
    section_policy: str | None
    _payload: object
    control_points: np.ndarray | None = None

    def patch_of(self, t1: float, t2: float = 0.0) -> tuple[int, int, float, float]:
        """Patch indices and local coordinates for a global coordinate.

        The patch is the one below and to the left of the point, clamped
        to the boundary patches so out-of-domain points extrapolate the
        nearest patch formula.
        """
        grid = self.grid
        l = min(max(int(np.floor(t1)), 0), grid.n1 - 1)
        if grid.one_parameter:
            return l, 0, t1 - l, 0.0
        m = min(max(int(np.floor(t2)), 0), grid.n2 - 1)
        return l, m, t1 - l, t2 - m

    def evaluate(self, t1: float, t2: float = 0.0) -> FactorPoint:
        l, m, u1, u2 = self.patch_of(t1, t2)
        return self.evaluate_patch(l, m, u1, u2)

    def evaluate_patch(self, l: int, m: int, u1: float, u2: float) -> FactorPoint:
        """Evaluate the formula of patch (l, m) at local coordinates.

        Local coordinates outside [0, 1]^2 extrapolate the patch formula.
        """
        payload = self._payload
        if self.kind in ("ls", "lg"):
            if self.grid.one_parameter:
                return FactorPoint(payload[l].factor(u1))
            return FactorPoint(payload[l][m].factor(u1, u2))
        net = self.control_points[3 * l : 3 * l + 4, 3 * m : 3 * m + 4]
        if self.kind == "bs":
            y = np.einsum("i,j,ijnr->nr", bernstein3(u1), bernstein3(u2), net)
            return FactorPoint(y)
        return FactorPoint(_bg_decasteljau(net, u1, u2))

    def patch_factors(self, l: int, m: int):
        """Per-patch raw factor data (used by the identification module)."""
        if self.kind == "ls":
            return self._payload[l][m].factors
        if self.kind == "lg":
            p = self._payload[l][m]
            return (p.y00, p.yt10, p.y01, p.yt11)
        return self.control_points[3 * l : 3 * l + 4, 3 * m : 3 * m + 4]


def _build_ls(grid: AnchorGrid, policy: str):
    patches = []
    for l in range(grid.n1):
        row = []
        for m in range(max(grid.n2, 1)):
            corners = grid.patch_corners(l, m)
            base = _section_base_patch(corners, policy)
            section = Section(base)
            projected = [project_to_section(section, c).y for c in corners]
            row.append(_LsPatch(*projected))
        patches.append(row)
    return patches


def _build_lg(grid: AnchorGrid):
    patches = []
    for l in range(grid.n1):
        row = []
        for m in range(max(grid.n2, 1)):
            c00, c01, c10, c11 = grid.patch_corners(l, m)
            bottom = geodesic(c00, c10)
            top = geodesic(c01, c11)
            row.append(
                _LgPatch(
                    y00=c00.y,
                    yt10=c00.y + bottom.velocity,
                    y01=c01.y,
                    yt11=c01.y + top.velocity,
                )
            )
        patches.append(row)
    return patches


def _build_curve(grid: AnchorGrid):
    segments = []
    for l in range(grid.n1):
        seg = geodesic(grid.anchors[l][0], grid.anchors[l + 1][0])
        segments.append(_CurveSegment(base=seg.base.y, velocity=seg.velocity))
    return segments


def _section_base_global(grid: AnchorGrid, policy: str) -> FactorPoint:
    if policy == "one":
        return grid.anchors[0][0]
    if policy == "arithm":
        return arithmetic_mean([p for row in grid.anchors for p in row], grid.r)
    if policy == "inductive":
        return inductive_mean(
            [
                grid.anchors[0][0],
                grid.anchors[-1][0],
                grid.anchors[0][-1],
                grid.anchors[-1][-1],
            ]
        )
    raise ValueError(f"unknown section policy {policy!r}")


def _build_bs_net(grid: AnchorGrid, policy: str) -> np.ndarray:
    base = _section_base_global(grid, policy)
    section = Section(base)
    projected = np.stack(
        [
            np.stack([project_to_section(section, point).y for point in row])
            for row in grid.anchors
        ]
    )
    s1 = _natural_spline_controls(grid.nodes1)
    s2 = _natural_spline_controls(grid.nodes2)
    return np.einsum("ak,bl,klnr->abnr", s1, s2, projected, optimize=True)


def _build_bg_net(grid: AnchorGrid) -> np.ndarray:
    s1 = _natural_spline_controls(grid.nodes1)
    s2 = _natural_spline_controls(grid.nodes2)
    n, r = grid.n, grid.r
    net = np.empty((s1.shape[0], s2.shape[0], n, r))
    log_cache: dict[tuple[int, int], np.ndarray] = {}

    def logs_at(i: int, j: int) -> np.ndarray:
        key = (i, j)
        if key not in log_cache:
            anchor = grid.anchors[i][j]
            v = np.empty((grid.nodes1, grid.nodes2, n, r))
            for k in range(grid.nodes1):
                for l in range(grid.nodes2):
                    if (k, l) == key:
                        v[k, l] = 0.0
                    else:
                        v[k, l] = log_map(anchor, grid.anchors[k][l])
            log_cache[key] = v
        return log_cache[key]

    for a in range(s1.shape[0]):
        i = _control_owner(a)
        for b in range(s2.shape[0]):
            j = _control_owner(b)
            if a % 3 == 0 and b % 3 == 0:
                net[a, b] = grid.anchors[i][j].y
                continue
            weights = np.outer(s1[a], s2[b])
            offset = np.einsum("kl,klnr->nr", weights, logs_at(i, j))
            net[a, b] = grid.anchors[i][j].y + offset
    return net


def build_surface(
    grid: AnchorGrid, kind: str, section_policy: str | None = None
) -> CovarianceSurface:
    """Build one of the four surface kinds over an anchor grid."""
    if kind not in SURFACE_KINDS:
        raise ValueError(f"unknown surface kind {kind!r}")

    if grid.one_parameter:
        if kind in ("bs", "bg"):
            raise ValueError("cubic surfaces need at least a 2 x 2 grid of nodes")
        # One-parameter sectional and geodesic families coincide; both are
        # realized as the piecewise geodesic through the nodes, and the
        # section policy is irrelevant.
        return CovarianceSurface(
            kind=kind, grid=grid, section_policy=section_policy, _payload=_build_curve(grid)
        )

    if kind in ("ls", "bs"):
        if section_policy not in SECTION_POLICIES:
            raise ValueError(
                f"kind {kind!r} needs a section policy from {SECTION_POLICIES}"
            )
    elif section_policy is not None:
        raise ValueError(f"kind {kind!r} does not take a section policy")

    if kind == "ls":
        payload = _build_ls(grid, section_policy)
        return CovarianceSurface(kind, grid, section_policy, payload)
    if kind == "lg":
        return CovarianceSurface(kind, grid, None, _build_lg(grid))
    if kind == "bs":
        net = _build_bs_net(grid, section_policy)
        return CovarianceSurface(kind, grid, section_policy, None, control_points=net)
    net = _build_bg_net(grid)
    return CovarianceSurface(kind, grid, None, None, control_points=net)


def build_bezier_section(grid: AnchorGrid, section_policy: str) -> CovarianceSurface:
    """Cubic Bezier surface in a single global section."""
    return build_surface(grid, "bs", section_policy)


def build_bezier_geodesic(grid: AnchorGrid) -> CovarianceSurface:
    """Cubic Bezier surface on the quotient via tangent-space control points."""
    return build_surface(grid, "bg")


def eval_bezier_section(surface: CovarianceSurface, t1: float, t2: float) -> FactorPoint:
    if surface.kind != "bs":
        raise ValueError("surface is not a sectional Bezier surface")
    return surface.evaluate(t1, t2)

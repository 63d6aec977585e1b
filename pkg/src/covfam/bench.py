"""Synthetic anchor fields, the train/test protocol, and error reports.

A deterministic smooth family of rank-r covariance factors stands in for
expensive simulation data: Y(theta, W) = G(rho * theta) U0 diag(s(W)),
with U0 a seeded orthonormal frame, G a product of seeded Givens
rotations whose angles grow linearly with theta, and s(W) a seeded
positive spectrum profile scaled affinely in W. Training anchors sit on
the label grid; test points default to the patch centers. Errors follow
the squared-Frobenius convention:

    e       squared distance between the hidden matrix and the surface at
            the test label
    e_n     100 * e / (mean squared distance from the hidden matrix to
            the four corners of its patch)
    e_star  the same with the surface point replaced by the identified
            (distance-minimizing) member
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .covfun import SECTION_POLICIES, AnchorGrid, CovarianceSurface, build_surface
from .errors import CovfamError, CutLocus
from .identify import DescentSettings, SampleCovariance, identify
from .manifold import FactorPoint
from .numerics import frob_dist_sq_lowrank, truncated_svd

__all__ = [
    "SyntheticFieldSpec",
    "SyntheticField",
    "generate_field",
    "ErrorRecord",
    "ErrorReport",
    "run_benchmark",
    "emit_report",
    "report_from_json",
    "parse_method",
    "format_method",
    "DEFAULT_METHODS",
]

DEFAULT_METHODS = (
    "ls:one", "ls:arithm", "ls:inductive", "lg",
    "bs:one", "bs:arithm", "bs:inductive", "bg",
)

AVERAGE_FIELDS = ("e", "e_n", "e_star", "e_star_n")


def parse_method(spec: str) -> tuple[str, str | None]:
    """Split a 'kind[:section]' method spec string."""
    kind, _, policy = spec.partition(":")
    if kind in ("ls", "bs"):
        if policy not in SECTION_POLICIES:
            raise ValueError(
                f"method {spec!r}: sectional kinds need a policy from {SECTION_POLICIES}"
            )
        return kind, policy
    if kind in ("lg", "bg"):
        if policy:
            raise ValueError(f"method {spec!r}: {kind} does not take a section policy")
        return kind, None
    raise ValueError(f"unknown method {spec!r}")


def format_method(kind: str, policy: str | None) -> str:
    return kind if policy is None else f"{kind}:{policy}"


# ---------------------------------------------------------------------------
# synthetic field


@dataclass(frozen=True)
class SyntheticFieldSpec:
    """Deterministic recipe for a smooth synthetic anchor field.

    ``rotation_rate`` is in radians of frame rotation per unit theta,
    ``scale_rate`` is the relative spectrum growth per unit W. With
    ``sample_count`` set, anchors are sample-covariance estimates from
    that many Gaussian draws, rank-reduced back to r.
    """

    n: int = 200
    r: int = 10
    grid_shape: tuple[int, int] = (5, 4)
    theta_range: tuple[float, float] = (0.0, 22.5)
    w_range: tuple[float, float] = (4.0, 13.0)
    seed: int = 0
    rotation_rate: float = 0.0625
    scale_rate: float = 0.08
    sample_count: int | None = None

    def __post_init__(self):
        if self.n < self.r or self.r < 1:
            raise ValueError("need n >= r >= 1")
        if self.grid_shape[0] < 2 or self.grid_shape[1] < 1:
            raise ValueError("grid_shape needs at least 2 theta nodes and 1 W node")
        if not (self.theta_range[1] > self.theta_range[0]):
            raise ValueError("theta_range must be increasing")
        if self.grid_shape[1] > 1 and not (self.w_range[1] > self.w_range[0]):
            raise ValueError("w_range must be increasing")

    @classmethod
    def wind(cls, seed: int = 0, sample_count: int | None = None) -> "SyntheticFieldSpec":
        """Paper-scale preset: 3024 degrees of freedom, rank 20, 5 x 4 grid."""
        return cls(n=3024, r=20, grid_shape=(5, 4), theta_range=(0.0, 22.5),
                   w_range=(4.0, 13.0), seed=seed, sample_count=sample_count)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "r": self.r, "grid_shape": list(self.grid_shape),
            "theta_range": list(self.theta_range), "w_range": list(self.w_range),
            "seed": self.seed, "rotation_rate": self.rotation_rate,
            "scale_rate": self.scale_rate, "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticFieldSpec":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in data.items() if k in known}
        for key in ("grid_shape", "theta_range", "w_range"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _float_bits(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


class SyntheticField:
    """Deterministic ground-truth map (theta, W) -> rank-r factor."""

    def __init__(self, spec: SyntheticFieldSpec):
        self.spec = spec
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        n, r = spec.n, spec.r
        frame = np.linalg.qr(rng.standard_normal((n, r)))[0]
        num_rot = min(r, n // 2)
        perm = rng.permutation(n)
        self._pairs = [(int(perm[2 * k]), int(perm[2 * k + 1])) for k in range(num_rot)]
        self._rates = rng.uniform(0.5, 1.5, size=num_rot)
        self._profile = np.sort(rng.uniform(0.6, 1.4, size=r))[::-1]
        self._frame = frame

    def factor(self, theta: float, w: float) -> FactorPoint:
        """Exact field factor at a label (deterministic, noise free)."""
        spec = self.spec
        scale = 1.0 + spec.scale_rate * (w - spec.w_range[0])
        y = self._frame * (scale * self._profile)
        alpha = spec.rotation_rate * theta
        for (i, j), rate in zip(self._pairs, self._rates):
            angle = rate * alpha
            c, s = math.cos(angle), math.sin(angle)
            yi = y[i].copy()
            y[i] = c * yi - s * y[j]
            y[j] = s * yi + c * y[j]
        return FactorPoint(y)

    def sample_covariance(self, theta: float, w: float, count: int | None = None) -> SampleCovariance:
        """Sample covariance of Gaussian draws with the field covariance.

        Draws live in the column space of the factor, so the factor of the
        estimate has at most r columns regardless of the sample count.
        Deterministic per (seed, theta, w).
        """
        q = count if count is not None else self.spec.sample_count
        if q is None or q < 1:
            raise ValueError("need a positive sample count")
        seq = np.random.SeedSequence(
            [self.spec.seed & 0xFFFFFFFF, _float_bits(theta), _float_bits(w), 0x5A17]
        )
        rng = np.random.default_rng(seq)
        y = self.factor(theta, w).y
        r = y.shape[1]
        gram = np.zeros((r, r))
        remaining = q
        while remaining > 0:
            chunk = min(remaining, 65536)
            g = rng.standard_normal((r, chunk))
            gram += g @ g.T
            remaining -= chunk
        gram /= q
        lam, vec = np.linalg.eigh(gram)
        lam = np.clip(lam[::-1], 0.0, None)
        factor = y @ (vec[:, ::-1] * np.sqrt(lam))
        return SampleCovariance(factor=factor, sample_count=q)

    def anchor(self, theta: float, w: float) -> FactorPoint:
        """Rank-r anchor at a label: exact, or estimated then truncated."""
        if self.spec.sample_count is None:
            return self.factor(theta, w)
        estimate = self.sample_covariance(theta, w)
        return FactorPoint(truncated_svd(estimate.factor, self.spec.r))

    def training_labels(self) -> tuple[np.ndarray, np.ndarray]:
        spec = self.spec
        thetas = np.linspace(spec.theta_range[0], spec.theta_range[1], spec.grid_shape[0])
        if spec.grid_shape[1] == 1:
            ws = np.array([spec.w_range[0]])
        else:
            ws = np.linspace(spec.w_range[0], spec.w_range[1], spec.grid_shape[1])
        return thetas, ws

    def training_grid(self) -> AnchorGrid:
        thetas, ws = self.training_labels()
        anchors = tuple(
            tuple(self.anchor(float(t), float(w)) for w in ws) for t in thetas
        )
        return AnchorGrid(anchors=anchors, thetas=thetas, ws=ws)

    def default_test_labels(self) -> list[tuple[float, float]]:
        """Patch-center labels interleaving the training grid."""
        thetas, ws = self.training_labels()
        mid_t = 0.5 * (thetas[:-1] + thetas[1:])
        mid_w = 0.5 * (ws[:-1] + ws[1:]) if len(ws) > 1 else ws
        return [(float(t), float(w)) for t in mid_t for w in mid_w]


def generate_field(spec: SyntheticFieldSpec) -> SyntheticField:
    return SyntheticField(spec)


# ---------------------------------------------------------------------------
# error report


@dataclass(frozen=True)
class ErrorRecord:
    method: str
    theta: float
    w: float
    e: float
    e_n: float
    e_star: float | None
    e_star_n: float | None
    t: tuple[float, ...]
    patch: tuple[int, int]
    iterations: int
    converged: bool
    status: str = "ok"

    def to_dict(self) -> dict:
        def clean(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return None
            return x

        return {
            "method": self.method, "theta": self.theta, "w": self.w,
            "e": clean(self.e), "e_n": clean(self.e_n),
            "e_star": clean(self.e_star), "e_star_n": clean(self.e_star_n),
            "t": list(self.t), "patch": list(self.patch),
            "iterations": self.iterations, "converged": self.converged,
            "status": self.status,
        }


@dataclass(frozen=True)
class ErrorReport:
    mode: str
    methods: tuple[str, ...]
    records: tuple[ErrorRecord, ...]
    averages: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "methods": list(self.methods),
            "records": [rec.to_dict() for rec in self.records],
            "averages": self.averages,
        }


def _nan_to_none(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return x


def _compute_averages(methods, records) -> dict:
    out: dict = {}
    for method in methods:
        rows = [rec for rec in records if rec.method == method]
        entry = {}
        for name in AVERAGE_FIELDS:
            values = [getattr(rec, name) for rec in rows]
            values = [v for v in values if v is not None and not math.isnan(v)]
            entry[name] = float(np.mean(values)) if values else None
        out[method] = entry
    return out


def _csv_float(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.17g}"


RECORD_COLUMNS = (
    "method", "theta", "w", "e", "e_n", "e_star", "e_star_n",
    "t1", "t2", "patch_l", "patch_m", "iterations", "converged", "status",
)


def records_to_csv(report: ErrorReport) -> str:
    lines = [",".join(RECORD_COLUMNS)]
    for rec in report.records:
        t1 = rec.t[0] if len(rec.t) > 0 else None
        t2 = rec.t[1] if len(rec.t) > 1 else None
        lines.append(",".join([
            rec.method,
            _csv_float(rec.theta), _csv_float(rec.w),
            _csv_float(rec.e), _csv_float(rec.e_n),
            _csv_float(rec.e_star), _csv_float(rec.e_star_n),
            _csv_float(t1), _csv_float(t2),
            str(rec.patch[0]), str(rec.patch[1]),
            str(rec.iterations), str(int(rec.converged)), rec.status,
        ]))
    return "\n".join(lines) + "\n"


def summary_to_csv(report: ErrorReport) -> str:
    lines = ["method,avg_e,avg_e_n,avg_e_star,avg_e_star_n"]
    for method in report.methods:
        entry = report.averages.get(method, {})
        lines.append(",".join([method] + [
            _csv_float(entry.get(name)) for name in AVERAGE_FIELDS
        ]))
    return "\n".join(lines) + "\n"


def emit_report(report: ErrorReport, fmt: str) -> bytes:
    """Serialize a report; 'csv' emits the per-record table, 'json' everything."""
    if fmt == "csv":
        return records_to_csv(report).encode()
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":"),
                          allow_nan=False).encode()
    raise ValueError(f"unknown report format {fmt!r}")


def report_from_json(data: bytes | str) -> ErrorReport:
    obj = json.loads(data)
    records = []
    for raw in obj["records"]:
        def pick(name):
            v = raw[name]
            return math.nan if v is None else v

        records.append(ErrorRecord(
            method=raw["method"], theta=raw["theta"], w=raw["w"],
            e=pick("e"), e_n=pick("e_n"),
            e_star=raw["e_star"], e_star_n=raw["e_star_n"],
            t=tuple(raw["t"]), patch=tuple(raw["patch"]),
            iterations=raw["iterations"], converged=raw["converged"],
            status=raw["status"],
        ))
    return ErrorReport(mode=obj["mode"], methods=tuple(obj["methods"]),
                       records=tuple(records), averages=obj["averages"])


# ---------------------------------------------------------------------------
# the benchmark protocol


def _normalizer(target: FactorPoint, grid: AnchorGrid, l: int, m: int) -> float:
    corners = grid.patch_corners(l, m)
    return float(np.mean([frob_dist_sq_lowrank(target.y, c.y) for c in corners]))


def _normalized(e: float, denom: float) -> float:
    if denom > 0.0:
        return 100.0 * e / denom
    return 0.0 if e == 0.0 else math.nan


def _one_record(
    method: str,
    surface: CovarianceSurface,
    grid: AnchorGrid,
    theta: float,
    w: float,
    target: FactorPoint,
    mode: str,
    settings: DescentSettings,
) -> ErrorRecord:
    t1, t2 = grid.label_map.to_coords(theta, w)
    l, m, u1, u2 = surface.patch_of(t1, t2)
    denom = _normalizer(target, grid, l, m)
    try:
        point = surface.evaluate(t1, t2)
        e = frob_dist_sq_lowrank(target.y, point.y)
    except CovfamError as exc:
        return ErrorRecord(
            method=method, theta=theta, w=w, e=math.nan, e_n=math.nan,
            e_star=None, e_star_n=None, t=(t1, t2), patch=(l, m),
            iterations=0, converged=False, status=type(exc).__name__.lower(),
        )
    e_n = _normalized(e, denom)
    if mode == "interp":
        return ErrorRecord(
            method=method, theta=theta, w=w, e=e, e_n=e_n,
            e_star=None, e_star_n=None, t=(t1, t2), patch=(l, m),
            iterations=0, converged=True, status="ok",
        )
    try:
        result = identify(
            surface,
            SampleCovariance.from_point(target),
            settings=settings,
            extra_starts={(l, m): [(u1, u2)]},
        )
    except CovfamError as exc:
        return ErrorRecord(
            method=method, theta=theta, w=w, e=e, e_n=e_n,
            e_star=math.nan, e_star_n=math.nan, t=(t1, t2), patch=(l, m),
            iterations=0, converged=False, status=type(exc).__name__.lower(),
        )
    e_star = result.distance ** 2
    status = "ok" if result.converged else "notconverged"
    return ErrorRecord(
        method=method, theta=theta, w=w, e=e, e_n=e_n,
        e_star=e_star, e_star_n=_normalized(e_star, denom),
        t=result.t, patch=result.patch, iterations=result.iterations,
        converged=result.converged, status=status,
    )


def run_benchmark(
    field: SyntheticField,
    methods: Sequence[str] = DEFAULT_METHODS,
    mode: str = "interp",
    threads: int = 1,
    test_labels: Sequence[tuple[float, float]] | None = None,
    settings: DescentSettings | None = None,
) -> ErrorReport:
    """Build every requested surface and score it on the test labels.

    Per-record failures degrade to NaN fields with a status string instead
    of aborting the run. Records are merged in job order, so the report is
    identical for any worker count.
    """
    if mode not in ("interp", "identify"):
        raise ValueError(f"unknown mode {mode!r}")
    methods = tuple(methods)
    for spec in methods:
        parse_method(spec)
    grid = field.training_grid()
    if test_labels is None:
        test_labels = field.default_test_labels()
    targets = [(theta, w, field.anchor(theta, w)) for theta, w in test_labels]
    settings = settings or DescentSettings()

    surfaces = {}
    for spec in methods:
        kind, policy = parse_method(spec)
        surfaces[spec] = build_surface(grid, kind, policy)

    jobs = [
        (spec, theta, w, target)
        for spec in methods
        for theta, w, target in targets
    ]

    def compute(job):
        spec, theta, w, target = job
        return _one_record(spec, surfaces[spec], grid, theta, w, target, mode, settings)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = tuple(pool.map(compute, jobs))
    else:
        records = tuple(compute(job) for job in jobs)

    return ErrorReport(
        mode=mode,
        methods=methods,
        records=records,
        averages=_compute_averages(methods, records),
    )

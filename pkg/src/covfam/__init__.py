"""Parametric low-rank covariance families on the fixed-rank PSD manifold.

Anchors are rank-r covariance matrices held as tall factors Y (the
matrix is Y Y^T). Families connect anchors with geodesics of the
factor-space quotient geometry, bilinear interpolation in affine
sections, or patchwise cubic Bezier surfaces; identification finds the
family member closest to a sample covariance in Frobenius distance.
"""

from .covfun import (
    AnchorGrid,
    CovarianceSurface,
    LabelMap,
    build_bezier_geodesic,
    build_bezier_section,
    build_surface,
    eval_bezier_section,
    eval_geodesic_1p,
    eval_lg_patch,
    eval_ls_patch,
    map_label,
)
from .errors import (
    CovfamError,
    CutLocus,
    DegenerateCubic,
    IllConditioned,
    RankDeficient,
    SingularInput,
)
from .identify import (
    DescentSettings,
    IdentificationResult,
    SampleCovariance,
    identify,
    identify_1p,
    identify_bg,
    identify_bs,
    identify_lg,
    identify_ls,
)
from .manifold import (
    FactorPoint,
    GeodesicSegment,
    Section,
    arithmetic_mean,
    exp_map,
    geodesic,
    inductive_mean,
    log_map,
    project_to_section,
)
from .numerics import (
    CubicCoefficients,
    PolarFactors,
    cubic_real_roots,
    frob_dist_sq_lowrank,
    polar_decompose,
    solve_sylvester_sym,
    truncated_svd,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorGrid",
    "CovarianceSurface",
    "CovfamError",
    "CubicCoefficients",
    "CutLocus",
    "DegenerateCubic",
    "DescentSettings",
    "FactorPoint",
    "GeodesicSegment",
    "IdentificationResult",
    "IllConditioned",
    "LabelMap",
    "PolarFactors",
    "RankDeficient",
    "SampleCovariance",
    "Section",
    "SingularInput",
    "arithmetic_mean",
    "build_bezier_geodesic",
    "build_bezier_section",
    "build_surface",
    "cubic_real_roots",
    "eval_bezier_section",
    "eval_geodesic_1p",
    "eval_lg_patch",
    "eval_ls_patch",
    "exp_map",
    "frob_dist_sq_lowrank",
    "geodesic",
    "identify",
    "identify_1p",
    "identify_bg",
    "identify_bs",
    "identify_lg",
    "identify_ls",
    "inductive_mean",
    "log_map",
    "map_label",
    "polar_decompose",
    "project_to_section",
    "solve_sylvester_sym",
    "truncated_svd",
]

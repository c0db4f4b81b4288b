"""Convex spherical curve surgery, prolonged distributions, and certified
complex tangencies in C^3.

The toolkit builds convex bundle immersions by curve surgery and
zero-integral reparametrization, forms derived prolonged distributions over
3-dimensional chart bases, and certifies that the complex tangencies of the
induced embeddings into C^3 are co-real and satisfy the full rank
filtration, including a fiber-dilation threshold sweep.
"""

__version__ = "0.1.0"

from .curves import (
    Jet3,
    MarginReport,
    PeriodicCurve,
    SurroundReport,
    convexity_margin,
    curve_integral,
    doubled_latitude_circle,
    eval_jet,
    fibonacci_sphere,
    fit_fourier,
    fit_fourier_adaptive,
    great_circle,
    indicatrix,
    latitude_circle,
    random_spherical_curve,
    random_surrounding_curve,
    sphericity_error,
    surround_margin,
    surround_report,
    surrounds_origin_lp,
    turning_determinant,
)
from .surgery import (
    GraftableArc,
    WiggleRecord,
    build_seed,
    check_graftable,
    detect_wiggles,
    graft,
    graft_homotopy_margins,
    n_complete_surround_check,
    shipped_seed,
    smooth_corners,
)
from .reparam import (
    CircleDiffeo,
    TiltSolution,
    family_rebalance,
    rebalance,
    tilt_solve,
)
from .bspline import SplineGrid
from .prolong import (
    WIGGLE_BUDGET,
    BundleImmersionFamily,
    CurveFamily,
    LocalFamily,
    PatchReport,
    PlaneField,
    Transition,
    base_independent_family,
    derived_prolongation,
    ensure_embedded,
    family_values,
    fibrewise_integrate,
    patch_family,
    primitive,
    prolonged_distribution,
    rotation_field_family,
    two_chart_patch_demo,
)
from .engel import (
    EngelCertificate,
    VectorFieldModel,
    engel_margins,
    fd_crosscheck,
    lie_bracket,
)
from .crgeom import (
    ACSField,
    AmbientEmbedding,
    J_STD,
    TangencyReport,
    ZoomStep,
    ZoomSweepResult,
    clifford_tubular,
    complex_tangency,
    coreal_scan,
    lemma_check,
    perturbed_J,
    principal_angles,
    tangency_frame_field,
    zoom_family,
    zoom_sweep,
)
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]

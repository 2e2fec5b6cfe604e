"""Quadratic differentials: planar charts and flat glued surfaces."""

from .planar import (
    PlanarDifferential, DegenerateDifferentialError, SingularSegmentError, PoleOrderError,
    beta, phi_hat, beta_exact, phi_hat_exact, beta_double_pole_coefficients,
    segment_holonomy, path_holonomy, straight_length, trace_ray, distance_to_zero,
    distance_to_zero_set, point_at_distance, point_at_standoff, epsilon_bound_check, normalize_sign,
    metric_schwarzian, gaussian_curvature, dbar_schwarzian_check,
    compare_differentials, ComparisonReport, SegmentComparison,
)
from .flat import (
    HalfTranslationSurface, Gluing, GluingError, DepthExceededError, SurfacePoint,
    FlatSegment, FlatCylinder, GeodesicResult, flat_geodesic, detect_cylinders,
    square_torus, l_shaped_surface, regular_octagon_surface,
)

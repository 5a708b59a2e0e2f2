"""Geometry kernel: convex polyhedra, unions, booleans, curved-region approximations."""
from .poly import (
    TAU_GEOM,
    ConvexPolyhedron,
    GeometryError,
    PolyUnion,
    Segment,
    ToleranceConfig,
    angle_at,
    angles_at,
    boxes_disjoint,
    chebyshev_center,
    distance_point_region,
    distance_segment_region,
    segments_distance_poly,
    segments_intersect_poly,
)
from .ops import bool_diff, bool_intersect, bool_union, poly_diff, union_volume
from .curved import (
    angle_region,
    bloat,
    bloat_poly,
    project,
    project_poly,
    sphere_approx,
    sphere_vertex_count,
)

__all__ = [
    "TAU_GEOM",
    "ConvexPolyhedron",
    "GeometryError",
    "PolyUnion",
    "Segment",
    "ToleranceConfig",
    "angle_at",
    "angles_at",
    "angle_region",
    "bloat",
    "bloat_poly",
    "bool_diff",
    "bool_intersect",
    "bool_union",
    "boxes_disjoint",
    "chebyshev_center",
    "distance_point_region",
    "distance_segment_region",
    "poly_diff",
    "project",
    "project_poly",
    "segments_distance_poly",
    "segments_intersect_poly",
    "sphere_approx",
    "sphere_vertex_count",
    "union_volume",
]

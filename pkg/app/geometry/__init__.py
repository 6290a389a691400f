from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from app.geometry.base import (
    FLAT_KINDS,
    SEAM_BAND,
    GeometryError,
    OffSurfaceError,
    PancakeSurface,
    PlateSpecError,
    ProjectionError,
    RegionKind,
    SeamPointError,
    SurfaceRegion,
)
from app.geometry.boundaries import (
    BallBoundary,
    BoundaryPoint,
    HalfSpaceBoundary,
    PlateBoundary,
    SinaiHoleBoundary,
    SplineBoundary,
)
from app.geometry.planar import PlanarPancake, SinaiPancake
from app.geometry.products import ProductPancake
from app.geometry.semi_infinite import SemiInfinitePancake
from app.models import PlateFamily, PlateSpec


logger = logging.getLogger(__name__)

__all__ = [
    "FLAT_KINDS",
    "SEAM_BAND",
    "BallBoundary",
    "BoundaryPoint",
    "GeometryError",
    "HalfSpaceBoundary",
    "OffSurfaceError",
    "PancakeSurface",
    "PlanarPancake",
    "PlateBoundary",
    "PlateSpecError",
    "ProductPancake",
    "ProjectionError",
    "RegionKind",
    "SeamPointError",
    "SemiInfinitePancake",
    "SinaiHoleBoundary",
    "SinaiPancake",
    "SplineBoundary",
    "SurfaceRegion",
    "build_boundary",
    "build_pancake",
    "classify_region",
    "normal",
    "project_to_surface",
    "shape_operator",
]


def build_boundary(plate: PlateSpec) -> PlateBoundary:
    family = plate.family
    if family == PlateFamily.HALF_PLANE:
        return HalfSpaceBoundary(plate.ambient_dim - 1)
    if family == PlateFamily.DISC:
        return BallBoundary(plate.R, plate.ambient_dim - 1)
    if family == PlateFamily.SINAI_TORUS:
        return SinaiHoleBoundary(plate.L, plate.rho)
    if family == PlateFamily.SMOOTH_PLANAR_PLATE:
        return SplineBoundary(plate.points, plate.curvatures)
    raise PlateSpecError(f"{family.value} has no smooth planar edge")


def build_pancake(plate: PlateSpec, r: Optional[float] = None) -> PancakeSurface:
    """Surface of centres of a radius-r ball rolling on the plate."""
    radius = plate.r if r is None else r
    if radius is None or radius <= 0.0:
        raise PlateSpecError(f"pancake radius must be positive, got {radius}")
    family = plate.family
    if family == PlateFamily.SINAI_TORUS:
        surface: PancakeSurface = SinaiPancake(plate, radius)
    elif family in (PlateFamily.HALF_PLANE, PlateFamily.DISC, PlateFamily.SMOOTH_PLANAR_PLATE):
        surface = PlanarPancake(plate, build_boundary(plate), radius)
    elif family == PlateFamily.SEMI_INFINITE_LINE:
        surface = SemiInfinitePancake(plate, radius)
    elif family in (PlateFamily.CYLINDER_FACTOR, PlateFamily.SPHERE_FACTOR):
        codim = 2 if family == PlateFamily.CYLINDER_FACTOR else 3
        surface = ProductPancake(plate, plate.ambient_dim - codim, codim, radius)
    else:
        raise PlateSpecError(f"{family.value} plates have corners; no smooth pancake exists")
    logger.debug("Built %s pancake with r=%g in R^%d", family.value, radius, surface.dim)
    return surface


def normal(surface: PancakeSurface, x: np.ndarray) -> np.ndarray:
    return surface.normal(x)


def shape_operator(surface: PancakeSurface, x: np.ndarray) -> np.ndarray:
    return surface.shape_operator(x)


def project_to_surface(surface: PancakeSurface, x: np.ndarray) -> np.ndarray:
    return surface.project_to_surface(x)


def classify_region(surface: PancakeSurface, x: np.ndarray) -> RegionKind:
    return surface.classify_region(x)

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from app.models import PlateSpec
from app.skew import tangent_projector


logger = logging.getLogger(__name__)

SEAM_BAND = 1e-9
# a point counts as on the surface when |dist(x, P) - r| is below this, relative to max(1, r)
ON_SURFACE_TOL = 1e-8


class GeometryError(ValueError):
    """Base class for pancake geometry failures."""


class SeamPointError(GeometryError):
    pass


class OffSurfaceError(GeometryError):
    pass


class ProjectionError(GeometryError):
    pass


class PlateSpecError(GeometryError):
    pass


class RegionKind(str, Enum):
    FLAT_SHEET_PLUS = "FlatSheetPlus"
    FLAT_SHEET_MINUS = "FlatSheetMinus"
    EDGE_TUBE = "EdgeTube"
    CAP = "Cap"
    SEAM = "Seam"


FLAT_KINDS = (RegionKind.FLAT_SHEET_PLUS, RegionKind.FLAT_SHEET_MINUS)


@dataclass(frozen=True)
class SurfaceRegion:
    kind: RegionKind
    chart: str


class PancakeSurface(ABC):
    """Boundary of the r-neighbourhood of a plate, as a piecewise-smooth atlas.

    Every region exposes analytic formulas that stay valid a little past its
    seams (`region_*` methods). The integrator relies on those extensions to
    take whole RK4 steps in one region and to locate seam crossings.
    `seam_function(region, x)` is positive inside the region and changes sign
    on the seam that leads to `neighbor(region, x)`.
    """

    regions: Tuple[SurfaceRegion, ...] = ()

    def __init__(self, plate: PlateSpec, r: float, dim: int) -> None:
        self.plate = plate
        self.r = float(r)
        self.dim = int(dim)

    # ------------------------------------------------------------------
    # Region-local analytic formulas
    # ------------------------------------------------------------------

    @abstractmethod
    def closest_plate_point(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def locate(self, x: np.ndarray) -> SurfaceRegion:
        """Smooth region whose closure contains x (no seam band)."""

    @abstractmethod
    def region_normal(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def region_shape_operator(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def region_project(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        ...

    def seam_function(self, region: SurfaceRegion, x: np.ndarray) -> float:
        return float("inf")

    def chord_min_seam(self, region: SurfaceRegion, x0: np.ndarray, x1: np.ndarray) -> Tuple[float, float]:
        """(fraction, value) of the smallest seam function along the straight chord x0 -> x1.

        Only meaningful for flat regions, where a step is an exact straight line.
        """
        return 1.0, self.seam_function(region, x1)

    def seam_gradient(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.dim)

    def neighbor(self, region: SurfaceRegion, x: np.ndarray) -> SurfaceRegion:
        raise GeometryError(f"{type(self).__name__} has no seams")

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return x

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    # ------------------------------------------------------------------
    # Surface queries
    # ------------------------------------------------------------------

    def distance_to_plate(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.closest_plate_point(x)))

    def is_on_surface(self, x: np.ndarray, tol: float = ON_SURFACE_TOL) -> bool:
        return abs(self.distance_to_plate(x) - self.r) <= tol * max(1.0, self.r)

    def _require_on_surface(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point in R^{self.dim}, got shape {x.shape}")
        if not self.is_on_surface(x):
            raise OffSurfaceError(
                f"point at distance {self.distance_to_plate(x):.6g} from the plate, surface radius is {self.r:.6g}"
            )
        return x

    def normal(self, x: np.ndarray) -> np.ndarray:
        x = self._require_on_surface(x)
        offset = x - self.closest_plate_point(x)
        return offset / np.linalg.norm(offset)

    def classify_region(self, x: np.ndarray) -> RegionKind:
        x = np.asarray(x, dtype=float)
        region = self.locate(x)
        if abs(self.seam_function(region, x)) < SEAM_BAND:
            return RegionKind.SEAM
        return region.kind

    def shape_operator(self, x: np.ndarray) -> np.ndarray:
        x = self._require_on_surface(x)
        if self.classify_region(x) == RegionKind.SEAM:
            raise SeamPointError(f"shape operator is discontinuous at seam point {x.tolist()}")
        return self.region_shape_operator(self.locate(x), x)

    def project_to_surface(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        base = self.closest_plate_point(x)
        offset = x - base
        dist = float(np.linalg.norm(offset))
        if dist == 0.0 or abs(dist - self.r) > 0.5 * self.r:
            raise ProjectionError(
                f"point at distance {dist:.6g} from the plate is too far from the surface of radius {self.r:.6g}"
            )
        return base + self.r * offset / dist

    def region_for(self, x: np.ndarray, u: np.ndarray) -> SurfaceRegion:
        """Region a state at x moving with velocity u is about to traverse."""
        x = np.asarray(x, dtype=float)
        region = self.locate(x)
        if self.seam_function(region, x) < SEAM_BAND:
            if float(np.dot(self.seam_gradient(region, x), u)) < 0.0:
                return self.neighbor(region, x)
        return region

    def tangent_projector(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        return tangent_projector(self.region_normal(region, x))

from __future__ import annotations

import numpy as np

from app.geometry.base import PancakeSurface, PlateSpecError, RegionKind, SurfaceRegion
from app.models import PlateSpec


CYLINDER = SurfaceRegion(RegionKind.EDGE_TUBE, "cylinder")
CAP = SurfaceRegion(RegionKind.CAP, "cap")


class SemiInfinitePancake(PancakeSurface):
    """Pancake of the ray {(s, 0, 0) : s >= 0} in R^3.

    A cylinder R+ x S^1(r) for x_1 >= 0 capped by a hemisphere of radius r
    around the endpoint; the seam is the circle x_1 = 0.
    """

    regions = (CYLINDER, CAP)

    def __init__(self, plate: PlateSpec, r: float) -> None:
        if r <= 0.0:
            raise PlateSpecError(f"semi-infinite pancake needs r > 0, got {r}")
        super().__init__(plate, r, 3)
        self._e1 = np.array([1.0, 0.0, 0.0])

    def closest_plate_point(self, x: np.ndarray) -> np.ndarray:
        return np.array([max(float(x[0]), 0.0), 0.0, 0.0])

    def locate(self, x: np.ndarray) -> SurfaceRegion:
        return CYLINDER if x[0] >= 0.0 else CAP

    def region_normal(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if region == CAP:
            return x / np.linalg.norm(x)
        ring = np.array([0.0, x[1], x[2]])
        return ring / np.linalg.norm(ring)

    def region_shape_operator(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        nu = self.region_normal(region, x)
        if region == CAP:
            return -(np.eye(3) - np.outer(nu, nu)) / float(np.linalg.norm(x))
        ring_proj = np.diag([0.0, 1.0, 1.0]) - np.outer(nu, nu)
        return -ring_proj / float(np.hypot(x[1], x[2]))

    def region_project(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if region == CAP:
            return self.r * x / np.linalg.norm(x)
        rho = float(np.hypot(x[1], x[2]))
        return np.array([x[0], self.r * x[1] / rho, self.r * x[2] / rho])

    def seam_function(self, region: SurfaceRegion, x: np.ndarray) -> float:
        return float(x[0]) if region == CYLINDER else -float(x[0])

    def seam_gradient(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        return self._e1.copy() if region == CYLINDER else -self._e1

    def neighbor(self, region: SurfaceRegion, x: np.ndarray) -> SurfaceRegion:
        return CAP if region == CYLINDER else CYLINDER

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        direction = rng.normal(size=3)
        if direction[0] < 0.0:
            return self.r * direction / np.linalg.norm(direction)
        angle = rng.uniform(0.0, 2 * np.pi)
        return np.array([rng.uniform(0.0, 3.0), self.r * np.cos(angle), self.r * np.sin(angle)])

from __future__ import annotations

import numpy as np

from app.geometry.base import PancakeSurface, PlateSpecError, ProjectionError, RegionKind, SurfaceRegion
from app.models import PlateSpec


PRODUCT = SurfaceRegion(RegionKind.EDGE_TUBE, "product")


class ProductPancake(PancakeSurface):
    """R^k x S^(c-1)(r) in R^(k+c): the pancake of a flat R^k with no edge.

    Coordinates are (x0, x1) with x0 in R^k and x1 in R^c; the shape operator
    is -(1/r) times the projection onto the sphere-factor tangent directions.
    """

    regions = (PRODUCT,)

    def __init__(self, plate: PlateSpec, k: int, codim: int, r: float) -> None:
        if r <= 0.0:
            raise PlateSpecError(f"product pancake needs r > 0, got {r}")
        super().__init__(plate, r, k + codim)
        self.k = k
        self.codim = codim

    def split(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        return x[: self.k], x[self.k :]

    def closest_plate_point(self, x: np.ndarray) -> np.ndarray:
        flat, _ = self.split(x)
        return np.concatenate([flat, np.zeros(self.codim)])

    def locate(self, x: np.ndarray) -> SurfaceRegion:
        return PRODUCT

    def region_normal(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        _, ring = self.split(x)
        return np.concatenate([np.zeros(self.k), ring / np.linalg.norm(ring)])

    def region_shape_operator(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        _, ring = self.split(x)
        dist = float(np.linalg.norm(ring))
        unit = ring / dist
        shape = np.zeros((self.dim, self.dim))
        shape[self.k :, self.k :] = -(np.eye(self.codim) - np.outer(unit, unit)) / dist
        return shape

    def region_project(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        flat, ring = self.split(x)
        dist = float(np.linalg.norm(ring))
        if dist == 0.0:
            raise ProjectionError("point on the flat factor has no unique projection")
        return np.concatenate([flat, self.r * ring / dist])

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        ring = rng.normal(size=self.codim)
        return np.concatenate([rng.normal(size=self.k), self.r * ring / np.linalg.norm(ring)])

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from app.geometry.base import (
    PancakeSurface,
    PlateSpecError,
    RegionKind,
    SurfaceRegion,
)
from app.geometry.boundaries import BoundaryPoint, PlateBoundary, SinaiHoleBoundary
from app.models import PlateSpec


logger = logging.getLogger(__name__)

SHEET_PLUS = SurfaceRegion(RegionKind.FLAT_SHEET_PLUS, "sheet+")
SHEET_MINUS = SurfaceRegion(RegionKind.FLAT_SHEET_MINUS, "sheet-")
TUBE = SurfaceRegion(RegionKind.EDGE_TUBE, "tube")


class PlanarPancake(PancakeSurface):
    """Pancake around a k-dimensional plate lying in {z = 0} of R^(k+1).

    Two flat sheets at z = +-r over the plate, joined over the edge by a
    half-tube of meridian radius r. Points are (p, z) with p in the plate's
    plane.
    """

    regions = (SHEET_PLUS, SHEET_MINUS, TUBE)

    def __init__(self, plate: PlateSpec, boundary: PlateBoundary, r: float) -> None:
        super().__init__(plate, r, boundary.dim + 1)
        bound = boundary.max_radius()
        if not 0.0 < self.r < bound:
            raise PlateSpecError(
                f"{plate.family.value} pancake needs 0 < r < {bound:.6g} (edge curvature bound), got r={r}"
            )
        self.boundary = boundary
        self._e_z = np.eye(self.dim)[-1]

    def _edge(self, x: np.ndarray) -> BoundaryPoint:
        return self.boundary.closest(x[:-1])

    def _lift(self, v: np.ndarray) -> np.ndarray:
        return np.append(v, 0.0)

    def closest_plate_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        edge = self._edge(x)
        if edge.depth >= 0.0:
            return self._lift(x[:-1])
        return self._lift(edge.point)

    def locate(self, x: np.ndarray) -> SurfaceRegion:
        x = np.asarray(x, dtype=float)
        if self._edge(x).depth > 0.0:
            return SHEET_PLUS if x[-1] >= 0.0 else SHEET_MINUS
        return TUBE

    def region_normal(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        if region == SHEET_PLUS:
            return self._e_z.copy()
        if region == SHEET_MINUS:
            return -self._e_z
        offset = x - self._lift(self._edge(x).point)
        return offset / np.linalg.norm(offset)

    def region_shape_operator(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        if region != TUBE:
            return np.zeros((self.dim, self.dim))
        edge = self._edge(x)
        offset = x - self._lift(edge.point)
        dist = float(np.linalg.norm(offset))
        nu = offset / dist
        delta = -edge.depth
        # derivative of the closest-point map along the edge directions
        closest_jac = np.zeros((self.dim, self.dim))
        for tangent, kappa in zip(edge.tangents, edge.curvatures):
            lifted = self._lift(tangent)
            closest_jac += np.outer(lifted, lifted) / (1.0 + delta * kappa)
        proj = np.eye(self.dim) - np.outer(nu, nu)
        return -(proj @ (np.eye(self.dim) - closest_jac) @ proj) / dist

    def region_project(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if region == SHEET_PLUS:
            return np.append(x[:-1], self.r)
        if region == SHEET_MINUS:
            return np.append(x[:-1], -self.r)
        base = self._lift(self._edge(x).point)
        offset = x - base
        return base + self.r * offset / np.linalg.norm(offset)

    def seam_function(self, region: SurfaceRegion, x: np.ndarray) -> float:
        depth = self._edge(np.asarray(x, dtype=float)).depth
        return -depth if region == TUBE else depth

    def chord_min_seam(self, region: SurfaceRegion, x0: np.ndarray, x1: np.ndarray) -> Tuple[float, float]:
        if region == TUBE:
            return 1.0, self.seam_function(region, x1)
        return self.boundary.chord_min_depth(np.asarray(x0)[:-1], np.asarray(x1)[:-1])

    def seam_gradient(self, region: SurfaceRegion, x: np.ndarray) -> np.ndarray:
        inward = self._lift(self._edge(np.asarray(x, dtype=float)).inward)
        return -inward if region == TUBE else inward

    def neighbor(self, region: SurfaceRegion, x: np.ndarray) -> SurfaceRegion:
        if region == TUBE:
            return SHEET_PLUS if x[-1] >= 0.0 else SHEET_MINUS
        return TUBE

    def meridian_direction(self, x: np.ndarray) -> np.ndarray:
        """Unit tangent of the meridian through x, oriented from the + sheet to the - sheet."""
        x = np.asarray(x, dtype=float)
        edge = self._edge(x)
        outward = -self._lift(edge.inward)
        offset = x - self._lift(edge.point)
        nu = offset / np.linalg.norm(offset)
        return float(np.dot(nu, self._e_z)) * outward - float(np.dot(nu, outward)) * self._e_z

    def edge_frame(self, p: np.ndarray) -> BoundaryPoint:
        return self.boundary.closest(np.asarray(p, dtype=float))

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        edge = self.boundary.sample(rng)
        if rng.uniform() < 0.5:
            phi = rng.uniform(0.0, np.pi)
            outward = -edge.inward
            return np.append(edge.point + self.r * np.sin(phi) * outward, self.r * np.cos(phi))
        depth = rng.uniform(0.1, 0.9) * min(self.r, 0.5 * self.boundary.max_radius())
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        return np.append(edge.point + depth * edge.inward, side * self.r)


class SinaiPancake(PlanarPancake):
    """Planar pancake on the flat torus; the first two coordinates wrap modulo L."""

    def __init__(self, plate: PlateSpec, r: float) -> None:
        boundary = SinaiHoleBoundary(plate.L, plate.rho)
        super().__init__(plate, boundary, r)
        self.L = boundary.L

    def wrap(self, x: np.ndarray) -> np.ndarray:
        wrapped = np.array(x, dtype=float)
        wrapped[:2] = np.mod(wrapped[:2], self.L)
        return wrapped

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import null_space
from scipy.optimize import brentq

from app.geometry.base import GeometryError


logger = logging.getLogger(__name__)

# samples per chord when a boundary has no closed-form chord minimum
CHORD_SAMPLES = 16


@dataclass(frozen=True)
class BoundaryPoint:
    """Closest point data of a planar point p with respect to the plate edge.

    depth is the signed planar distance (positive inside the plate) and
    p = point + depth * inward. tangents are orthonormal rows spanning the
    edge directions, curvatures the matching principal curvatures (positive
    when the edge bends towards the plate).
    """

    depth: float
    point: np.ndarray
    inward: np.ndarray
    tangents: np.ndarray
    curvatures: np.ndarray


def _planar_tangent(inward: np.ndarray) -> np.ndarray:
    return np.array([[-inward[1], inward[0]]])


class PlateBoundary(ABC):
    dim: int = 2

    @abstractmethod
    def closest(self, p: np.ndarray) -> BoundaryPoint:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> BoundaryPoint:
        ...

    def max_radius(self) -> float:
        return math.inf

    def chord_min_depth(self, p0: np.ndarray, p1: np.ndarray) -> Tuple[float, float]:
        """(fraction, depth) of the deepest excursion outside the plate along the chord p0 -> p1.

        Sampled; boundaries with a closed form override it.
        """
        fractions = np.linspace(0.0, 1.0, CHORD_SAMPLES + 1)[1:]
        p0 = np.asarray(p0, dtype=float)
        step = np.asarray(p1, dtype=float) - p0
        depths = [self.closest(p0 + s * step).depth for s in fractions]
        i = int(np.argmin(depths))
        return float(fractions[i]), float(depths[i])


class HalfSpaceBoundary(PlateBoundary):
    """Plate {p : p_1 <= 0} in R^k; the edge is the hyperplane p_1 = 0."""

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise GeometryError("half-space plate needs dimension >= 1")
        self.dim = dim
        self._inward = -np.eye(dim)[0]
        self._tangents = np.eye(dim)[1:]
        self._curvatures = np.zeros(dim - 1)

    def closest(self, p: np.ndarray) -> BoundaryPoint:
        point = np.array(p, dtype=float)
        depth = -point[0]
        point[0] = 0.0
        return BoundaryPoint(depth, point, self._inward, self._tangents, self._curvatures)

    def chord_min_depth(self, p0: np.ndarray, p1: np.ndarray) -> Tuple[float, float]:
        # depth is linear along a chord
        return 1.0, self.closest(p1).depth

    def sample(self, rng: np.random.Generator) -> BoundaryPoint:
        p = np.concatenate([[0.0], rng.uniform(-1.0, 1.0, self.dim - 1)])
        return self.closest(p)


class BallBoundary(PlateBoundary):
    """Plate {|p| <= R} in R^k (a disc when k = 2)."""

    def __init__(self, R: float, dim: int = 2) -> None:
        self.R = float(R)
        self.dim = dim
        self._curvatures = np.full(dim - 1, 1.0 / self.R)

    def max_radius(self) -> float:
        return self.R

    def closest(self, p: np.ndarray) -> BoundaryPoint:
        p = np.asarray(p, dtype=float)
        dist = float(np.linalg.norm(p))
        outward = p / dist if dist > 0.0 else np.eye(self.dim)[0]
        inward = -outward
        depth = self.R - dist
        if self.dim == 2:
            tangents = _planar_tangent(inward)
        else:
            tangents = null_space(outward[None, :]).T
        return BoundaryPoint(depth, p - depth * inward, inward, tangents, self._curvatures)

    def chord_min_depth(self, p0: np.ndarray, p1: np.ndarray) -> Tuple[float, float]:
        # R - |p| is concave along a chord, so the minimum sits at an endpoint
        d0, d1 = self.closest(p0).depth, self.closest(p1).depth
        return (0.0, d0) if d0 < d1 else (1.0, d1)

    def sample(self, rng: np.random.Generator) -> BoundaryPoint:
        direction = rng.normal(size=self.dim)
        return self.closest(self.R * direction / np.linalg.norm(direction))


class SinaiHoleBoundary(PlateBoundary):
    """Torus cell [0, L)^2 minus a disc of radius rho at the cell centre."""

    def __init__(self, L: float, rho: float) -> None:
        self.L = float(L)
        self.rho = float(rho)
        self.center = np.array([self.L / 2, self.L / 2])
        self._curvatures = np.array([-1.0 / self.rho])

    def max_radius(self) -> float:
        return self.rho

    def offset_from_center(self, p: np.ndarray) -> np.ndarray:
        q = np.asarray(p, dtype=float) - self.center
        return (q + self.L / 2) % self.L - self.L / 2

    def closest(self, p: np.ndarray) -> BoundaryPoint:
        p = np.asarray(p, dtype=float)
        q = self.offset_from_center(p)
        dist = float(np.linalg.norm(q))
        if dist == 0.0:
            raise GeometryError("closest edge point is ambiguous at the hole centre")
        inward = q / dist
        depth = dist - self.rho
        return BoundaryPoint(depth, p - depth * inward, inward, _planar_tangent(inward), self._curvatures)

    def chord_min_depth(self, p0: np.ndarray, p1: np.ndarray) -> Tuple[float, float]:
        """Closest approach of the chord to the hole centre; chords shorter than L/2."""
        q0 = self.offset_from_center(p0)
        step = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
        length2 = float(np.dot(step, step))
        s = 1.0 if length2 == 0.0 else min(max(-float(np.dot(q0, step)) / length2, 0.0), 1.0)
        return s, float(np.linalg.norm(q0 + s * step)) - self.rho

    def sample(self, rng: np.random.Generator) -> BoundaryPoint:
        angle = rng.uniform(0.0, 2 * math.pi)
        return self.closest(self.center + self.rho * np.array([math.cos(angle), math.sin(angle)]))


class SplineBoundary(PlateBoundary):
    """Closed counter-clockwise edge through sampled points, periodic cubic spline.

    The supplied curvatures bound the admissible radius; the tube geometry
    itself uses the spline's own Frenet data.
    """

    DENSITY = 32

    def __init__(self, points: Sequence[Sequence[float]], curvatures: Sequence[float]) -> None:
        pts = np.asarray(points, dtype=float)
        closed = np.vstack([pts, pts[:1]])
        chords = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(chords == 0.0):
            raise GeometryError("boundary samples must be distinct")
        knots = np.concatenate([[0.0], np.cumsum(chords)])
        self.length = float(knots[-1])
        self.spline = CubicSpline(knots, closed, bc_type="periodic")
        self.supplied_curvatures = np.asarray(curvatures, dtype=float)
        self._grid = np.linspace(0.0, self.length, self.DENSITY * len(pts), endpoint=False)
        self._grid_points = self.spline(self._grid)
        self._spacing = self._grid[1] - self._grid[0]
        if self._signed_area() <= 0.0:
            raise GeometryError("boundary samples must run counter-clockwise")
        kmax = float(np.max(np.abs(self.curvature_at(self._grid))))
        supplied = float(np.max(np.abs(self.supplied_curvatures)))
        if kmax > 1.5 * supplied + 1e-12:
            logger.warning("Spline curvature %.4g exceeds the supplied bound %.4g", kmax, supplied)

    def _signed_area(self) -> float:
        x, y = self._grid_points[:, 0], self._grid_points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def max_radius(self) -> float:
        kmax = float(np.max(np.abs(self.supplied_curvatures)))
        return math.inf if kmax == 0.0 else 1.0 / kmax

    def curvature_at(self, s):
        d1 = self.spline(s, 1)
        d2 = self.spline(s, 2)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    def _frame(self, s: float, p: np.ndarray) -> BoundaryPoint:
        point = self.spline(s)
        d1 = self.spline(s, 1)
        tangent = d1 / np.linalg.norm(d1)
        inward = np.array([-tangent[1], tangent[0]])
        depth = float(np.dot(p - point, inward))
        kappa = float(self.curvature_at(s))
        return BoundaryPoint(depth, point, inward, tangent[None, :], np.array([kappa]))

    def closest(self, p: np.ndarray) -> BoundaryPoint:
        p = np.asarray(p, dtype=float)
        i = int(np.argmin(np.sum((self._grid_points - p) ** 2, axis=1)))
        s0 = self._grid[i]

        def slope(s: float) -> float:
            return float(np.dot(self.spline(s) - p, self.spline(s, 1)))

        lo, hi = s0 - self._spacing, s0 + self._spacing
        if slope(lo) < 0.0 < slope(hi):
            s0 = brentq(slope, lo, hi, xtol=1e-15 * self.length, rtol=1e-15)
        return self._frame(s0 % self.length, p)

    def sample(self, rng: np.random.Generator) -> BoundaryPoint:
        s = rng.uniform(0.0, self.length)
        point = self.spline(s)
        return self._frame(s, point)

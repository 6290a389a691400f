from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq

from app.geometry import SplineBoundary
from app.models import PlateFamily, PlateSpec
from app.oracles import cbeta_sbeta
from app.rolling import CornerError
from app.skew import tangent_projector, wedge


logger = logging.getLogger(__name__)

VERTEX_TOL = 1e-9
MAX_CELLS = 100_000
MAX_MARCH = 100_000


class FlightError(RuntimeError):
    """Free flight never meets the table boundary."""


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    time: float
    normal: np.ndarray


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


class BilliardDomain(ABC):
    kind: PlateFamily
    dim: int = 2

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    @abstractmethod
    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        ...

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.asarray(b, dtype=float) - np.asarray(a, dtype=float)


class DiscDomain(BilliardDomain):
    kind = PlateFamily.DISC

    def __init__(self, R: float, dim: int = 2) -> None:
        self.R = float(R)
        self.dim = dim

    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        a = float(np.dot(u, u))
        b = float(np.dot(x, u))
        c = float(np.dot(x, x)) - self.R**2
        t = (-b + math.sqrt(max(b * b - a * c, 0.0))) / a
        if t <= 0.0:
            raise FlightError(f"ray from {x.tolist()} leaves the disc")
        point = x + t * u
        return Hit(point, t, -point / np.linalg.norm(point))


class HalfPlaneDomain(BilliardDomain):
    """Table {p : p_1 <= 0}."""

    kind = PlateFamily.HALF_PLANE

    def __init__(self, dim: int = 2) -> None:
        self.dim = dim

    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        if u[0] <= 0.0:
            raise FlightError("ray heads into the unbounded part of the half-plane")
        t = -float(x[0]) / float(u[0])
        if t <= 0.0:
            raise FlightError(f"ray from {x.tolist()} leaves the half-plane")
        point = x + t * u
        point[0] = 0.0
        return Hit(point, t, -np.eye(self.dim)[0])


class ConvexPolygonDomain(BilliardDomain):
    kind = PlateFamily.CONVEX_POLYGON

    def __init__(self, vertices: Sequence[Sequence[float]]) -> None:
        self.vertices = np.asarray(vertices, dtype=float)
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(turns <= 0.0):
            raise ValueError("polygon vertices must be convex and counter-clockwise")
        self.edges = edges
        lengths = np.linalg.norm(edges, axis=1)
        self.normals = np.column_stack([-edges[:, 1], edges[:, 0]]) / lengths[:, None]

    @property
    def center(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        best_t, best_i = math.inf, -1
        for i, (a, n) in enumerate(zip(self.vertices, self.normals)):
            closing = float(np.dot(n, u))
            if closing >= 0.0:
                continue
            t = -float(np.dot(n, x - a)) / closing
            if 0.0 < t < best_t:
                best_t, best_i = t, i
        if best_i < 0:
            raise FlightError(f"ray from {x.tolist()} meets no edge")
        point = x + best_t * u
        edge = self.edges[best_i]
        along = float(np.dot(point - self.vertices[best_i], edge)) / float(np.dot(edge, edge))
        if along < VERTEX_TOL or along > 1.0 - VERTEX_TOL:
            raise CornerError(f"flight hits polygon vertex near {point.tolist()}")
        return Hit(point, best_t, self.normals[best_i].copy())


class SmoothCurveDomain(BilliardDomain):
    """Table bounded by a closed spline; hits by marching plus bracketed root finding."""

    kind = PlateFamily.SMOOTH_PLANAR_PLATE

    def __init__(self, points, curvatures) -> None:
        self.boundary = SplineBoundary(points, curvatures)
        self._pts = np.asarray(points, dtype=float)
        self._march = 0.05 * min(self.boundary.max_radius(), self.boundary.length / len(points))

    @property
    def center(self) -> np.ndarray:
        return self._pts.mean(axis=0)

    def _depth(self, p: np.ndarray) -> float:
        return self.boundary.closest(p).depth

    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        speed = float(np.linalg.norm(u))
        dt = self._march / speed
        t_prev = 0.0
        for i in range(1, MAX_MARCH):
            t = i * dt
            if self._depth(x + t * u) < 0.0:
                t_hit = brentq(lambda s: self._depth(x + s * u), t_prev, t, xtol=1e-14)
                point = x + t_hit * u
                edge = self.boundary.closest(point)
                return Hit(edge.point, t_hit, edge.inward.copy())
            t_prev = t
        raise FlightError(f"no boundary hit within {MAX_MARCH} march steps")


class SinaiTorusDomain(BilliardDomain):
    """Flat torus of period L with a disc hole of radius rho at the cell centre."""

    kind = PlateFamily.SINAI_TORUS

    def __init__(self, L: float, rho: float) -> None:
        self.L = float(L)
        self.rho = float(rho)

    @property
    def center(self) -> np.ndarray:
        return np.array([self.L / 2, self.L / 2])

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        return (d + self.L / 2) % self.L - self.L / 2

    def flight(self, x: np.ndarray, u: np.ndarray) -> Hit:
        L = self.L
        a = float(np.dot(u, u))
        cell = np.floor(x / L)
        for _ in range(MAX_CELLS):
            c = (cell + 0.5) * L
            q = x - c
            b = float(np.dot(q, u))
            disc = b * b - a * (float(np.dot(q, q)) - self.rho**2)
            if disc > 0.0:
                t = (-b - math.sqrt(disc)) / a
                if t > 0.0:
                    point = x + t * u
                    normal = (point - c) / self.rho
                    return Hit(np.mod(point, L), t, normal)
            exits = []
            for axis in range(2):
                if u[axis] > 0.0:
                    exits.append(((cell[axis] + 1) * L - x[axis]) / u[axis])
                elif u[axis] < 0.0:
                    exits.append((cell[axis] * L - x[axis]) / u[axis])
                else:
                    exits.append(math.inf)
            axis = int(np.argmin(exits))
            cell[axis] += 1.0 if u[axis] > 0.0 else -1.0
        raise FlightError(f"no hole hit within {MAX_CELLS} cells (corridor orbit)")


def build_domain(plate: PlateSpec) -> BilliardDomain:
    family = plate.family
    k = plate.ambient_dim - 1
    if family == PlateFamily.DISC:
        return DiscDomain(plate.R, k)
    if family == PlateFamily.HALF_PLANE:
        return HalfPlaneDomain(k)
    if family == PlateFamily.CONVEX_POLYGON:
        return ConvexPolygonDomain(plate.vertices)
    if family == PlateFamily.SMOOTH_PLANAR_PLATE:
        return SmoothCurveDomain(plate.points, plate.curvatures)
    if family == PlateFamily.SINAI_TORUS:
        return SinaiTorusDomain(plate.L, plate.rho)
    raise ValueError(f"{family.value} is not a billiard table")


def flight_to_boundary(domain: BilliardDomain, x, u) -> Hit:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not np.linalg.norm(u) > 0.0:
        raise ValueError("free flight needs a nonzero velocity")
    return domain.flight(x, u)


# ---------------------------------------------------------------------------
# Collision maps
# ---------------------------------------------------------------------------


def split_at_boundary(u, spin, n) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """(u_bar, W, u_perp, P spin P) with u = u_bar + u_perp n and W = spin n."""
    u = np.asarray(u, dtype=float)
    n = np.asarray(n, dtype=float)
    proj = tangent_projector(n)
    u_perp = float(np.dot(u, n))
    return u - u_perp * n, spin @ n, u_perp, proj @ spin @ proj


def join_at_boundary(u_bar, W, u_perp, tangential, n) -> Tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=float)
    return np.asarray(u_bar) + u_perp * n, tangential + wedge(n, np.asarray(W))


def collision_full(u, S, n, r: float, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """No-slip collision of velocity u and angular velocity S at inward normal n."""
    u = np.asarray(u, dtype=float)
    S = np.asarray(S, dtype=float)
    n = np.asarray(n, dtype=float)
    if gamma == 0.0:
        # linear and angular motion decouple: specular u, reversed S n
        W = S @ n
        proj = tangent_projector(n)
        return u - 2.0 * float(np.dot(u, n)) * n, proj @ S @ proj - wedge(n, W)
    c_beta, s_beta = cbeta_sbeta(gamma)
    u_new = c_beta * u - (s_beta / gamma) * float(np.dot(u, n)) * n + s_beta * gamma * r * (S @ n)
    S_new = S + (s_beta / (gamma * r)) * wedge(n, u - r * (S @ n))
    return u_new, S_new


def collision_reduced(u_bar, W, u_perp: float, theta: float):
    c, s = math.cos(theta), math.sin(theta)
    u_bar = np.asarray(u_bar, dtype=float)
    W = np.asarray(W, dtype=float)
    return c * u_bar + s * W, s * u_bar - c * W, -u_perp


def collide(u, spin, n, theta: float) -> Tuple[np.ndarray, np.ndarray]:
    u_bar, W, u_perp, tangential = split_at_boundary(u, spin, n)
    u_bar, W, u_perp = collision_reduced(u_bar, W, u_perp, theta)
    return join_at_boundary(u_bar, W, u_perp, tangential, n)


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BilliardState:
    x: np.ndarray
    u: np.ndarray
    spin: np.ndarray


def billiard_energy(state: BilliardState) -> float:
    return float(np.dot(state.u, state.u)) + 0.5 * float(np.sum(state.spin * state.spin))


def boundary_tangents(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.size == 2:
        return np.array([[-n[1], n[0]]])
    return null_space(n[None, :]).T


@dataclass(frozen=True)
class CollisionRecord:
    n: int
    t: float
    point: np.ndarray
    normal: np.ndarray
    u_in: np.ndarray
    spin_in: np.ndarray
    u_out: np.ndarray
    spin_out: np.ndarray
    chord_dist: float

    def W_out(self) -> np.ndarray:
        """Outgoing spin on the normal, in the boundary tangent basis."""
        return boundary_tangents(self.normal) @ (self.spin_out @ self.normal)


@dataclass
class BilliardOrbit:
    domain: BilliardDomain
    theta: float
    initial: BilliardState
    collisions: List[CollisionRecord] = field(default_factory=list)

    def hit_points(self) -> np.ndarray:
        return np.array([c.point for c in self.collisions])

    def chord_distances(self) -> np.ndarray:
        return np.array([c.chord_dist for c in self.collisions])

    @property
    def final(self) -> BilliardState:
        if not self.collisions:
            return self.initial
        last = self.collisions[-1]
        return BilliardState(last.point, last.u_out, last.spin_out)


def chord_distance(domain: BilliardDomain, x: np.ndarray, u: np.ndarray) -> float:
    """Distance from the table centre to the line through x along u."""
    offset = np.asarray(x, dtype=float) - domain.center
    direction = u / np.linalg.norm(u)
    return float(np.linalg.norm(offset - np.dot(offset, direction) * direction))


def billiard_orbit(domain: BilliardDomain, state0: BilliardState, theta: float, n_collisions: int) -> BilliardOrbit:
    """Free flight between collisions, each collision the reduced no-slip map at angle theta."""
    if n_collisions < 0:
        raise ValueError("n_collisions must be >= 0")
    orbit = BilliardOrbit(domain, theta, state0)
    x, u, spin = (np.asarray(state0.x, dtype=float), np.asarray(state0.u, dtype=float),
                  np.asarray(state0.spin, dtype=float))
    t = 0.0
    for n in range(1, n_collisions + 1):
        hit = flight_to_boundary(domain, x, u)
        t += hit.time
        u_out, spin_out = collide(u, spin, hit.normal, theta)
        orbit.collisions.append(
            CollisionRecord(
                n=n,
                t=t,
                point=hit.point,
                normal=hit.normal,
                u_in=u,
                spin_in=spin,
                u_out=u_out,
                spin_out=spin_out,
                chord_dist=chord_distance(domain, hit.point, u_out),
            )
        )
        x, u, spin = hit.point, u_out, spin_out
    return orbit


def caustic_radii(orbit: BilliardOrbit, gap: float = 1e-6, min_segments: int = 50) -> List[Tuple[float, int]]:
    """Cluster chord-to-centre distances of a disc orbit; (radius, multiplicity) per cluster."""
    if not isinstance(orbit.domain, DiscDomain):
        raise ValueError("caustic radii are defined for disc tables")
    distances = np.sort(orbit.chord_distances())
    if distances.size < min_segments:
        raise ValueError(f"need at least {min_segments} segments, orbit has {distances.size}")
    threshold = gap * orbit.domain.R
    clusters: List[List[float]] = [[float(distances[0])]]
    for d in distances[1:]:
        if d - clusters[-1][-1] > threshold:
            clusters.append([float(d)])
        else:
            clusters[-1].append(float(d))
    return [(float(np.mean(c)), len(c)) for c in clusters]

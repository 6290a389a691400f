"""Closed-form solutions and conserved quantities of the rolling system.

These are the reference values for the integrator tests and for the expected
collision map of the edge-crossing experiments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial.transform import Rotation

from app.geometry import PancakeSurface, ProductPancake
from app.rolling import RollingState
from app.skew import hat3, wedge


logger = logging.getLogger(__name__)


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Inertia parameters
# ---------------------------------------------------------------------------


def cbeta_sbeta(gamma: float) -> Tuple[float, float]:
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    denom = 1.0 + gamma**2
    return (1.0 - gamma**2) / denom, 2.0 * gamma / denom


def gamma_correspondence(gamma_b: float) -> Tuple[float, float]:
    """Billiard gamma -> (eta, gamma) of the rolling ball with the same collision angle."""
    c_beta, _ = cbeta_sbeta(gamma_b)
    eta_r = math.acos(max(-1.0, min(1.0, c_beta))) / math.pi
    if eta_r >= 1.0:
        return eta_r, math.inf
    return eta_r, eta_r / math.sqrt(1.0 - eta_r**2)


def billiard_gamma(eta_r: float) -> float:
    """Inverse of gamma_correspondence: the gamma_b with beta = pi * eta_r."""
    if not 0.0 <= eta_r < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta_r}")
    return math.tan(0.5 * math.pi * eta_r)


# ---------------------------------------------------------------------------
# Codimension two: R^k x S^1(r)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EllipseParams:
    omega: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class Codim2Solution:
    x: np.ndarray
    u0: np.ndarray
    w: np.ndarray
    ellipse: EllipseParams
    spin_flat: Optional[np.ndarray] = None


def codim2_solution(w0, u00, x0, mu: float, eta: float, r: float, t: float, spin_flat=None) -> Codim2Solution:
    """Flat-factor motion on R^k x S^1(r).

    u0' = omega w and w' = -omega u0 with omega = eta mu / r, so the flat
    component runs on x(t) = cos(wt) a + sin(wt) b + c with a = -w0/omega,
    b = u00/omega, c = x0 + w0/omega. The flat spin block is constant.
    """
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    omega = eta * mu / r
    if omega == 0.0:
        raise OracleError("omega = 0: the flat motion is a straight line")
    w0 = np.asarray(w0, dtype=float)
    u00 = np.asarray(u00, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    a = -w0 / omega
    b = u00 / omega
    c = x0 + w0 / omega
    cos_t, sin_t = math.cos(omega * t), math.sin(omega * t)
    x = cos_t * a + sin_t * b + c
    u0 = omega * (-sin_t * a + cos_t * b)
    w = cos_t * w0 - sin_t * u00
    return Codim2Solution(x, u0, w, EllipseParams(omega, a, b, c), spin_flat)


def circle_tangent(surface: ProductPancake, x: np.ndarray) -> np.ndarray:
    """Counter-clockwise unit tangent E of the S^1 factor through x."""
    _, ring = surface.split(x)
    E = np.zeros(surface.dim)
    E[surface.k :] = np.array([-ring[1], ring[0]]) / np.linalg.norm(ring)
    return E


def cylinder_data(surface: ProductPancake, state: RollingState):
    """(x0, u00, w0, mu) of a state on R^k x S^1(r), the inputs of codim2_solution."""
    if surface.codim != 2:
        raise OracleError("cylinder data needs a circle factor")
    E = circle_tangent(surface, state.x)
    k = surface.k
    mu = float(np.dot(state.u, E))
    return state.x[:k].copy(), state.u[:k].copy(), (state.spin @ E)[:k].copy(), mu


def product_spin_blocks(state: RollingState, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat-flat, flat-sphere and sphere-sphere blocks of the spin."""
    s = state.spin
    return s[:k, :k].copy(), s[:k, k:].copy(), s[k:, k:].copy()


# ---------------------------------------------------------------------------
# Codimension three: R^k x S^2(r)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereInvariant:
    I: np.ndarray


def codim3_invariant(x1, u1, s: float, eta: float, r: Optional[float] = None) -> SphereInvariant:
    """I = eta s x1 + x1 x u1, constant along rolling on R^k x S^2(r)."""
    x1 = np.asarray(x1, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    radius = float(np.linalg.norm(x1)) if r is None else r
    if abs(np.linalg.norm(x1) - radius) > 1e-9 * max(1.0, radius):
        raise OracleError(f"|x1| = {np.linalg.norm(x1):.12g} is off the sphere of radius {radius}")
    if abs(np.dot(u1, x1)) > 1e-9 * max(1.0, radius * np.linalg.norm(u1)):
        raise OracleError("u1 is not tangent to the sphere")
    return SphereInvariant(eta * s * x1 + np.cross(x1, u1))


def sphere_spin_scalar(state: RollingState, k: int) -> float:
    """s with spin_11 = s [nu]_x on the sphere factor."""
    x1 = state.x[k:]
    nu = x1 / np.linalg.norm(x1)
    block = state.spin[k:, k:]
    return 0.5 * float(np.sum(block * hat3(nu)))


def sphere_spin(x1: np.ndarray, s: float) -> np.ndarray:
    nu = np.asarray(x1, dtype=float) / np.linalg.norm(x1)
    return s * hat3(nu)


def sphere_data(surface: ProductPancake, state: RollingState) -> Tuple[np.ndarray, np.ndarray, float]:
    if surface.codim != 3:
        raise OracleError("sphere data needs an S^2 factor")
    k = surface.k
    return state.x[k:].copy(), state.u[k:].copy(), sphere_spin_scalar(state, k)


def sphere_exact(x1, u1, s: float, eta: float, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sphere-factor motion: rotation about I with angular velocity I / r^2."""
    x1 = np.asarray(x1, dtype=float)
    r2 = float(np.dot(x1, x1))
    inv = codim3_invariant(x1, u1, s, eta).I
    omega = inv / r2
    rot = Rotation.from_rotvec(omega * t)
    x_t = rot.apply(x1)
    return x_t, np.cross(omega, x_t)


# ---------------------------------------------------------------------------
# Rolling around a straight edge
# ---------------------------------------------------------------------------


def edge_roll_matrix(eta: float, sigma: int = 1, variables: str = "W", dim: int = 1) -> np.ndarray:
    """Map of one full turn around a straight edge.

    variables="w": (u0, w) rotate by sigma * pi * eta.
    variables="W": (u0, W) with W the spin applied to the plate normal,
    [[cos, sin], [sin, -cos]] of pi * eta for either sigma.
    dim > 1 returns the block matrix acting on (u0, W) in R^dim x R^dim.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if sigma not in (1, -1):
        raise ValueError(f"sigma must be +1 or -1, got {sigma}")
    c, s = math.cos(math.pi * eta), math.sin(math.pi * eta)
    if variables == "w":
        m = np.array([[c, sigma * s], [-sigma * s, c]])
    elif variables == "W":
        m = np.array([[c, s], [s, -c]])
    else:
        raise ValueError(f"variables must be 'w' or 'W', got {variables!r}")
    return np.kron(m, np.eye(dim)) if dim > 1 else m


def edge_roll_duration(r: float, mu: float) -> float:
    if mu == 0.0:
        raise OracleError("mu = 0: the ball never completes the turn")
    return math.pi * r / abs(mu)


# ---------------------------------------------------------------------------
# Semi-infinite line
# ---------------------------------------------------------------------------


def semi_infinite_max_displacement(u0_0: float, s_0: float, omega: float) -> float:
    """Furthest point reached along the line by a ball leaving the cap equator."""
    if omega == 0.0:
        raise OracleError("omega = 0: displacement is unbounded")
    return (math.hypot(u0_0, s_0) - s_0) / abs(omega)


def semi_infinite_start_state(r: float, u0_0: float, s_0: float, mu: float) -> RollingState:
    """State on the cap equator with axial speed u0_0 and circle speed mu > 0.

    The spin is -s_0 E ^ e1, so that e1 . (spin E) = -s_0.
    """
    if mu <= 0.0:
        raise OracleError("the start convention needs mu > 0")
    if u0_0 <= 0.0:
        raise OracleError("the ball must head into the cylinder (u0_0 > 0)")
    e1 = np.array([1.0, 0.0, 0.0])
    E = np.array([0.0, 0.0, 1.0])
    x = np.array([0.0, r, 0.0])
    u = np.array([u0_0, 0.0, mu])
    return RollingState(x, u, -s_0 * wedge(E, e1))


# ---------------------------------------------------------------------------
# Independent geodesic reference
# ---------------------------------------------------------------------------


def geodesic_reference(surface: PancakeSurface, x0, u0, T: float, rtol: float = 1e-12, atol: float = 1e-13):
    """Geodesic x'' = <Sh x', x'> nu on one smooth region, integrated with DOP853.

    Returns the scipy solution with dense output over [0, T].
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    region = surface.region_for(x0, u0)
    m = surface.dim

    def geodesic(_t, y):
        x, u = y[:m], y[m:]
        nu = surface.region_normal(region, x)
        shape_u = surface.region_shape_operator(region, x) @ u
        return np.concatenate([u, float(np.dot(shape_u, u)) * nu])

    sol = solve_ivp(geodesic, (0.0, T), np.concatenate([x0, u0]), method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise OracleError(f"geodesic reference failed: {sol.message}")
    return sol

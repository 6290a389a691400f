from __future__ import annotations

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PlateFamily(str, Enum):
    HALF_PLANE = "HalfPlane"
    DISC = "Disc"
    SINAI_TORUS = "SinaiTorus"
    SEMI_INFINITE_LINE = "SemiInfiniteLine"
    SPHERE_FACTOR = "SphereFactor"
    CYLINDER_FACTOR = "CylinderFactor"
    SMOOTH_PLANAR_PLATE = "SmoothPlanarPlate"
    # billiard tables only; a pancake around a polygon has corners
    CONVEX_POLYGON = "ConvexPolygon"


PLANAR_FAMILIES = {
    PlateFamily.HALF_PLANE,
    PlateFamily.DISC,
    PlateFamily.SINAI_TORUS,
    PlateFamily.SMOOTH_PLANAR_PLATE,
}


class PlateSpec(BaseModel):
    """A flat plate P (or billiard table) and the ambient dimension m."""

    model_config = ConfigDict(extra="forbid")

    family: PlateFamily
    ambient_dim: int = Field(default=3, ge=1)
    R: Optional[float] = Field(default=None, gt=0)
    L: Optional[float] = Field(default=None, gt=0)
    rho: Optional[float] = Field(default=None, gt=0)
    k: Optional[int] = Field(default=None, ge=0)
    r: Optional[float] = Field(default=None, gt=0)
    points: Optional[List[List[float]]] = None
    curvatures: Optional[List[float]] = None
    vertices: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _check_family_params(self) -> "PlateSpec":
        family = self.family
        if family == PlateFamily.DISC and self.R is None:
            raise ValueError("Disc plate requires R")
        if family == PlateFamily.SINAI_TORUS:
            if self.L is None or self.rho is None:
                raise ValueError("SinaiTorus plate requires L and rho")
            if not self.rho < self.L / 2:
                raise ValueError(f"SinaiTorus requires rho < L/2, got rho={self.rho}, L={self.L}")
            if self.ambient_dim != 3:
                raise ValueError("SinaiTorus plate lives in ambient_dim 3")
        if family in (PlateFamily.SMOOTH_PLANAR_PLATE, PlateFamily.SEMI_INFINITE_LINE) and self.ambient_dim != 3:
            raise ValueError(f"{family.value} plate lives in ambient_dim 3")
        if family == PlateFamily.SMOOTH_PLANAR_PLATE:
            if not self.points or not self.curvatures:
                raise ValueError("SmoothPlanarPlate requires boundary points and curvatures")
            if len(self.points) != len(self.curvatures):
                raise ValueError("SmoothPlanarPlate needs one curvature per boundary point")
            if len(self.points) < 4:
                raise ValueError("SmoothPlanarPlate needs at least 4 boundary samples")
            if any(len(p) != 2 for p in self.points):
                raise ValueError("SmoothPlanarPlate boundary points must be 2-d")
            if not all(math.isfinite(c) for c in self.curvatures):
                raise ValueError("SmoothPlanarPlate curvatures must be finite")
        if family == PlateFamily.CONVEX_POLYGON:
            if not self.vertices or len(self.vertices) < 3:
                raise ValueError("ConvexPolygon requires at least 3 vertices")
        if family in (PlateFamily.SPHERE_FACTOR, PlateFamily.CYLINDER_FACTOR):
            codim = 3 if family == PlateFamily.SPHERE_FACTOR else 2
            k = self.ambient_dim - codim if self.k is None else self.k
            if k < 0 or k + codim != self.ambient_dim:
                raise ValueError(
                    f"{family.value} needs ambient_dim = k + {codim}, got k={self.k}, ambient_dim={self.ambient_dim}"
                )
        if family in (PlateFamily.HALF_PLANE, PlateFamily.DISC) and self.ambient_dim < 2:
            raise ValueError(f"{family.value} plate needs ambient_dim >= 2")
        return self

    @property
    def plate_dim(self) -> int:
        if self.family in (PlateFamily.SPHERE_FACTOR, PlateFamily.CYLINDER_FACTOR):
            codim = 3 if self.family == PlateFamily.SPHERE_FACTOR else 2
            return self.ambient_dim - codim
        if self.family == PlateFamily.SEMI_INFINITE_LINE:
            return 1
        return self.ambient_dim - 1

    def max_radius(self) -> float:
        """Supremum of admissible pancake radii."""
        if self.family == PlateFamily.DISC:
            return float(self.R)
        if self.family == PlateFamily.SINAI_TORUS:
            return float(self.rho)
        if self.family == PlateFamily.SMOOTH_PLANAR_PLATE:
            kmax = max(abs(c) for c in self.curvatures)
            return math.inf if kmax == 0 else 1.0 / kmax
        return math.inf


class InitialState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: List[float]
    u: List[float]
    spin: Optional[List[List[float]]] = None


class ScenarioKind(str, Enum):
    ROLL_TRAJECTORY = "RollTrajectory"
    BILLIARD_ORBIT = "BilliardOrbit"
    EDGE_CONVERGENCE = "EdgeConvergence"
    ORACLE_CHECK = "OracleCheck"
    FIGURE_SINAI = "FigureSinai"
    FIGURE_DISC_CAUSTICS = "FigureDiscCaustics"


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioKind
    plate: PlateSpec
    eta: Optional[float] = Field(default=None, ge=0, lt=1)
    gamma_b: Optional[float] = Field(default=None, ge=0)
    etas: Optional[List[float]] = None
    r: Optional[float] = Field(default=None, gt=0)
    radii: Optional[List[float]] = None
    initial: Optional[InitialState] = None
    T: float = Field(default=10.0, gt=0)
    h: float = Field(default=1e-3, gt=0)
    h_flat: Optional[float] = Field(default=None, gt=0)
    steps_per_turn: int = Field(default=1000, ge=4)
    n_collisions: int = Field(default=100, ge=1)
    n_samples: int = Field(default=10, ge=1)
    seed: int = 0
    output: str = "run"

    @model_validator(mode="after")
    def _check_inertia(self) -> "ScenarioConfig":
        if (self.eta is None) == (self.gamma_b is None):
            raise ValueError("exactly one of eta / gamma_b must be given")
        if self.etas is not None and any(not 0 <= e < 1 for e in self.etas):
            raise ValueError("etas must lie in [0, 1)")
        if self.radii is not None and any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        return self


class EdgeExperiment(BaseModel):
    """Incoming billiard data at a boundary point plus the radii to sweep.

    Vectors are plate coordinates; `point` is snapped to the plate edge.
    """

    model_config = ConfigDict(extra="forbid")

    plate: PlateSpec
    point: List[float]
    u_bar: List[float]
    u_perp: float = Field(lt=0)
    W: List[float]
    spin_tangential: Optional[List[List[float]]] = None
    eta: float = Field(ge=0, lt=1)
    radii: List[float]
    steps_per_turn: int = Field(default=1000, ge=4)
    entry_side: int = 1

    @field_validator("radii")
    @classmethod
    def _sort_radii(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("radii must not be empty")
        if any(r <= 0 for r in value):
            raise ValueError("radii must be positive")
        return sorted(value, reverse=True)

    @field_validator("entry_side")
    @classmethod
    def _check_side(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("entry_side must be +1 or -1")
        return value

    @model_validator(mode="after")
    def _check_admissible(self) -> "EdgeExperiment":
        if self.plate.family not in PLANAR_FAMILIES:
            raise ValueError(f"edge crossings need a planar plate, got {self.plate.family.value}")
        bound = self.plate.max_radius()
        too_large = [r for r in self.radii if r >= bound]
        if too_large:
            raise ValueError(f"radii {too_large} are not below the admissible bound {bound}")
        return self


class ConvergenceRow(BaseModel):
    r: float
    error: Optional[float] = None
    traversal_time: Optional[float] = None
    exit_side: str = "none"
    tau_duration: Optional[float] = None
    mu_drift: Optional[float] = None
    # error with the outgoing split taken at the exit point instead of the entry point
    exit_frame_error: Optional[float] = None
    # distance along the plate between entry and exit points
    exit_shift: Optional[float] = None
    non_exit: bool = False


class ConvergenceReport(BaseModel):
    eta: float
    plate: PlateSpec
    rows: List[ConvergenceRow] = Field(default_factory=list)
    fitted_rate: Optional[float] = None
    expected_tau: Optional[float] = None
    incoming_speed: float = Field(default=0.0, ge=0)
    warnings: List[str] = Field(default_factory=list)

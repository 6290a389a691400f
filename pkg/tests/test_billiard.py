"""Tests for free flight, the no-slip collision maps and billiard orbits."""

import math

import numpy as np
import pytest

from app.billiard import (
    BilliardState,
    ConvexPolygonDomain,
    DiscDomain,
    FlightError,
    HalfPlaneDomain,
    SinaiTorusDomain,
    SmoothCurveDomain,
    billiard_energy,
    billiard_orbit,
    build_domain,
    caustic_radii,
    collide,
    collision_full,
    collision_reduced,
    flight_to_boundary,
    split_at_boundary,
)
from app.models import PlateSpec
from app.oracles import cbeta_sbeta, gamma_correspondence
from app.rolling import CornerError
from app.skew import wedge


def _skew(rng, k):
    a = rng.normal(size=(k, k))
    return a - a.T


def _unit(rng, k):
    v = rng.normal(size=k)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Free flight
# ---------------------------------------------------------------------------


class TestFlight:
    def test_disc_from_centre(self):
        hit = flight_to_boundary(DiscDomain(1.0), np.zeros(2), np.array([1.0, 0.0]))
        np.testing.assert_allclose(hit.point, [1.0, 0.0])
        assert hit.time == pytest.approx(1.0)
        np.testing.assert_allclose(hit.normal, [-1.0, 0.0])

    def test_disc_chord(self):
        angle = math.radians(150.0)
        u = np.array([math.cos(angle), math.sin(angle)])
        hit = flight_to_boundary(DiscDomain(1.0), np.array([1.0, 0.0]), u)
        # the chord leaves (1, 0) at 150 degrees and lands at polar angle 120 degrees
        np.testing.assert_allclose(hit.point, [math.cos(math.radians(120)), math.sin(math.radians(120))], atol=1e-14)

    def test_zero_velocity(self):
        with pytest.raises(ValueError):
            flight_to_boundary(DiscDomain(1.0), np.zeros(2), np.zeros(2))

    def test_half_plane(self):
        domain = HalfPlaneDomain()
        hit = flight_to_boundary(domain, np.array([-1.0, 0.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(hit.point, [0.0, 1.0])
        with pytest.raises(FlightError):
            flight_to_boundary(domain, np.array([-1.0, 0.0]), np.array([-1.0, 0.0]))

    def test_polygon_edge(self):
        square = ConvexPolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])
        hit = flight_to_boundary(square, np.array([0.5, 0.5]), np.array([1.0, 0.2]))
        np.testing.assert_allclose(hit.point, [1.0, 0.6])
        np.testing.assert_allclose(hit.normal, [-1.0, 0.0])

    def test_polygon_vertex(self):
        square = ConvexPolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])
        with pytest.raises(CornerError):
            flight_to_boundary(square, np.array([0.5, 0.5]), np.array([1.0, 1.0]))

    def test_polygon_must_be_ccw(self):
        with pytest.raises(ValueError):
            ConvexPolygonDomain([[0, 0], [0, 1], [1, 1], [1, 0]])

    def test_smooth_curve_matches_disc(self):
        angles = np.linspace(0.0, 2 * math.pi, 128, endpoint=False)
        points = np.column_stack([np.cos(angles), np.sin(angles)])
        domain = SmoothCurveDomain(points, [1.0] * 128)
        u = np.array([math.cos(0.4), math.sin(0.4)])
        hit = flight_to_boundary(domain, np.array([0.2, -0.1]), u)
        exact = flight_to_boundary(DiscDomain(1.0), np.array([0.2, -0.1]), u)
        np.testing.assert_allclose(hit.point, exact.point, atol=1e-5)
        np.testing.assert_allclose(hit.normal, exact.normal, atol=1e-4)

    def test_sinai_hits_hole(self):
        domain = SinaiTorusDomain(1.0, 0.25)
        hit = flight_to_boundary(domain, np.array([0.1, 0.5]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(hit.point, [0.25, 0.5], atol=1e-14)
        np.testing.assert_allclose(hit.normal, [-1.0, 0.0], atol=1e-14)

    def test_sinai_wraps_around(self):
        domain = SinaiTorusDomain(1.0, 0.25)
        hit = flight_to_boundary(domain, np.array([0.9, 0.5]), np.array([1.0, 0.0]))
        assert hit.time == pytest.approx(0.35)
        np.testing.assert_allclose(hit.point, [0.25, 0.5], atol=1e-14)

    def test_sinai_corridor(self):
        with pytest.raises(FlightError):
            flight_to_boundary(SinaiTorusDomain(1.0, 0.25), np.array([0.1, 0.05]), np.array([1.0, 0.0]))

    def test_build_domain(self):
        assert isinstance(build_domain(PlateSpec(family="Disc", R=2.0)), DiscDomain)
        assert isinstance(build_domain(PlateSpec(family="SinaiTorus", L=1.0, rho=0.2)), SinaiTorusDomain)
        with pytest.raises(ValueError):
            build_domain(PlateSpec(family="SphereFactor", ambient_dim=3))


# ---------------------------------------------------------------------------
# Collision maps
# ---------------------------------------------------------------------------


class TestCollisionReduced:
    def test_specular(self):
        u_bar, W, u_perp = collision_reduced([0.3, 0.0], [0.0, 0.7], -0.5, 0.0)
        np.testing.assert_allclose(u_bar, [0.3, 0.0])
        np.testing.assert_allclose(W, [0.0, -0.7])
        assert u_perp == 0.5

    def test_quarter_turn_exchanges(self):
        u_bar, W, _ = collision_reduced([1.0, 0.0], [0.0, 2.0], -0.5, 0.5 * math.pi)
        np.testing.assert_allclose(u_bar, [0.0, 2.0], atol=1e-15)
        np.testing.assert_allclose(W, [1.0, 0.0], atol=1e-15)

    def test_involution(self):
        rng = np.random.default_rng(1)
        u_bar, W = rng.normal(size=(2, 3))
        once = collision_reduced(u_bar, W, -0.4, 1.1)
        twice = collision_reduced(*once, 1.1)
        np.testing.assert_allclose(twice[0], u_bar, atol=1e-14)
        np.testing.assert_allclose(twice[1], W, atol=1e-14)
        assert twice[2] == -0.4


class TestCollisionFull:
    @pytest.fixture(autouse=True)
    def rng(self):
        self.rng = np.random.default_rng(42)

    @pytest.mark.parametrize("k", [2, 3])
    def test_matches_reduced_map(self, k):
        for _ in range(5000):
            gamma = self.rng.uniform(0.05, 3.0)
            r = self.rng.uniform(0.1, 2.0)
            n = _unit(self.rng, k)
            u = self.rng.normal(size=k)
            S = _skew(self.rng, k)
            u_new, S_new = collision_full(u, S, n, r, gamma)
            theta = math.acos(cbeta_sbeta(gamma)[0])
            u_red, spin_red = collide(u, gamma * r * S, n, theta)
            np.testing.assert_allclose(u_new, u_red, atol=1e-12)
            np.testing.assert_allclose(gamma * r * S_new, spin_red, atol=1e-11)

    def test_no_inertia_branch(self):
        n = np.array([0.0, 1.0])
        S = 0.7 * wedge(np.array([1.0, 0.0]), n)
        u_new, S_new = collision_full(np.array([0.3, -0.4]), S, n, 1.0, 0.0)
        np.testing.assert_allclose(u_new, [0.3, 0.4])
        np.testing.assert_allclose(S_new @ n, -(S @ n))

    def test_energy_and_tangential_block_preserved(self):
        for _ in range(500):
            n = _unit(self.rng, 3)
            u = self.rng.normal(size=3)
            spin = _skew(self.rng, 3)
            u_new, spin_new = collide(u, spin, n, self.rng.uniform(0.0, math.pi))
            before = billiard_energy(BilliardState(np.zeros(3), u, spin))
            after = billiard_energy(BilliardState(np.zeros(3), u_new, spin_new))
            assert after == pytest.approx(before, rel=1e-12)
            np.testing.assert_allclose(split_at_boundary(u_new, spin_new, n)[3], split_at_boundary(u, spin, n)[3], atol=1e-13)


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------


class TestDiscOrbits:
    @pytest.fixture(autouse=True)
    def setup(self):
        self.domain = DiscDomain(1.0)
        angle = math.radians(30.0)
        self.state0 = BilliardState(
            np.array([0.2, -0.3]), np.array([math.cos(angle), math.sin(angle)]), 0.4 * wedge(np.eye(2)[0], np.eye(2)[1])
        )

    def test_energy_constant(self):
        orbit = billiard_orbit(self.domain, self.state0, 1.0, 200)
        e0 = billiard_energy(self.state0)
        for record in orbit.collisions:
            e = billiard_energy(BilliardState(record.point, record.u_out, record.spin_out))
            assert e == pytest.approx(e0, rel=1e-12)

    def test_specular_orbit_matches_classical(self):
        orbit = billiard_orbit(self.domain, self.state0, 0.0, 100)
        x, u = self.state0.x, self.state0.u
        for record in orbit.collisions:
            hit = self.domain.flight(x, u)
            np.testing.assert_allclose(record.point, hit.point, atol=1e-10)
            u = u - 2.0 * np.dot(u, hit.normal) * hit.normal
            x = hit.point
        assert len(orbit.collisions) == 100

    def test_specular_single_caustic(self):
        orbit = billiard_orbit(self.domain, self.state0, 0.0, 100)
        clusters = caustic_radii(orbit)
        assert len(clusters) == 1
        assert clusters[0][1] == 100

    def test_no_slip_two_caustics(self):
        eta, _ = gamma_correspondence(math.sqrt(0.4))
        orbit = billiard_orbit(self.domain, self.state0, math.pi * eta, 500)
        assert len(caustic_radii(orbit)) == 2

    def test_diameter_orbit(self):
        state = BilliardState(np.zeros(2), np.array([1.0, 0.0]), np.zeros((2, 2)))
        orbit = billiard_orbit(self.domain, state, 1.0, 60)
        clusters = caustic_radii(orbit)
        assert len(clusters) == 1
        assert clusters[0][0] == pytest.approx(0.0, abs=1e-12)

    def test_too_few_segments(self):
        with pytest.raises(ValueError, match="at least 50"):
            caustic_radii(billiard_orbit(self.domain, self.state0, 1.0, 10))

    def test_reversed_orbit_retraces(self):
        orbit = billiard_orbit(self.domain, self.state0, 1.0, 20)
        last = orbit.collisions[-1]
        back = billiard_orbit(self.domain, BilliardState(last.point, -last.u_in, -last.spin_in), 1.0, 19)
        np.testing.assert_allclose(back.hit_points(), orbit.hit_points()[-2::-1], atol=1e-9)
        np.testing.assert_allclose(back.final.u, -self.state0.u, atol=1e-9)
        np.testing.assert_allclose(back.final.spin, -self.state0.spin, atol=1e-9)

    def test_orbit_W_out(self):
        orbit = billiard_orbit(self.domain, self.state0, 1.0, 3)
        record = orbit.collisions[0]
        assert record.W_out().shape == (1,)

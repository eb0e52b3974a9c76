"""Unit tests for the Newtonian potential, nonlocal energy and kernel matrix."""

import math

import numpy as np
import pytest

from src.cli.config import RandomPerturbationConfig, perturbed_spec
from src.geometry.tessellation import tessellate
from src.models.errors import UnsupportedOperationError, VertexCapExceededError
from src.models.shapes import Ball, Ellipsoid, ShapeSpec
from src.potential.kernel import (
    KernelParams,
    ball_gradient_max,
    ball_nonlocal_energy,
    ball_normal_derivative,
    ball_potential,
    ball_potential_max,
    equivalent_radius,
)
from src.potential.newtonian import (
    gradient_at,
    kernel_matrix,
    kernel_row_ratio,
    nonlocal_energy,
    potential_at,
    potential_field,
    rearrangement_check,
)


@pytest.fixture(scope="module")
def sphere3():
    return tessellate(ShapeSpec(Ball(), resolution=3))


@pytest.fixture(scope="module")
def sphere4():
    return tessellate(ShapeSpec(Ball(), resolution=4))


@pytest.fixture(scope="module")
def disk():
    return tessellate(ShapeSpec(Ball(center=(0.0, 0.0)), resolution=256))


class TestKernel:
    """Test kernel constants and closed-form ball values."""

    def test_constants(self):
        """Test c_3 = 1/(4π) and c_2 = 1/(2π)."""
        assert KernelParams(3).constant == pytest.approx(1.0 / (4.0 * math.pi))
        assert KernelParams(2).constant == pytest.approx(1.0 / (2.0 * math.pi))
        assert KernelParams(3).evaluate(2.0) == pytest.approx(1.0 / (8.0 * math.pi))
        assert KernelParams(2).evaluate(1.0) == 0.0

    def test_invalid_kernel(self):
        """Test unsupported dimension and the singular point."""
        with pytest.raises(ValueError, match="n=2 and n=3"):
            KernelParams(4)
        with pytest.raises(ValueError, match="singular"):
            KernelParams(3).evaluate(0.0)

    def test_ball_potential_is_continuous(self):
        """Test that inner and outer ball potentials agree on the sphere."""
        for n in (2, 3):
            radius = 1.7
            inside = ball_potential(n, radius, radius * (1.0 - 1e-12))
            outside = ball_potential(n, radius, radius * (1.0 + 1e-12))
            assert inside == pytest.approx(outside, abs=1e-9)

    def test_unit_ball_values(self):
        """Test the unit ball oracle values in R³."""
        vol = 4.0 * math.pi / 3.0
        assert equivalent_radius(3, vol) == pytest.approx(1.0)
        assert ball_potential_max(3, vol) == pytest.approx(0.5)
        assert ball_gradient_max(3, vol) == pytest.approx(1.0 / 3.0)
        assert ball_normal_derivative(3, 1.0) == pytest.approx(-1.0 / 3.0)
        assert ball_nonlocal_energy(3, vol) == pytest.approx(8.0 * math.pi / 15.0)

    def test_unit_disk_values(self):
        """Test the unit disk oracle values in R²."""
        assert ball_potential_max(2, math.pi) == pytest.approx(0.25)
        assert ball_nonlocal_energy(2, math.pi) == pytest.approx(math.pi / 8.0)

    def test_equivalent_radius_requires_volume(self):
        """Test that nonpositive volume is rejected."""
        with pytest.raises(ValueError, match="positive"):
            equivalent_radius(3, 0.0)


class TestPotential:
    """Test potentials evaluated by boundary integrals."""

    def test_sphere_boundary_values(self, sphere4):
        """Test v = 1/3 and ∂_ν v = -1/3 on the unit sphere."""
        field = potential_field(sphere4)
        assert np.allclose(field.values, 1.0 / 3.0, rtol=1e-2)
        assert np.allclose(field.normal_derivative, -1.0 / 3.0, rtol=3e-2)

    def test_sphere_center(self, sphere3):
        """Test v(0) = 1/2 and ∇v(0) = 0."""
        assert potential_at(sphere3, np.zeros(3)) == pytest.approx(0.5, rel=2e-2)
        assert np.allclose(gradient_at(sphere3, np.zeros(3)), 0.0, atol=1e-10)

    def test_far_field(self, sphere3):
        """Test the monopole potential outside the ball."""
        x = np.array([3.0, 0.0, 0.0])
        expected = sphere3.volume / (4.0 * math.pi * 3.0)
        assert potential_at(sphere3, x) == pytest.approx(expected, rel=1e-3)
        grad = gradient_at(sphere3, x)
        assert grad[0] == pytest.approx(-expected / 3.0, rel=1e-3)

    def test_batched_points(self, sphere3):
        """Test that (P, n) inputs return one value per row."""
        points = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
        values = potential_at(sphere3, points)
        assert values.shape == (2,)
        assert values[0] > values[1]
        with pytest.raises(ValueError, match="coordinates"):
            potential_at(sphere3, np.zeros(2))

    def test_disk_potential(self, disk):
        """Test v = (1 - r²)/4 inside the unit disk."""
        assert potential_at(disk, np.zeros(2)) == pytest.approx(0.25, rel=1e-3)
        field = potential_field(disk)
        assert np.abs(field.values).max() < 1e-3
        assert np.allclose(field.normal_derivative, -0.5, rtol=1e-2)

    def test_threads_agree(self, sphere3):
        """Test that chunked threads reproduce the serial result."""
        serial = potential_field(sphere3)
        threaded = potential_field(sphere3, threads=4)
        assert np.allclose(serial.values, threaded.values, rtol=1e-12)


class TestNonlocalEnergy:
    """Test the double boundary integral."""

    def test_sphere(self, sphere4):
        """Test NL against the equal-volume ball."""
        expected = ball_nonlocal_energy(3, sphere4.volume)
        assert nonlocal_energy(sphere4) == pytest.approx(expected, rel=1e-2)

    def test_disk(self, disk):
        """Test NL = π/8 for the unit disk."""
        assert nonlocal_energy(disk) == pytest.approx(math.pi / 8.0, rel=1e-2)

    def test_rules_agree(self, sphere3):
        """Test that the centroid rule stays close to the Gauss rule."""
        gauss = nonlocal_energy(sphere3)
        centroid = nonlocal_energy(sphere3, rule="centroid")
        assert centroid == pytest.approx(gauss, rel=2e-2)

    def test_unknown_rule(self, sphere3):
        """Test that unknown quadrature rules are rejected."""
        with pytest.raises(ValueError, match="Unknown quadrature rule"):
            nonlocal_energy(sphere3, rule="simpson")

    def test_scaling(self, sphere3):
        """Test NL(tE) = t^{n+2} NL(E)."""
        base = nonlocal_energy(sphere3)
        assert nonlocal_energy(sphere3.scaled(1.5)) == pytest.approx(1.5 ** 5 * base, rel=1e-10)


class TestKernelMatrix:
    """Test the dense boundary kernel matrix."""

    def test_symmetric_and_positive(self, sphere3):
        """Test symmetry and the total ∬ c/|x - y| on the unit sphere."""
        k = kernel_matrix(sphere3)
        assert np.allclose(k, k.T)
        ones = np.ones(sphere3.n_vertices)
        assert ones @ k @ ones == pytest.approx(4.0 * math.pi, rel=2e-2)

    def test_vertex_cap(self, sphere3):
        """Test the dense assembly cap."""
        with pytest.raises(VertexCapExceededError, match="exceeds the cap"):
            kernel_matrix(sphere3, vertex_cap=100)

    def test_row_ratio(self, sphere3):
        """Test the kernel row bound on the sphere."""
        check = kernel_row_ratio(sphere3)
        assert check.ratio == pytest.approx(check.reference_ratio, rel=2e-2)
        assert check.passed
        assert check.to_dict()["passed"] is True

    def test_row_ratio_planar(self, disk):
        """Test that the row bound is refused in n=2."""
        with pytest.raises(UnsupportedOperationError):
            kernel_row_ratio(disk)


class TestRearrangement:
    """Test comparison with the equal-volume ball."""

    def test_ellipsoid_is_dominated(self):
        """Test that an ellipsoid stays below the ball bounds."""
        b = tessellate(ShapeSpec(Ellipsoid(semi_axes=(1.4, 1.0, 0.8)), resolution=3))
        check = rearrangement_check(b)
        assert check.nonlocal_energy < check.ball_nonlocal_energy
        assert check.potential_max < check.ball_potential_max
        assert check.passed

    @pytest.mark.parametrize("seed", range(20))
    def test_perturbed_balls_are_dominated(self, seed):
        """Test NL ≤ NL of the equal-volume ball on seeded perturbed balls."""
        spec = perturbed_spec(ShapeSpec(Ball(), resolution=2), RandomPerturbationConfig(), seed)
        b = tessellate(spec)
        assert nonlocal_energy(b) <= 1.01 * ball_nonlocal_energy(3, b.volume)

    def test_ball_attains_bound(self, sphere3):
        """Test that the ball meets its own bound within tolerance."""
        check = rearrangement_check(sphere3)
        assert check.potential_max == pytest.approx(check.ball_potential_max, rel=2e-2)
        assert check.passed

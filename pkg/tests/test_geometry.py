"""Unit tests for boundaries, tessellation, operators and mesh files."""

import math

import numpy as np
import pytest

from src.geometry.boundary import Boundary
from src.geometry.mesh_io import read_loop_csv, read_off, write_loop_csv, write_off
from src.geometry.metrics import (
    diameter,
    genus_estimate,
    geometric_identity_residuals,
    hausdorff_distance,
    volume,
)
from src.geometry.operators import laplace_operators, lowest_eigenvalues
from src.geometry.tessellation import (
    fourier_mode,
    icosphere,
    real_spherical_harmonic,
    tessellate,
    unit_circle,
)
from src.models.errors import (
    GeometryError,
    NonManifoldError,
    OrientationError,
    UnsupportedOperationError,
)
from src.models.shapes import Annulus, Ball, BallUnion, PerturbedBall, ShapeSpec


@pytest.fixture(scope="module")
def sphere3():
    """Unit sphere, subdivision level 3."""
    return tessellate(ShapeSpec(Ball(), resolution=3))


@pytest.fixture(scope="module")
def sphere4():
    """Unit sphere, subdivision level 4."""
    return tessellate(ShapeSpec(Ball(), resolution=4))


@pytest.fixture(scope="module")
def circle():
    """Unit circle with 256 vertices."""
    return tessellate(ShapeSpec(Ball(center=(0.0, 0.0)), resolution=256))


class TestTessellation:
    """Test tessellation of analytic shapes."""

    def test_icosphere_counts(self):
        """Test vertex and face counts per subdivision level."""
        for level in range(4):
            vertices, faces = icosphere(level)
            assert len(vertices) == 10 * 4 ** level + 2
            assert len(faces) == 20 * 4 ** level
            assert np.allclose(np.linalg.norm(vertices, axis=1), 1.0)

    def test_unit_circle_is_counterclockwise(self):
        """Test that the polygon encloses positive area."""
        vertices, edges = unit_circle(16)
        b = Boundary(vertices, edges)
        assert b.volume > 0
        assert b.n_components == 1

    def test_sphere_measures(self, sphere4):
        """Test area and volume of a fine icosphere."""
        assert sphere4.volume == pytest.approx(4.0 * math.pi / 3.0, rel=5e-3)
        assert sphere4.perimeter == pytest.approx(4.0 * math.pi, rel=5e-3)
        assert sphere4.vertex_areas.sum() == pytest.approx(sphere4.perimeter, rel=1e-10)
        assert sphere4.euler_characteristic() == 2

    def test_circle_measures(self, circle):
        """Test perimeter and area of a fine polygon."""
        assert circle.perimeter == pytest.approx(2.0 * math.pi, rel=1e-4)
        assert circle.volume == pytest.approx(math.pi, rel=1e-3)
        assert circle.euler_characteristic() == 0

    def test_annulus_has_two_components(self):
        """Test shell tessellation with an inward-facing inner sphere."""
        b = tessellate(ShapeSpec(Annulus(outer_radius=1.0, inner_radius=0.5), resolution=3))
        assert b.n_components == 2
        assert b.euler_characteristic() == 4
        assert b.volume == pytest.approx(4.0 * math.pi / 3.0 * 0.875, rel=2e-2)

        inner = np.linalg.norm(b.vertices, axis=1) < 0.75
        radial = np.einsum("ij,ij->i", b.vertex_normals, b.vertices)
        assert np.all(radial[inner] < 0)
        assert np.all(radial[~inner] > 0)

    def test_planar_annulus_round_trip(self, tmp_path):
        """Test that a planar shell survives the loop CSV format."""
        b = tessellate(ShapeSpec(Annulus(outer_radius=2.0, inner_radius=1.0, center=(0.0, 0.0)), resolution=64))
        path = write_loop_csv(b, tmp_path / "shell.csv")
        loaded = read_loop_csv(path)
        assert loaded.n_components == 2
        assert loaded.volume == pytest.approx(b.volume, rel=1e-12)

    def test_tangent_balls(self):
        """Test tangent balls in both dimensions."""
        spheres = BallUnion(balls=(Ball(), Ball(center=(2.0, 0.0, 0.0))))
        b = tessellate(ShapeSpec(spheres, resolution=2))
        assert b.n_components == 2

        disks = BallUnion(balls=(Ball(center=(0.0, 0.0)), Ball(center=(2.0, 0.0))))
        with pytest.raises(UnsupportedOperationError, match="Tangent balls"):
            tessellate(ShapeSpec(disks, resolution=32))

    def test_perturbation_too_large(self):
        """Test that a nonpositive radial graph is rejected."""
        with pytest.raises(GeometryError, match="nonpositive"):
            tessellate(ShapeSpec(PerturbedBall(amplitudes={(2, 0): 1.5}), resolution=2))

    def test_harmonic_peak_normalization(self, sphere4):
        """Test that harmonics peak at absolute value one."""
        for ell, m in [(2, 0), (2, 1), (3, -2), (4, 4)]:
            values = real_spherical_harmonic(ell, m, sphere4.vertices)
            assert np.abs(values).max() <= 1.0 + 1e-9
            assert np.abs(values).max() > 0.9
        with pytest.raises(ValueError, match="Invalid spherical harmonic"):
            real_spherical_harmonic(1, 2, sphere4.vertices)

    def test_fourier_mode(self):
        """Test cosine and sine families."""
        points = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert np.allclose(fourier_mode(2, points), [1.0, -1.0])
        assert np.allclose(fourier_mode(-1, points), [0.0, 1.0])


class TestBoundaryValidation:
    """Test rejection of malformed boundaries."""

    def test_bad_array_shape(self):
        """Test that 4-column vertices are rejected."""
        with pytest.raises(GeometryError, match="must be an"):
            Boundary(np.zeros((4, 4)), np.zeros((1, 4), dtype=int))

    def test_unreferenced_vertex(self):
        """Test that stray vertices are rejected."""
        vertices, faces = icosphere(1)
        vertices = np.vstack([vertices, [[5.0, 5.0, 5.0]]])
        with pytest.raises(GeometryError, match="not referenced") as exc:
            Boundary(vertices, faces)
        assert exc.value.vertex_ids == [len(vertices) - 1]

    def test_open_mesh(self):
        """Test that a missing face is detected."""
        vertices, faces = icosphere(1)
        with pytest.raises(NonManifoldError, match="not closed"):
            Boundary(vertices, faces[1:])

    def test_reversed_orientation(self):
        """Test that inward orientation is rejected."""
        vertices, faces = icosphere(1)
        with pytest.raises(OrientationError, match="not positive"):
            Boundary(vertices, faces[:, ::-1])

    def test_broken_polygon(self):
        """Test that edges must form closed loops."""
        vertices, edges = unit_circle(8)
        edges[7] = [7, 1]
        with pytest.raises(NonManifoldError, match="closed loops"):
            Boundary(vertices, edges)

    def test_degenerate_edge(self):
        """Test that zero-length edges are rejected."""
        vertices, edges = unit_circle(8)
        vertices[1] = vertices[0]
        with pytest.raises(GeometryError, match="degenerate face"):
            Boundary(vertices, edges)

    def test_improper_rotation(self, sphere3):
        """Test that reflections are rejected as rotations."""
        with pytest.raises(GeometryError, match="proper orthogonal"):
            sphere3.rotated(np.diag([1.0, 1.0, -1.0]))


class TestCurvature:
    """Test discrete curvature and derived transforms."""

    def test_sphere_mean_curvature(self, sphere4):
        """Test H ≈ 2 and |B|² ≈ 2 on the unit sphere."""
        curv = sphere4.curvature
        assert np.allclose(curv.mean, 2.0, rtol=2e-2)
        assert curv.b_squared.mean() == pytest.approx(2.0, rel=3e-2)
        assert curv.degenerate_vertices == []

    def test_sphere_is_nearly_umbilic(self, sphere4):
        """Test that principal curvatures agree on a sphere."""
        assert sphere4.curvature.umbilic_deviation.max() < 0.05

    def test_circle_curvature(self, circle):
        """Test H = 1 on the unit circle."""
        assert np.allclose(circle.curvature.mean, 1.0, rtol=1e-3)
        assert np.allclose(circle.curvature.umbilic_deviation, 0.0)

    def test_scaling(self, sphere3):
        """Test perimeter, volume and curvature under dilation."""
        big = sphere3.scaled(2.0)
        assert big.perimeter == pytest.approx(4.0 * sphere3.perimeter)
        assert big.volume == pytest.approx(8.0 * sphere3.volume)
        assert np.allclose(big.curvature.mean, 0.5 * sphere3.curvature.mean)

    def test_rigid_motion(self, sphere3):
        """Test that translation and rotation preserve measures."""
        angle = 0.3
        rotation = np.array([
            [math.cos(angle), -math.sin(angle), 0.0],
            [math.sin(angle), math.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ])
        moved = sphere3.translated([1.0, 2.0, 3.0]).rotated(rotation)
        assert moved.volume == pytest.approx(sphere3.volume)
        assert moved.perimeter == pytest.approx(sphere3.perimeter)
        assert np.allclose(moved.volume_centroid, rotation @ np.array([1.0, 2.0, 3.0]), atol=1e-10)

    def test_tangential_gradient(self, sphere4):
        """Test ∇_τ z = e_z - zν on the unit sphere."""
        x = sphere4.vertices
        grad = sphere4.tangential_gradient(x[:, 2])
        expected = np.array([0.0, 0.0, 1.0]) - x[:, 2:3] * x
        assert np.abs(grad - expected).max() < 2e-2

    def test_volume_gradient_sums_to_zero(self, sphere3):
        """Test that translations do not change the volume."""
        assert np.allclose(sphere3.volume_gradient.sum(axis=0), 0.0, atol=1e-12)
        assert np.einsum("ij,ij->", sphere3.volume_gradient, sphere3.vertices) == pytest.approx(
            3.0 * sphere3.volume
        )


class TestOperators:
    """Test the weak Laplace-Beltrami operator."""

    def test_stiffness_properties(self, sphere3):
        """Test symmetry and exact annihilation of constants."""
        ops = laplace_operators(sphere3)
        assert ops.symmetry_error() < 1e-12
        assert ops.constant_residual() < 1e-12

    def test_sphere_eigenvalues(self, sphere3):
        """Test ℓ(ℓ+1) eigenvalues on the unit sphere."""
        values = lowest_eigenvalues(laplace_operators(sphere3), 9)
        assert values[0] == pytest.approx(0.0, abs=1e-8)
        assert np.allclose(values[1:4], 2.0, rtol=3e-2)
        assert np.allclose(values[4:9], 6.0, rtol=3e-2)

    def test_laplacian_of_coordinates(self, sphere4):
        """Test Δ_τ x = -2x on the unit sphere."""
        ops = laplace_operators(sphere4)
        lap = ops.apply_laplacian(sphere4.vertices)
        assert np.abs(lap + 2.0 * sphere4.vertices).max() < 0.1


class TestMetrics:
    """Test global geometric measures."""

    def test_diameter(self, sphere3):
        """Test the diameter of the unit sphere."""
        assert diameter(sphere3) == pytest.approx(2.0, rel=1e-9)

    def test_hausdorff_distance(self, sphere3):
        """Test self-distance and a small shift."""
        assert hausdorff_distance(sphere3, sphere3) == 0.0
        shifted = sphere3.translated([0.05, 0.0, 0.0])
        assert 0.0 < hausdorff_distance(sphere3, shifted) <= 0.05 + 1e-12

    def test_genus_and_volume(self, sphere3):
        """Test genus zero and the checked volume."""
        assert genus_estimate(sphere3) == 0.0
        assert volume(sphere3) == sphere3.volume

    def test_identity_residuals(self, sphere4):
        """Test Δx = -Hν and Δν = -|B|²ν + ∇H on the sphere."""
        residuals = geometric_identity_residuals(sphere4)
        assert residuals.relative_position < 0.05
        assert residuals.relative_normal < 0.3
        assert set(residuals.to_dict()) == {"position", "normal", "position_scale", "normal_scale"}

    def test_identity_residuals_planar(self, circle):
        """Test that surface identities are refused for polygons."""
        with pytest.raises(UnsupportedOperationError):
            geometric_identity_residuals(circle)


class TestMeshFiles:
    """Test OFF and loop CSV files."""

    def test_off_round_trip(self, sphere3, tmp_path):
        """Test that an OFF file reproduces the mesh exactly."""
        path = write_off(sphere3, tmp_path / "sphere.off")
        loaded = read_off(path)
        assert np.array_equal(loaded.faces, sphere3.faces)
        assert np.array_equal(loaded.vertices, sphere3.vertices)
        assert loaded.name == "sphere"

    def test_off_rejects_polygons(self, circle, tmp_path):
        """Test that OFF export needs a triangle mesh."""
        with pytest.raises(GeometryError, match="n=3"):
            write_off(circle, tmp_path / "circle.off")

    def test_loop_csv_rejects_surfaces(self, sphere3, tmp_path):
        """Test that loop export needs a polygon."""
        with pytest.raises(GeometryError, match="n=2"):
            write_loop_csv(sphere3, tmp_path / "sphere.csv")

    def test_malformed_off(self, tmp_path):
        """Test missing header and non-triangular faces."""
        bad = tmp_path / "bad.off"
        bad.write_text("PLY\n")
        with pytest.raises(GeometryError, match="not an OFF file"):
            read_off(bad)

        quad = tmp_path / "quad.off"
        quad.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
        with pytest.raises(GeometryError, match="triangular"):
            read_off(quad)

    def test_short_loop(self, tmp_path):
        """Test that loops need three vertices."""
        path = tmp_path / "short.csv"
        path.write_text("loop,x,y\n0,0,0\n0,1,0\n")
        with pytest.raises(GeometryError, match="fewer than 3"):
            read_loop_csv(path)

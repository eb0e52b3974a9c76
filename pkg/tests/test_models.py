"""Unit tests for shape, report and error models."""

import math

import numpy as np
import pytest

from src.models.errors import (
    CheckFailedError,
    EigensolveError,
    FlowStallError,
    GeometryError,
    NonManifoldError,
    NumericalFailure,
)
from src.models.reports import (
    FLOW_TRACE_COLUMNS,
    EnergyReport,
    FlowRecord,
    FlowTrace,
    SpectrumReport,
    Verdict,
)
from src.models.shapes import (
    Annulus,
    Ball,
    BallUnion,
    Ellipsoid,
    PerturbedBall,
    ShapeKind,
    ShapeSpec,
    unit_ball_volume,
)


def _record(step: int, energy: float, remeshed: bool = False) -> FlowRecord:
    return FlowRecord(
        step=step,
        energy=energy,
        perimeter=energy,
        nonlocal_energy=0.0,
        lagrange_multiplier=2.0,
        residual_l2=0.1,
        residual_linf=0.1,
        volume_drift=0.0,
        min_quality=0.9,
        remeshed=remeshed,
    )


class TestShapes:
    """Test analytic shape descriptions."""

    def test_unit_ball_volumes(self):
        """Test ω_2 = π and ω_3 = 4π/3."""
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)

    def test_ball_measures(self):
        """Test ball volume and perimeter in both dimensions."""
        ball = Ball(radius=2.0)
        assert ball.kind == ShapeKind.BALL
        assert ball.dimension == 3
        assert ball.volume() == pytest.approx(32.0 * math.pi / 3.0)
        assert ball.perimeter() == pytest.approx(16.0 * math.pi)

        disk = Ball(center=(0.0, 0.0), radius=1.0)
        assert disk.dimension == 2
        assert disk.perimeter() == pytest.approx(2.0 * math.pi)

    def test_invalid_ball(self):
        """Test that nonpositive radius and bad centers raise errors."""
        with pytest.raises(ValueError, match="radius must be positive"):
            Ball(radius=0.0)
        with pytest.raises(ValueError, match="2 or 3 coordinates"):
            Ball(center=(0.0,))

    def test_ball_union_overlap(self):
        """Test that overlapping balls are rejected."""
        with pytest.raises(ValueError, match="overlap"):
            BallUnion(balls=(Ball(), Ball(center=(1.0, 0.0, 0.0))))

    def test_ball_union_tangent_pairs(self):
        """Test detection of touching balls."""
        union = BallUnion(balls=(
            Ball(),
            Ball(center=(2.0, 0.0, 0.0)),
            Ball(center=(10.0, 0.0, 0.0)),
        ))
        assert union.tangent_pairs() == [(0, 1)]
        assert union.volume() == pytest.approx(4.0 * math.pi)

    def test_annulus_radii(self):
        """Test annulus radius ordering and measures."""
        shell = Annulus(outer_radius=2.0, inner_radius=1.0)
        assert shell.volume() == pytest.approx(4.0 * math.pi / 3.0 * 7.0)
        assert shell.perimeter() == pytest.approx(4.0 * math.pi * 5.0)
        with pytest.raises(ValueError, match="inner < outer"):
            Annulus(outer_radius=1.0, inner_radius=1.0)

    def test_perturbed_ball_keys(self):
        """Test that string harmonic keys are normalized to tuples."""
        shape = PerturbedBall(amplitudes={"2,0": 0.1, (3, -1): 0.05})
        assert shape.amplitudes == {(2, 0): 0.1, (3, -1): 0.05}
        assert shape.to_dict()["amplitudes"] == {"2,0": 0.1, "3,-1": 0.05}

        planar = PerturbedBall(amplitudes={"3": 0.2}, center=(0.0, 0.0))
        assert planar.amplitudes == {3: 0.2}

    def test_perturbed_ball_invalid_index(self):
        """Test that |m| > ℓ raises an error."""
        with pytest.raises(ValueError, match="Invalid spherical harmonic"):
            PerturbedBall(amplitudes={(1, 2): 0.1})

    def test_ellipsoid_axes(self):
        """Test that the semi-axis count must match the dimension."""
        assert Ellipsoid(semi_axes=(2.0, 1.0, 1.0)).volume() == pytest.approx(8.0 * math.pi / 3.0)
        with pytest.raises(ValueError, match="one semi-axis per coordinate"):
            Ellipsoid(semi_axes=(1.0, 1.0))

    def test_shape_spec_resolution(self):
        """Test resolution limits per dimension."""
        assert ShapeSpec(Ball(), resolution=2).dimension == 3
        with pytest.raises(ValueError, match="at least 8"):
            ShapeSpec(Ball(center=(0.0, 0.0)), resolution=4)
        with pytest.raises(ValueError, match="desk-scale"):
            ShapeSpec(Ball(), resolution=7)
        with pytest.raises(ValueError, match="nonnegative"):
            ShapeSpec(Ball(), resolution=-1)


class TestEnergyReport:
    """Test derived quantities of energy reports."""

    @pytest.fixture
    def unit_ball_report(self):
        """Exact values of the unit ball at γ = 1."""
        p = 4.0 * math.pi
        nl = 8.0 * math.pi / 15.0
        return EnergyReport(
            gamma=1.0,
            dimension=3,
            perimeter=p,
            nonlocal_energy=nl,
            volume=4.0 * math.pi / 3.0,
            lagrange_multiplier=2.0 + 2.0 / 3.0,
            residual=np.zeros(4),
            residual_l2=0.0,
            residual_linf=0.0,
            mean_potential=1.0 / 3.0,
        )

    def test_energy(self, unit_ball_report):
        """Test J = P + γ·NL."""
        assert unit_ball_report.energy == pytest.approx(4.0 * math.pi + 8.0 * math.pi / 15.0)

    def test_identity_residual_vanishes_on_ball(self, unit_ball_report):
        """Test 3λ|E| = 2P + 5γNL for the exact ball values."""
        assert unit_ball_report.identity_residual == pytest.approx(0.0, abs=1e-12)

    def test_lambda_gap(self, unit_ball_report):
        """Test |λ - 2P/(3|E|)| equals 2γ times the boundary potential."""
        assert unit_ball_report.lambda_gap == pytest.approx(2.0 / 3.0)

    def test_is_critical(self, unit_ball_report):
        """Test criticality at zero residual."""
        assert unit_ball_report.is_critical()
        assert unit_ball_report.to_dict()["critical"] is True

    def test_planar_identity_residual_is_none(self):
        """Test that the identity residual is undefined in n=2."""
        report = EnergyReport(
            gamma=0.0, dimension=2, perimeter=2.0 * math.pi, nonlocal_energy=0.0,
            volume=math.pi, lagrange_multiplier=1.0, residual=np.zeros(3),
            residual_l2=0.0, residual_linf=0.0, mean_potential=0.0,
        )
        assert report.identity_residual is None
        assert report.to_dict()["identity_residual"] is None

    def test_negative_gamma(self):
        """Test that negative γ raises an error."""
        with pytest.raises(ValueError, match="nonnegative"):
            EnergyReport(
                gamma=-1.0, dimension=3, perimeter=1.0, nonlocal_energy=1.0,
                volume=1.0, lagrange_multiplier=1.0, residual=np.zeros(1),
                residual_l2=0.0, residual_linf=0.0, mean_potential=0.0,
            )


class TestSpectrumReport:
    """Test spectrum report helpers."""

    def test_lowest_and_stability(self):
        """Test the lowest eigenvalue and stability flag."""
        report = SpectrumReport(
            eigenvalues=np.array([-0.5, 1.0]),
            eigenfunctions=np.zeros((4, 2)),
            verdict=Verdict.UNSTABLE,
            tolerance=5e-2,
            scale=1.0,
            gamma=2.0,
        )
        assert report.lowest == -0.5
        assert not report.is_stable
        assert report.to_dict()["verdict"] == "unstable"


class TestFlowTrace:
    """Test flow trace bookkeeping."""

    def test_columns_follow_record_fields(self):
        """Test the fixed CSV column order."""
        assert FLOW_TRACE_COLUMNS[:3] == ["step", "energy", "perimeter"]
        assert FLOW_TRACE_COLUMNS[-1] == "remeshed"

    def test_monotone(self):
        """Test monotonicity with and without slack."""
        trace = FlowTrace()
        for i, energy in enumerate([10.0, 9.0, 9.000001, 8.0]):
            trace.append(_record(i, energy))

        assert len(trace) == 4
        assert not trace.is_energy_monotone()
        assert trace.is_energy_monotone(slack=1e-6)

    def test_remeshed_steps_are_skipped(self):
        """Test that an increase across a remesh does not break monotonicity."""
        trace = FlowTrace()
        trace.append(_record(0, 10.0))
        trace.append(_record(1, 10.5, remeshed=True))
        trace.append(_record(2, 10.4))
        assert trace.is_energy_monotone()
        assert [row["step"] for row in trace.to_rows()] == [0, 1, 2]


class TestErrors:
    """Test error hierarchy and messages."""

    def test_geometry_error_lists_vertices(self):
        """Test that offending vertex ids appear in the message."""
        err = NonManifoldError("Mesh is not closed", vertex_ids=[5, 2])
        assert isinstance(err, GeometryError)
        assert err.vertex_ids == [2, 5]
        assert "vertices: 2, 5" in str(err)

    def test_numerical_failures(self):
        """Test iteration and step context of numerical failures."""
        assert isinstance(EigensolveError("failed", iterations=7), NumericalFailure)
        assert "after 7 iterations" in str(EigensolveError("failed", iterations=7))
        assert "(step 12)" in str(FlowStallError("stalled", step=12))

    def test_check_failed_message(self):
        """Test the failed-check summary."""
        err = CheckFailedError(["verdict", "converged"])
        assert err.failed == ["verdict", "converged"]
        assert str(err) == "checks failed: verdict, converged"

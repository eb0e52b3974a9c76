"""
Volume-constrained gradient flow of J = P + γ·NL toward critical sets.

Each step moves every vertex by -τ·ρ·ν with ρ = H + 2γv - λ, then rescales
the shape about its volume centroid so the enclosed volume is restored
exactly. Steps that increase J are retried with τ/2; when no size of the
normal step lowers J, the exact polyhedral gradient of J is tried instead.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional
import logging

import numpy as np

from ..energy.functional import evaluate
from ..geometry.boundary import Boundary
from ..geometry.mesh_io import write_loop_csv, write_off
from ..models.errors import FlowStallError, GeometryError, MeshQualityError
from ..models.reports import EnergyReport, FlowRecord, FlowTrace
from ..potential.kernel import equivalent_radius
from ..potential.newtonian import PotentialField, nonlocal_energy, potential_field
from .remesh import remesh

logger = logging.getLogger(__name__)


@dataclass
class FlowOptions:
    """
    Flow controls.

    Attributes:
        max_step: Upper bound on τ
        max_steps: Step budget
        tolerance: Stop when residual L∞/λ ≤ tolerance
        cfl: Fraction of the explicit stability bound 1/max(2S_ii/M_ii)
        move_fraction: Largest displacement per step relative to the shortest edge
        max_halvings: Retries with τ/2 before the flow is declared stalled
        remesh_quality: Remesh when the minimum face quality drops below this
        max_edge_spread: Remesh when max/min edge length exceeds this
        quality_floor: Abort when the minimum face quality drops below this
        remesh_enabled: Allow remeshing
        dump_every: Write the mesh every N steps (None disables)
        dump_dir: Target directory for mesh dumps
    """
    max_step: float = 1e-2
    max_steps: int = 2000
    tolerance: float = 1e-2
    cfl: float = 0.5
    move_fraction: float = 0.2
    max_halvings: int = 8
    remesh_quality: float = 0.3
    max_edge_spread: float = 4.0
    quality_floor: float = 0.05
    remesh_enabled: bool = True
    dump_every: Optional[int] = None
    dump_dir: Optional[Path] = None

    def __post_init__(self):
        if self.max_step <= 0:
            raise ValueError("Step size bound must be positive")
        if not 0 < self.tolerance < 1:
            raise ValueError("Tolerance must lie in (0, 1)")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.cfl <= 0 or self.move_fraction <= 0:
            raise ValueError("cfl and move_fraction must be positive")
        if not 0 <= self.quality_floor < self.remesh_quality <= 1:
            raise ValueError("Quality thresholds must satisfy 0 ≤ floor < remesh ≤ 1")
        if self.dump_every is not None and self.dump_every < 1:
            raise ValueError("dump_every must be at least 1")


@dataclass
class FlowResult:
    """
    Outcome of find_critical.

    Attributes:
        boundary: Final boundary
        trace: Per-step records
        converged: Whether the residual tolerance was met
        steps: Accepted steps taken
        remesh_count: Number of accepted remeshes
        report: Energy report of the final boundary (three-point NL rule)
        identity_residual: Lagrange identity residual, attached on convergence (n=3)
        lambda_gap: |λ - (n-1)P/(n|E|)|, attached on convergence
    """
    boundary: Boundary
    trace: FlowTrace
    converged: bool
    steps: int
    remesh_count: int = 0
    report: Optional[EnergyReport] = None
    identity_residual: Optional[float] = None
    lambda_gap: Optional[float] = None
    dumped: list[Path] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "steps": self.steps,
            "remesh_count": self.remesh_count,
            "identity_residual": self.identity_residual,
            "lambda_gap": self.lambda_gap,
            "final": self.report.to_dict() if self.report is not None else None,
            "best_fit_ball_distance": best_fit_ball_distance(self.boundary),
            "vertices": self.boundary.n_vertices,
        }


def best_fit_ball(b: Boundary) -> tuple[np.ndarray, float]:
    """Center at the volume centroid, radius from the enclosed volume."""
    return b.volume_centroid, equivalent_radius(b.dimension, b.volume)


def best_fit_ball_distance(b: Boundary) -> float:
    """Largest distance from a vertex to the best-fit sphere."""
    center, radius = best_fit_ball(b)
    return float(np.abs(np.linalg.norm(b.vertices - center, axis=1) - radius).max())


def _field(b: Boundary, gamma: float) -> PotentialField:
    """Potential field, or zeros when γ = 0 and the potential does not enter ρ."""
    if gamma > 0:
        return potential_field(b)
    zeros = np.zeros(b.n_vertices)
    return PotentialField(values=zeros, gradient=np.zeros_like(b.vertices), normal_derivative=zeros)


def _flow_energy(b: Boundary, gamma: float) -> tuple[float, float]:
    """(J, NL) with the one-point NL rule, consistent across a step comparison."""
    nl = nonlocal_energy(b, rule="centroid") if gamma > 0 else 0.0
    return b.perimeter + gamma * nl, nl


def _normal_speed(b: Boundary, report: EnergyReport) -> np.ndarray:
    """ρ with its mean removed in the discrete volume-gradient weights."""
    weights = np.einsum("ij,ij->i", b.volume_gradient, b.vertex_normals)
    rho = report.residual
    return rho - np.dot(weights, rho) / weights.sum()


def auto_step_size(b: Boundary, speed: np.ndarray, opts: FlowOptions) -> float:
    """τ = min(max_step, cfl / max(2S_ii/M_ii), move_fraction·h_min / max|ρ|)."""
    diag = b.stiffness.diagonal()
    stability = opts.cfl / float(np.max(2.0 * diag / b.vertex_areas))
    tau = min(opts.max_step, stability)
    peak = float(np.abs(speed).max())
    if peak > 0:
        tau = min(tau, opts.move_fraction * b.min_edge_length / peak)
    return tau


def _rescale(b: Boundary, target_volume: float) -> tuple[Boundary, float]:
    drift = (b.volume - target_volume) / target_volume
    factor = (target_volume / b.volume) ** (1.0 / b.dimension)
    return b.scaled(factor, about=b.volume_centroid), drift


@dataclass
class _StepOutcome:
    boundary: Boundary
    energy: float
    nonlocal_energy: float
    step_size: float
    volume_drift: float


def _exact_gradient_direction(b: Boundary, gamma: float, potential: np.ndarray) -> np.ndarray:
    """
    ∂J/∂x_i of the polyhedral perimeter plus 2γ·v_i·∂|E|/∂x_i, scaled by 1/A_i.

    The volume gradient is removed in the same 1/A_i weighting, so the
    direction leaves the volume unchanged to first order.
    """
    volume_grad = b.volume_gradient
    inv_areas = 1.0 / b.vertex_areas[:, None]
    grad = np.asarray(b.stiffness @ b.vertices) + 2.0 * gamma * potential[:, None] * volume_grad
    mu = np.sum(inv_areas * grad * volume_grad) / np.sum(inv_areas * volume_grad ** 2)
    return inv_areas * (grad - mu * volume_grad)


def _line_search(
    b: Boundary,
    gamma: float,
    displacement: np.ndarray,
    tau: float,
    energy: float,
    opts: FlowOptions,
    target_volume: float,
) -> Optional[_StepOutcome]:
    for _ in range(opts.max_halvings + 1):
        try:
            moved, drift = _rescale(b.with_vertices(b.vertices - tau * displacement), target_volume)
        except GeometryError:
            logger.debug(f"Step with tau={tau:.3e} produced an invalid mesh, halving")
            tau *= 0.5
            continue
        new_energy, nl = _flow_energy(moved, gamma)
        if new_energy <= energy:
            return _StepOutcome(moved, new_energy, nl, tau, drift)
        logger.debug(f"Energy increased ({new_energy:.12g} > {energy:.12g}), halving tau={tau:.3e}")
        tau *= 0.5
    return None


def _advance(
    b: Boundary,
    gamma: float,
    report: EnergyReport,
    potential: np.ndarray,
    energy: float,
    opts: FlowOptions,
    target_volume: float,
    step_index: Optional[int] = None,
) -> _StepOutcome:
    speed = _normal_speed(b, report)
    tau = auto_step_size(b, speed, opts)
    outcome = _line_search(b, gamma, speed[:, None] * b.vertex_normals, tau, energy, opts, target_volume)
    if outcome is not None:
        return outcome

    # Vertex curvature is not the exact gradient of the polyhedral area, so
    # near a critical set the normal direction can fail to lower J.
    direction = _exact_gradient_direction(b, gamma, potential)
    peak = float(np.linalg.norm(direction, axis=1).max())
    if peak > 0:
        logger.debug("Normal step rejected at every size, retrying along the exact gradient")
        tau = min(auto_step_size(b, np.zeros(b.n_vertices), opts), opts.move_fraction * b.min_edge_length / peak)
        outcome = _line_search(b, gamma, direction, tau, energy, opts, target_volume)
        if outcome is not None:
            return outcome
    raise FlowStallError(
        f"No energy-decreasing step after {opts.max_halvings} halvings (tau={tau:.3e})", step=step_index
    )


def step(b: Boundary, gamma: float, opts: Optional[FlowOptions] = None) -> Boundary:
    """
    One accepted flow step with exact volume restoration.

    Raises:
        FlowStallError: no energy-decreasing step size was found
    """
    opts = opts or FlowOptions()
    pot = _field(b, gamma)
    report = evaluate(b, gamma, field=pot, nl=0.0)
    energy, _ = _flow_energy(b, gamma)
    return _advance(b, gamma, report, pot.values, energy, opts, b.volume).boundary


def _record(index: int, b: Boundary, report: EnergyReport, energy: float, nl: float,
            drift: float, tau: float, remeshed: bool) -> FlowRecord:
    return FlowRecord(
        step=index,
        energy=energy,
        perimeter=b.perimeter,
        nonlocal_energy=nl,
        lagrange_multiplier=report.lagrange_multiplier,
        residual_l2=report.residual_l2,
        residual_linf=report.residual_linf,
        volume_drift=drift,
        min_quality=float(b.face_quality().min()),
        step_size=tau,
        remeshed=remeshed,
    )


def _dump(b: Boundary, opts: FlowOptions, index: int) -> Optional[Path]:
    if opts.dump_every is None or opts.dump_dir is None or index % opts.dump_every:
        return None
    directory = Path(opts.dump_dir)
    directory.mkdir(parents=True, exist_ok=True)
    if b.dimension == 3:
        return write_off(b, directory / f"mesh_step_{index:05d}.off")
    return write_loop_csv(b, directory / f"mesh_step_{index:05d}.csv")


def _needs_remesh(b: Boundary, opts: FlowOptions) -> bool:
    return b.face_quality().min() < opts.remesh_quality or b.edge_length_spread() > opts.max_edge_spread


def find_critical(b0: Boundary, gamma: float, opts: Optional[FlowOptions] = None) -> FlowResult:
    """
    Run the flow until the residual meets the tolerance or the step budget is spent.

    Args:
        b0: Starting boundary
        gamma: Coupling γ ≥ 0
        opts: Flow options

    Returns:
        FlowResult; on convergence the Lagrange identity residual (n=3) and the
        λ-bound gap of the final shape are attached

    Raises:
        FlowStallError: step size underflow
        MeshQualityError: face quality collapsed below the floor
    """
    opts = opts or FlowOptions()
    if gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    target_volume = b0.volume
    trace = FlowTrace()
    dumped = []
    b = b0
    remeshes = 0

    pot = _field(b, gamma)
    report = evaluate(b, gamma, field=pot, nl=0.0)
    energy, nl = _flow_energy(b, gamma)
    trace.append(_record(0, b, report, energy, nl, 0.0, 0.0, False))
    logger.info(
        f"Flow start (gamma={gamma}): J={energy:.8f}, res_linf/lambda={report.relative_residual:.3e}"
    )

    steps = 0
    converged = report.is_critical(opts.tolerance)
    while not converged and steps < opts.max_steps:
        outcome = _advance(b, gamma, report, pot.values, energy, opts, target_volume, step_index=steps + 1)
        steps += 1
        b = outcome.boundary
        remeshed = False

        quality = float(b.face_quality().min())
        if quality < opts.quality_floor:
            raise MeshQualityError(f"Minimum face quality {quality:.3e} below floor {opts.quality_floor}", step=steps)
        if opts.remesh_enabled and _needs_remesh(b, opts):
            candidate = remesh(b)
            if candidate is not b:
                b = candidate
                remeshes += 1
                remeshed = True

        pot = _field(b, gamma)
        report = evaluate(b, gamma, field=pot, nl=0.0)
        energy, nl = _flow_energy(b, gamma) if remeshed else (outcome.energy, outcome.nonlocal_energy)
        trace.append(_record(steps, b, report, energy, nl, outcome.volume_drift, outcome.step_size, remeshed))
        path = _dump(b, opts, steps)
        if path is not None:
            dumped.append(path)
        converged = report.is_critical(opts.tolerance)
        if steps % 50 == 0:
            logger.debug(f"Step {steps}: J={energy:.8f}, res_linf/lambda={report.relative_residual:.3e}")

    final = evaluate(b, gamma)
    result = FlowResult(
        boundary=b,
        trace=trace,
        converged=converged,
        steps=steps,
        remesh_count=remeshes,
        report=final,
        dumped=dumped,
    )
    if converged:
        result.identity_residual = final.identity_residual
        result.lambda_gap = final.lambda_gap
        logger.info(f"Flow converged in {steps} steps (J={final.energy:.8f})")
    else:
        logger.warning(
            f"Flow did not converge in {steps} steps (res_linf/lambda={report.relative_residual:.3e})"
        )
    return result


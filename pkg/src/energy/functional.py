"""
Energy J = P + γ·NL, its Lagrange multiplier, Euler-Lagrange residual and scaling identities.
"""

from dataclasses import dataclass
from typing import Iterable, Optional
import logging

import numpy as np

from ..geometry.boundary import Boundary
from ..models.errors import UnsupportedOperationError
from ..models.reports import EnergyReport
from ..potential.newtonian import PotentialField, nonlocal_energy, potential_field

logger = logging.getLogger(__name__)

SCALING_STEP = 1e-4

# Twice the ball's gap/γ ratio of 2/3.
LAMBDA_BOUND_CALIBRATION = 4.0 / 3.0

SWEEP_COLUMNS = ["gamma", "P", "NL", "J", "lambda", "res_l2", "res_linf", "identity_residual"]


def evaluate(
    b: Boundary,
    gamma: float,
    field: Optional[PotentialField] = None,
    nl: Optional[float] = None,
    threads: int = 1,
) -> EnergyReport:
    """
    Evaluate the energy and the first-variation residual.

    Args:
        b: Boundary
        gamma: Coupling γ ≥ 0
        field: Precomputed potential field (computed if omitted)
        nl: Precomputed NL(E) (computed if omitted)
        threads: Worker threads for the potential assembly

    Returns:
        EnergyReport with λ the area average of H + 2γv
    """
    if gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    field = field if field is not None else potential_field(b, threads)
    nl = nl if nl is not None else nonlocal_energy(b, threads)

    areas = b.vertex_areas
    total_area = float(areas.sum())
    first_variation = b.curvature.mean + 2.0 * gamma * field.values
    lam = float(np.dot(areas, first_variation) / total_area)
    residual = first_variation - lam
    residual = residual - np.dot(areas, residual) / total_area

    report = EnergyReport(
        gamma=gamma,
        dimension=b.dimension,
        perimeter=b.perimeter,
        nonlocal_energy=nl,
        volume=b.volume,
        lagrange_multiplier=lam,
        residual=residual,
        residual_l2=float(np.sqrt(np.dot(areas, residual ** 2))),
        residual_linf=float(np.abs(residual).max()),
        mean_potential=float(np.dot(areas, field.values) / total_area),
    )
    logger.debug(
        f"J={report.energy:.8f} (P={report.perimeter:.6f}, NL={nl:.6f}, gamma={gamma}), "
        f"lambda={lam:.6f}, res_linf={report.residual_linf:.3e}"
    )
    return report


@dataclass(frozen=True)
class ScalingCheck:
    """
    d/dt J((1+t)E) at t=0 from the closed formula and from a central difference.

    Attributes:
        formula: (n-1)P + (n+2)γNL
        finite_difference: [J((1+t)E) - J((1-t)E)] / 2t
        step: t
    """
    formula: float
    finite_difference: float
    step: float

    @property
    def relative_error(self) -> float:
        return abs(self.formula - self.finite_difference) / abs(self.formula)

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "finite_difference": self.finite_difference,
            "step": self.step,
            "relative_error": self.relative_error,
        }


def _require_three_dimensions(b: Boundary, what: str) -> None:
    if b.dimension < 3:
        raise UnsupportedOperationError(
            f"{what} holds for n ≥ 3 kernels only; the logarithmic kernel adds a |E|²·log term"
        )


def scaling_derivative(b: Boundary, gamma: float, step: float = SCALING_STEP, threads: int = 1) -> ScalingCheck:
    """
    Compare the dilation derivative of J with (n-1)P + (n+2)γNL.

    Vertices are dilated exactly about the origin.

    Raises:
        UnsupportedOperationError: for n=2
    """
    _require_three_dimensions(b, "The scaling identity")
    n = b.dimension
    nl = nonlocal_energy(b, threads)
    formula = (n - 1) * b.perimeter + (n + 2) * gamma * nl

    def energy(factor: float) -> float:
        scaled = b.scaled(factor)
        return scaled.perimeter + gamma * nonlocal_energy(scaled, threads)

    fd = (energy(1.0 + step) - energy(1.0 - step)) / (2.0 * step)
    check = ScalingCheck(formula=formula, finite_difference=fd, step=step)
    logger.debug(f"Scaling check: formula {formula:.8f}, FD {fd:.8f}")
    return check


def lagrange_identity_residual(
    b: Boundary,
    gamma: float,
    report: Optional[EnergyReport] = None,
) -> float:
    """
    nλ|E| - [(n-1)P + (n+2)γNL].

    Vanishes at critical sets; informational elsewhere.

    Raises:
        UnsupportedOperationError: for n=2
    """
    _require_three_dimensions(b, "The Lagrange identity")
    report = report if report is not None else evaluate(b, gamma)
    return float(report.identity_residual)


@dataclass(frozen=True)
class LambdaBound:
    """
    |λ - (n-1)P/(n|E|)| ≤ C·γ.

    Attributes:
        gap: |λ - (n-1)P/(n|E|)|
        ratio: gap/γ, None at γ = 0
        calibration: C
        critical: Whether the report met the criticality tolerance
    """
    gap: float
    ratio: Optional[float]
    calibration: float
    critical: bool

    @property
    def passed(self) -> bool:
        if self.ratio is None:
            return self.gap <= 1e-2
        return self.ratio <= self.calibration

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "ratio": self.ratio,
            "calibration": self.calibration,
            "critical": self.critical,
            "passed": self.passed,
        }


def lambda_bound_gap(report: EnergyReport, calibration: float = LAMBDA_BOUND_CALIBRATION) -> LambdaBound:
    """Gap between λ and the perimeter-only multiplier, with its ratio to γ."""
    critical = report.is_critical()
    if not critical:
        logger.warning(
            f"Lambda bound evaluated on a non-critical shape (res_linf/lambda={report.relative_residual:.3e})"
        )
    gap = report.lambda_gap
    ratio = gap / report.gamma if report.gamma > 0 else None
    return LambdaBound(gap=gap, ratio=ratio, calibration=calibration, critical=critical)


def energy_sweep(b: Boundary, gammas: Iterable[float], threads: int = 1) -> list[dict]:
    """
    Energy reports over a γ list, sharing one potential assembly.

    Returns:
        Rows keyed by SWEEP_COLUMNS
    """
    field = potential_field(b, threads)
    nl = nonlocal_energy(b, threads)
    rows = []
    for gamma in gammas:
        report = evaluate(b, gamma, field=field, nl=nl)
        rows.append({
            "gamma": gamma,
            "P": report.perimeter,
            "NL": report.nonlocal_energy,
            "J": report.energy,
            "lambda": report.lagrange_multiplier,
            "res_l2": report.residual_l2,
            "res_linf": report.residual_linf,
            "identity_residual": report.identity_residual,
        })
    logger.info(f"Energy sweep over {len(rows)} gamma values")
    return rows

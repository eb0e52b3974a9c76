"""
Result records produced by the energy, stability, flow and diagnostics modules.

Every record serializes through to_dict() into plain JSON types.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import math

import numpy as np


class Verdict(str, Enum):
    """Stability classification of the lowest constrained eigenvalue."""
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


def _float_or_none(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class EnergyReport:
    """
    Energy and first-variation residual of one (shape, γ) pair.

    Attributes:
        gamma: Nonlocal coupling γ ≥ 0
        dimension: n
        perimeter: P(E)
        nonlocal_energy: NL(E)
        volume: |E|
        lagrange_multiplier: λ, the area average of H + 2γv
        residual: ρ = H + 2γv - λ per vertex
        residual_l2: (Σ A ρ²)^½
        residual_linf: max |ρ|
        mean_potential: area average of v
    """
    gamma: float
    dimension: int
    perimeter: float
    nonlocal_energy: float
    volume: float
    lagrange_multiplier: float
    residual: np.ndarray = field(repr=False)
    residual_l2: float
    residual_linf: float
    mean_potential: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("Gamma must be nonnegative")
        if self.dimension not in (2, 3):
            raise ValueError(f"Unsupported dimension {self.dimension}")

    @property
    def energy(self) -> float:
        """J = P + γ·NL."""
        return self.perimeter + self.gamma * self.nonlocal_energy

    @property
    def lambda_gap(self) -> float:
        """|λ - (n-1)P/(n|E|)|."""
        n = self.dimension
        return abs(self.lagrange_multiplier - (n - 1) * self.perimeter / (n * self.volume))

    @property
    def identity_residual(self) -> Optional[float]:
        """nλ|E| - [(n-1)P + (n+2)γNL]; defined for n=3 only."""
        if self.dimension < 3:
            return None
        n = self.dimension
        return n * self.lagrange_multiplier * self.volume - (
            (n - 1) * self.perimeter + (n + 2) * self.gamma * self.nonlocal_energy
        )

    @property
    def relative_residual(self) -> float:
        """L∞ residual relative to |λ|."""
        if self.lagrange_multiplier == 0:
            return math.inf
        return self.residual_linf / abs(self.lagrange_multiplier)

    def is_critical(self, tolerance: float = 1e-2) -> bool:
        return self.relative_residual <= tolerance

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "dimension": self.dimension,
            "perimeter": self.perimeter,
            "nonlocal_energy": self.nonlocal_energy,
            "volume": self.volume,
            "energy": self.energy,
            "lagrange_multiplier": self.lagrange_multiplier,
            "residual_l2": self.residual_l2,
            "residual_linf": self.residual_linf,
            "lambda_gap": self.lambda_gap,
            "identity_residual": _float_or_none(self.identity_residual),
            "critical": self.is_critical(),
        }


@dataclass(frozen=True)
class SpectrumReport:
    """
    Lowest eigenpairs of the second variation on zero-average functions.

    Attributes:
        eigenvalues: μ₁ ≤ … ≤ μ_k
        eigenfunctions: (N, k) M-orthonormal, each with zero area average
        verdict: Classification of μ₁
        tolerance: Relative margin used for the verdict
        scale: Median |diag Q| the margin is relative to
        gamma: Coupling the form was assembled with
    """
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray = field(repr=False)
    verdict: Verdict
    tolerance: float
    scale: float
    gamma: float

    @property
    def lowest(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_stable(self) -> bool:
        return self.verdict != Verdict.UNSTABLE

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "verdict": self.verdict.value,
            "tolerance": self.tolerance,
            "scale": self.scale,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class FlowRecord:
    """
    One accepted flow step.

    Attributes:
        step: Step index (0 is the initial shape)
        energy: J after the step
        volume_drift: Relative volume change before the exact rescale
        min_quality: Minimum face quality after the step
        step_size: τ actually used
        remeshed: Whether the mesh was rebuilt after this step
    """
    step: int
    energy: float
    perimeter: float
    nonlocal_energy: float
    lagrange_multiplier: float
    residual_l2: float
    residual_linf: float
    volume_drift: float
    min_quality: float
    step_size: float = 0.0
    remeshed: bool = False

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "energy": self.energy,
            "perimeter": self.perimeter,
            "nonlocal_energy": self.nonlocal_energy,
            "lagrange_multiplier": self.lagrange_multiplier,
            "residual_l2": self.residual_l2,
            "residual_linf": self.residual_linf,
            "volume_drift": self.volume_drift,
            "min_quality": self.min_quality,
            "step_size": self.step_size,
            "remeshed": self.remeshed,
        }


FLOW_TRACE_COLUMNS = list(FlowRecord.__dataclass_fields__)


@dataclass
class FlowTrace:
    """Time series of flow records."""
    records: list[FlowRecord] = field(default_factory=list)

    def append(self, record: FlowRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def is_energy_monotone(self, slack: float = 0.0) -> bool:
        """J non-increasing along steps that did not remesh."""
        for prev, cur in zip(self.records, self.records[1:]):
            if prev.remeshed or cur.remeshed:
                continue
            if cur.energy > prev.energy + slack * abs(prev.energy):
                return False
        return True

    def to_rows(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


@dataclass(frozen=True)
class AnnulusSolution:
    """
    Radial critical annulus B_R minus B_ρ.

    Attributes:
        exists: Whether a root was found in the searched range
        outer_radius: R
        inner_radius: ρ
        lagrange_multiplier: λ = 2/R + 2γ v(R)
        condition_residual: |(H + 2γv)(R) - (H + 2γv)(ρ)|
        roots: Every inner radius at which the condition changes sign
        coefficients: Shell potential c + b/r - r²/6 and outer m/r: keys b, c, m
        potential_outer: v on the outer sphere
        potential_inner: v on the inner sphere
    """
    exists: bool
    gamma: float
    volume: float
    outer_radius: Optional[float] = None
    inner_radius: Optional[float] = None
    lagrange_multiplier: Optional[float] = None
    condition_residual: Optional[float] = None
    roots: tuple[float, ...] = ()
    coefficients: dict = field(default_factory=dict)
    potential_outer: Optional[float] = None
    potential_inner: Optional[float] = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "exists": self.exists,
            "gamma": self.gamma,
            "volume": self.volume,
            "outer_radius": self.outer_radius,
            "inner_radius": self.inner_radius,
            "lagrange_multiplier": self.lagrange_multiplier,
            "condition_residual": self.condition_residual,
            "roots": list(self.roots),
            "coefficients": dict(self.coefficients),
            "potential_outer": self.potential_outer,
            "potential_inner": self.potential_inner,
            "message": self.message,
        }


@dataclass(frozen=True)
class DiagnosticsReport:
    """
    Standalone geometric checks of one boundary.

    Attributes:
        diameter: Max vertex distance
        topping_integral: ∫H^{n-2} dσ
        topping_passed: diameter ≤ integral·1.02
        willmore: ∫|B|² dσ
        mean_curvature_squared: ∫H² dσ
        umbilicity_deficit: ∫(κ₁ - κ₂)² dσ, None in n=2
        asphericity: min_y ∫|ν - (x - y)/|x - y||² dσ
        components: Connected component count
        component_areas: Perimeter of each component
        euler_characteristic: V - E + F
        excess: Probe label -> excess value
        monotonicity_passed: Whether every probed profile is nondecreasing
        monotone_profiles: Probe label -> profile values
        profile_radii: Radii shared by every profile
    """
    diameter: float
    topping_integral: float
    topping_passed: bool
    willmore: float
    mean_curvature_squared: float
    umbilicity_deficit: Optional[float]
    asphericity: float
    components: int
    component_areas: tuple[float, ...]
    euler_characteristic: int
    excess: dict = field(default_factory=dict)
    monotonicity_passed: bool = True
    monotone_profiles: dict = field(default_factory=dict)
    profile_radii: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "diameter": self.diameter,
            "topping_integral": self.topping_integral,
            "topping_passed": self.topping_passed,
            "willmore": self.willmore,
            "mean_curvature_squared": self.mean_curvature_squared,
            "umbilicity_deficit": self.umbilicity_deficit,
            "asphericity": self.asphericity,
            "components": self.components,
            "component_areas": list(self.component_areas),
            "euler_characteristic": self.euler_characteristic,
            "excess": dict(self.excess),
            "monotonicity_passed": self.monotonicity_passed,
            "monotone_profiles": {k: list(v) for k, v in self.monotone_profiles.items()},
            "profile_radii": list(self.profile_radii),
        }

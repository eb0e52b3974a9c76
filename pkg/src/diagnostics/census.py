"""
Curvature integrals, the Topping bound, asphericity and the per-component
census, plus the aggregate diagnose() run over a deterministic probe set.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional
import logging

import numpy as np
from scipy.optimize import minimize

from ..geometry.boundary import Boundary
from ..geometry.metrics import diameter
from ..models.errors import UnsupportedOperationError
from ..models.reports import DiagnosticsReport
from .excess import MonotonicityProfile, default_radii, excess, monotonicity_profile

logger = logging.getLogger(__name__)

TOPPING_SLACK = 0.02
ASPHERICITY_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ToppingCheck:
    """diam(E) against ∫H^{n-2} dσ."""
    diameter: float
    integral: float
    passed: bool

    def to_dict(self) -> dict:
        return {"diameter": self.diameter, "integral": self.integral, "passed": self.passed}


def topping_check(b: Boundary) -> ToppingCheck:
    """Passes iff diam ≤ ∫H^{n-2} dσ·(1 + 2%); the integrand uses H as computed."""
    if b.dimension == 3:
        integral = float(np.dot(b.vertex_areas, b.curvature.mean))
    else:
        integral = b.perimeter
    diam = diameter(b)
    passed = diam <= integral * (1.0 + TOPPING_SLACK)
    if not passed:
        logger.warning(f"Topping bound fails: diameter {diam:.6f} > integral {integral:.6f}")
    return ToppingCheck(diameter=diam, integral=integral, passed=passed)


def willmore_energy(b: Boundary) -> float:
    """∫|B|² dσ."""
    return float(np.dot(b.vertex_areas, b.curvature.b_squared))


def mean_curvature_squared(b: Boundary) -> float:
    return float(np.dot(b.vertex_areas, b.curvature.mean ** 2))


def umbilicity_deficit(b: Boundary) -> float:
    """
    ∫(κ₁ - κ₂)² dσ, which equals 2∫|B|² - ∫H².

    Raises:
        UnsupportedOperationError: for n=2
    """
    if b.dimension != 3:
        raise UnsupportedOperationError("The umbilicity deficit is defined for surfaces in R³")
    return float(np.dot(b.vertex_areas, b.curvature.umbilic_deviation))


def _asphericity_objective(b: Boundary) -> Callable[[np.ndarray], float]:
    areas = b.vertex_areas
    normals = b.vertex_normals

    def objective(y: np.ndarray) -> float:
        rel = b.vertices - y
        radial = rel / np.linalg.norm(rel, axis=1)[:, None]
        diff = normals - radial
        return float(np.dot(areas, np.einsum("ij,ij->i", diff, diff)))

    return objective


def asphericity(b: Boundary, start: Optional[np.ndarray] = None) -> tuple[float, np.ndarray]:
    """
    min_y ∫|ν - (x - y)/|x - y||² dσ by Nelder-Mead from the volume centroid.

    Returns:
        (value, minimizing center y)
    """
    objective = _asphericity_objective(b)
    x0 = b.volume_centroid if start is None else np.asarray(start, dtype=float)
    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"xatol": ASPHERICITY_TOLERANCE, "fatol": ASPHERICITY_TOLERANCE, "maxiter": 4000},
    )
    value = min(float(result.fun), objective(x0))
    center = result.x if result.fun <= objective(x0) else x0
    logger.debug(f"Asphericity {value:.6e} at center {np.round(center, 6)} ({result.nit} iterations)")
    return value, center


@dataclass(frozen=True)
class ShapeCensus:
    """
    Connectivity and curvature integrals, total and per component.

    Attributes:
        components: Component count
        component_areas: Boundary measure per component
        component_willmore: ∫|B|² per component
        component_deficit: ∫(κ₁ - κ₂)² per component (n=3)
        willmore: Total ∫|B|²
        deficit: Total umbilicity deficit, None in n=2
        asphericity: Minimal asphericity over the center
        euler_characteristic: V - E + F
    """
    components: int
    component_areas: tuple[float, ...]
    component_willmore: tuple[float, ...]
    component_deficit: Optional[tuple[float, ...]]
    willmore: float
    deficit: Optional[float]
    asphericity: float
    euler_characteristic: int

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "component_areas": list(self.component_areas),
            "component_willmore": list(self.component_willmore),
            "component_deficit": list(self.component_deficit) if self.component_deficit is not None else None,
            "willmore": self.willmore,
            "deficit": self.deficit,
            "asphericity": self.asphericity,
            "euler_characteristic": self.euler_characteristic,
        }


def _per_component(b: Boundary, density: np.ndarray) -> tuple[float, ...]:
    sums = np.bincount(b.component_labels, weights=b.vertex_areas * density, minlength=b.n_components)
    return tuple(float(s) for s in sums)


def shape_census(b: Boundary) -> ShapeCensus:
    curv = b.curvature
    three_d = b.dimension == 3
    value, _ = asphericity(b)
    census = ShapeCensus(
        components=b.n_components,
        component_areas=tuple(float(a) for a in b.component_areas()),
        component_willmore=_per_component(b, curv.b_squared),
        component_deficit=_per_component(b, curv.umbilic_deviation) if three_d else None,
        willmore=willmore_energy(b),
        deficit=umbilicity_deficit(b) if three_d else None,
        asphericity=value,
        euler_characteristic=b.euler_characteristic(),
    )
    logger.info(
        f"Census of {b.name or 'boundary'}: {census.components} component(s), "
        f"willmore {census.willmore:.6f}, asphericity {census.asphericity:.3e}"
    )
    return census


@dataclass
class DiagnosticsOptions:
    """
    Controls for diagnose().

    Attributes:
        probes: Number of boundary vertices probed (evenly spaced ids)
        excess_radius: Ball radius for the excess; None picks max(2.5h, diam/4)
        monotonicity_radii: Number of radii per profile
        c0: Curvature bound; None uses max|H|
        strict: Enforce |H| ≤ C₀
        tolerance: Relative decrease allowed per profile step
        threads: Worker threads for the probes
    """
    probes: int = 6
    excess_radius: Optional[float] = None
    monotonicity_radii: int = 8
    c0: Optional[float] = None
    strict: bool = True
    tolerance: float = 0.01
    threads: int = 1

    def __post_init__(self):
        if self.probes < 1:
            raise ValueError("At least one probe is required")
        if self.monotonicity_radii < 2:
            raise ValueError("A profile needs at least two radii")
        if self.excess_radius is not None and self.excess_radius <= 0:
            raise ValueError("Excess radius must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


def probe_vertices(b: Boundary, count: int) -> np.ndarray:
    """Evenly spaced vertex ids, deterministic for a given mesh."""
    return np.unique(np.linspace(0, b.n_vertices - 1, min(count, b.n_vertices)).astype(int))


@dataclass
class _ProbeResult:
    label: str
    excess: float
    profile: MonotonicityProfile


def diagnose(b: Boundary, options: Optional[DiagnosticsOptions] = None) -> DiagnosticsReport:
    """Run every standalone check on one boundary."""
    options = options or DiagnosticsOptions()
    diam = diameter(b)
    radius = options.excess_radius or max(2.5 * b.max_edge_length, 0.25 * diam)
    c0 = options.c0 if options.c0 is not None else float(np.abs(b.curvature.mean).max())
    radii = default_radii(b, options.monotonicity_radii, upper=max(0.75 * diam, 3.0 * b.max_edge_length))

    def probe(vertex: int) -> _ProbeResult:
        x = b.vertices[vertex]
        profile = monotonicity_profile(b, x, c0, radii, strict=options.strict, tolerance=options.tolerance)
        return _ProbeResult(label=f"v{vertex}", excess=excess(b, x, radius), profile=profile)

    ids = probe_vertices(b, options.probes)
    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            results = list(pool.map(probe, ids))
    else:
        results = [probe(v) for v in ids]

    topping = topping_check(b)
    census = shape_census(b)
    report = DiagnosticsReport(
        diameter=diam,
        topping_integral=topping.integral,
        topping_passed=topping.passed,
        willmore=census.willmore,
        mean_curvature_squared=mean_curvature_squared(b),
        umbilicity_deficit=census.deficit,
        asphericity=census.asphericity,
        components=census.components,
        component_areas=census.component_areas,
        euler_characteristic=census.euler_characteristic,
        excess={r.label: r.excess for r in results},
        monotonicity_passed=all(r.profile.passed for r in results),
        monotone_profiles={r.label: r.profile.values for r in results},
        profile_radii=tuple(float(s) for s in radii),
    )
    logger.info(
        f"Diagnostics: topping {'pass' if topping.passed else 'FAIL'}, "
        f"monotonicity {'pass' if report.monotonicity_passed else 'FAIL'}, "
        f"max excess {max(report.excess.values()):.3e} at r={radius:.4g}"
    )
    return report

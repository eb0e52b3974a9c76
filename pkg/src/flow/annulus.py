"""
Radial critical annuli B_R minus B_ρ in R³.

The potential of a concentric shell is radial: constant in the hole,
c + b/r - r²/6 in the shell and m/r outside. C¹ matching at both spheres
gives b = -ρ³/3, c = R²/2, m = (R³ - ρ³)/3, so

    v(R) = (R³ - ρ³)/(3R),    v(ρ) = (R² - ρ²)/2.

With ν pointing out of E the inner sphere has H = -2/ρ, and the annulus is
critical iff 2/R + 2γv(R) = -2/ρ + 2γv(ρ). At fixed volume R is a function
of ρ, leaving one scalar equation in ρ.
"""

from typing import Optional
import logging
import math

import numpy as np
from scipy.optimize import brentq

from ..models.reports import AnnulusSolution

logger = logging.getLogger(__name__)

SCAN_POINTS = 2000
SCAN_LOWER = 1e-3
SCAN_UPPER_FACTOR = 50.0
ROOT_XTOL = 1e-15
RESIDUAL_TARGET = 1e-10


def outer_radius(inner: float, volume: float) -> float:
    """R such that (4π/3)(R³ - ρ³) equals the volume."""
    return (inner ** 3 + 3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)


def shell_coefficients(outer: float, inner: float) -> dict[str, float]:
    """Coefficients b, c of the shell potential c + b/r - r²/6 and m of m/r outside."""
    return {
        "b": -inner ** 3 / 3.0,
        "c": outer ** 2 / 2.0,
        "m": (outer ** 3 - inner ** 3) / 3.0,
    }


def radial_potential(r: float, outer: float, inner: float) -> float:
    """v(r) of the shell ρ < r < R."""
    coeffs = shell_coefficients(outer, inner)
    if r <= inner:
        r = inner
    if r >= outer:
        return coeffs["m"] / r
    return coeffs["c"] + coeffs["b"] / r - r ** 2 / 6.0


def criticality_condition(inner: float, gamma: float, volume: float) -> float:
    """(H + 2γv) on the outer sphere minus the same on the inner sphere."""
    outer = outer_radius(inner, volume)
    return 2.0 / outer + 2.0 / inner + 2.0 * gamma * (
        -outer ** 2 / 6.0 + inner ** 2 / 2.0 - inner ** 3 / (3.0 * outer)
    )


def _bracket_roots(gamma: float, volume: float, upper: float) -> list[float]:
    grid = np.geomspace(SCAN_LOWER, upper, SCAN_POINTS)
    values = np.array([criticality_condition(r, gamma, volume) for r in grid])
    roots = []
    for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
        root = brentq(criticality_condition, grid[i], grid[i + 1], args=(gamma, volume),
                      xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200)
        roots.append(float(root))
    roots.extend(float(grid[i]) for i in np.nonzero(values == 0.0)[0])
    return sorted(roots)


def annulus_critical(gamma: float, volume: float, upper: Optional[float] = None) -> AnnulusSolution:
    """
    Solve for a critical annulus of the given volume.

    The inner radius is scanned on a logarithmic grid from 1e-3 up to
    50 times the volume-equivalent radius and every sign change is refined
    by Brent's method. The smallest root is returned as the solution.

    Args:
        gamma: Coupling γ > 0
        volume: Target volume |E| > 0
        upper: Largest inner radius scanned

    Returns:
        AnnulusSolution; exists=False when no root lies in the scanned range
    """
    if gamma <= 0:
        raise ValueError("A critical annulus needs gamma > 0")
    if volume <= 0:
        raise ValueError("Volume must be positive")
    reference = (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)
    upper = upper if upper is not None else SCAN_UPPER_FACTOR * reference

    roots = _bracket_roots(gamma, volume, upper)
    if not roots:
        logger.info(f"No critical annulus at gamma={gamma} for volume {volume:.6f}")
        return AnnulusSolution(
            exists=False,
            gamma=gamma,
            volume=volume,
            message=f"no critical annulus at this gamma in inner radius range [{SCAN_LOWER}, {upper:.3g}]",
        )

    inner = roots[0]
    outer = outer_radius(inner, volume)
    residual = abs(criticality_condition(inner, gamma, volume))
    if residual > RESIDUAL_TARGET:
        logger.warning(f"Annulus condition residual {residual:.3e} above {RESIDUAL_TARGET:.0e}")
    v_outer = radial_potential(outer, outer, inner)
    v_inner = radial_potential(inner, outer, inner)
    logger.info(
        f"Critical annulus at gamma={gamma}: R={outer:.10f}, rho={inner:.10f}, "
        f"{len(roots)} root(s), residual {residual:.3e}"
    )
    return AnnulusSolution(
        exists=True,
        gamma=gamma,
        volume=volume,
        outer_radius=outer,
        inner_radius=inner,
        lagrange_multiplier=2.0 / outer + 2.0 * gamma * v_outer,
        condition_residual=residual,
        roots=tuple(roots),
        coefficients=shell_coefficients(outer, inner),
        potential_outer=v_outer,
        potential_inner=v_inner,
    )

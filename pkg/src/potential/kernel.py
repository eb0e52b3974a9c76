"""
Newtonian kernel constants and closed-form ball oracles.

G(x, y) = c_n |x - y|^{2-n} for n ≥ 3 with c_n = 1/(n(n-2)ω_n), and
G(x, y) = (1/2π) log(1/|x - y|) for n = 2.
"""

from dataclasses import dataclass
import math

from ..models.shapes import unit_ball_volume


@dataclass(frozen=True)
class KernelParams:
    """
    Kernel normalization for one dimension.

    Attributes:
        dimension: n ∈ {2, 3}
    """
    dimension: int

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"Only n=2 and n=3 are discretized, got n={self.dimension}")

    @property
    def constant(self) -> float:
        """c_n so that -ΔG = δ."""
        n = self.dimension
        if n == 2:
            return 1.0 / (2.0 * math.pi)
        return 1.0 / (n * (n - 2) * unit_ball_volume(n))

    def evaluate(self, r: float) -> float:
        if r <= 0:
            raise ValueError("Kernel is singular at r = 0")
        if self.dimension == 2:
            return self.constant * math.log(1.0 / r)
        return self.constant * r ** (2 - self.dimension)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "constant": self.constant}


def equivalent_radius(n: int, volume: float) -> float:
    """Radius of the ball with the given volume."""
    if volume <= 0:
        raise ValueError("Volume must be positive")
    return (volume / unit_ball_volume(n)) ** (1.0 / n)


def ball_potential(n: int, radius: float, r: float) -> float:
    """
    Radial Newtonian potential of B_radius at distance r from its center.

    n=3: R²/2 - r²/6 inside, R³/(3r) outside.
    n=2: (R² - r²)/4 + (R²/2)log(1/R) inside, (R²/2)log(1/r) outside.
    """
    big = radius
    if n == 3:
        if r <= big:
            return big ** 2 / 2.0 - r ** 2 / 6.0
        return big ** 3 / (3.0 * r)
    if n == 2:
        if r <= big:
            return (big ** 2 - r ** 2) / 4.0 + 0.5 * big ** 2 * math.log(1.0 / big)
        return 0.5 * big ** 2 * math.log(1.0 / r)
    raise ValueError(f"Unsupported dimension {n}")


def ball_potential_max(n: int, volume: float) -> float:
    """max v over R^n for the ball of the given volume (attained at its center)."""
    return ball_potential(n, equivalent_radius(n, volume), 0.0)


def ball_gradient_max(n: int, volume: float) -> float:
    """max |∇v| for the ball of the given volume, R/n at the boundary."""
    return equivalent_radius(n, volume) / n


def ball_normal_derivative(n: int, radius: float) -> float:
    """∂_ν v on the boundary sphere of B_radius."""
    return -radius / n


def ball_nonlocal_energy(n: int, volume: float) -> float:
    """
    NL of the ball with the given volume.

    n=3: 8πR⁵/15. n=2: πR⁴/8 - (πR⁴/2)log R.
    """
    big = equivalent_radius(n, volume)
    if n == 3:
        return 8.0 * math.pi * big ** 5 / 15.0
    return math.pi * big ** 4 / 8.0 - 0.5 * math.pi * big ** 4 * math.log(big)

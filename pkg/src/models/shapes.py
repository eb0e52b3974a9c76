"""Analytic shape descriptions used to tessellate inputs and as exact oracles."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Union
import math


class ShapeKind(str, Enum):
    """Supported analytic shape variants."""
    BALL = "ball"
    BALL_UNION = "ball_union"
    ANNULUS = "annulus"
    PERTURBED_BALL = "perturbed_ball"
    ELLIPSOID = "ellipsoid"


def unit_ball_volume(n: int) -> float:
    """Volume ω_n of the unit n-ball."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _check_center(center: tuple[float, ...]) -> None:
    if len(center) not in (2, 3):
        raise ValueError(f"Center must have 2 or 3 coordinates, got {len(center)}")


@dataclass(frozen=True)
class Ball:
    """
    Round ball B_r(c).

    Attributes:
        center: Center point, its length fixes the dimension
        radius: Radius (length units)
    """
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    kind: ShapeKind = field(default=ShapeKind.BALL, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        _check_center(self.center)
        if self.radius <= 0:
            raise ValueError("Ball radius must be positive")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        return unit_ball_volume(self.dimension) * self.radius ** self.dimension

    def perimeter(self) -> float:
        n = self.dimension
        return n * unit_ball_volume(n) * self.radius ** (n - 1)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class BallUnion:
    """
    Union of pairwise disjoint (or tangent) balls.

    Attributes:
        balls: Member balls, all of the same dimension
    """
    balls: tuple[Ball, ...] = ()
    kind: ShapeKind = field(default=ShapeKind.BALL_UNION, init=False)

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if len(self.balls) < 1:
            raise ValueError("BallUnion needs at least one ball")
        dims = {b.dimension for b in self.balls}
        if len(dims) != 1:
            raise ValueError("All balls of a union must share one dimension")
        for i, a in enumerate(self.balls):
            for b in self.balls[i + 1:]:
                gap = math.dist(a.center, b.center) - (a.radius + b.radius)
                if gap < -1e-12 * max(a.radius, b.radius):
                    raise ValueError(
                        f"Balls at {a.center} and {b.center} overlap (gap {gap:.3e})"
                    )

    @property
    def dimension(self) -> int:
        return self.balls[0].dimension

    def tangent_pairs(self) -> list[tuple[int, int]]:
        """Index pairs of balls that touch."""
        pairs = []
        for i, a in enumerate(self.balls):
            for j in range(i + 1, len(self.balls)):
                b = self.balls[j]
                gap = math.dist(a.center, b.center) - (a.radius + b.radius)
                if abs(gap) <= 1e-12 * max(a.radius, b.radius):
                    pairs.append((i, j))
        return pairs

    def volume(self) -> float:
        return sum(b.volume() for b in self.balls)

    def perimeter(self) -> float:
        return sum(b.perimeter() for b in self.balls)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "balls": [b.to_dict() for b in self.balls]}


@dataclass(frozen=True)
class Annulus:
    """
    Spherical shell B_R(c) minus the closed ball of radius ρ.

    Attributes:
        outer_radius: R
        inner_radius: ρ, with 0 < ρ < R
        center: Common center
    """
    outer_radius: float = 1.0
    inner_radius: float = 0.5
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    kind: ShapeKind = field(default=ShapeKind.ANNULUS, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        _check_center(self.center)
        if self.inner_radius <= 0:
            raise ValueError("Annulus inner radius must be positive")
        if self.inner_radius >= self.outer_radius:
            raise ValueError("Annulus radii must satisfy 0 < inner < outer")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        n = self.dimension
        return unit_ball_volume(n) * (self.outer_radius ** n - self.inner_radius ** n)

    def perimeter(self) -> float:
        n = self.dimension
        return n * unit_ball_volume(n) * (self.outer_radius ** (n - 1) + self.inner_radius ** (n - 1))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "outer_radius": self.outer_radius,
            "inner_radius": self.inner_radius,
            "center": list(self.center),
        }


HarmonicIndex = Union[tuple[int, int], int]


@dataclass(frozen=True)
class PerturbedBall:
    """
    Radial graph r(ω) = radius·(1 + Σ a_i·Y_i(ω)) over the unit sphere.

    Each mode Y_i is a real spherical harmonic (ℓ, m) in n=3 or a Fourier
    mode k in n=2, normalized to peak absolute value 1. Negative m (or k)
    selects the sine family.

    Attributes:
        radius: Base radius
        amplitudes: Mode index -> amplitude
        center: Center point, fixes the dimension
    """
    radius: float = 1.0
    amplitudes: dict = field(default_factory=dict)
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    kind: ShapeKind = field(default=ShapeKind.PERTURBED_BALL, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        _check_center(self.center)
        if self.radius <= 0:
            raise ValueError("PerturbedBall radius must be positive")
        normalized = {}
        for key, amplitude in self.amplitudes.items():
            if self.dimension == 3:
                if isinstance(key, str):
                    key = tuple(int(p) for p in key.split(","))
                ell, m = (int(key[0]), int(key[1]))
                if ell < 0 or abs(m) > ell:
                    raise ValueError(f"Invalid spherical harmonic index ({ell}, {m})")
                normalized[(ell, m)] = float(amplitude)
            else:
                k = int(key)
                normalized[k] = float(amplitude)
        object.__setattr__(self, "amplitudes", normalized)

    @property
    def dimension(self) -> int:
        return len(self.center)

    def to_dict(self) -> dict:
        if self.dimension == 3:
            amps = {f"{ell},{m}": a for (ell, m), a in sorted(self.amplitudes.items())}
        else:
            amps = {str(k): a for k, a in sorted(self.amplitudes.items())}
        return {
            "kind": self.kind.value,
            "radius": self.radius,
            "amplitudes": amps,
            "center": list(self.center),
        }


@dataclass(frozen=True)
class Ellipsoid:
    """
    Axis-aligned ellipsoid (ellipse in n=2).

    Attributes:
        semi_axes: Semi-axis lengths, one per coordinate
        center: Center point
    """
    semi_axes: tuple[float, ...] = (2.0, 1.0, 1.0)
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    kind: ShapeKind = field(default=ShapeKind.ELLIPSOID, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        _check_center(self.center)
        if len(self.semi_axes) != len(self.center):
            raise ValueError("Ellipsoid needs one semi-axis per coordinate")
        if min(self.semi_axes) <= 0:
            raise ValueError("Ellipsoid semi-axes must be positive")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        return unit_ball_volume(self.dimension) * math.prod(self.semi_axes)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "semi_axes": list(self.semi_axes), "center": list(self.center)}


Shape = Union[Ball, BallUnion, Annulus, PerturbedBall, Ellipsoid]


@dataclass(frozen=True)
class ShapeSpec:
    """
    A shape together with its tessellation resolution.

    Attributes:
        shape: One of the analytic shape variants
        resolution: Icosahedral subdivision level (n=3) or number of
            polygon vertices per loop (n=2)
    """
    shape: Shape
    resolution: int = 3

    def __post_init__(self):
        if self.resolution < 0:
            raise ValueError("Resolution must be nonnegative")
        if self.dimension == 2 and self.resolution < 8:
            raise ValueError("Polygon resolution must be at least 8 vertices")
        if self.dimension == 3 and self.resolution > 6:
            raise ValueError("Subdivision level above 6 exceeds desk-scale meshes")

    @property
    def dimension(self) -> int:
        return self.shape.dimension

    def to_dict(self) -> dict:
        return {"shape": self.shape.to_dict(), "resolution": self.resolution}

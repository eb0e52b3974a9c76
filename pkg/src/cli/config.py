"""
Run configuration: JSON files validated with pydantic, environment defaults
from .env, and seeded random perturbations of ball shapes.
"""

from enum import Enum
from pathlib import Path
from typing import Literal, Optional, Union
import json
import logging
import os

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..diagnostics.census import DiagnosticsOptions
from ..flow.gradient_flow import FlowOptions
from ..models.errors import ConfigError
from ..models.shapes import (
    Annulus,
    Ball,
    BallUnion,
    Ellipsoid,
    PerturbedBall,
    ShapeKind,
    ShapeSpec,
)
from ..potential.newtonian import DEFAULT_VERTEX_CAP

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "NONLOCAL_OUTPUT_ROOT"
THREADS_ENV = "NONLOCAL_THREADS"

load_dotenv()


def default_output_root() -> Path:
    return Path(os.getenv(OUTPUT_ROOT_ENV, "runs"))


def default_threads() -> int:
    raw = os.getenv(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
        return 1


class ExperimentKind(str, Enum):
    """Experiments the runner can dispatch."""
    ENERGY = "energy"
    SPECTRUM = "spectrum"
    FLOW = "flow"
    DIAGNOSE = "diagnose"
    ANNULUS = "annulus"
    BALL_ORACLE = "ball-oracle"
    SWEEP = "sweep"


class BallConfig(BaseModel):
    center: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0], description="Ball center")
    radius: float = Field(1.0, gt=0, description="Ball radius")


class RandomPerturbationConfig(BaseModel):
    """Seeded random harmonic perturbation added to a ball."""
    max_degree: int = Field(4, ge=2, description="Largest harmonic degree ℓ (n=3) or frequency k (n=2)")
    amplitude_scale: float = Field(0.05, gt=0, description="Amplitudes are drawn uniformly from ±scale")
    count: int = Field(3, ge=1, description="Number of modes drawn")


class ShapeConfig(BaseModel):
    """Analytic shape plus tessellation resolution."""
    kind: ShapeKind = Field(..., description="Shape variant")
    resolution: int = Field(3, gt=0, description="Subdivision level (n=3) or polygon vertex count (n=2)")
    center: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0], description="Center point")
    radius: float = Field(1.0, gt=0, description="Radius of ball shapes")
    balls: list[BallConfig] = Field(default_factory=list, description="Balls of a union")
    outer_radius: Optional[float] = Field(None, gt=0, description="Annulus outer radius")
    inner_radius: Optional[float] = Field(None, gt=0, description="Annulus inner radius")
    amplitudes: dict[str, float] = Field(
        default_factory=dict, description="Harmonic amplitudes keyed 'l,m' (n=3) or 'k' (n=2)"
    )
    semi_axes: Optional[list[float]] = Field(None, description="Ellipsoid semi-axes")

    def build(self) -> ShapeSpec:
        """Translate into a ShapeSpec; dataclass validation errors become ConfigError."""
        try:
            return ShapeSpec(self._shape(), resolution=self.resolution)
        except ValueError as e:
            raise ConfigError(f"Invalid {self.kind.value} shape: {e}") from e

    def _shape(self) -> Union[Ball, BallUnion, Annulus, PerturbedBall, Ellipsoid]:
        center = tuple(self.center)
        if self.kind == ShapeKind.BALL:
            return Ball(center=center, radius=self.radius)
        if self.kind == ShapeKind.BALL_UNION:
            return BallUnion(balls=tuple(Ball(center=tuple(b.center), radius=b.radius) for b in self.balls))
        if self.kind == ShapeKind.ANNULUS:
            if self.outer_radius is None or self.inner_radius is None:
                raise ValueError("annulus needs outer_radius and inner_radius")
            return Annulus(outer_radius=self.outer_radius, inner_radius=self.inner_radius, center=center)
        if self.kind == ShapeKind.PERTURBED_BALL:
            return PerturbedBall(radius=self.radius, amplitudes=self._amplitude_keys(), center=center)
        if self.semi_axes is None:
            raise ValueError("ellipsoid needs semi_axes")
        return Ellipsoid(semi_axes=tuple(self.semi_axes), center=center)

    def _amplitude_keys(self) -> dict:
        if len(self.center) == 3:
            return dict(self.amplitudes)
        return {int(k): a for k, a in self.amplitudes.items()}


class PotentialOptionsConfig(BaseModel):
    vertex_cap: int = Field(DEFAULT_VERTEX_CAP, gt=0, description="Largest mesh for dense kernel assembly")
    nl_rule: Literal["gauss", "centroid"] = Field("gauss", description="Quadrature rule for NL")


class StabilityOptionsConfig(BaseModel):
    eigenpairs: int = Field(10, ge=1, description="Number of eigenpairs k")
    tolerance: float = Field(5e-2, gt=0, description="Relative margin for the stability verdict")
    dump_eigenfunctions: bool = Field(False, description="Write eigenfunctions as per-vertex CSV")


class FlowOptionsConfig(BaseModel):
    max_step: float = Field(1e-2, gt=0, description="Upper bound on τ")
    max_steps: int = Field(2000, ge=0, description="Step budget")
    tolerance: float = Field(1e-2, gt=0, lt=1, description="Residual L∞/λ stopping tolerance")
    remesh_quality: float = Field(0.3, gt=0, le=1, description="Remesh below this face quality")
    max_edge_spread: float = Field(4.0, gt=1, description="Remesh above this edge length spread")
    remesh_enabled: bool = Field(True, description="Allow remeshing")

    def build(self, dump_every: Optional[int] = None, dump_dir: Optional[Path] = None) -> FlowOptions:
        return FlowOptions(
            max_step=self.max_step,
            max_steps=self.max_steps,
            tolerance=self.tolerance,
            remesh_quality=self.remesh_quality,
            max_edge_spread=self.max_edge_spread,
            remesh_enabled=self.remesh_enabled,
            dump_every=dump_every,
            dump_dir=dump_dir,
        )


class DiagnosticsOptionsConfig(BaseModel):
    probes: int = Field(6, ge=1, description="Boundary vertices probed")
    excess_radius: Optional[float] = Field(None, gt=0, description="Ball radius for the excess")
    monotonicity_radii: int = Field(8, ge=2, description="Radii per monotonicity profile")
    c0: Optional[float] = Field(None, ge=0, description="Curvature bound C0 (default max|H|)")
    strict: bool = Field(True, description="Enforce |H| ≤ C0")

    def build(self, threads: int = 1) -> DiagnosticsOptions:
        return DiagnosticsOptions(
            probes=self.probes,
            excess_radius=self.excess_radius,
            monotonicity_radii=self.monotonicity_radii,
            c0=self.c0,
            strict=self.strict,
            threads=threads,
        )


class ExpectationsConfig(BaseModel):
    """Optional checks; any failure makes the run exit with the check-failure code."""
    max_relative_residual: Optional[float] = Field(None, gt=0, description="Bound on res_linf/lambda")
    verdict: Optional[Literal["stable", "marginal", "unstable"]] = Field(None, description="Expected verdict")
    converged: Optional[bool] = Field(None, description="Expected flow convergence")
    topping_passed: Optional[bool] = Field(None, description="Expected Topping outcome")
    monotonicity_passed: Optional[bool] = Field(None, description="Expected monotonicity outcome")
    annulus_exists: Optional[bool] = Field(None, description="Expected annulus existence")


class RunConfig(BaseModel):
    """
    One batch run.

    Exactly one of shape and mesh_path describes the input boundary, except
    for annulus and ball-oracle runs which take no boundary.
    """
    name: str = Field("run", description="Run name, used for the default output directory")
    kind: ExperimentKind = Field(..., description="Experiment to dispatch")
    shape: Optional[ShapeConfig] = Field(None, description="Analytic input shape")
    mesh_path: Optional[str] = Field(None, description="OFF (n=3) or loop CSV (n=2) input mesh")
    gamma: Optional[float] = Field(None, ge=0, description="Coupling γ")
    gammas: Optional[list[float]] = Field(None, description="γ list for sweeps")
    sweep_target: Literal["spectrum", "flow", "energy"] = Field("spectrum", description="What a sweep runs per γ")
    volume: Optional[float] = Field(None, gt=0, description="Target volume (annulus)")
    annulus_check_resolution: Optional[int] = Field(
        None, gt=0, description="Tessellate the solved annulus at this level and evaluate its residual"
    )
    dimension: Literal[2, 3] = Field(3, description="Dimension for ball-oracle runs")
    max_mode: int = Field(5, ge=1, description="Highest mode in ball-oracle tables")
    potential: PotentialOptionsConfig = Field(default_factory=PotentialOptionsConfig)
    stability: StabilityOptionsConfig = Field(default_factory=StabilityOptionsConfig)
    flow: FlowOptionsConfig = Field(default_factory=FlowOptionsConfig)
    diagnostics: DiagnosticsOptionsConfig = Field(default_factory=DiagnosticsOptionsConfig)
    random_perturbation: Optional[RandomPerturbationConfig] = Field(None, description="Seeded random modes")
    expect: ExpectationsConfig = Field(default_factory=ExpectationsConfig)
    output_dir: Optional[str] = Field(None, description="Output directory")
    seed: int = Field(0, ge=0, description="Seed for perturbation generation")
    threads: int = Field(default_factory=default_threads, ge=1, description="Worker threads")
    dump_mesh_every: Optional[int] = Field(None, ge=1, description="Dump flow meshes every N steps")
    export_matrices: bool = Field(False, description="Write assembled matrices as CSV")

    @field_validator("gammas")
    @classmethod
    def _nonnegative_gammas(cls, value: Optional[list[float]]) -> Optional[list[float]]:
        if value is not None and any(g < 0 for g in value):
            raise ValueError("gamma values must be nonnegative")
        return value

    @model_validator(mode="after")
    def _check_sources(self) -> "RunConfig":
        needs_boundary = self.kind not in (ExperimentKind.ANNULUS, ExperimentKind.BALL_ORACLE)
        sources = (self.shape is not None) + (self.mesh_path is not None)
        if needs_boundary and sources != 1:
            raise ValueError("exactly one of shape and mesh_path is required")
        if not needs_boundary and sources:
            raise ValueError(f"{self.kind.value} runs take no input boundary")
        if self.kind == ExperimentKind.SWEEP and (self.gammas is None or len(self.gammas) < 2):
            raise ValueError("sweeps need at least two gamma values")
        if self.kind in (ExperimentKind.SPECTRUM, ExperimentKind.FLOW, ExperimentKind.ANNULUS,
                         ExperimentKind.BALL_ORACLE) and self.gamma is None:
            raise ValueError(f"{self.kind.value} runs need gamma")
        if self.kind == ExperimentKind.ENERGY and self.gamma is None and not self.gammas:
            raise ValueError("energy runs need gamma or gammas")
        if self.kind == ExperimentKind.ANNULUS and self.volume is None:
            raise ValueError("annulus runs need volume")
        if self.random_perturbation is not None and (
            self.shape is None or self.shape.kind not in (ShapeKind.BALL, ShapeKind.PERTURBED_BALL)
        ):
            raise ValueError("random_perturbation applies to ball or perturbed_ball shapes")
        return self

    def gamma_values(self) -> list[float]:
        if self.gammas:
            return list(self.gammas)
        return [self.gamma] if self.gamma is not None else []


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Parse and validate a JSON run configuration.

    Raises:
        ConfigError: unreadable file, invalid JSON or failed validation
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
    logger.info(f"Loaded {config.kind.value} config {config.name!r} from {path}")
    return config


def _mode_pool(dimension: int, max_degree: int) -> list:
    if dimension == 3:
        return [(ell, m) for ell in range(2, max_degree + 1) for m in range(-ell, ell + 1)]
    return [k for k in range(2, max_degree + 1)] + [-k for k in range(2, max_degree + 1)]


def random_amplitudes(dimension: int, settings: RandomPerturbationConfig, seed: int) -> dict:
    """
    Draw `count` distinct modes of degree 2..max_degree with uniform amplitudes in ±scale.

    Degree 1 is skipped: it only translates the ball to first order.
    """
    rng = np.random.default_rng(seed)
    pool = _mode_pool(dimension, settings.max_degree)
    picks = rng.choice(len(pool), size=min(settings.count, len(pool)), replace=False)
    amplitudes = {}
    for i in sorted(int(p) for p in picks):
        amplitudes[pool[i]] = float(rng.uniform(-settings.amplitude_scale, settings.amplitude_scale))
    return amplitudes


def perturbed_spec(spec: ShapeSpec, settings: RandomPerturbationConfig, seed: int) -> ShapeSpec:
    """Add seeded random modes to a ball or perturbed ball."""
    shape = spec.shape
    amplitudes = dict(getattr(shape, "amplitudes", {}))
    for key, value in random_amplitudes(shape.dimension, settings, seed).items():
        amplitudes[key] = amplitudes.get(key, 0.0) + value
    perturbed = PerturbedBall(radius=shape.radius, amplitudes=amplitudes, center=shape.center)
    logger.info(f"Random perturbation (seed {seed}): {perturbed.to_dict()['amplitudes']}")
    return ShapeSpec(perturbed, resolution=spec.resolution)

"""
Experiment dispatch: build the input boundary, run the requested module,
write JSON/CSV artifacts and the hashed manifest.
"""

from concurrent.futures import ThreadPoolExecutor
from enum import IntEnum
from pathlib import Path
from typing import Callable, Optional, Union
import logging
import os
import sys

import numpy as np
from pydantic import ValidationError

from .. import __version__
from ..diagnostics.census import diagnose, shape_census
from ..energy.functional import (
    SWEEP_COLUMNS,
    energy_sweep,
    evaluate,
    lambda_bound_gap,
    scaling_derivative,
)
from ..flow.annulus import annulus_critical
from ..flow.gradient_flow import find_critical
from ..geometry.boundary import Boundary
from ..geometry.mesh_io import read_loop_csv, read_off, write_loop_csv, write_off
from ..geometry.tessellation import tessellate
from ..models.errors import CheckFailedError, ConfigError, GeometryError, NumericalFailure, UnsupportedOperationError
from ..models.reports import FLOW_TRACE_COLUMNS
from ..models.shapes import Annulus, ShapeSpec, unit_ball_volume
from ..potential.kernel import (
    ball_gradient_max,
    ball_nonlocal_energy,
    ball_normal_derivative,
    ball_potential_max,
    equivalent_radius,
)
from ..potential.newtonian import kernel_matrix, kernel_row_ratio, nonlocal_energy, potential_field, rearrangement_check
from ..stability.modes import ball_spectrum_table
from ..stability.second_variation import assemble
from ..stability.spectrum import spectrum, two_component_test
from .config import ExperimentKind, RunConfig, default_output_root, load_config, perturbed_spec
from .exporters import RunManifest, write_csv, write_json, write_matrix_csv

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    UNEXPECTED = 1
    CONFIG = 2
    NUMERICAL = 3
    CHECK_FAILED = 4


def resolve_output_dir(config: RunConfig, override: Optional[Union[str, Path]] = None) -> Path:
    """--out, then the config's output_dir, then NONLOCAL_OUTPUT_ROOT/<name>."""
    if override is not None:
        out = Path(override)
    elif config.output_dir is not None:
        out = Path(config.output_dir)
    else:
        out = default_output_root() / config.name
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {out}: {e}") from e
    if not os.access(out, os.W_OK):
        raise ConfigError(f"Output directory {out} is not writable")
    return out


def input_spec(config: RunConfig) -> Optional[ShapeSpec]:
    if config.shape is None:
        return None
    spec = config.shape.build()
    if config.random_perturbation is not None:
        spec = perturbed_spec(spec, config.random_perturbation, config.seed)
    return spec


def build_boundary(config: RunConfig) -> Boundary:
    """Tessellate the configured shape or read the configured mesh."""
    if config.mesh_path is not None:
        path = Path(config.mesh_path)
        if not path.exists():
            raise ConfigError(f"Mesh file {path} does not exist")
        return read_off(path) if path.suffix.lower() == ".off" else read_loop_csv(path)
    return tessellate(input_spec(config))


def _write_mesh(b: Boundary, out: Path, stem: str) -> Path:
    if b.dimension == 3:
        return write_off(b, out / f"{stem}.off")
    return write_loop_csv(b, out / f"{stem}.csv")


def _relative_residual_failures(config: RunConfig, value: Optional[float]) -> list[str]:
    bound = config.expect.max_relative_residual
    if bound is None or value is None or value <= bound:
        return []
    return [f"relative residual {value:.4e} > {bound:.4e}"]


def _expect(name: str, expected: Optional[bool], actual: bool) -> list[str]:
    if expected is None or expected == actual:
        return []
    return [f"{name} expected {expected}, got {actual}"]


def run_energy(config: RunConfig, out: Path) -> list[str]:
    b = build_boundary(config)
    gammas = config.gamma_values()
    field = potential_field(b, config.threads)
    nl = nonlocal_energy(b, config.threads, rule=config.potential.nl_rule)
    reports = [evaluate(b, g, field=field, nl=nl) for g in gammas]
    payload = {
        "boundary": {"vertices": b.n_vertices, "faces": b.n_faces, "dimension": b.dimension},
        "reports": [r.to_dict() for r in reports],
        "lambda_bounds": [lambda_bound_gap(r).to_dict() for r in reports],
        "rearrangement": rearrangement_check(b, field=field, nl=nl).to_dict(),
    }
    if b.dimension == 3:
        payload["scaling"] = [scaling_derivative(b, g, threads=config.threads).to_dict() for g in gammas]
        payload["kernel_row"] = kernel_row_ratio(b, config.threads).to_dict()
    write_json(out / "energy.json", payload)
    write_csv(out / "energy.csv", energy_sweep(b, gammas, config.threads), SWEEP_COLUMNS)
    if config.export_matrices:
        write_matrix_csv(out / "kernel_matrix.csv", kernel_matrix(b, config.potential.vertex_cap, config.threads))
    failures = []
    for r in reports:
        failures += _relative_residual_failures(config, r.relative_residual)
    return failures


def _eigenfunction_rows(b: Boundary, phi: np.ndarray) -> tuple[list[dict], list[str]]:
    axes = ["x", "y", "z"][:b.dimension]
    columns = ["vertex"] + axes + [f"phi_{j + 1}" for j in range(phi.shape[1])]
    rows = []
    for i in range(b.n_vertices):
        row = {"vertex": i}
        row.update({a: float(b.vertices[i, j]) for j, a in enumerate(axes)})
        row.update({f"phi_{j + 1}": float(phi[i, j]) for j in range(phi.shape[1])})
        rows.append(row)
    return rows, columns


def run_spectrum(config: RunConfig, out: Path) -> list[str]:
    b = build_boundary(config)
    gamma = config.gamma
    field = potential_field(b, config.threads) if gamma > 0 else None
    sv = assemble(b, gamma, field=field, vertex_cap=config.potential.vertex_cap, threads=config.threads)
    k = min(config.stability.eigenpairs, b.n_vertices - 1)
    report = spectrum(sv, k=k, tolerance=config.stability.tolerance)
    payload = {"spectrum": report.to_dict(), "second_variation": sv.to_dict()}
    if b.n_components > 1:
        payload["two_component_test"] = two_component_test(b, gamma, field=field, sv=sv)
    write_json(out / "spectrum.json", payload)
    if config.stability.dump_eigenfunctions:
        rows, columns = _eigenfunction_rows(b, report.eigenfunctions)
        write_csv(out / "eigenfunctions.csv", rows, columns)
    if config.export_matrices:
        write_matrix_csv(out / "stiffness.csv", sv.stiffness)
        write_matrix_csv(out / "mass.csv", np.diag(sv.mass))
        write_matrix_csv(out / "second_variation.csv", sv.matrix)
        if sv.kernel is not None:
            write_matrix_csv(out / "kernel_matrix.csv", sv.kernel)
    expected = config.expect.verdict
    if expected is not None and report.verdict.value != expected:
        return [f"verdict expected {expected}, got {report.verdict.value}"]
    return []


def run_flow(config: RunConfig, out: Path) -> list[str]:
    b = build_boundary(config)
    opts = config.flow.build(
        dump_every=config.dump_mesh_every,
        dump_dir=out / "meshes" if config.dump_mesh_every else None,
    )
    result = find_critical(b, config.gamma, opts)
    census = shape_census(result.boundary)
    payload = {"flow": result.to_dict(), "census": census.to_dict()}
    write_json(out / "flow.json", payload)
    write_csv(out / "flow_trace.csv", result.trace.to_rows(), FLOW_TRACE_COLUMNS)
    _write_mesh(result.boundary, out, "final_mesh")
    failures = _expect("converged", config.expect.converged, result.converged)
    if result.report is not None:
        failures += _relative_residual_failures(config, result.report.relative_residual)
    return failures


def run_diagnose(config: RunConfig, out: Path) -> list[str]:
    b = build_boundary(config)
    report = diagnose(b, config.diagnostics.build(config.threads))
    write_json(out / "diagnostics.json", report.to_dict())
    rows = [
        {"probe": label, "radius": s, "value": v}
        for label, values in sorted(report.monotone_profiles.items())
        for s, v in zip(report.profile_radii, values)
    ]
    write_csv(out / "monotonicity.csv", rows, ["probe", "radius", "value"])
    return (
        _expect("topping_passed", config.expect.topping_passed, report.topping_passed)
        + _expect("monotonicity_passed", config.expect.monotonicity_passed, report.monotonicity_passed)
    )


def run_annulus(config: RunConfig, out: Path) -> list[str]:
    solution = annulus_critical(config.gamma, config.volume)
    payload = {"annulus": solution.to_dict()}
    if solution.exists and config.annulus_check_resolution is not None:
        spec = ShapeSpec(Annulus(solution.outer_radius, solution.inner_radius), config.annulus_check_resolution)
        b = tessellate(spec)
        report = evaluate(b, config.gamma, field=potential_field(b, config.threads))
        payload["surface_check"] = {
            "relative_residual": report.relative_residual,
            "lagrange_multiplier": report.lagrange_multiplier,
            "vertices": b.n_vertices,
        }
    write_json(out / "annulus.json", payload)
    return _expect("annulus_exists", config.expect.annulus_exists, solution.exists)


def run_ball_oracle(config: RunConfig, out: Path) -> list[str]:
    n = config.dimension
    volume = unit_ball_volume(n)
    radius = equivalent_radius(n, volume)
    table = ball_spectrum_table(n, config.max_mode, config.gamma, radius)
    nl = ball_nonlocal_energy(n, volume)
    perimeter = n * volume / radius
    payload = {
        "dimension": n,
        "gamma": config.gamma,
        "radius": radius,
        "modes": [row.to_dict() for row in table],
        "potential_max": ball_potential_max(n, volume),
        "gradient_max": ball_gradient_max(n, volume),
        "normal_derivative": ball_normal_derivative(n, radius),
        "perimeter": perimeter,
        "nonlocal_energy": nl,
        "energy": perimeter + config.gamma * nl,
    }
    write_json(out / "ball_oracle.json", payload)
    write_csv(out / "ball_modes.csv", [row.to_dict() for row in table], ["mode", "eigenvalue", "multiplicity"])
    return []


def _sweep_item(config: RunConfig, b: Boundary, gamma: float) -> dict:
    row: dict = {"gamma": gamma, "error": None}
    try:
        if config.sweep_target == "spectrum":
            sv = assemble(b, gamma, vertex_cap=config.potential.vertex_cap)
            k = min(config.stability.eigenpairs, b.n_vertices - 1)
            report = spectrum(sv, k=k, tolerance=config.stability.tolerance)
            row["verdict"] = report.verdict.value
            row.update({f"mu_{j + 1}": float(v) for j, v in enumerate(report.eigenvalues)})
        elif config.sweep_target == "flow":
            result = find_critical(b, gamma, config.flow.build())
            row["converged"] = result.converged
            row["steps"] = result.steps
            row["asphericity"] = shape_census(result.boundary).asphericity
            row["J"] = result.report.energy if result.report is not None else None
        else:
            row.update(energy_sweep(b, [gamma])[0])
    except (NumericalFailure, ValueError) as e:
        logger.error(f"Sweep item gamma={gamma} failed: {e}", exc_info=True)
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def _sweep_columns(config: RunConfig, rows: list[dict]) -> list[str]:
    if config.sweep_target == "spectrum":
        width = max((sum(1 for k in r if k.startswith("mu_")) for r in rows), default=0)
        return ["gamma", "verdict"] + [f"mu_{j + 1}" for j in range(width)] + ["error"]
    if config.sweep_target == "flow":
        return ["gamma", "converged", "steps", "asphericity", "J", "error"]
    return SWEEP_COLUMNS + ["error"]


def sweep(config: RunConfig, out: Path) -> list[str]:
    """
    Run the sweep target once per γ, concurrently up to config.threads.

    Per-γ failures are logged and recorded in the row's error column.
    """
    if not config.gammas or len(config.gammas) < 2:
        raise ConfigError("sweeps need at least two gamma values")
    b = build_boundary(config)

    def item(gamma: float) -> dict:
        return _sweep_item(config, b, gamma)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(item, config.gammas))
    else:
        rows = [item(g) for g in config.gammas]

    failed = sum(r["error"] is not None for r in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} sweep items failed")
    write_csv(out / "sweep.csv", rows, _sweep_columns(config, rows))
    write_json(out / "sweep.json", {"target": config.sweep_target, "rows": rows})
    expected = config.expect.verdict
    if expected is not None and config.sweep_target == "spectrum":
        wrong = [r["gamma"] for r in rows if r.get("verdict") != expected]
        if wrong:
            return [f"verdict expected {expected} at gamma {wrong}"]
    return []


_DISPATCH: dict[ExperimentKind, Callable[[RunConfig, Path], list[str]]] = {
    ExperimentKind.ENERGY: run_energy,
    ExperimentKind.SPECTRUM: run_spectrum,
    ExperimentKind.FLOW: run_flow,
    ExperimentKind.DIAGNOSE: run_diagnose,
    ExperimentKind.ANNULUS: run_annulus,
    ExperimentKind.BALL_ORACLE: run_ball_oracle,
    ExperimentKind.SWEEP: sweep,
}


def run(config: RunConfig, out: Optional[Union[str, Path]] = None) -> RunManifest:
    """
    Execute one configured experiment and write its manifest.

    Raises:
        ConfigError: invalid configuration or output directory
        NumericalFailure: eigensolve, flow stall or mesh collapse
        CheckFailedError: an expectation in config.expect did not hold
    """
    directory = resolve_output_dir(config, out)
    manifest = RunManifest(config=config.model_dump(mode="json"), version=__version__)
    logger.info(f"Running {config.kind.value} experiment {config.name!r} into {directory}")
    try:
        failures = _DISPATCH[config.kind](config, directory)
    except Exception as e:
        manifest.status = type(e).__name__
        manifest.exit_code = int(exit_code_for(e))
        manifest.finalize(directory).write()
        raise
    if failures:
        manifest.status = "check_failed"
        manifest.exit_code = int(ExitCode.CHECK_FAILED)
    manifest.finalize(directory).write()
    if failures:
        raise CheckFailedError(failures)
    logger.info(f"Run {config.name!r} finished with {len(manifest.artifacts)} artifact(s)")
    return manifest


def exit_code_for(error: BaseException) -> ExitCode:
    if isinstance(error, CheckFailedError):
        return ExitCode.CHECK_FAILED
    if isinstance(error, NumericalFailure):
        return ExitCode.NUMERICAL
    if isinstance(error, (ConfigError, ValidationError, GeometryError, UnsupportedOperationError)):
        return ExitCode.CONFIG
    return ExitCode.UNEXPECTED


def execute(
    config_path: Union[str, Path],
    out: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
    dump_mesh_every: Optional[int] = None,
    export_matrices: bool = False,
) -> int:
    """Load, apply command-line overrides, run, and map the outcome to an exit status."""
    try:
        config = load_config(config_path)
        updates = {}
        if threads is not None:
            updates["threads"] = threads
        if dump_mesh_every is not None:
            updates["dump_mesh_every"] = dump_mesh_every
        if export_matrices:
            updates["export_matrices"] = True
        if updates:
            config = RunConfig.model_validate({**config.model_dump(), **updates})
        run(config, out)
    except Exception as e:
        code = exit_code_for(e)
        if code == ExitCode.UNEXPECTED:
            logger.error(f"Unexpected failure: {e}", exc_info=True)
        else:
            logger.error(f"Run failed ({code.name.lower()}): {e}")
        print(f"error: {e}", file=sys.stderr)
        return int(code)
    return int(ExitCode.OK)

"""Tests for run configuration, artifact writers, the runner and the entry point."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from main import build_parser, main
from src.cli.config import (
    RandomPerturbationConfig,
    RunConfig,
    ShapeConfig,
    default_output_root,
    default_threads,
    load_config,
    random_amplitudes,
)
from src.cli.exporters import MANIFEST_NAME, RunManifest, format_cell, sha256_file, write_csv, write_json
from src.cli.runner import ExitCode, execute, exit_code_for, resolve_output_dir, run
from src.energy.functional import SWEEP_COLUMNS
from src.models.errors import CheckFailedError, ConfigError, NumericalFailure
from src.models.shapes import PerturbedBall


SMALL_SPHERE = {"kind": "ball", "resolution": 1}


def write_config(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestRunConfig:
    """Test config validation."""

    def test_defaults(self, monkeypatch):
        """Test nested option defaults."""
        monkeypatch.delenv("NONLOCAL_THREADS", raising=False)
        config = RunConfig(kind="spectrum", shape=SMALL_SPHERE, gamma=1.0)
        assert config.threads == 1
        assert config.stability.eigenpairs == 10
        assert config.flow.max_steps == 2000
        assert config.potential.nl_rule == "gauss"
        assert config.gamma_values() == [1.0]

    @pytest.mark.parametrize("data, message", [
        ({"kind": "spectrum", "shape": SMALL_SPHERE}, "need gamma"),
        ({"kind": "energy", "gamma": 1.0}, "exactly one of shape and mesh_path"),
        ({"kind": "energy", "gamma": 1.0, "shape": SMALL_SPHERE, "mesh_path": "a.off"}, "exactly one"),
        ({"kind": "annulus", "gamma": 1.0, "volume": 1.0, "shape": SMALL_SPHERE}, "take no input boundary"),
        ({"kind": "annulus", "gamma": 1.0}, "need volume"),
        ({"kind": "sweep", "shape": SMALL_SPHERE, "gammas": [1.0]}, "at least two gamma"),
        ({"kind": "sweep", "shape": SMALL_SPHERE, "gammas": [1.0, -2.0]}, "nonnegative"),
        ({"kind": "energy", "shape": SMALL_SPHERE}, "gamma or gammas"),
        ({"kind": "energy", "shape": {"kind": "ellipsoid", "semi_axes": [1, 1, 2]}, "gamma": 1.0,
          "random_perturbation": {}}, "random_perturbation"),
        ({"kind": "teleport", "shape": SMALL_SPHERE}, "kind"),
    ])
    def test_invalid(self, data, message):
        """Test rejected configurations."""
        with pytest.raises(ValidationError, match=message):
            RunConfig.model_validate(data)

    def test_shape_build(self):
        """Test translation into analytic shapes."""
        spec = ShapeConfig(kind="perturbed_ball", amplitudes={"2,0": 0.1}, resolution=2).build()
        assert isinstance(spec.shape, PerturbedBall)
        assert spec.shape.amplitudes == {(2, 0): 0.1}
        assert spec.resolution == 2

    def test_shape_build_errors(self):
        """Test that missing shape parameters become ConfigError."""
        with pytest.raises(ConfigError, match="Invalid annulus shape"):
            ShapeConfig(kind="annulus", outer_radius=1.0).build()
        with pytest.raises(ConfigError, match="Invalid ellipsoid shape"):
            ShapeConfig(kind="ellipsoid").build()

    def test_random_amplitudes(self):
        """Test seeded, distinct modes of degree at least two."""
        settings = RandomPerturbationConfig(max_degree=3, amplitude_scale=0.05, count=4)
        first = random_amplitudes(3, settings, seed=7)
        assert first == random_amplitudes(3, settings, seed=7)
        assert len(first) == 4
        assert all(ell >= 2 and abs(m) <= ell for ell, m in first)
        assert all(abs(a) <= 0.05 for a in first.values())
        planar = random_amplitudes(2, settings, seed=7)
        assert all(abs(k) in (2, 3) for k in planar)


class TestEnvironment:
    """Test environment defaults."""

    def test_threads(self, monkeypatch):
        """Test NONLOCAL_THREADS parsing."""
        monkeypatch.setenv("NONLOCAL_THREADS", "3")
        assert default_threads() == 3
        monkeypatch.setenv("NONLOCAL_THREADS", "0")
        assert default_threads() == 1
        monkeypatch.setenv("NONLOCAL_THREADS", "many")
        assert default_threads() == 1

    def test_output_root(self, monkeypatch, tmp_path):
        """Test NONLOCAL_OUTPUT_ROOT and output directory precedence."""
        monkeypatch.setenv("NONLOCAL_OUTPUT_ROOT", str(tmp_path / "root"))
        assert default_output_root() == tmp_path / "root"
        config = RunConfig(name="demo", kind="ball-oracle", gamma=1.0)
        assert resolve_output_dir(config) == tmp_path / "root" / "demo"
        config = RunConfig(name="demo", kind="ball-oracle", gamma=1.0, output_dir=str(tmp_path / "cfg"))
        assert resolve_output_dir(config) == tmp_path / "cfg"
        assert resolve_output_dir(config, tmp_path / "cli") == tmp_path / "cli"
        assert (tmp_path / "cli").is_dir()


class TestLoadConfig:
    """Test reading config files."""

    def test_valid(self, tmp_path):
        """Test a valid file."""
        path = write_config(tmp_path / "c.json", {"kind": "ball-oracle", "gamma": 2.0, "dimension": 2})
        config = load_config(path)
        assert config.dimension == 2
        assert config.kind.value == "ball-oracle"

    def test_invalid_json(self, tmp_path):
        """Test malformed JSON."""
        path = tmp_path / "c.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="Cannot read config"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        """Test a missing file."""
        with pytest.raises(ConfigError, match="Cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_failed_validation(self, tmp_path):
        """Test that validation errors become ConfigError."""
        path = write_config(tmp_path / "c.json", {"kind": "spectrum", "shape": SMALL_SPHERE})
        with pytest.raises(ConfigError, match="Invalid config"):
            load_config(path)


class TestExporters:
    """Test artifact writers."""

    def test_format_cell(self):
        """Test CSV cell formatting."""
        assert format_cell(None) == ""
        assert format_cell(True) == "true"
        assert format_cell(np.bool_(False)) == "false"
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(3) == "3"
        assert float(format_cell(math.pi)) == math.pi

    def test_write_csv(self, tmp_path):
        """Test header and column order."""
        path = write_csv(tmp_path / "t.csv", [{"b": 2.5, "a": None}, {"a": True}], ["a", "b"])
        assert path.read_text(encoding="utf-8").splitlines() == ["a,b", ",2.5", "true,"]

    def test_write_json(self, tmp_path):
        """Test sorted keys and numpy conversion."""
        path = write_json(tmp_path / "sub" / "t.json", {"b": np.float64(1.5), "a": np.arange(2)})
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [0, 1], "b": 1.5}

    def test_manifest(self, tmp_path):
        """Test that the manifest hashes every artifact except itself."""
        write_json(tmp_path / "one.json", {"x": 1})
        write_csv(tmp_path / "nested" / "two.csv", [], ["x"])
        manifest = RunManifest(config={"kind": "energy"}, version="1.0.0").finalize(tmp_path)
        manifest.write()
        assert sorted(manifest.artifacts) == ["nested/two.csv", "one.json"]
        assert manifest.artifacts["one.json"] == sha256_file(tmp_path / "one.json")
        saved = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert saved["status"] == "ok"
        assert saved["finished_at"] is not None

    def test_manifest_requires_finalize(self):
        """Test that writing needs an output directory."""
        with pytest.raises(ValueError, match="finalized"):
            RunManifest(config={}, version="1.0.0").write()


class TestRunner:
    """Test experiment dispatch."""

    def test_ball_oracle(self, tmp_path):
        """Test the closed-form ball artifacts."""
        config = RunConfig(kind="ball-oracle", gamma=1.0, max_mode=3)
        manifest = run(config, tmp_path)
        assert sorted(manifest.artifacts) == ["ball_modes.csv", "ball_oracle.json"]
        payload = json.loads((tmp_path / "ball_oracle.json").read_text(encoding="utf-8"))
        assert payload["modes"][1]["eigenvalue"] == pytest.approx(56.0 / 15.0)
        assert payload["nonlocal_energy"] == pytest.approx(8.0 * math.pi / 15.0)
        assert payload["energy"] == pytest.approx(4.0 * math.pi + 8.0 * math.pi / 15.0)
        lines = (tmp_path / "ball_modes.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "mode,eigenvalue,multiplicity"
        assert lines[1] == "1,0,3"
        assert manifest.exit_code == 0

    def test_annulus(self, tmp_path):
        """Test the annulus artifact."""
        config = RunConfig(kind="annulus", gamma=50.0, volume=4.0 * math.pi / 3.0, expect={"annulus_exists": True})
        run(config, tmp_path)
        payload = json.loads((tmp_path / "annulus.json").read_text(encoding="utf-8"))
        assert payload["annulus"]["exists"] is True
        assert 0.1 < payload["annulus"]["inner_radius"] < 0.5

    def test_energy(self, tmp_path):
        """Test energy artifacts on a coarse sphere."""
        config = RunConfig(kind="energy", shape=SMALL_SPHERE, gammas=[0.0, 1.0])
        manifest = run(config, tmp_path)
        assert {"energy.json", "energy.csv", MANIFEST_NAME} <= {p.name for p in tmp_path.iterdir()}
        assert set(manifest.artifacts) == {"energy.json", "energy.csv"}
        lines = (tmp_path / "energy.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 3
        payload = json.loads((tmp_path / "energy.json").read_text(encoding="utf-8"))
        assert len(payload["reports"]) == 2
        assert "scaling" in payload

    def test_repeated_runs_are_identical(self, tmp_path):
        """Test that the same config and seed reproduce byte-identical artifacts."""
        data = {
            "kind": "energy",
            "shape": SMALL_SPHERE,
            "gammas": [0.0, 1.0],
            "random_perturbation": {"count": 2},
            "seed": 7,
        }
        first = run(RunConfig(**data), tmp_path / "first")
        second = run(RunConfig(**data), tmp_path / "second")
        assert first.artifacts == second.artifacts
        for name in first.artifacts:
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
        other = run(RunConfig(**{**data, "seed": 8}), tmp_path / "other")
        assert other.artifacts["energy.csv"] != first.artifacts["energy.csv"]

    def test_energy_sweep(self, tmp_path):
        """Test a sweep over γ with the energy target."""
        config = RunConfig(kind="sweep", shape=SMALL_SPHERE, gammas=[0.0, 2.0], sweep_target="energy")
        run(config, tmp_path)
        lines = (tmp_path / "sweep.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS + ["error"])
        assert len(lines) == 3
        assert all(line.endswith(",") for line in lines[1:])

    def test_failed_expectation(self, tmp_path):
        """Test that a failed check raises and still writes the manifest."""
        config = RunConfig(kind="annulus", gamma=0.01, volume=1.0, expect={"annulus_exists": True})
        with pytest.raises(CheckFailedError, match="annulus_exists"):
            run(config, tmp_path)
        saved = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert saved["exit_code"] == 4
        assert saved["status"] == "check_failed"
        assert "annulus.json" in saved["artifacts"]

    def test_missing_mesh(self, tmp_path):
        """Test that a missing mesh file is a configuration error."""
        config = RunConfig(kind="energy", mesh_path=str(tmp_path / "none.off"), gamma=1.0)
        with pytest.raises(ConfigError, match="does not exist"):
            run(config, tmp_path / "out")

    def test_exit_codes(self):
        """Test the error to exit status mapping."""
        assert exit_code_for(CheckFailedError(["x"])) == ExitCode.CHECK_FAILED
        assert exit_code_for(ConfigError("x")) == ExitCode.CONFIG
        assert exit_code_for(NumericalFailure("x")) == ExitCode.NUMERICAL
        assert exit_code_for(RuntimeError("x")) == ExitCode.UNEXPECTED


class TestExecute:
    """Test config execution and exit statuses."""

    def test_ok(self, tmp_path):
        """Test a successful run."""
        path = write_config(tmp_path / "c.json", {"kind": "ball-oracle", "gamma": 0.5})
        assert execute(path, out=tmp_path / "out") == 0
        assert (tmp_path / "out" / MANIFEST_NAME).exists()

    def test_bad_config(self, tmp_path):
        """Test exit status 2 for invalid configs."""
        path = write_config(tmp_path / "c.json", {"kind": "spectrum"})
        assert execute(path, out=tmp_path / "out") == 2

    def test_bad_override(self, tmp_path):
        """Test exit status 2 for an invalid command-line override."""
        path = write_config(tmp_path / "c.json", {"kind": "ball-oracle", "gamma": 0.5})
        assert execute(path, out=tmp_path / "out", threads=0) == 2

    def test_check_failed(self, tmp_path):
        """Test exit status 4 when an expectation fails."""
        data = {"kind": "annulus", "gamma": 0.01, "volume": 1.0, "expect": {"annulus_exists": True}}
        path = write_config(tmp_path / "c.json", data)
        assert execute(path, out=tmp_path / "out") == 4


class TestMain:
    """Test the command-line entry point."""

    def test_parser(self):
        """Test argument parsing."""
        args = build_parser().parse_args(["run", "c.json", "--threads", "2", "--export-matrices"])
        assert args.command == "run"
        assert args.config == Path("c.json")
        assert args.threads == 2
        assert args.export_matrices
        assert args.dump_mesh_every is None

    def test_requires_command(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_main(self, tmp_path, monkeypatch):
        """Test a full run through main()."""
        monkeypatch.chdir(tmp_path)
        path = write_config(tmp_path / "c.json", {"kind": "ball-oracle", "gamma": 1.0, "dimension": 2})
        assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 0
        payload = json.loads((tmp_path / "out" / "ball_oracle.json").read_text(encoding="utf-8"))
        assert payload["dimension"] == 2

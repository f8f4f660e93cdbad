"""Unit tests for the command-line front end."""

import json
import logging
from unittest.mock import patch

import pytest

from rootbasins.basin_engine import Engine
from rootbasins.cli.basin_cli import main, parse_config, parse_roots
from rootbasins.config import AppConfig
from rootbasins.function_core import NewtonQuotient, PolyFromRoots, RootSpec


@pytest.fixture
def app_config(tmp_path):
    """Environment settings with logs under tmp_path."""
    config = AppConfig(seed=0, workers=1, log_dir=str(tmp_path / "logs"), log_level="INFO")
    root_logger = logging.getLogger()
    handlers = list(root_logger.handlers)
    with patch("rootbasins.cli.basin_cli.load_config", return_value=config):
        yield config
    for handler in root_logger.handlers[:]:
        if handler not in handlers:
            root_logger.removeHandler(handler)
            handler.close()


class TestParseRoots:
    """Tests for parse_roots."""

    def test_with_multiplicity(self):
        """Test re,im and re,im,mult entries."""
        fn = parse_roots("0,0; 0,1,2")

        assert fn == PolyFromRoots((RootSpec(0), RootSpec(1j, 2)))

    @pytest.mark.parametrize("text", ["1", "a,b", "0,0,x", " ; "])
    def test_invalid(self, text):
        """Test error for malformed root lists."""
        with pytest.raises(ValueError, match="Invalid root"):
            parse_roots(text)


class TestParseConfig:
    """Tests for parse_config."""

    def test_defaults(self, app_config):
        """Test BNQN on f1 with method defaults and a jittered grid."""
        config = parse_config([])

        assert config.engine is Engine.BNQN
        assert config.roots == (0, 1j, 3 + 2j)
        assert config.method.root_tol == 1e-6
        assert config.method.theta == 0.0
        assert config.integrator is None
        assert config.grid.nx == 240
        assert config.grid.jitter != (0.0, 0.0)
        assert config.workers == 1

    def test_flow_settings(self, app_config):
        """Test flow engines get an IntegratorConfig with the looser root threshold."""
        config = parse_config(["--engine", "flow_plain", "--h", "0.02", "--t-end", "50",
                               "--stepper", "dp54"])

        assert config.method is None
        assert config.integrator.h == 0.02
        assert config.integrator.t_end == 50.0
        assert config.integrator.stepper == "dp54"
        assert config.integrator.root_tol == 1e-3

    def test_bnqn_v2_forces_theta(self, app_config):
        """Test bnqn_v2 always normalizes the direction."""
        config = parse_config(["--engine", "bnqn_v2", "--theta", "0"])

        assert config.method.theta == 1.0

    def test_bounds_and_no_jitter(self, app_config):
        """Test a custom window without jitter."""
        config = parse_config(["--bounds=-2,2,-1,3", "--grid-n", "32", "--no-jitter"])

        assert (config.grid.x_min, config.grid.x_max) == (-2.0, 2.0)
        assert (config.grid.y_min, config.grid.y_max) == (-1.0, 3.0)
        assert config.grid.jitter == (0.0, 0.0)

    def test_quotient_transform(self, app_config):
        """Test f/f' keeps the roots of f without multiplicities."""
        config = parse_config(["--function", "f9", "--transform", "quotient"])

        assert isinstance(config.function, NewtonQuotient)
        assert config.roots == (0, 1j)
        assert config.function_name == "f9/f9'"

    def test_stochastic(self, app_config):
        """Test the noise protocol and its relaxed threshold."""
        config = parse_config(["--stochastic", "--epsilon", "1e-4", "--seed", "4"])

        assert config.stochastic.epsilon == 1e-4
        assert config.stochastic.relaxed_root_tol == pytest.approx(1e-3)
        assert config.stochastic.seed == 4

    def test_voronoi_warns_about_ignored_options(self, app_config, caplog):
        """Test voronoi warns only when solver options were given."""
        with caplog.at_level(logging.WARNING, logger="rootbasins.cli.basin_cli"):
            parse_config(["--engine", "voronoi"])
        assert not caplog.records

        with caplog.at_level(logging.WARNING, logger="rootbasins.cli.basin_cli"):
            parse_config(["--engine", "voronoi", "--tau", "2", "--t-end", "5"])
        warnings = [r for r in caplog.records if r.levelno == logging.WARNING]

        assert len(warnings) == 1
        assert "tau, t_end" in warnings[0].getMessage()

    def test_config_file(self, app_config, tmp_path):
        """Test file values become defaults that flags still override."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"engine": "newton", "grid_n": 16, "seed": 3}))

        config = parse_config(["--config", str(path), "--grid-n", "8"])

        assert config.engine is Engine.NEWTON
        assert config.grid.nx == 8
        assert config.seed == 3

    def test_config_file_unknown_key(self, app_config, tmp_path):
        """Test error for keys that are not options."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"colour": "red"}))

        with pytest.raises(ValueError, match="Unknown keys"):
            parse_config(["--config", str(path)])

    @pytest.mark.parametrize(
        "argv, message",
        [
            (["--engine", "halley"], "Unknown engine"),
            (["--function", "f30"], "Unknown function"),
            (["--transform", "square"], "Invalid transform"),
            (["--bounds=-2,2,-2"], "Invalid bounds"),
            (["--roots", "0,0;1,0;2,0;3,0;4,0;5,0;6,0;7,0;8,0"], "at most 8"),
            (["--engine", "flow_plain", "--stochastic"], "not supported"),
            (["--function", "f23", "--stochastic"], "needs a polynomial"),
            (["--rho", "0.4"], "rho must satisfy"),
            (["--workers", "0"], "Invalid workers"),
        ],
    )
    def test_invalid(self, app_config, argv, message):
        """Test configuration errors."""
        with pytest.raises(ValueError, match=message):
            parse_config(argv)


class TestMain:
    """Tests for main."""

    def test_invalid_arguments_exit_2(self, app_config, capsys):
        """Test configuration errors exit with status 2."""
        with pytest.raises(SystemExit) as exc_info:
            main(["--engine", "halley"])

        assert exc_info.value.code == 2
        assert "Unknown engine" in capsys.readouterr().err

    def test_list_functions(self, app_config, capsys):
        """Test the catalog listing."""
        main(["--list-functions"])
        out = capsys.readouterr().out

        assert "f1" in out
        assert "f25" in out
        assert "TranscendentalF23" in out

    def test_outputs_and_comparison(self, app_config, tmp_path, capsys):
        """Test a voronoi run writes its files and compares equal to itself."""
        ppm = tmp_path / "voronoi.ppm"
        csv_path = tmp_path / "voronoi.csv"
        stats = tmp_path / "voronoi.json"
        common = ["--engine", "voronoi", "--grid-n", "8", "--no-progress"]

        main([*common, "--out-ppm", str(ppm), "--out-csv", str(csv_path),
              "--out-stats", str(stats)])
        summary = json.loads(stats.read_text())

        assert ppm.read_bytes().startswith(b"P6\n8 8\n255\n")
        assert len(csv_path.read_text().splitlines()) == 65
        assert summary["engine"] == "voronoi"
        assert sum(summary["root_counts"]) + round(summary["black_fraction"] * 64) == 64

        main([*common, "--compare-with", str(ppm)])
        out = capsys.readouterr().out

        assert "mismatch: 0.000000" in out
        assert "mismatch (black excluded): 0.000000" in out

    def test_repeatable_outputs(self, app_config, tmp_path):
        """Test identical invocations write byte-identical files."""
        outputs = []
        for run in ("a", "b"):
            ppm, csv_path = tmp_path / f"{run}.ppm", tmp_path / f"{run}.csv"
            main(["--engine", "random_relaxed", "--grid-n", "6", "--max-iter", "200",
                  "--seed", "7", "--out-ppm", str(ppm), "--out-csv", str(csv_path),
                  "--no-progress"])
            outputs.append((ppm.read_bytes(), csv_path.read_bytes()))

        assert outputs[0] == outputs[1]

    def test_run_failure_exit_1(self, app_config, tmp_path):
        """Test errors during the run exit with status 1."""
        ppm = tmp_path / "small.ppm"
        main(["--engine", "voronoi", "--grid-n", "4", "--out-ppm", str(ppm), "--no-progress"])

        with pytest.raises(SystemExit) as exc_info:
            main(["--engine", "voronoi", "--grid-n", "8", "--compare-with", str(ppm),
                  "--no-progress"])

        assert exc_info.value.code == 1

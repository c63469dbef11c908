"""End-to-end tests of the pulse command line."""
import json

import numpy as np
import pytest

from app.cli.common import EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK
from app.main import main
from app.models.rotation import RotationDerivatives
from app.services import gradients
from app.services.gradcheck import POLAR_NOTE

SMALL_RUN = {
    "name": "small",
    "pulse": {"basis": "cartesian_xy", "n_digits": 3, "dt_us": 20.0},
    "grid": {"n_off": 3, "bandwidth_hz": 4000.0},
    "target": {"type": "pp", "rho0": "z", "lambda_f": "-y"},
    "constraint": {"type": "amplitude", "max_amplitude_hz": 10000.0},
    "optimizer": {"max_iterations": 50, "seed": 2},
    "starts": 2,
    "evaluation": {"density": 2},
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL_RUN, indent=2))
    return path


class TestUsage:
    """Argument and configuration errors."""

    def test_missing_command_exits_invalid(self):
        """No subcommand exits with the invalid-input code."""
        with pytest.raises(SystemExit) as caught:
            main([])
        assert caught.value.code == EXIT_INVALID

    def test_missing_config_exits_invalid(self):
        """optimize without --config is rejected."""
        with pytest.raises(SystemExit) as caught:
            main(["optimize"])
        assert caught.value.code == EXIT_INVALID

    def test_invalid_config_exits_invalid(self, tmp_path, capsys):
        """A bad field is named on stderr and nothing is written."""
        data = json.loads(json.dumps(SMALL_RUN))
        data["grid"]["n_off"] = 0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data, indent=2))
        assert main(["optimize", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_INVALID
        assert "grid.n_off" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()


class TestOptimize:
    """optimize and simulate end to end."""

    def test_writes_every_artifact(self, small_config, tmp_path, capsys):
        """Shapes, trajectory, profile and report are all written."""
        out = tmp_path / "run"
        assert main(["optimize", "--config", str(small_config), "--out", str(out), "--threads", "1"]) == EXIT_OK
        for name in ("small.json", "small.jdx", "trajectory.tsv", "profile.tsv", "report.json"):
            assert (out / name).is_file()
        report = json.loads((out / "report.json").read_text())
        assert report["n_digits"] == 3
        assert report["duration_us"] == pytest.approx(60.0)
        assert len(report["starts"]) == 2
        assert report["feasible"] is True
        assert 0.0 <= report["evaluation_quality"] <= 1.0
        trajectory = (out / "trajectory.tsv").read_text().splitlines()
        assert trajectory[0] == "# iteration quality objective"
        assert len(trajectory) == report["iterations"] + 2
        assert "small: quality" in capsys.readouterr().out

    def test_report_carries_power_and_energy(self, small_config, tmp_path):
        """Average power and E/h of the exported shape agree with its duration and limit."""
        out = tmp_path / "run"
        assert main(["optimize", "--config", str(small_config), "--out", str(out), "--threads", "1"]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        power = report["average_power_hz2"]
        assert 0.0 < power <= 10000.0**2 * (1.0 + 1e-9)
        assert report["energy_over_h_hz2s"] == pytest.approx(power * 60e-6, rel=1e-12)

    def test_same_seed_gives_identical_files(self, small_config, tmp_path):
        """Equal seeds give byte-identical shape files."""
        for name in ("a", "b"):
            main(["optimize", "--config", str(small_config), "--out", str(tmp_path / name), "--format", "native"])
        assert (tmp_path / "a" / "small.json").read_bytes() == (tmp_path / "b" / "small.json").read_bytes()
        assert not (tmp_path / "a" / "small.jdx").exists()

    def test_overrides(self, small_config, tmp_path):
        """Command-line flags override the configuration."""
        out = tmp_path / "run"
        args = ["optimize", "--config", str(small_config), "--out", str(out), "--starts", "1", "--seed", "7", "--basis", "polar_amp_phase"]
        assert main(args) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["basis"] == "polar_amp_phase"
        assert [start["seed"] for start in report["starts"]] == [7]

    def test_simulate_a_written_shape(self, small_config, tmp_path, capsys):
        """Simulating the exported shape reproduces the evaluation quality."""
        run = tmp_path / "run"
        main(["optimize", "--config", str(small_config), "--out", str(run)])
        optimized = json.loads((run / "report.json").read_text())["evaluation_quality"]
        capsys.readouterr()
        sim = tmp_path / "sim"
        args = ["simulate", "--config", str(small_config), "--shape", str(run / "small.json"), "--out", str(sim)]
        assert main(args) == EXIT_OK
        report = json.loads((sim / "profile_report.json").read_text())
        assert report["cells"] == 5
        assert report["band_average"] == pytest.approx(optimized, abs=1e-12)
        assert "band average" in capsys.readouterr().out

    def test_simulate_jcamp_shape(self, small_config, tmp_path):
        """JCAMP shapes can be simulated too."""
        run = tmp_path / "run"
        main(["optimize", "--config", str(small_config), "--out", str(run)])
        sim = tmp_path / "sim"
        args = ["simulate", "--config", str(small_config), "--shape", str(run / "small.jdx"), "--out", str(sim), "--density", "1"]
        assert main(args) == EXIT_OK
        assert json.loads((sim / "profile_report.json").read_text())["cells"] == 3

    def test_missing_shape_exits_invalid(self, small_config, tmp_path):
        """A missing shape file is invalid input."""
        args = ["simulate", "--config", str(small_config), "--shape", str(tmp_path / "none.json"), "--out", str(tmp_path)]
        assert main(args) == EXIT_INVALID


class TestGradcheck:
    """Derivative checks from the command line."""

    def test_cartesian_passes(self, tmp_path, capsys):
        """All Cartesian oracles pass and are reported."""
        out = tmp_path / "gradcheck.json"
        args = ["gradcheck", "--basis", "cartesian_xy", "--instances", "3", "--digits", "1", "5", "--out", str(out)]
        assert main(args) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["passed"] is True
        assert {entry["oracle"] for entry in report["entries"]} >= {"exponential_rotation", "fd_shape"}
        assert "FAIL" not in capsys.readouterr().out

    def test_polar_prints_note(self, capsys):
        """Polar checks print the coordinate note."""
        assert main(["gradcheck", "--basis", "polar", "--instances", "2", "--digits", "1"]) == EXIT_OK
        assert f"note: {POLAR_NOTE}" in capsys.readouterr().out

    def test_flipped_entry_is_reported(self, monkeypatch, capsys):
        """A wrong derivative entry fails with its name printed."""
        original = gradients.d_rotation_cartesian

        def flipped(p, *args, **kwargs):
            derivatives = original(p, *args, **kwargs)
            values = np.array(derivatives.values)
            values[..., 0, 0, 0] *= -1.0
            return RotationDerivatives(derivatives.labels, values)

        monkeypatch.setattr(gradients, "d_rotation_cartesian", flipped)
        assert main(["gradcheck", "--basis", "cartesian_xy", "--instances", "3", "--digits", "1"]) == EXIT_CHECK_FAILED
        output = capsys.readouterr().out
        assert "FAIL" in output
        assert "dR_xx/dtheta_x" in output

    def test_unknown_basis_exits_invalid(self):
        """Unknown basis names are rejected."""
        assert main(["gradcheck", "--basis", "spherical", "--instances", "1", "--digits", "1"]) == EXIT_INVALID


class TestBench:
    """Benchmark command output."""

    def test_per_call_report(self, tmp_path, capsys):
        """Per-call mode reports every control and states each target."""
        out = tmp_path / "bench.json"
        assert main(["bench", "--calls", "5", "--per-call", "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["per_call"] is True
        assert len(report["entries"]) == 18
        assert {e["control"] for e in report["entries"]} == {"theta_x", "theta_y", "theta_z"}
        assert len(report["ratios"]) == 12
        assert set(report["targets"]) == {
            "PP exponential >= 20x analytic",
            "PP finite_difference within 3x of analytic",
            "UR exponential >= 20x analytic",
            "UR finite_difference within 3x of analytic",
        }
        output = capsys.readouterr().out
        assert "PP theta_y exponential/analytic" in output
        assert "UR exponential >= 20x analytic (per call):" in output


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

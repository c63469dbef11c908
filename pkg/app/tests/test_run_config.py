"""Tests for run configuration documents and the bundled presets."""
import json
from pathlib import Path

import numpy as np
import pytest

from app.core.errors import ConfigValidationError
from app.models.problem import AmplitudeLimit, EnergyLimit, InitStrategy, PowerLimit, PPTarget, SaturationTarget
from app.models.pulse import BasisKind
from app.schemas.run_config import load_run_config, parse_run_config, run_config_from_dict
from app.utils.presets import SCENARIOS, named_state, scenario, ur_quaternion

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

MINIMAL = {
    "pulse": {"basis": "cartesian_xy", "n_digits": 4, "dt_us": 5.0},
    "target": {"type": "pp", "rho0": "z", "lambda_f": "-y"},
}


def with_changes(**sections):
    data = json.loads(json.dumps(MINIMAL))
    data.update(sections)
    return data


class TestValidation:
    """Document validation and error locations."""

    def test_minimal_document(self):
        """Pulse and target alone give a one-point unconstrained problem."""
        config = run_config_from_dict(MINIMAL)
        problem = config.to_problem()
        assert problem.grid.n_points == 1
        assert problem.constraint is None
        assert isinstance(problem.target, PPTarget)
        assert problem.shape_template.dt[0] == pytest.approx(5e-6)

    def test_zero_offsets_reports_line_and_path(self):
        """Errors carry the source line and the field path."""
        text = (
            '{\n'
            '  "pulse": {"basis": "cartesian_xy", "n_digits": 4, "dt_us": 5.0},\n'
            '  "grid": {\n'
            '    "n_off": 0,\n'
            '    "bandwidth_hz": 1000.0\n'
            '  },\n'
            '  "target": {"type": "pp", "lambda_f": "-y"}\n'
            '}\n'
        )
        with pytest.raises(ConfigValidationError) as caught:
            parse_run_config(text)
        assert caught.value.line == 4
        assert caught.value.path == "grid.n_off"
        assert str(caught.value).startswith("line 4 (grid.n_off)")

    def test_unknown_key_is_rejected(self):
        """Unknown keys are errors."""
        with pytest.raises(ConfigValidationError, match="pulse.shape"):
            run_config_from_dict(with_changes(pulse={**MINIMAL["pulse"], "shape": "gauss"}))

    def test_invalid_json(self):
        """Malformed JSON reports its line."""
        with pytest.raises(ConfigValidationError) as caught:
            parse_run_config('{\n  "pulse": \n}')
        assert caught.value.line == 3

    def test_unknown_basis(self):
        """Unknown basis names are rejected."""
        with pytest.raises(ConfigValidationError, match="unknown basis"):
            run_config_from_dict(with_changes(pulse={"basis": "spherical", "n_digits": 4, "dt_us": 5.0}))

    def test_phase_only_needs_amplitude(self):
        """amplitude_hz is required for phase_only and only allowed there."""
        with pytest.raises(ConfigValidationError, match="amplitude_hz"):
            run_config_from_dict(with_changes(pulse={"basis": "phase_only", "n_digits": 4, "dt_us": 5.0}))
        with pytest.raises(ConfigValidationError, match="only valid for phase_only"):
            run_config_from_dict(with_changes(pulse={**MINIMAL["pulse"], "amplitude_hz": 1000.0}))

    @pytest.mark.parametrize(
        "target",
        [
            {"type": "ur", "axis": "x"},
            {"type": "ur", "axis": "x", "angle_deg": 90.0, "q_f": [0, 0, 0, 1]},
            {"type": "ur"},
        ],
    )
    def test_ur_needs_exactly_one_description(self, target):
        """A rotation target needs either axis and angle or a quaternion."""
        with pytest.raises(ConfigValidationError, match="either axis"):
            run_config_from_dict(with_changes(target=target))

    def test_target_must_be_unit(self):
        """Non-unit target quaternions are rejected at the target path."""
        with pytest.raises(ConfigValidationError) as caught:
            run_config_from_dict(with_changes(target={"type": "ur", "q_f": [0, 0, 1, 1]})).to_problem()
        assert caught.value.path == "target"

    def test_reduced_basis_needs_a_constraint(self):
        """Reduced bases require a constraint."""
        data = with_changes(pulse={"basis": "polar_reduced_amp_phase", "n_digits": 4, "dt_us": 5.0})
        with pytest.raises(ConfigValidationError, match="requires a constraint"):
            run_config_from_dict(data).to_problem()

    def test_phase_only_above_limit(self):
        """A fixed amplitude above the limit is reported at the constraint path."""
        data = with_changes(
            pulse={"basis": "phase_only", "n_digits": 4, "dt_us": 5.0, "amplitude_hz": 10000.0},
            constraint={"type": "amplitude", "max_amplitude_hz": 5000.0},
        )
        with pytest.raises(ConfigValidationError) as caught:
            run_config_from_dict(data).to_problem()
        assert caught.value.path == "constraint"

    def test_wolfe_constants_are_ordered(self):
        """Wolfe constants must satisfy c1 < c2."""
        with pytest.raises(ConfigValidationError, match="wolfe_c1"):
            run_config_from_dict(with_changes(optimizer={"wolfe_c1": 0.9, "wolfe_c2": 0.1}))


class TestProblem:
    """Documents turned into optimization problems."""

    def test_limits_are_converted_to_radians(self):
        """Hz limits become radian limits for the digit duration."""
        amplitude = run_config_from_dict(
            with_changes(pulse={**MINIMAL["pulse"], "dt_us": 50.0}, constraint={"type": "amplitude", "max_amplitude_hz": 5000.0})
        ).to_problem().constraint
        assert isinstance(amplitude, AmplitudeLimit)
        assert float(amplitude.theta_max) == pytest.approx(np.pi / 2)
        power = run_config_from_dict(
            with_changes(pulse={**MINIMAL["pulse"], "dt_us": 50.0}, constraint={"type": "power", "rms_amplitude_hz": 5000.0})
        ).build_constraint()
        assert isinstance(power, PowerLimit)
        assert power.p_max_avg == pytest.approx((np.pi / 2) ** 2)
        energy = run_config_from_dict(
            with_changes(constraint={"type": "energy", "max_energy_hz2s": 1000.0})
        ).build_constraint()
        assert isinstance(energy, EnergyLimit)
        assert energy.e_theta_max == pytest.approx(4 * np.pi ** 2 * 5e-6 * 1000.0)

    def test_list_of_limits(self):
        """A constraint list yields one domain limit per entry, all in radians."""
        problem = run_config_from_dict(
            with_changes(
                constraint=[
                    {"type": "amplitude", "max_amplitude_hz": 20000.0},
                    {"type": "power", "rms_amplitude_hz": 10000.0},
                ]
            )
        ).to_problem()
        amplitude, power = problem.constraint
        assert float(amplitude.theta_max) == pytest.approx(0.2 * np.pi)
        assert power.p_max_avg == pytest.approx((0.1 * np.pi) ** 2)

    def test_single_entry_list_is_one_limit(self):
        """A one-entry list behaves like the bare section."""
        constraint = run_config_from_dict(
            with_changes(constraint=[{"type": "energy", "max_energy_hz2s": 1000.0}])
        ).to_problem().constraint
        assert isinstance(constraint, EnergyLimit)

    def test_empty_limit_list_is_rejected(self):
        """An empty constraint list is a validation error."""
        with pytest.raises(ConfigValidationError):
            run_config_from_dict(with_changes(constraint=[]))

    def test_reduced_basis_rejects_limit_list(self):
        """Reduced bases clamp through exactly one limit."""
        data = with_changes(
            pulse={"basis": "polar_reduced_amp_phase", "n_digits": 4, "dt_us": 5.0},
            constraint=[
                {"type": "amplitude", "max_amplitude_hz": 20000.0},
                {"type": "power", "rms_amplitude_hz": 10000.0},
            ],
        )
        with pytest.raises(ConfigValidationError, match="exactly one limit") as caught:
            run_config_from_dict(data).to_problem()
        assert caught.value.path == "constraint"

    def test_phase_only_amplitude_and_z_limit(self):
        """Phase-only amplitude and z limit are converted to radians."""
        config = run_config_from_dict(
            with_changes(
                pulse={"basis": "phase_only", "n_digits": 4, "dt_us": 5.0, "amplitude_hz": 10000.0, "z_limit_hz": 2000.0}
            )
        )
        problem = config.to_problem()
        assert problem.shape_template.basis.theta_xy_const == pytest.approx(2 * np.pi * 0.05)
        assert problem.options.z_limit == pytest.approx(2 * np.pi * 0.01)

    def test_ur_axis_angle_matches_quaternion(self):
        """Axis and angle give the same target as the quaternion."""
        by_angle = run_config_from_dict(with_changes(target={"type": "ur", "axis": "x", "angle_deg": 90.0}))
        q = by_angle.build_target().q_f
        np.testing.assert_allclose(q, [np.sqrt(0.5), 0.0, 0.0, np.sqrt(0.5)])
        by_quaternion = run_config_from_dict(with_changes(target={"type": "ur", "q_f": q.tolist()}))
        np.testing.assert_array_equal(by_quaternion.build_target().q_f, q)

    def test_saturation_target(self):
        """Saturation targets start from +z."""
        target = run_config_from_dict(with_changes(target={"type": "saturation"})).build_target()
        assert isinstance(target, SaturationTarget)
        np.testing.assert_array_equal(target.rho0, [0.0, 0.0, 1.0])

    def test_relative_init_file_resolves_against_the_config(self, tmp_path):
        """Start files resolve against the config directory."""
        data = with_changes(optimizer={"init_strategy": "from_file", "init_file": "start.json"})
        problem = run_config_from_dict(data).to_problem(tmp_path)
        assert problem.options.init_strategy is InitStrategy.FROM_FILE
        assert problem.options.init_file == str(tmp_path / "start.json")

    def test_from_file_needs_a_path(self):
        """from_file without init_file is rejected."""
        with pytest.raises(ConfigValidationError, match="init_file"):
            run_config_from_dict(with_changes(optimizer={"init_strategy": "from_file"}))


class TestPresets:
    """Named states, presets and bundled configs."""

    def test_named_states(self):
        """Named and explicit states resolve to vectors."""
        np.testing.assert_array_equal(named_state("-y"), [0.0, -1.0, 0.0])
        np.testing.assert_array_equal(named_state("+x"), [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(named_state([0.0, 0.6, 0.8]), [0.0, 0.6, 0.8])

    def test_ur_quaternion_half_turn(self):
        """A half turn about z is the pure z quaternion."""
        np.testing.assert_allclose(ur_quaternion("z", np.pi), [0.0, 0.0, 1.0, 0.0], atol=1e-16)

    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_scenarios_build_problems(self, name):
        """Every preset builds a problem."""
        config = run_config_from_dict(scenario(name))
        assert config.name == name
        assert config.to_problem().grid.n_points >= 1

    def test_scenario_is_a_copy(self):
        """Editing a returned preset does not change the stored one."""
        first = scenario("n15_excitation")
        first["pulse"]["n_digits"] = 1
        assert scenario("n15_excitation")["pulse"]["n_digits"] == 10

    def test_desk_excitation_preset(self):
        """The nitrogen excitation preset has the expected shape and grid."""
        problem = run_config_from_dict(scenario("n15_excitation")).to_problem()
        assert problem.shape_template.basis.kind is BasisKind.CARTESIAN_XY
        assert problem.shape_template.duration == pytest.approx(500e-6)
        assert (problem.grid.n_off, problem.grid.n_rf) == (11, 3)

    def test_combined_limit_preset(self):
        """The free x/y carbon preset carries both the amplitude cap and the power limit."""
        problem = run_config_from_dict(scenario("c13_excitation_xy")).to_problem()
        assert problem.shape_template.basis.kind is BasisKind.CARTESIAN_XY
        assert problem.shape_template.duration == pytest.approx(500e-6)
        kinds = {type(limit) for limit in problem.constraint}
        assert kinds == {AmplitudeLimit, PowerLimit}

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_bundled_configs_load(self, path):
        """Every bundled config loads and builds."""
        config = load_run_config(path)
        assert config.name == path.stem
        config.to_problem(path.parent)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

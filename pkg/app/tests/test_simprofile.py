"""Tests for offset/B1 profiles, their export and the unit helpers."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.errors import ContractViolation
from app.models.problem import GridSpec, PPTarget, SaturationTarget, URTarget
from app.models.pulse import BasisKind, ControlBasis, PulseShape
from app.services.rotkernel import IDENTITY_QUATERNION, propagate_ur
from app.services.simprofile import (
    ProfileTable,
    band_average,
    evaluation_grid,
    simulate_profile,
    simulate_target,
    simulate_ur_profile,
    write_profile,
)
from app.utils import units

DT = 5e-6
CARTESIAN = ControlBasis(BasisKind.CARTESIAN_XY)
HARD_90X = PulseShape([[np.pi / 2, 0.0]], DT, CARTESIAN)


def random_shape(seed, n=12):
    rng = np.random.default_rng(seed)
    return PulseShape(rng.normal(0.0, 0.6, size=(n, 2)), DT, CARTESIAN)


class TestStateProfiles:
    """Magnetization profiles from a starting state."""

    def test_zero_pulse_keeps_z(self):
        """Zero controls leave z untouched everywhere."""
        shape = PulseShape(np.zeros((4, 2)), DT, CARTESIAN)
        table = simulate_profile(shape, [0, 0, 1], [-3000.0, 0.0, 3000.0], [0.9, 1.0])
        assert table.magnetization.shape == (3, 2, 3)
        assert_allclose(table.magnetization[..., 2], 1.0, atol=1e-15)
        assert table.quality is None

    def test_hard_pulse_on_resonance(self):
        """A 90 degree x pulse on resonance reaches -y."""
        table = simulate_profile(HARD_90X, [0, 0, 1], [0.0], [1.0], lambda_f=[0, -1, 0])
        assert_allclose(table.magnetization[0, 0], [0.0, -1.0, 0.0], atol=1e-15)
        assert table.quality[0, 0] == pytest.approx(1.0)

    def test_b1_scale_shortens_the_rotation(self):
        """Half the B1 gives a 45 degree rotation."""
        table = simulate_profile(HARD_90X, [0, 0, 1], [0.0], [0.5])
        assert_allclose(table.magnetization[0, 0], [0.0, -np.sqrt(0.5), np.sqrt(0.5)], atol=1e-15)

    def test_unit_norm_in_every_cell(self):
        """Magnetization stays unit length in every cell."""
        table = simulate_profile(random_shape(1), [1, 0, 0], np.linspace(-20000, 20000, 41), [0.8, 1.0, 1.2])
        assert_allclose(np.linalg.norm(table.magnetization, axis=-1), 1.0, atol=1e-12)

    def test_saturation_quality(self):
        """Saturation quality is 1 - m_z^2 per cell."""
        grid = GridSpec(5, 2000.0)
        table = simulate_target(HARD_90X, SaturationTarget([0, 0, 1]), grid)
        m_z = table.magnetization[..., 2]
        assert_allclose(table.quality, 1.0 - m_z ** 2)
        assert table.quality[2, 0] == pytest.approx(1.0)

    def test_target_quality_is_the_projection(self):
        """Quality is the projection on the target state."""
        grid = GridSpec(7, 30000.0, 3, 0.2)
        shape = random_shape(2)
        table = simulate_target(shape, PPTarget([0, 0, 1], [0, -1, 0]), grid)
        assert_allclose(table.quality, -table.magnetization[..., 1])
        assert_allclose(table.offsets_hz, grid.offsets_hz())


class TestPropagatorProfiles:
    """Rotation fidelity profiles."""

    def test_zero_pulse_is_identity_on_resonance(self):
        """Zero controls are the identity on resonance and precess off it."""
        shape = PulseShape(np.zeros((3, 2)), DT, CARTESIAN)
        table = simulate_ur_profile(shape, IDENTITY_QUATERNION, [0.0, 10000.0], [1.0])
        assert table.is_propagator
        assert table.quality[0, 0] == pytest.approx(1.0)
        # free precession by 2 pi * 10 kHz * 15 us about z
        assert table.quality[1, 0] == pytest.approx(abs(np.cos(0.5 * 2 * np.pi * 1e4 * 15e-6)))

    def test_planted_rotation_is_perfect(self):
        """A shape's own rotation scores one at its grid point."""
        shape = random_shape(3)
        q_f = propagate_ur(shape, 2 * np.pi * 1500.0, 0.95).prefix[-1]
        table = simulate_ur_profile(shape, q_f, [1500.0], [0.95])
        assert table.quality[0, 0] == pytest.approx(1.0, abs=1e-13)

    def test_sign_of_the_quaternion_does_not_matter(self):
        """q and -q score the same."""
        shape = random_shape(4)
        q = propagate_ur(shape).prefix[-1]
        plus = simulate_target(shape, URTarget(q), GridSpec())
        minus = simulate_target(shape, URTarget(-q), GridSpec())
        assert plus.quality[0, 0] == pytest.approx(minus.quality[0, 0])


class TestExport:
    """Tab-separated profile export."""

    def test_tsv_rows_put_offset_fastest(self):
        """Rows run over offsets first, then B1 scales."""
        table = simulate_profile(HARD_90X, [0, 0, 1], [-1000.0, 0.0, 1000.0], [0.9, 1.1])
        lines = table.to_tsv().splitlines()
        assert lines[0] == "# offset_hz b1_scale Mx My Mz"
        assert len(lines) == 1 + 6
        rows = [line.split("\t") for line in lines[1:]]
        assert [float(r[0]) for r in rows] == [-1000.0, 0.0, 1000.0] * 2
        assert [float(r[1]) for r in rows] == [0.9] * 3 + [1.1] * 3
        assert float(rows[1][3]) == table.magnetization[1, 0, 1]

    def test_propagator_tsv(self):
        """Rotation profiles export one quality column."""
        table = simulate_ur_profile(HARD_90X, IDENTITY_QUATERNION, [0.0], [1.0, 0.5])
        lines = table.to_tsv().splitlines()
        assert lines[0] == "# offset_hz b1_scale quality"
        assert float(lines[1].split("\t")[2]) == pytest.approx(np.cos(np.pi / 4))

    def test_write_profile(self, tmp_path):
        """Profiles are written with parent directories created."""
        table = simulate_profile(HARD_90X, [0, 0, 1], [0.0], [1.0])
        path = write_profile(table, tmp_path / "nested" / "profile.tsv")
        assert path.read_text() == table.to_tsv()

    def test_band_average_needs_quality(self):
        """Averaging needs a quality table."""
        table = simulate_profile(HARD_90X, [0, 0, 1], [0.0], [1.0])
        with pytest.raises(ContractViolation):
            band_average(table)

    def test_band_average(self):
        """The band average is the mean over cells."""
        table = ProfileTable(np.zeros(2), np.ones(1), quality=np.array([[0.5], [1.0]]))
        assert band_average(table) == 0.75


class TestEvaluationGrid:
    """Denser evaluation grids."""

    def test_density_refines_both_axes(self):
        """Density subdivides both axes and keeps the training points."""
        grid = GridSpec(11, 6000.0, 3, 0.1)
        dense = evaluation_grid(grid, 4)
        assert (dense.n_off, dense.n_rf) == (41, 9)
        assert dense.offsets_hz()[[0, -1]].tolist() == grid.offsets_hz()[[0, -1]].tolist()
        assert_allclose(dense.offsets_hz()[::4], grid.offsets_hz(), atol=1e-9)
        assert_allclose(dense.b1_scales()[::4], grid.b1_scales(), atol=1e-15)

    def test_single_point_axes_stay_single(self):
        """A one-point B1 axis stays one point."""
        dense = evaluation_grid(GridSpec(5, 1000.0), 3)
        assert (dense.n_off, dense.n_rf) == (13, 1)

    def test_density_one_is_the_same_grid(self):
        """Density one returns the training grid."""
        grid = GridSpec(11, 6000.0, 3, 0.1)
        assert evaluation_grid(grid, 1) == grid


class TestUnits:
    """Hz and radian conversions."""

    def test_hard_pulse_angle(self):
        """5 kHz for 50 us is 90 degrees."""
        assert units.hz_to_theta(5000.0, 50e-6) == pytest.approx(np.pi / 2)
        assert units.theta_to_hz(np.pi / 2, 50e-6) == pytest.approx(5000.0)

    def test_limits(self):
        """rms and energy limits convert to radian limits."""
        assert units.power_limit_from_rms_hz(5000.0, 50e-6) == pytest.approx((np.pi / 2) ** 2)
        # a 5 kHz field for 10 digits of 50 us
        e_over_h = 5000.0 ** 2 * 10 * 50e-6
        assert units.energy_limit_from_hz(e_over_h, 50e-6) == pytest.approx(10 * (np.pi / 2) ** 2)

    def test_power_and_energy_of_a_shape(self):
        """Average power and E/h of a flat shape."""
        shape = PulseShape(np.zeros((10, 2)), 50e-6, CARTESIAN)
        amplitude = np.full(10, np.pi / 2)
        assert units.average_power_hz2(shape, amplitude) == pytest.approx(5000.0 ** 2)
        assert units.energy_over_h(shape, amplitude) == pytest.approx(5000.0 ** 2 * 500e-6)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

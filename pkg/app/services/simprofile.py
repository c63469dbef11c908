"""Offset/B1 profiles of finished pulses and their tab-separated export."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from app.core.errors import ContractViolation
from app.models.problem import Constraint, GridSpec, PPTarget, SaturationTarget, Target, URTarget
from app.models.pulse import PulseShape
from app.services.rotkernel import propagate_pp, propagate_ur

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Simulated response per (offset, B1 scale) cell.

    ``magnetization`` has shape (n_off, n_rf, 3) for state simulations and is
    None for propagator simulations, where ``quality`` (n_off, n_rf) holds
    |dot(q_f, Q_total)|. For state simulations ``quality`` holds the per-cell
    figure of merit when a target was given.
    """
    offsets_hz: np.ndarray
    b1_scales: np.ndarray
    magnetization: Optional[np.ndarray] = None
    quality: Optional[np.ndarray] = None

    @property
    def is_propagator(self) -> bool:
        return self.magnetization is None

    def to_tsv(self) -> str:
        """Plot data, one row per cell with the offset varying fastest."""
        header = "# offset_hz b1_scale quality" if self.is_propagator else "# offset_hz b1_scale Mx My Mz"
        lines = [header]
        for j, scale in enumerate(self.b1_scales):
            for i, offset in enumerate(self.offsets_hz):
                if self.is_propagator:
                    values = (self.quality[i, j],)
                else:
                    values = tuple(self.magnetization[i, j])
                lines.append("\t".join([repr(float(offset)), repr(float(scale))] + [repr(float(v)) for v in values]))
        return "\n".join(lines) + "\n"


def _axes(offsets, b1_scales) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    offsets = np.atleast_1d(np.asarray(offsets, dtype=np.float64))
    scales = np.atleast_1d(np.asarray(b1_scales, dtype=np.float64))
    omega, scale = np.broadcast_arrays(2.0 * np.pi * offsets[:, None], scales[None, :])
    return offsets, scales, omega, scale


def simulate_profile(
    shape: PulseShape,
    rho0,
    offsets,
    b1_scales,
    *,
    constraint: Optional[Constraint] = None,
    lambda_f=None,
) -> ProfileTable:
    """Final Bloch vector of ``rho0`` at every (offset, B1 scale) cell."""
    offsets, scales, omega, scale = _axes(offsets, b1_scales)
    # the co-state is irrelevant for the forward states
    target = PPTarget(rho0, np.array([0.0, 0.0, 1.0]) if lambda_f is None else lambda_f)
    cache = propagate_pp(shape, target, omega, scale, constraint=constraint)
    final = cache.states[..., -1, :]
    quality = None if lambda_f is None else final @ target.lambda_f
    return ProfileTable(offsets, scales, magnetization=final, quality=quality)


def simulate_ur_profile(
    shape: PulseShape,
    q_f,
    offsets,
    b1_scales,
    *,
    constraint: Optional[Constraint] = None,
) -> ProfileTable:
    """|dot(q_f, Q_total)| at every (offset, B1 scale) cell."""
    offsets, scales, omega, scale = _axes(offsets, b1_scales)
    q_f = URTarget(q_f).q_f
    cache = propagate_ur(shape, omega, scale, q_f, constraint=constraint)
    quality = np.abs(cache.prefix[..., -1, :] @ q_f)
    return ProfileTable(offsets, scales, quality=quality)


def simulate_target(
    shape: PulseShape,
    target: Target,
    grid: GridSpec,
    *,
    constraint: Optional[Constraint] = None,
) -> ProfileTable:
    """Profile of ``shape`` for ``target`` on the axes of ``grid``."""
    offsets, scales = grid.offsets_hz(), grid.b1_scales()
    if isinstance(target, URTarget):
        return simulate_ur_profile(shape, target.q_f, offsets, scales, constraint=constraint)
    table = simulate_profile(
        shape,
        target.rho0,
        offsets,
        scales,
        constraint=constraint,
        lambda_f=None if isinstance(target, SaturationTarget) else target.lambda_f,
    )
    if isinstance(target, SaturationTarget):
        m_z = table.magnetization[..., 2]
        return ProfileTable(table.offsets_hz, table.b1_scales, table.magnetization, 1.0 - m_z * m_z)
    return table


def evaluation_grid(grid: GridSpec, density: int = 4) -> GridSpec:
    """Denser grid over the same band for checking a trained pulse."""
    return grid.denser(density)


def band_average(table: ProfileTable) -> float:
    """Mean per-cell quality of a profile."""
    if table.quality is None:
        raise ContractViolation("profile has no per-cell quality; simulate with a target")
    return float(np.mean(table.quality))


def write_profile(table: ProfileTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table.to_tsv())
    logger.info("Wrote profile with %d cells to %s", table.offsets_hz.size * table.b1_scales.size, path)
    return path

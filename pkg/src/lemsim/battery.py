"""Quantized SoC grid, feasible battery transitions, and the continuous
SoC update that backs them.

``grid_side_energy`` is signed from the building's perspective: positive
means the building draws energy to charge, negative means the battery
supplies energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import BatterySpec

# Numerical slack when checking SoC bounds: efficiency round trips like
# eta * (x / eta) can overshoot a bound by a few ulp.
_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class SocGrid:
    """Evenly spaced SoC levels from 0 to capacity inclusive."""

    levels: tuple[float, ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def capacity(self) -> float:
        return self.levels[-1]

    def nearest_index(self, soc: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.levels) - soc)))


@dataclass(frozen=True)
class BatteryTransition:
    """One quantized action: move from one grid level to another."""

    from_index: int
    to_index: int
    grid_side_energy: float


def make_soc_grid(spec: BatterySpec, n_quant: int) -> SocGrid:
    """Quantize ``[0, capacity]`` into ``n_quant`` evenly spaced levels."""
    if n_quant < 2:
        raise ValueError(f"n_quant must be >= 2, got {n_quant}")
    if spec.capacity <= 0:
        raise ValueError(f"capacity must be positive to build a grid, got {spec.capacity}")
    return SocGrid(tuple(np.linspace(0.0, spec.capacity, n_quant)))


def degenerate_grid() -> SocGrid:
    """Single-level grid for buildings without storage."""
    return SocGrid((0.0,))


def hold_index(spec: BatterySpec, grid: SocGrid, from_index: int) -> int:
    """Target level of the do-nothing action: self-discharge, then snap to
    the nearest grid level."""
    decayed = grid.levels[from_index] * (1.0 - spec.self_discharge_per_step)
    return grid.nearest_index(decayed)


def feasible_transitions(spec: BatterySpec, grid: SocGrid, from_index: int) -> list[BatteryTransition]:
    """All power-feasible transitions out of ``from_index``, one per target
    level, in target order.

    The hold transition (zero grid-side energy, target snapped to the level
    nearest the post-decay SoC) is always present.  Charging to level j
    draws ``(level_j - decayed) / charge_efficiency``; discharging supplies
    ``(decayed - level_j) * discharge_efficiency``.  Transitions whose
    grid-side energy exceeds the hourly power limits are excluded.
    """
    if not (0 <= from_index < grid.n_levels):
        raise IndexError(f"from_index {from_index} outside grid of {grid.n_levels}")
    decayed = grid.levels[from_index] * (1.0 - spec.self_discharge_per_step)
    hold = grid.nearest_index(decayed)
    out = []
    for j, level in enumerate(grid.levels):
        if j == hold:
            energy = 0.0
        else:
            delta = level - decayed
            if delta > 0:
                energy = delta / spec.charge_efficiency
                if energy > spec.max_charge_power:
                    continue
            else:
                energy = delta * spec.discharge_efficiency
                if -energy > spec.max_discharge_power:
                    continue
        out.append(BatteryTransition(from_index, j, energy))
    return out


def step_soc(spec: BatterySpec, soc: float, grid_side_energy: float) -> float:
    """Continuous reference model: apply self-discharge, then the charge or
    discharge implied by ``grid_side_energy``.

    Out-of-range results raise rather than clamp; excursions within a tiny
    numerical tolerance of a bound are snapped onto it.
    """
    decayed = soc * (1.0 - spec.self_discharge_per_step)
    if grid_side_energy >= 0:
        new = decayed + spec.charge_efficiency * grid_side_energy
    else:
        new = decayed - (-grid_side_energy) / spec.discharge_efficiency
    tol = _BOUND_TOL * max(1.0, spec.capacity)
    if new < -tol or new > spec.capacity + tol:
        raise ValueError(
            f"SoC {new} outside [0, {spec.capacity}] after applying {grid_side_energy} kWh to {soc} kWh"
        )
    return min(max(new, 0.0), spec.capacity)

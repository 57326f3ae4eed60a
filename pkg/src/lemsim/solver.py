"""Exact policy computation for one building's layered MDP.

``backward_induction`` is the default engine: a single backward pass over
time layers, dispatched to the compiled kernel (or its NumPy fallback).
``value_iteration`` is the generic sweep-until-converged algorithm; on
these layered MDPs the two produce identical value tables and policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mdp import BuildingMdp, Scenario


@dataclass(frozen=True)
class ValueTable:
    """State values, one row per time layer plus a zero terminal row."""

    values: np.ndarray  # [horizon + 1, n_levels]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class QuantizedPolicy:
    """Deterministic target SoC level per (time step, SoC level)."""

    building_id: str
    targets: np.ndarray  # int32 [horizon, n_levels]
    soc_levels: tuple[float, ...]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.targets, dtype=np.int32)
        arr.setflags(write=False)
        object.__setattr__(self, "targets", arr)

    @property
    def horizon(self) -> int:
        return self.targets.shape[0]

    @property
    def n_levels(self) -> int:
        return self.targets.shape[1]

    def target(self, t: int, soc_index: int) -> int:
        return int(self.targets[t, soc_index])


def _action_tables(mdp: BuildingMdp):
    """Flatten the canonical per-level action lists into padded arrays."""
    n = mdp.n_levels
    width = max(len(acts) for acts in mdp.actions)
    target = np.zeros((n, width), dtype=np.int32)
    energy = np.zeros((n, width))
    count = np.zeros(n, dtype=np.int32)
    for i, acts in enumerate(mdp.actions):
        count[i] = len(acts)
        for k, a in enumerate(acts):
            target[i, k] = a.to_index
            energy[i, k] = a.grid_side_energy
    return target, energy, count


def backward_induction(mdp: BuildingMdp, backend=None) -> tuple[ValueTable, QuantizedPolicy]:
    """One exact backward pass; ties broken toward the smallest
    |grid-side energy|, then the lower target index."""
    target, energy, count = _action_tables(mdp)
    impl = backend if backend is not None else _kernels
    market = mdp.scenario is Scenario.ALEX
    values, policy = impl.solve_layered(
        target, energy, count,
        mdp.building.residual(),
        market,
        mdp.tariff.grid_buy, mdp.tariff.grid_sell,
        mdp.tariff.market_min, mdp.tariff.market_max,
        mdp.tariff.fees_per_step, mdp.w_sq,
        mdp.background.bid_qty if market else None,
        mdp.background.ask_qty if market else None,
    )
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite state values")
    return ValueTable(values), QuantizedPolicy(mdp.building.id, policy, mdp.grid.levels)


def value_iteration(mdp: BuildingMdp, tol: float = 1e-9, gamma: float = 1.0,
                    ) -> tuple[ValueTable, QuantizedPolicy, int]:
    """Sweep all states in natural order until the largest value change is
    within ``tol``; then extract the greedy policy.

    Returns the sweep count as a third element; on a layered MDP values
    stop changing within ``horizon`` sweeps.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not (0 <= gamma <= 1):
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")

    horizon, n = mdp.horizon, mdp.n_levels
    values = np.zeros((horizon + 1, n))
    sweeps = 0
    while True:
        sweeps += 1
        delta = 0.0
        for t in range(horizon):
            for i in range(n):
                best = -math.inf
                for action in mdp.actions[i]:
                    r = mdp.reward(t, action)
                    if not math.isfinite(r):
                        raise ValueError(f"non-finite reward at t={t}, level={i}")
                    val = r + gamma * values[t + 1, action.to_index]
                    if val > best:
                        best = val
                delta = max(delta, abs(best - values[t, i]))
                values[t, i] = best
        if delta <= tol:
            break

    policy = np.zeros((horizon, n), dtype=np.int32)
    for t in range(horizon):
        for i in range(n):
            best = -math.inf
            best_j = 0
            for action in mdp.actions[i]:
                val = mdp.reward(t, action) + gamma * values[t + 1, action.to_index]
                if val > best:
                    best = val
                    best_j = action.to_index
            policy[t, i] = best_j
    return ValueTable(values), QuantizedPolicy(mdp.building.id, policy, mdp.grid.levels), sweeps


def solve(mdp: BuildingMdp, engine: str = "backward_induction",
          tol: float = 1e-9, gamma: float = 1.0) -> tuple[ValueTable, QuantizedPolicy]:
    if engine == "backward_induction":
        return backward_induction(mdp)
    if engine == "value_iteration":
        table, policy, _ = value_iteration(mdp, tol=tol, gamma=gamma)
        return table, policy
    raise ValueError(f"unknown solver engine {engine!r}")


def policy_values(mdp: BuildingMdp, policy: QuantizedPolicy) -> ValueTable:
    """Evaluate a fixed policy: V(t, i) is the return of following it from
    (t, i) to the horizon.  V(0, initial index) is the policy's return."""
    from ._kernels import _numpy_core

    n = mdp.n_levels
    energy_of = np.full((n, n), np.nan)
    for i, acts in enumerate(mdp.actions):
        for a in acts:
            energy_of[i, a.to_index] = a.grid_side_energy
    rows = np.arange(n)
    chosen_energy = energy_of[rows[None, :], policy.targets]   # [horizon, n]
    if np.any(np.isnan(chosen_energy)):
        t, i = np.argwhere(np.isnan(chosen_energy))[0]
        raise ValueError(
            f"building {mdp.building.id}: policy prescribes infeasible transition at t={t}, level={i}")

    e = mdp.building.residual()[:, None] + chosen_energy
    if mdp.scenario is Scenario.ALEX:
        rewards = _numpy_core.market_rewards(
            e, mdp.background.bid_qty[:, None], mdp.background.ask_qty[:, None],
            mdp.tariff.grid_buy, mdp.tariff.grid_sell,
            mdp.tariff.market_min, mdp.tariff.market_max, mdp.tariff.fees_per_step)
    else:
        rewards = _numpy_core.billing_rewards(
            e, mdp.tariff.grid_buy, mdp.tariff.grid_sell, mdp.w_sq)

    values = np.zeros((mdp.horizon + 1, n))
    for t in range(mdp.horizon - 1, -1, -1):
        values[t] = rewards[t] + values[t + 1][policy.targets[t]]
    return ValueTable(values)


@dataclass(frozen=True)
class Rollout:
    """Deterministic trajectory of a policy from the initial SoC."""

    soc_indices: np.ndarray   # int32 [horizon + 1]
    energies: np.ndarray      # float64 [horizon], grid-side battery energy
    net_loads: np.ndarray     # float64 [horizon]

    def bid_quantities(self) -> np.ndarray:
        return np.maximum(self.net_loads, 0.0)

    def ask_quantities(self) -> np.ndarray:
        return np.maximum(-self.net_loads, 0.0)


def rollout_policy(mdp: BuildingMdp, policy: QuantizedPolicy,
                   initial_index: int | None = None) -> Rollout:
    """Roll the building forward under its policy; raises on a prescribed
    transition that is not feasible."""
    n = mdp.n_levels
    energy_of = np.full((n, n), np.nan)
    for i, acts in enumerate(mdp.actions):
        for a in acts:
            energy_of[i, a.to_index] = a.grid_side_energy

    idx = mdp.initial_soc_index() if initial_index is None else initial_index
    soc_indices = np.zeros(mdp.horizon + 1, dtype=np.int32)
    soc_indices[0] = idx
    energies = np.zeros(mdp.horizon)
    for t in range(mdp.horizon):
        j = policy.target(t, idx)
        e = energy_of[idx, j]
        if math.isnan(e):
            raise ValueError(
                f"building {mdp.building.id}: policy prescribes infeasible transition "
                f"{idx} -> {j} at t={t}"
            )
        energies[t] = e
        soc_indices[t + 1] = j
        idx = j
    return Rollout(soc_indices, energies, mdp.building.residual() + energies)


def write_policy_csv(path, policy: QuantizedPolicy, table: ValueTable) -> None:
    """Persist as rows of (t, soc_index, target_index, value)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,soc_index,target_index,value\n")
        for t in range(policy.horizon):
            for i in range(policy.n_levels):
                fh.write(f"{t},{i},{policy.targets[t, i]},{float(table.values[t, i])!r}\n")


def read_policy_csv(path, building_id: str, soc_levels: tuple[float, ...]
                    ) -> tuple[ValueTable, QuantizedPolicy]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "t,soc_index,target_index,value":
            raise ValueError(f"unexpected policy header in {path}: {header!r}")
        for line in fh:
            t, i, j, v = line.strip().split(",")
            rows.append((int(t), int(i), int(j), float(v)))
    horizon = max(r[0] for r in rows) + 1
    n = max(r[1] for r in rows) + 1
    targets = np.zeros((horizon, n), dtype=np.int32)
    values = np.zeros((horizon + 1, n))
    for t, i, j, v in rows:
        targets[t, i] = j
        values[t, i] = v
    return ValueTable(values), QuantizedPolicy(building_id, targets, soc_levels)

"""Iterative best response across buildings until the joint policy settles.

Buildings are visited in a seeded random order each outer round; exactly
one policy changes per inner step.  Convergence is declared when every
building's policy distance (mean state-wise change of the target SoC as a
fraction of capacity) drops below the threshold; hitting the round cap is
reported as non-convergence, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .domain import CommunityDataset
from .mdp import MarketBackground, Scenario, build_mdp
from .solver import QuantizedPolicy, rollout_policy, solve


@dataclass(frozen=True)
class JointPolicy:
    """One policy per building, keyed by building id."""

    policies: dict[str, QuantizedPolicy]

    def __getitem__(self, building_id: str) -> QuantizedPolicy:
        return self.policies[building_id]


@dataclass(frozen=True)
class BestResponseStep:
    round_index: int
    position: int
    building_id: str
    distance: float


@dataclass(frozen=True)
class ConvergenceTrace:
    steps: tuple[BestResponseStep, ...]
    round_max_distances: tuple[float, ...]
    converged: bool

    @property
    def round_count(self) -> int:
        return len(self.round_max_distances)

    @property
    def final_max_distance(self) -> float:
        return self.round_max_distances[-1] if self.round_max_distances else 0.0


def policy_distance(new: QuantizedPolicy, old: QuantizedPolicy) -> float:
    """Mean over states of |target SoC change| as a fraction of capacity."""
    if new.targets.shape != old.targets.shape or new.soc_levels != old.soc_levels:
        raise ValueError("policies live on different state spaces")
    levels = np.asarray(new.soc_levels)
    capacity = levels[-1]
    if capacity <= 0:
        return 0.0
    frac = levels / capacity
    return float(np.mean(np.abs(frac[new.targets] - frac[old.targets])))


def _hold_policy(mdp) -> QuantizedPolicy:
    """Policy that always takes the zero-energy action."""
    targets = np.zeros((mdp.horizon, mdp.n_levels), dtype=np.int32)
    for i, acts in enumerate(mdp.actions):
        hold = next(a.to_index for a in acts if a.grid_side_energy == 0.0)
        targets[:, i] = hold
    return QuantizedPolicy(mdp.building.id, targets, mdp.grid.levels)


def _random_policy(mdp, rng: np.random.Generator) -> QuantizedPolicy:
    targets = np.zeros((mdp.horizon, mdp.n_levels), dtype=np.int32)
    for i, acts in enumerate(mdp.actions):
        choices = np.array([a.to_index for a in acts], dtype=np.int32)
        targets[:, i] = choices[rng.integers(0, len(choices), size=mdp.horizon)]
    return QuantizedPolicy(mdp.building.id, targets, mdp.grid.levels)


def _rollout_mdp(building, ds: CommunityDataset, config: SimConfig):
    """MDP with the full action set, used for rollouts regardless of scenario."""
    return build_mdp(building, ds.tariff, Scenario.INDIVIDUAL, config.n_quant, w_sq=config.w_sq)


def compute_background(ds: CommunityDataset, joint: JointPolicy, exclude: str,
                       config: SimConfig | None = None) -> MarketBackground:
    """Aggregate bid/ask quantities of every building except ``exclude``,
    obtained by rolling each one forward under its policy."""
    config = config or SimConfig()
    horizon = ds.calendar.step_count
    bids = np.zeros((len(ds.buildings), horizon))
    asks = np.zeros_like(bids)
    keep = np.zeros(len(ds.buildings), dtype=bool)
    for bi, b in enumerate(ds.buildings):
        if b.id == exclude:
            continue
        ro = rollout_policy(_rollout_mdp(b, ds, config), joint[b.id])
        bids[bi] = ro.bid_quantities()
        asks[bi] = ro.ask_quantities()
        keep[bi] = True
    return MarketBackground(bids[keep].sum(axis=0), asks[keep].sum(axis=0))


def solve_equilibrium(ds: CommunityDataset, scenario: Scenario | str,
                      config: SimConfig) -> tuple[JointPolicy, ConvergenceTrace]:
    """Run seeded-order iterative best response until the joint policy is
    stable.  Non-convergence at the round cap is reported on the trace."""
    scenario = scenario if isinstance(scenario, Scenario) else Scenario.parse(scenario)
    rng = np.random.default_rng(config.seed)
    buildings = ds.buildings
    n_b = len(buildings)
    horizon = ds.calendar.step_count

    rollout_mdps = [_rollout_mdp(b, ds, config) for b in buildings]
    policies: dict[str, QuantizedPolicy] = {}
    bids = np.zeros((n_b, horizon))
    asks = np.zeros_like(bids)
    for bi, b in enumerate(buildings):
        if scenario is not Scenario.NODERMS and config.init == "random":
            pol = _random_policy(rollout_mdps[bi], rng)
        else:
            pol = _hold_policy(rollout_mdps[bi])
        policies[b.id] = pol
        ro = rollout_policy(rollout_mdps[bi], pol)
        bids[bi] = ro.bid_quantities()
        asks[bi] = ro.ask_quantities()

    steps: list[BestResponseStep] = []
    round_max: list[float] = []
    converged = False
    for round_index in range(1, config.max_outer_rounds + 1):
        order = rng.permutation(n_b)
        worst = 0.0
        for position, bi in enumerate(order):
            b = buildings[bi]
            if scenario is Scenario.ALEX:
                mask = np.ones(n_b, dtype=bool)
                mask[bi] = False
                background = MarketBackground(bids[mask].sum(axis=0), asks[mask].sum(axis=0))
                mdp = build_mdp(b, ds.tariff, scenario, config.n_quant, background=background)
            else:
                mdp = build_mdp(b, ds.tariff, scenario, config.n_quant, w_sq=config.w_sq)
            _, new_policy = solve(mdp, engine=config.engine, tol=config.vi_tol, gamma=config.gamma)
            distance = policy_distance(new_policy, policies[b.id])
            policies[b.id] = new_policy
            ro = rollout_policy(rollout_mdps[bi], new_policy)
            bids[bi] = ro.bid_quantities()
            asks[bi] = ro.ask_quantities()
            steps.append(BestResponseStep(round_index, position, b.id, distance))
            worst = max(worst, distance)
        round_max.append(worst)
        if worst < config.eq_threshold:
            converged = True
            break

    return JointPolicy(policies), ConvergenceTrace(tuple(steps), tuple(round_max), converged)


def write_convergence_csv(path, trace: ConvergenceTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("round,position,building_id,distance\n")
        for s in trace.steps:
            fh.write(f"{s.round_index},{s.position},{s.building_id},{s.distance!r}\n")

"""Per-building finite-horizon MDP: states, quantized battery actions, and
scenario-specific rewards.

The MDP is deterministic: the state is (time step, SoC level index) and an
action is a feasible battery transition; bid/ask quantities follow from
the resulting net load, so the action space is one-dimensional per state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .battery import BatteryTransition, SocGrid, degenerate_grid, feasible_transitions, hold_index, make_soc_grid
from .domain import BatterySpec, BuildingRecord, GridTariff
from .market import BidAsk, building_bill, make_bid_ask, price_curve, settle_round

BACKGROUND_ID = "__others__"


class Scenario(enum.Enum):
    """Community operating modes."""

    NODERMS = "NoDERMS"
    INDIVIDUAL = "IndividualDERMS"
    ALEX = "ALEX"

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        for s in cls:
            if s.value.lower() == str(name).lower():
                return s
        raise ValueError(f"unknown scenario {name!r}; expected one of {[s.value for s in cls]}")


@dataclass(frozen=True)
class BuildingState:
    t: int
    soc_index: int


@dataclass(frozen=True)
class BuildingAction:
    """A battery transition plus the market order it implies."""

    transition: BatteryTransition

    @property
    def grid_side_energy(self) -> float:
        return self.transition.grid_side_energy

    @property
    def to_index(self) -> int:
        return self.transition.to_index

    def to_bid_ask(self, net_load: float, price: float, building_id: str = "") -> BidAsk:
        return make_bid_ask(net_load, price, building_id)


@dataclass(frozen=True)
class MarketBackground:
    """Aggregate per-step order quantities of all buildings except one."""

    bid_qty: np.ndarray
    ask_qty: np.ndarray

    def __post_init__(self):
        for name in ("bid_qty", "ask_qty"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.bid_qty.shape != self.ask_qty.shape:
            raise ValueError("background bid/ask series must share a length")
        if np.any(self.bid_qty < 0) or np.any(self.ask_qty < 0):
            raise ValueError("background quantities must be nonnegative")

    @classmethod
    def zeros(cls, horizon: int) -> "MarketBackground":
        return cls(np.zeros(horizon), np.zeros(horizon))


def net_load(building: BuildingRecord, t: int, action: BuildingAction) -> float:
    """Load minus generation plus the action's grid-side battery energy."""
    return building.load[t] - building.generation[t] + action.grid_side_energy


def reward_alex(building: BuildingRecord, background: MarketBackground,
                state: BuildingState, action: BuildingAction, tariff: GridTariff) -> float:
    """Negative of the bill from settling this building's implied order
    against the aggregate background order flow."""
    e = net_load(building, state.t, action)
    ob = background.bid_qty[state.t]
    oa = background.ask_qty[state.t]
    price = price_curve(max(e, 0.0) + ob, max(-e, 0.0) + oa, tariff)
    orders = [
        make_bid_ask(e, price, building.id),
        BidAsk(BACKGROUND_ID + ".bid", price, ob, price, 0.0),
        BidAsk(BACKGROUND_ID + ".ask", price, 0.0, price, oa),
    ]
    rnd = settle_round(orders, tariff, state.t)
    return -building_bill(rnd.allocations[building.id], rnd.market_price, tariff)


def reward_individual(building: BuildingRecord, state: BuildingState,
                      action: BuildingAction, tariff: GridTariff, w_sq: float) -> float:
    """Net-billing reward with a quadratic net-load penalty that flattens
    building-level peaks, valleys, and ramps.  No market terms."""
    e = net_load(building, state.t, action)
    return -(max(e, 0.0) * tariff.grid_buy - max(-e, 0.0) * tariff.grid_sell) - w_sq * (e * e)


@dataclass(frozen=True)
class BuildingMdp:
    """Deterministic layered MDP for one building.

    ``actions[i]`` lists the feasible transitions out of SoC level ``i`` in
    canonical order: ascending |grid_side_energy|, then ascending target
    index.  That order is the solver's tie-break, so greedy extraction is
    reproducible.  The terminal layer at ``t == horizon`` has value 0.
    """

    building: BuildingRecord
    tariff: GridTariff
    scenario: Scenario
    grid: SocGrid
    horizon: int
    actions: tuple[tuple[BuildingAction, ...], ...]
    background: MarketBackground | None = None
    w_sq: float = 0.0

    @property
    def n_levels(self) -> int:
        return self.grid.n_levels

    def initial_soc_index(self) -> int:
        return self.grid.nearest_index(self.building.battery.initial_soc)

    def reward(self, t: int, action: BuildingAction) -> float:
        state = BuildingState(t, action.transition.from_index)
        if self.scenario is Scenario.ALEX:
            return reward_alex(self.building, self.background, state, action, self.tariff)
        if self.scenario is Scenario.INDIVIDUAL:
            return reward_individual(self.building, state, action, self.tariff, self.w_sq)
        return reward_individual(self.building, state, action, self.tariff, 0.0)

    def successor(self, state: BuildingState, action: BuildingAction) -> BuildingState:
        return BuildingState(state.t + 1, action.to_index)


def _canonical(transitions: list[BatteryTransition]) -> tuple[BuildingAction, ...]:
    ordered = sorted(transitions, key=lambda tr: (abs(tr.grid_side_energy), tr.to_index))
    return tuple(BuildingAction(tr) for tr in ordered)


def build_grid(spec: BatterySpec, n_quant: int) -> SocGrid:
    return make_soc_grid(spec, n_quant) if spec.capacity > 0 else degenerate_grid()


def build_mdp(building: BuildingRecord, tariff: GridTariff, scenario: Scenario | str,
              n_quant: int, w_sq: float = 0.0,
              background: MarketBackground | None = None) -> BuildingMdp:
    """Assemble the layered MDP for one building under one scenario.

    NoDERMS restricts every state to its hold action; the market scenario
    requires a background of the other buildings' order quantities.
    """
    scenario = scenario if isinstance(scenario, Scenario) else Scenario.parse(scenario)
    horizon = len(building.load)
    grid = build_grid(building.battery, n_quant)
    if scenario is Scenario.ALEX:
        if background is None:
            raise ValueError("the market scenario requires a background of other buildings' orders")
        if len(background.bid_qty) != horizon:
            raise ValueError("background length does not match the building horizon")

    actions = []
    for i in range(grid.n_levels):
        transitions = feasible_transitions(building.battery, grid, i)
        if scenario is Scenario.NODERMS:
            hold = hold_index(building.battery, grid, i)
            transitions = [tr for tr in transitions if tr.to_index == hold]
        actions.append(_canonical(transitions))

    return BuildingMdp(
        building=building,
        tariff=tariff,
        scenario=scenario,
        grid=grid,
        horizon=horizon,
        actions=tuple(actions),
        background=background if scenario is Scenario.ALEX else None,
        w_sq=w_sq if scenario is Scenario.INDIVIDUAL else 0.0,
    )

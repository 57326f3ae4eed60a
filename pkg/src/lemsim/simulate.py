"""Replay a joint policy through the market: the canonical per-step trace
consumed by metrics, reports, and the conservation checks.

NoDERMS and IndividualDERMS replay with grid-only billing (no market
flows); the market scenario settles every step with the same price curve
used during optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .domain import CommunityDataset
from .equilibrium import ConvergenceTrace, JointPolicy, _hold_policy, _rollout_mdp, solve_equilibrium
from .market import Allocation, SettlementRound, building_bill, make_bid_ask, price_curve, settle_round
from .mdp import Scenario, build_mdp
from .solver import rollout_policy, solve

TRACE_SCHEMA_VERSION = 1

_TRACE_HEADER = (
    "row,t,building_id,net_load_kwh,soc_kwh,market_buy_kwh,market_sell_kwh,"
    "grid_buy_kwh,grid_sell_kwh,bill,cumulative_bill,market_price,cleared_kwh,"
    "community_net_load_kwh"
)


@dataclass(frozen=True)
class SimulationTrace:
    """Per-step, per-building outcome of one scenario run.

    ``soc`` holds end-of-step stored energy.  ``market_price`` and
    ``cleared`` are NaN/0 on steps without a market (grid-only scenarios).
    """

    scenario: Scenario
    building_ids: tuple[str, ...]
    net_load: np.ndarray       # [B, T]
    soc: np.ndarray            # [B, T]
    market_buy: np.ndarray     # [B, T]
    market_sell: np.ndarray    # [B, T]
    grid_buy: np.ndarray       # [B, T]
    grid_sell: np.ndarray      # [B, T]
    bill: np.ndarray           # [B, T]
    market_price: np.ndarray   # [T]
    cleared: np.ndarray        # [T]
    community_net_load: np.ndarray  # [T]
    joint_policy: JointPolicy
    convergence: ConvergenceTrace | None
    converged: bool

    @property
    def horizon(self) -> int:
        return self.net_load.shape[1]

    def cumulative_bills(self) -> np.ndarray:
        return np.cumsum(self.bill, axis=1)

    def has_market_flows(self) -> bool:
        return bool(np.any(self.market_buy > 0) or np.any(self.market_sell > 0))


def run_scenario(ds: CommunityDataset, scenario: Scenario | str,
                 config: SimConfig | None = None) -> SimulationTrace:
    """Solve the scenario's policies and replay them over all steps."""
    scenario = scenario if isinstance(scenario, Scenario) else Scenario.parse(scenario)
    config = config or SimConfig()

    convergence = None
    converged = True
    if scenario is Scenario.NODERMS:
        policies = {}
        for b in ds.buildings:
            mdp = build_mdp(b, ds.tariff, scenario, config.n_quant)
            policies[b.id] = _hold_policy(mdp)
        joint = JointPolicy(policies)
    elif scenario is Scenario.INDIVIDUAL:
        policies = {}
        for b in ds.buildings:
            mdp = build_mdp(b, ds.tariff, scenario, config.n_quant, w_sq=config.w_sq)
            _, policies[b.id] = solve(mdp, engine=config.engine, tol=config.vi_tol, gamma=config.gamma)
        joint = JointPolicy(policies)
    else:
        joint, convergence = solve_equilibrium(ds, scenario, config)
        converged = convergence.converged

    return replay(ds, scenario, joint, config, convergence=convergence, converged=converged)


def replay(ds: CommunityDataset, scenario: Scenario | str, joint: JointPolicy,
           config: SimConfig | None = None, convergence=None, converged=True) -> SimulationTrace:
    """Deterministically replay a joint policy; same policy, same trace."""
    scenario = scenario if isinstance(scenario, Scenario) else Scenario.parse(scenario)
    config = config or SimConfig()
    buildings = ds.buildings
    n_b = len(buildings)
    horizon = ds.calendar.step_count

    net = np.zeros((n_b, horizon))
    soc = np.zeros((n_b, horizon))
    for bi, b in enumerate(buildings):
        mdp = _rollout_mdp(b, ds, config)
        ro = rollout_policy(mdp, joint[b.id])
        net[bi] = ro.net_loads
        levels = np.asarray(mdp.grid.levels)
        soc[bi] = levels[ro.soc_indices[1:]]

    market_buy = np.zeros((n_b, horizon))
    market_sell = np.zeros((n_b, horizon))
    grid_buy = np.zeros((n_b, horizon))
    grid_sell = np.zeros((n_b, horizon))
    bill = np.zeros((n_b, horizon))
    price = np.full(horizon, np.nan)
    cleared = np.zeros(horizon)

    with_market = scenario is Scenario.ALEX
    for t in range(horizon):
        if with_market:
            p = price_curve(float(np.sum(np.maximum(net[:, t], 0.0))),
                            float(np.sum(np.maximum(-net[:, t], 0.0))), ds.tariff)
            orders = [make_bid_ask(float(net[bi, t]), p, b.id) for bi, b in enumerate(buildings)]
            rnd = settle_round(orders, ds.tariff, t)
            price[t] = rnd.market_price
            cleared[t] = rnd.cleared_quantity
            for bi, b in enumerate(buildings):
                alloc = rnd.allocations[b.id]
                market_buy[bi, t] = alloc.market_buy
                market_sell[bi, t] = alloc.market_sell
                grid_buy[bi, t] = alloc.grid_buy
                grid_sell[bi, t] = alloc.grid_sell
                bill[bi, t] = building_bill(alloc, rnd.market_price, ds.tariff)
        else:
            for bi, b in enumerate(buildings):
                e = net[bi, t]
                alloc = Allocation(grid_buy=max(e, 0.0), grid_sell=max(-e, 0.0))
                grid_buy[bi, t] = alloc.grid_buy
                grid_sell[bi, t] = alloc.grid_sell
                bill[bi, t] = building_bill(alloc, 0.0, ds.tariff)

    return SimulationTrace(
        scenario=scenario,
        building_ids=tuple(b.id for b in buildings),
        net_load=net,
        soc=soc,
        market_buy=market_buy,
        market_sell=market_sell,
        grid_buy=grid_buy,
        grid_sell=grid_sell,
        bill=bill,
        market_price=price,
        cleared=cleared,
        community_net_load=net.sum(axis=0),
        joint_policy=joint,
        convergence=convergence,
        converged=converged,
    )


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_trace_csv(path, trace: SimulationTrace) -> None:
    """Schema v1: one row per (t, building) plus one community row per t."""
    cumulative = trace.cumulative_bills()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# trace_schema_version={TRACE_SCHEMA_VERSION}\n")
        fh.write(_TRACE_HEADER + "\n")
        for t in range(trace.horizon):
            for bi, bid_ in enumerate(trace.building_ids):
                fh.write(
                    f"building,{t},{bid_},{float(trace.net_load[bi, t])!r},{float(trace.soc[bi, t])!r},"
                    f"{float(trace.market_buy[bi, t])!r},{float(trace.market_sell[bi, t])!r},"
                    f"{float(trace.grid_buy[bi, t])!r},{float(trace.grid_sell[bi, t])!r},"
                    f"{float(trace.bill[bi, t])!r},{float(cumulative[bi, t])!r},,,\n"
                )
            fh.write(
                f"community,{t},,,,,,,,,,{_fmt(trace.market_price[t])},"
                f"{float(trace.cleared[t])!r},{float(trace.community_net_load[t])!r}\n"
            )


def read_trace_csv(path) -> dict:
    """Read back the pieces needed to recompute metrics from a trace file."""
    community = {}
    prices = {}
    cleared = {}
    per_building: dict[str, dict[int, dict]] = {}
    with open(path, encoding="utf-8") as fh:
        version_line = fh.readline().strip()
        if not version_line.startswith("# trace_schema_version="):
            raise ValueError(f"{path}: missing trace schema version line")
        header = fh.readline().strip()
        if header != _TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row, t = parts[0], int(parts[1])
            if row == "community":
                community[t] = float(parts[13])
                prices[t] = float(parts[11]) if parts[11] else math.nan
                cleared[t] = float(parts[12])
            else:
                rec = per_building.setdefault(parts[2], {})
                rec[t] = {
                    "net_load": float(parts[3]),
                    "soc": float(parts[4]),
                    "market_buy": float(parts[5]),
                    "market_sell": float(parts[6]),
                    "grid_buy": float(parts[7]),
                    "grid_sell": float(parts[8]),
                    "bill": float(parts[9]),
                    "cumulative_bill": float(parts[10]),
                }
    horizon = len(community)
    ids = list(per_building)
    out = {
        "building_ids": ids,
        "community_net_load": np.array([community[t] for t in range(horizon)]),
        "market_price": np.array([prices[t] for t in range(horizon)]),
        "cleared": np.array([cleared[t] for t in range(horizon)]),
    }
    for key in ("net_load", "soc", "market_buy", "market_sell", "grid_buy", "grid_sell",
                "bill", "cumulative_bill"):
        out[key] = np.array([[per_building[b][t][key] for t in range(horizon)] for b in ids])
    return out

"""Community local energy market simulator.

Per-building rational policies are computed by backward induction over
quantized battery MDPs and coupled through iterative best response; the
converged joint policy is replayed through a blind double-auction
settlement engine and scored with community net-load metrics.
"""

__version__ = "0.1.0"

from .config import SimConfig
from .domain import (
    BatterySpec,
    BuildingRecord,
    Calendar,
    CommunityDataset,
    GridTariff,
    validate_dataset,
)
from .equilibrium import JointPolicy, compute_background, policy_distance, solve_equilibrium
from .ingest import generate_synthetic, load_citylearn, read_canonical, write_canonical
from .market import BidAsk, SettlementRound, building_bill, make_bid_ask, price_curve, settle_round
from .mdp import MarketBackground, Scenario, build_mdp, net_load, reward_alex, reward_individual
from .metrics import MetricsReport, compute_metrics, profile_series
from .simulate import SimulationTrace, run_scenario
from .solver import QuantizedPolicy, ValueTable, backward_induction, value_iteration

__all__ = [
    "BatterySpec",
    "BidAsk",
    "BuildingRecord",
    "Calendar",
    "CommunityDataset",
    "GridTariff",
    "JointPolicy",
    "MarketBackground",
    "MetricsReport",
    "QuantizedPolicy",
    "Scenario",
    "SettlementRound",
    "SimConfig",
    "SimulationTrace",
    "ValueTable",
    "backward_induction",
    "build_mdp",
    "building_bill",
    "compute_background",
    "compute_metrics",
    "generate_synthetic",
    "load_citylearn",
    "make_bid_ask",
    "net_load",
    "policy_distance",
    "price_curve",
    "profile_series",
    "read_canonical",
    "reward_alex",
    "reward_individual",
    "run_scenario",
    "settle_round",
    "solve_equilibrium",
    "validate_dataset",
    "value_iteration",
    "write_canonical",
]

"""Run parameters shared by the equilibrium driver, the replayer, and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class SimConfig:
    """Everything a scenario run needs besides the dataset itself."""

    n_quant: int = 40
    w_sq: float = 0.01
    engine: str = "backward_induction"   # or value_iteration
    gamma: float = 1.0
    vi_tol: float = 1e-9
    eq_threshold: float = 0.01
    max_outer_rounds: int = 100
    seed: int = 1
    init: str = "hold"                   # hold | random

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "n_quant": self.n_quant,
            "w_sq": self.w_sq,
            "engine": self.engine,
            "gamma": self.gamma,
            "vi_tol": self.vi_tol,
            "eq_threshold": self.eq_threshold,
            "max_outer_rounds": self.max_outer_rounds,
            "seed": self.seed,
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown simulation settings: {sorted(unknown)}")
        return cls(**data)

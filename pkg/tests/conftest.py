import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lemsim.domain import BatterySpec, BuildingRecord, Calendar, CommunityDataset, GridTariff

EXAMPLE_TARIFF = GridTariff(grid_buy=0.25, grid_sell=0.05, market_min=0.07, market_max=0.23)


@pytest.fixture
def tariff():
    return EXAMPLE_TARIFF


@pytest.fixture
def two_step_dataset():
    """One building, two steps: surplus 1 kWh, then deficit 1 kWh.

    Lossless unit battery, so charging the surplus and discharging it later
    zeroes both steps' net load.
    """
    battery = BatterySpec(capacity=1.0, max_charge_power=5.0, max_discharge_power=5.0,
                          charge_efficiency=1.0, discharge_efficiency=1.0)
    pricing = GridTariff(grid_buy=0.20, grid_sell=0.05, market_min=0.07, market_max=0.18)
    b = BuildingRecord(id="solo", load=np.array([0.0, 1.0]), generation=np.array([1.0, 0.0]),
                       battery=battery)
    return CommunityDataset(calendar=Calendar(step_count=2), tariff=pricing, buildings=(b,))


@pytest.fixture
def mirror_dataset():
    """Two buildings with opposite unit net loads and lossy batteries.

    Trading clears both steps; storing loses the round trip, so the
    equilibrium trades instead of cycling batteries.
    """
    battery = BatterySpec(capacity=0.9, max_charge_power=5.0, max_discharge_power=5.0,
                          charge_efficiency=0.9, discharge_efficiency=0.9)
    b1 = BuildingRecord(id="b1", load=np.array([0.0, 1.0]), generation=np.array([1.0, 0.0]),
                        battery=battery)
    b2 = BuildingRecord(id="b2", load=np.array([1.0, 0.0]), generation=np.array([0.0, 1.0]),
                        battery=battery)
    return CommunityDataset(calendar=Calendar(step_count=2), tariff=EXAMPLE_TARIFF,
                            buildings=(b1, b2))


def citylearn_dir():
    env = os.environ.get("LEMSIM_CITYLEARN_DIR")
    if env and Path(env).exists():
        return Path(env)
    repo_data = Path(__file__).parent.parent / "data" / "citylearn_2022"
    if repo_data.exists():
        return repo_data
    return None


@pytest.fixture
def citylearn_data():
    path = citylearn_dir()
    if path is None:
        pytest.skip(
            "CityLearn 2022 dataset not present: run scripts/fetch_citylearn.py "
            "or set LEMSIM_CITYLEARN_DIR"
        )
    return path

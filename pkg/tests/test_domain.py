import numpy as np
import pytest

from lemsim.domain import (
    BatterySpec,
    BuildingRecord,
    Calendar,
    CommunityDataset,
    GridTariff,
    validate_dataset,
)
from lemsim.ingest import generate_synthetic


def _dataset(tariff=None, load=None, gen=None):
    tariff = tariff or GridTariff(0.25, 0.05, 0.07, 0.23)
    load = np.ones(12) if load is None else load
    gen = np.zeros(12) if gen is None else gen
    bat = BatterySpec(capacity=2.0, max_charge_power=2.0, max_discharge_power=2.0)
    buildings = (
        BuildingRecord("a", load, gen, bat),
        BuildingRecord("b", load, gen, bat),
    )
    return CommunityDataset(Calendar(step_count=12), tariff, buildings)


def test_well_formed_dataset_passes():
    assert validate_dataset(_dataset()) == []


def test_negative_generation_is_named():
    gen = np.zeros(12)
    gen[5] = -1.0
    violations = validate_dataset(_dataset(gen=gen))
    assert len(violations) == 2  # both buildings share the series
    assert "generation[5]" in violations[0]
    assert violations[0].startswith("building a")


def test_profitability_gap_must_be_strict():
    tariff = GridTariff(grid_buy=0.25, grid_sell=0.05, market_min=0.07, market_max=0.25)
    violations = validate_dataset(_dataset(tariff=tariff))
    assert len(violations) == 1
    assert "profitability gap" in violations[0]


def test_validation_is_pure():
    ds = _dataset()
    assert validate_dataset(ds) == validate_dataset(ds)


@pytest.mark.parametrize("field,value,needle", [
    ("initial_soc", 3.0, "initial_soc"),
    ("charge_efficiency", 0.0, "charge_efficiency"),
    ("discharge_efficiency", 1.2, "discharge_efficiency"),
    ("self_discharge_per_step", 1.0, "self_discharge"),
    ("max_charge_power", -1.0, "max_charge_power"),
])
def test_battery_invariants(field, value, needle):
    kwargs = dict(capacity=2.0, max_charge_power=2.0, max_discharge_power=2.0)
    kwargs[field] = value
    bat = BatterySpec(**kwargs)
    b = BuildingRecord("a", np.ones(4), np.zeros(4), bat)
    ds = CommunityDataset(Calendar(step_count=4), GridTariff(0.25, 0.05, 0.07, 0.23), (b,))
    violations = validate_dataset(ds)
    assert any(needle in v for v in violations)


def test_length_mismatch_names_building():
    bat = BatterySpec(capacity=1.0, max_charge_power=1.0, max_discharge_power=1.0)
    b = BuildingRecord("short", np.ones(3), np.zeros(3), bat)
    ds = CommunityDataset(Calendar(step_count=4), GridTariff(0.25, 0.05, 0.07, 0.23), (b,))
    violations = validate_dataset(ds)
    assert any("short" in v and "length 3" in v for v in violations)


def test_empty_community_rejected():
    ds = CommunityDataset(Calendar(step_count=4), GridTariff(0.25, 0.05, 0.07, 0.23), ())
    assert any("at least one building" in v for v in validate_dataset(ds))


def test_calendar_partitions():
    cal = Calendar(step_count=48, month_ranges=((0, 20), (25, 48)))
    bat = BatterySpec(capacity=1.0, max_charge_power=1.0, max_discharge_power=1.0)
    b = BuildingRecord("a", np.ones(48), np.zeros(48), bat)
    ds = CommunityDataset(cal, GridTariff(0.25, 0.05, 0.07, 0.23), (b,))
    assert any("month ranges" in v for v in validate_dataset(ds))


def test_series_are_immutable():
    ds = _dataset()
    with pytest.raises(ValueError):
        ds.buildings[0].load[0] = 5.0


def test_day_ranges_cover_partial_last_day():
    cal = Calendar(step_count=30)
    ranges = cal.day_ranges()
    assert ranges == [(0, 24), (24, 30)]
    assert cal.day_count == 2


def test_accepted_datasets_run_downstream():
    """Anything validate_dataset accepts must flow through the scenarios."""
    from lemsim.config import SimConfig
    from lemsim.simulate import run_scenario

    for seed in range(3):
        ds = generate_synthetic(seed, n_buildings=2, T=6,
                                profile={"kind": "random", "load_base": 1.0, "gen_base": 1.0})
        assert validate_dataset(ds) == []
        cfg = SimConfig(n_quant=3, max_outer_rounds=10)
        for scenario in ("NoDERMS", "IndividualDERMS", "ALEX"):
            trace = run_scenario(ds, scenario, cfg)
            assert trace.horizon == 6

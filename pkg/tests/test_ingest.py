import json

import numpy as np
import pytest

from lemsim.domain import validate_dataset
from lemsim.ingest import (
    CityLearnMapping,
    IngestError,
    ProfileSpec,
    generate_synthetic,
    load_citylearn,
    read_canonical,
    write_canonical,
)


def make_citylearn_fixture(root, n_buildings=2, steps=48, pv_nominal=(4.0, 5.0),
                           drop_solar_for=None, truncate=None):
    """Minimal CityLearn-2022-layout directory with the real column names."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(1)
    buildings = {}
    for i in range(n_buildings):
        name = f"Building_{i + 1}"
        buildings[name] = {
            "include": True,
            "energy_simulation": f"{name}.csv",
            "electrical_storage": {
                "attributes": {"capacity": 6.4, "nominal_power": 5.0, "loss_coefficient": 0.0}
            },
            "pv": {"attributes": {"nominal_power": pv_nominal[i % len(pv_nominal)]}},
        }
        n = truncate[1] if (truncate and name == truncate[0]) else steps
        month = 1 + (np.arange(n) // 24) % 12
        hour = (np.arange(n) % 24) + 1
        load = rng.uniform(0.2, 2.0, n)
        solar = np.where((hour > 6) & (hour < 19), rng.uniform(0, 600, n), 0.0)
        lines = ["Month,Hour,Day Type,Equipment Electric Power [kWh],Solar Generation [W/kW]"]
        for t in range(n):
            s = "" if drop_solar_for == name else f"{solar[t]}"
            lines.append(f"{month[t]},{hour[t]},1,{load[t]},{s}")
        if drop_solar_for == name:
            lines[0] = "Month,Hour,Day Type,Equipment Electric Power [kWh],Solar"
            lines = [lines[0]] + [
                f"{month[t]},{hour[t]},1,{load[t]},{solar[t]}" for t in range(n)
            ]
        (root / f"{name}.csv").write_text("\n".join(lines) + "\n")
    (root / "schema.json").write_text(json.dumps({"buildings": buildings}))
    return root


class TestLoadCityLearn:
    def test_loads_buildings_with_scaled_solar(self, tmp_path):
        make_citylearn_fixture(tmp_path)
        ds = load_citylearn(tmp_path)
        assert len(ds.buildings) == 2
        assert ds.calendar.step_count == 48
        assert validate_dataset(ds) == []
        # W/kW times nominal kW over 1000 gives kWh
        b1 = ds.buildings[0]
        raw = np.loadtxt(tmp_path / "Building_1.csv", delimiter=",", skiprows=1)[:, 4]
        assert np.allclose(b1.generation, raw * 4.0 / 1000.0)
        assert b1.battery.capacity == 6.4
        assert b1.battery.charge_efficiency == 0.9

    def test_month_column_drives_calendar(self, tmp_path):
        make_citylearn_fixture(tmp_path, steps=72)
        ds = load_citylearn(tmp_path)
        assert ds.calendar.month_ranges == ((0, 24), (24, 48), (48, 72))
        assert all(name == "winter" for *_, name in ds.calendar.season_ranges[:1])

    def test_missing_schema_rejected(self, tmp_path):
        with pytest.raises(IngestError, match="schema"):
            load_citylearn(tmp_path)

    def test_unmapped_column_names_building(self, tmp_path):
        make_citylearn_fixture(tmp_path, drop_solar_for="Building_2")
        with pytest.raises(IngestError, match="Building_2"):
            load_citylearn(tmp_path)

    def test_length_mismatch_names_building(self, tmp_path):
        make_citylearn_fixture(tmp_path, truncate=("Building_2", 30))
        with pytest.raises(IngestError, match="Building_2.*mismatch"):
            load_citylearn(tmp_path)

    def test_missing_capacity_without_default_rejected(self, tmp_path):
        make_citylearn_fixture(tmp_path)
        schema = json.loads((tmp_path / "schema.json").read_text())
        del schema["buildings"]["Building_1"]["electrical_storage"]["attributes"]["capacity"]
        (tmp_path / "schema.json").write_text(json.dumps(schema))
        with pytest.raises(IngestError, match="capacity"):
            load_citylearn(tmp_path)

    def test_round_trip_efficiency_split(self, tmp_path):
        make_citylearn_fixture(tmp_path)
        mapping = CityLearnMapping().with_overrides(
            {"default_efficiency": 0.81, "efficiency_semantics": "round_trip"})
        ds = load_citylearn(tmp_path, mapping)
        assert ds.buildings[0].battery.charge_efficiency == pytest.approx(0.9)
        assert ds.buildings[0].battery.discharge_efficiency == pytest.approx(0.9)

    def test_unknown_mapping_key_rejected(self):
        with pytest.raises(IngestError, match="unknown mapping"):
            CityLearnMapping().with_overrides({"load_col": "x"})


class TestGenerateSynthetic:
    def test_same_seed_is_identical(self):
        a = generate_synthetic(9, 3, 48, {"kind": "random", "load_base": 1.0, "gen_base": 1.0})
        b = generate_synthetic(9, 3, 48, {"kind": "random", "load_base": 1.0, "gen_base": 1.0})
        for x, y in zip(a.buildings, b.buildings):
            assert np.array_equal(x.load, y.load)
            assert np.array_equal(x.generation, y.generation)

    def test_mirror_pair_nets(self):
        ds = generate_synthetic(0, 2, 2, {"kind": "mirror_pair"})
        assert (ds.buildings[0].load - ds.buildings[0].generation).tolist() == [-1.0, 1.0]
        assert (ds.buildings[1].load - ds.buildings[1].generation).tolist() == [1.0, -1.0]

    def test_zero_buildings_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(0, 0, 24)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="profile kind"):
            generate_synthetic(0, 1, 24, {"kind": "sawtooth"})

    def test_output_always_validates(self):
        for kind in ProfileSpec.KINDS:
            ds = generate_synthetic(3, 2, 30, {"kind": kind, "load_base": 1.0, "gen_base": 0.5})
            assert validate_dataset(ds) == [], kind


class TestCanonicalFormat:
    def test_round_trip_is_identical(self, tmp_path):
        ds = generate_synthetic(21, 3, 52, {"kind": "sinusoid", "load_base": 1.5,
                                            "load_amplitude": 0.7, "gen_amplitude": 1.2,
                                            "noise": 0.2})
        write_canonical(ds, tmp_path / "canon")
        back = read_canonical(tmp_path / "canon")
        assert back.calendar == ds.calendar
        assert back.tariff == ds.tariff
        for x, y in zip(ds.buildings, back.buildings):
            assert x.id == y.id
            assert np.array_equal(x.load, y.load)
            assert np.array_equal(x.generation, y.generation)
            assert x.battery == y.battery

    def test_missing_descriptor_rejected(self, tmp_path):
        with pytest.raises(IngestError, match="descriptor"):
            read_canonical(tmp_path)

    def test_citylearn_to_canonical_round_trip(self, tmp_path):
        make_citylearn_fixture(tmp_path / "cl")
        ds = load_citylearn(tmp_path / "cl")
        write_canonical(ds, tmp_path / "canon")
        back = read_canonical(tmp_path / "canon")
        for x, y in zip(ds.buildings, back.buildings):
            assert np.array_equal(x.load, y.load)
            assert np.array_equal(x.generation, y.generation)

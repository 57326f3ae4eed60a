"""Dataset loading: the CityLearn 2022 directory layout, a canonical
internal CSV format, and seeded synthetic communities for oracle-scale
tests.

The CityLearn loader is a translator into the canonical schema; all
column names and unit conventions live in the mapping config so dataset
revisions are a config change, not a code change.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import BatterySpec, BuildingRecord, Calendar, CommunityDataset, GridTariff

CANONICAL_FORMAT_VERSION = 1

DEFAULT_TARIFF = GridTariff(grid_buy=0.25, grid_sell=0.05, market_min=0.07, market_max=0.23)

# Meteorological seasons by calendar month.
_SEASON_OF_MONTH = {
    12: "winter", 1: "winter", 2: "winter",
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "fall", 10: "fall", 11: "fall",
}


class IngestError(ValueError):
    """Dataset files missing, columns unmapped, or series inconsistent."""


@dataclass(frozen=True)
class CityLearnMapping:
    """Pinned column/unit mapping for the CityLearn 2022 dataset.

    ``solar_unit`` ``w_per_kw_nominal`` scales the normalized solar column
    by each building's PV nominal power (kW) over 1000; ``kwh`` takes the
    column as-is.  The schema's battery efficiency is per charge/discharge
    leg (``one_way``); set ``round_trip`` to split a round-trip figure
    symmetrically instead.
    """

    load_column: str = "Equipment Electric Power [kWh]"
    solar_column: str = "Solar Generation [W/kW]"
    solar_unit: str = "w_per_kw_nominal"
    month_column: str = "Month"
    default_efficiency: float = 0.9
    efficiency_semantics: str = "one_way"   # one_way | round_trip
    default_self_discharge: float = 0.0
    initial_soc_kwh: float = 0.0
    tariff: GridTariff = DEFAULT_TARIFF

    def with_overrides(self, overrides: dict | None) -> "CityLearnMapping":
        if not overrides:
            return self
        data = dict(overrides)
        if "tariff" in data and not isinstance(data["tariff"], GridTariff):
            data["tariff"] = GridTariff(**data["tariff"])
        known = set(self.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise IngestError(f"unknown mapping keys: {sorted(unknown)}")
        return replace(self, **data)


def _battery_from_schema(attrs: dict, mapping: CityLearnMapping, building_id: str) -> BatterySpec:
    if "capacity" not in attrs:
        raise IngestError(f"building {building_id}: schema battery lacks capacity and no default applies")
    capacity = float(attrs["capacity"])
    power = float(attrs.get("nominal_power", capacity))
    eff = float(attrs.get("efficiency", mapping.default_efficiency))
    if mapping.efficiency_semantics == "round_trip":
        eta_ch = eta_dis = math.sqrt(eff)
    elif mapping.efficiency_semantics == "one_way":
        eta_ch = eta_dis = eff
    else:
        raise IngestError(f"unknown efficiency_semantics {mapping.efficiency_semantics!r}")
    return BatterySpec(
        capacity=capacity,
        max_charge_power=power,
        max_discharge_power=power,
        charge_efficiency=eta_ch,
        discharge_efficiency=eta_dis,
        self_discharge_per_step=float(attrs.get("loss_coefficient", mapping.default_self_discharge)),
        initial_soc=mapping.initial_soc_kwh,
    )


def _ranges_from_labels(labels) -> list[tuple[int, int, object]]:
    """Contiguous (start, stop, label) runs."""
    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append((start, i, labels[start]))
            start = i
    return runs


def _calendar_from_months(months: np.ndarray, steps_per_day: int = 24) -> Calendar:
    month_runs = _ranges_from_labels(list(months))
    month_ranges = tuple((a, b) for a, b, _ in month_runs)
    season_ranges = tuple((a, b, _SEASON_OF_MONTH[int(m)]) for a, b, m in month_runs)
    merged = []
    for a, b, name in season_ranges:
        if merged and merged[-1][2] == name and merged[-1][1] == a:
            merged[-1] = (merged[-1][0], b, name)
        else:
            merged.append((a, b, name))
    return Calendar(
        step_count=len(months),
        steps_per_day=steps_per_day,
        month_ranges=month_ranges,
        season_ranges=tuple(merged),
    )


def load_citylearn(path, mapping: CityLearnMapping | dict | None = None) -> CommunityDataset:
    """Load a CityLearn-layout directory (schema.json plus per-building
    time-series CSVs) into a community dataset."""
    if isinstance(mapping, dict) or mapping is None:
        mapping = CityLearnMapping().with_overrides(mapping)
    root = Path(path)
    schema_path = root / "schema.json"
    if not schema_path.exists():
        raise IngestError(f"missing schema descriptor {schema_path}")
    with open(schema_path, encoding="utf-8") as fh:
        schema = json.load(fh)

    buildings = []
    step_count = None
    months = None
    for name, bschema in schema.get("buildings", {}).items():
        if not bschema.get("include", True):
            continue
        csv_path = root / bschema["energy_simulation"]
        if not csv_path.exists():
            raise IngestError(f"building {name}: missing time-series file {csv_path}")
        frame = pd.read_csv(csv_path)
        for col in (mapping.load_column, mapping.solar_column):
            if col not in frame.columns:
                raise IngestError(f"building {name}: column {col!r} not in {csv_path.name}")
        if step_count is None:
            step_count = len(frame)
        elif len(frame) != step_count:
            raise IngestError(
                f"building {name}: {len(frame)} steps, expected {step_count} (length mismatch)"
            )
        load = frame[mapping.load_column].to_numpy(dtype=np.float64)
        solar = frame[mapping.solar_column].to_numpy(dtype=np.float64)
        if mapping.solar_unit == "w_per_kw_nominal":
            pv = bschema.get("pv", {}).get("attributes", {})
            if "nominal_power" not in pv:
                raise IngestError(f"building {name}: schema lacks pv nominal_power for solar scaling")
            generation = solar * (float(pv["nominal_power"]) / 1000.0)
        elif mapping.solar_unit == "kwh":
            generation = solar
        else:
            raise IngestError(f"unknown solar_unit {mapping.solar_unit!r}")
        battery = _battery_from_schema(
            bschema.get("electrical_storage", {}).get("attributes", {}), mapping, name)
        buildings.append(BuildingRecord(id=name, load=load, generation=generation, battery=battery))
        if months is None and mapping.month_column in frame.columns:
            months = frame[mapping.month_column].to_numpy(dtype=np.int64)

    if not buildings:
        raise IngestError(f"{root}: schema lists no included buildings")
    if months is not None:
        calendar = _calendar_from_months(months)
    else:
        calendar = Calendar(step_count=step_count)
    return CommunityDataset(calendar=calendar, tariff=mapping.tariff, buildings=tuple(buildings))


@dataclass(frozen=True)
class ProfileSpec:
    """Shape of synthetic load/generation series.

    Kinds: ``constant``, ``step`` (square wave), ``sinusoid`` (daily load
    wave plus a midday solar bump), ``mirror_pair`` (buildings paired with
    opposite unit net loads), ``random`` (seeded uniform draws).
    """

    kind: str = "sinusoid"
    load_base: float = 1.0
    load_amplitude: float = 0.5
    gen_base: float = 0.0
    gen_amplitude: float = 0.0
    noise: float = 0.0
    period: int = 24
    mirror_magnitude: float = 1.0
    battery: BatterySpec = BatterySpec(
        capacity=6.4, max_charge_power=5.0, max_discharge_power=5.0,
        charge_efficiency=0.9, discharge_efficiency=0.9)
    tariff: GridTariff = DEFAULT_TARIFF

    KINDS = ("constant", "step", "sinusoid", "mirror_pair", "random")

    @classmethod
    def from_dict(cls, data: dict) -> "ProfileSpec":
        data = dict(data)
        if "battery" in data and not isinstance(data["battery"], BatterySpec):
            data["battery"] = BatterySpec(**data["battery"])
        if "tariff" in data and not isinstance(data["tariff"], GridTariff):
            data["tariff"] = GridTariff(**data["tariff"])
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        return cls(**data)


def _synthetic_calendar(T: int, steps_per_day: int = 24) -> Calendar:
    month_len = 30 * steps_per_day
    if T >= 2 * month_len:
        bounds = list(range(0, T, month_len))
        month_ranges = tuple(
            (a, min(a + month_len, T)) for a in bounds if a < T
        )
    else:
        month_ranges = ((0, T),)
    if T >= 4:
        cuts = np.linspace(0, T, 5).astype(int)
        season_ranges = tuple(
            (int(cuts[i]), int(cuts[i + 1]), name)
            for i, name in enumerate(("winter", "spring", "summer", "fall"))
        )
    else:
        season_ranges = ((0, T, "spring"),)
    return Calendar(step_count=T, steps_per_day=steps_per_day,
                    month_ranges=month_ranges, season_ranges=season_ranges)


def generate_synthetic(seed: int, n_buildings: int, T: int,
                       profile: ProfileSpec | dict | None = None) -> CommunityDataset:
    """Deterministic synthetic community for a given seed."""
    if n_buildings < 1:
        raise ValueError(f"n_buildings must be >= 1, got {n_buildings}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if isinstance(profile, dict):
        profile = ProfileSpec.from_dict(profile)
    profile = profile or ProfileSpec()
    if profile.kind not in ProfileSpec.KINDS:
        raise ValueError(f"unknown profile kind {profile.kind!r}; expected one of {ProfileSpec.KINDS}")

    rng = np.random.default_rng(seed)
    t = np.arange(T)
    buildings = []
    for bi in range(n_buildings):
        if profile.kind == "constant":
            load = np.full(T, profile.load_base)
            gen = np.full(T, profile.gen_base)
        elif profile.kind == "step":
            half = max(1, profile.period // 2)
            high = (t // half) % 2 == 0
            load = np.where(high, profile.load_base + profile.load_amplitude,
                            max(profile.load_base - profile.load_amplitude, 0.0))
            gen = np.full(T, profile.gen_base)
        elif profile.kind == "sinusoid":
            phase = 2.0 * np.pi * bi / max(1, n_buildings)
            load = profile.load_base + profile.load_amplitude * np.sin(
                2.0 * np.pi * t / profile.period + phase)
            hour = t % 24
            gen = profile.gen_base + profile.gen_amplitude * np.maximum(
                0.0, np.sin(np.pi * (hour - 6) / 12.0))
        elif profile.kind == "mirror_pair":
            m = profile.mirror_magnitude
            even_steps = t % 2 == 0
            if bi % 2 == 0:
                gen = np.where(even_steps, m, 0.0)
                load = np.where(even_steps, 0.0, m)
            else:
                load = np.where(even_steps, m, 0.0)
                gen = np.where(even_steps, 0.0, m)
        else:  # random
            load = rng.uniform(0.0, 2.0 * profile.load_base, size=T)
            gen = rng.uniform(0.0, 2.0 * max(profile.gen_base, 0.0), size=T)
        if profile.noise > 0 and profile.kind not in ("mirror_pair", "random"):
            load = load + rng.uniform(0.0, profile.noise, size=T)
        load = np.maximum(load, 0.0)
        gen = np.maximum(gen, 0.0)
        buildings.append(BuildingRecord(
            id=f"b{bi + 1}", load=load, generation=gen, battery=profile.battery))

    return CommunityDataset(
        calendar=_synthetic_calendar(T),
        tariff=profile.tariff,
        buildings=tuple(buildings),
    )


def write_canonical(ds: CommunityDataset, out_dir) -> None:
    """One CSV per building plus a community descriptor."""
    out = Path(out_dir)
    (out / "buildings").mkdir(parents=True, exist_ok=True)
    descriptor = {
        "format_version": CANONICAL_FORMAT_VERSION,
        "calendar": {
            "step_count": ds.calendar.step_count,
            "steps_per_day": ds.calendar.steps_per_day,
            "month_ranges": [list(r) for r in ds.calendar.month_ranges],
            "season_ranges": [list(r) for r in ds.calendar.season_ranges],
        },
        "tariff": {
            "grid_buy": ds.tariff.grid_buy,
            "grid_sell": ds.tariff.grid_sell,
            "market_min": ds.tariff.market_min,
            "market_max": ds.tariff.market_max,
            "fees_per_step": ds.tariff.fees_per_step,
        },
        "buildings": [
            {
                "id": b.id,
                "file": f"buildings/{b.id}.csv",
                "battery": {
                    "capacity": b.battery.capacity,
                    "max_charge_power": b.battery.max_charge_power,
                    "max_discharge_power": b.battery.max_discharge_power,
                    "charge_efficiency": b.battery.charge_efficiency,
                    "discharge_efficiency": b.battery.discharge_efficiency,
                    "self_discharge_per_step": b.battery.self_discharge_per_step,
                    "initial_soc": b.battery.initial_soc,
                },
            }
            for b in ds.buildings
        ],
    }
    with open(out / "community.json", "w", encoding="utf-8") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for b in ds.buildings:
        with open(out / "buildings" / f"{b.id}.csv", "w", encoding="utf-8") as fh:
            fh.write("t,load_kwh,generation_kwh\n")
            for t in range(ds.calendar.step_count):
                fh.write(f"{t},{float(b.load[t])!r},{float(b.generation[t])!r}\n")


def read_canonical(path) -> CommunityDataset:
    root = Path(path)
    descriptor_path = root / "community.json"
    if not descriptor_path.exists():
        raise IngestError(f"missing community descriptor {descriptor_path}")
    with open(descriptor_path, encoding="utf-8") as fh:
        descriptor = json.load(fh)
    cal = descriptor["calendar"]
    calendar = Calendar(
        step_count=cal["step_count"],
        steps_per_day=cal["steps_per_day"],
        month_ranges=tuple(tuple(r) for r in cal["month_ranges"]),
        season_ranges=tuple((r[0], r[1], r[2]) for r in cal["season_ranges"]),
    )
    tariff = GridTariff(**descriptor["tariff"])
    buildings = []
    for meta in descriptor["buildings"]:
        csv_path = root / meta["file"]
        if not csv_path.exists():
            raise IngestError(f"building {meta['id']}: missing series file {csv_path}")
        rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        if rows.shape[0] != calendar.step_count:
            raise IngestError(
                f"building {meta['id']}: {rows.shape[0]} steps, expected {calendar.step_count}")
        buildings.append(BuildingRecord(
            id=meta["id"], load=rows[:, 1], generation=rows[:, 2],
            battery=BatterySpec(**meta["battery"])))
    return CommunityDataset(calendar=calendar, tariff=tariff, buildings=tuple(buildings))


def default_citylearn_dir() -> Path | None:
    """Dataset location: $LEMSIM_CITYLEARN_DIR, else data/citylearn_2022 in cwd."""
    env = os.environ.get("LEMSIM_CITYLEARN_DIR")
    if env:
        return Path(env)
    fallback = Path("data") / "citylearn_2022"
    return fallback if fallback.exists() else None

"""Core dataset types shared by every module, plus dataset-level validation.

All energy quantities are kWh per hourly step; prices are money per kWh.
Values are immutable after construction so datasets can be shared freely
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SEASONS = ("winter", "spring", "summer", "fall")


def _readonly(series) -> np.ndarray:
    arr = np.ascontiguousarray(series, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Calendar:
    """Hourly time axis with day, month, and season segmentation.

    ``month_ranges`` are ``(start, stop)`` half-open step ranges, one per
    month segment, partitioning ``[0, step_count)``.  ``season_ranges`` are
    ``(start, stop, name)`` segments with names from :data:`SEASONS`; a
    season may own several segments when the series starts mid-season.
    """

    step_count: int
    steps_per_day: int = 24
    month_ranges: tuple[tuple[int, int], ...] = ()
    season_ranges: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self):
        if not self.month_ranges:
            object.__setattr__(self, "month_ranges", ((0, self.step_count),))
        if not self.season_ranges:
            object.__setattr__(self, "season_ranges", ((0, self.step_count, "spring"),))

    @property
    def day_count(self) -> int:
        return math.ceil(self.step_count / self.steps_per_day)

    def day_ranges(self) -> list[tuple[int, int]]:
        d = self.steps_per_day
        return [(start, min(start + d, self.step_count)) for start in range(0, self.step_count, d)]

    def hour_of_day(self) -> np.ndarray:
        return np.arange(self.step_count) % self.steps_per_day

    def season_of_step(self) -> np.ndarray:
        """Season name per step, as a string array."""
        out = np.empty(self.step_count, dtype=object)
        for start, stop, name in self.season_ranges:
            out[start:stop] = name
        return out


@dataclass(frozen=True)
class GridTariff:
    """Grid and market price band.

    The band ``grid_sell < market_min <= market_max < grid_buy`` is what
    makes local trades beneficial to both sides.
    """

    grid_buy: float
    grid_sell: float
    market_min: float
    market_max: float
    fees_per_step: float = 0.0


@dataclass(frozen=True)
class BatterySpec:
    """Battery parameters for one building.

    Charging stores ``charge_efficiency`` per grid-side kWh drawn;
    discharging delivers ``discharge_efficiency`` per kWh removed from
    storage.  ``self_discharge_per_step`` is the fraction of stored energy
    lost before each step's action.
    """

    capacity: float
    max_charge_power: float
    max_discharge_power: float
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0
    self_discharge_per_step: float = 0.0
    initial_soc: float = 0.0

    @classmethod
    def from_round_trip(cls, capacity, max_charge_power, max_discharge_power,
                        round_trip_efficiency, **kwargs) -> "BatterySpec":
        """Split a single round-trip efficiency symmetrically across both legs."""
        eta = math.sqrt(round_trip_efficiency)
        return cls(capacity, max_charge_power, max_discharge_power,
                   charge_efficiency=eta, discharge_efficiency=eta, **kwargs)


@dataclass(frozen=True)
class BuildingRecord:
    """One building's hourly load/generation series and battery."""

    id: str
    load: np.ndarray
    generation: np.ndarray
    battery: BatterySpec

    def __post_init__(self):
        object.__setattr__(self, "load", _readonly(self.load))
        object.__setattr__(self, "generation", _readonly(self.generation))

    def residual(self) -> np.ndarray:
        """Net load before any battery action: load - generation."""
        return self.load - self.generation


@dataclass(frozen=True)
class CommunityDataset:
    """A community: calendar, tariff, and the participating buildings."""

    calendar: Calendar
    tariff: GridTariff
    buildings: tuple[BuildingRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))

    def building(self, building_id: str) -> BuildingRecord:
        for b in self.buildings:
            if b.id == building_id:
                return b
        raise KeyError(building_id)


def _check_partition(ranges, step_count, label, violations):
    cursor = 0
    for r in ranges:
        start, stop = r[0], r[1]
        if start != cursor or stop <= start:
            violations.append(f"calendar: {label} ranges do not partition [0, {step_count}) at {r}")
            return
        cursor = stop
    if cursor != step_count:
        violations.append(f"calendar: {label} ranges cover [0, {cursor}) instead of [0, {step_count})")


def validate_dataset(ds: CommunityDataset) -> list[str]:
    """Check every dataset invariant; return one description per violation.

    An empty list means the dataset is accepted by every downstream module.
    Violations are data, not failures: this never raises.
    """
    v: list[str] = []
    cal = ds.calendar
    T = cal.step_count

    if T < 1:
        v.append("calendar: step_count must be >= 1")
    if cal.steps_per_day < 1:
        v.append("calendar: steps_per_day must be >= 1")
    else:
        if sum(stop - start for start, stop in cal.day_ranges()) != T:
            v.append("calendar: day lengths do not sum to step_count")
    _check_partition(cal.month_ranges, T, "month", v)
    _check_partition(cal.season_ranges, T, "season", v)
    for start, stop, name in cal.season_ranges:
        if name not in SEASONS:
            v.append(f"calendar: unknown season name {name!r} in range ({start}, {stop})")

    t = ds.tariff
    if not (t.grid_sell < t.market_min <= t.market_max < t.grid_buy):
        v.append(
            "tariff: profitability gap violated "
            f"(need grid_sell < market_min <= market_max < grid_buy, got "
            f"{t.grid_sell} / {t.market_min} / {t.market_max} / {t.grid_buy})"
        )

    if not ds.buildings:
        v.append("community: needs at least one building")
    seen: set[str] = set()
    for b in ds.buildings:
        if b.id in seen:
            v.append(f"community: duplicate building id {b.id!r}")
        seen.add(b.id)

        bat = b.battery
        if bat.capacity < 0:
            v.append(f"building {b.id}: battery capacity {bat.capacity} is negative")
        if not (0 <= bat.initial_soc <= bat.capacity):
            v.append(f"building {b.id}: initial_soc {bat.initial_soc} outside [0, {bat.capacity}]")
        for name, eta in (("charge_efficiency", bat.charge_efficiency),
                          ("discharge_efficiency", bat.discharge_efficiency)):
            if not (0 < eta <= 1):
                v.append(f"building {b.id}: {name} {eta} outside (0, 1]")
        if not (0 <= bat.self_discharge_per_step < 1):
            v.append(f"building {b.id}: self_discharge_per_step {bat.self_discharge_per_step} outside [0, 1)")
        for name, p in (("max_charge_power", bat.max_charge_power),
                        ("max_discharge_power", bat.max_discharge_power)):
            if p < 0:
                v.append(f"building {b.id}: {name} {p} is negative")

        for series_name, series in (("load", b.load), ("generation", b.generation)):
            if len(series) != T:
                v.append(f"building {b.id}: {series_name} has length {len(series)}, expected {T}")
                continue
            bad = np.flatnonzero(~np.isfinite(series))
            for i in bad[:5]:
                v.append(f"building {b.id}: {series_name}[{i}] is not finite")
            neg = np.flatnonzero(series < 0)
            for i in neg[:5]:
                v.append(f"building {b.id}: {series_name}[{i}] = {series[i]} is negative")

    return v

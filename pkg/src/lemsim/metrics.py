"""Community net-load metrics and figure-ready profile series.

Every headline metric is a function of the community net load; lower
magnitudes are better throughout.  Exported energy keeps its negative
sign, so import + export equals average daily net consumption.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Calendar
from .simulate import SimulationTrace


@dataclass(frozen=True)
class MetricsReport:
    """The nine headline metrics plus companions and per-window intermediates."""

    avg_daily_import: float
    avg_daily_export: float
    avg_daily_peak: float
    avg_daily_valley: float
    peak: float
    valley: float
    avg_daily_ramp: float
    ramp_per_step: float
    load_factor_complement_daily: float
    load_factor_complement_monthly: float
    lf_daily_skipped: int
    lf_monthly_skipped: int
    daily_import: np.ndarray = field(repr=False)
    daily_export: np.ndarray = field(repr=False)
    daily_peak: np.ndarray = field(repr=False)
    daily_valley: np.ndarray = field(repr=False)
    daily_ramp: np.ndarray = field(repr=False)
    daily_lf_complement: np.ndarray = field(repr=False)
    monthly_lf_complement: np.ndarray = field(repr=False)

    HEADLINE_KEYS = (
        "avg_daily_import", "avg_daily_export", "avg_daily_peak", "avg_daily_valley",
        "peak", "valley", "avg_daily_ramp", "load_factor_complement_daily",
        "load_factor_complement_monthly",
    )

    def headline(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.HEADLINE_KEYS}

    def to_dict(self) -> dict:
        out = self.headline()
        out["ramp_per_step"] = self.ramp_per_step
        out["lf_daily_skipped"] = self.lf_daily_skipped
        out["lf_monthly_skipped"] = self.lf_monthly_skipped
        return out


def avg_daily_energy(series, calendar: Calendar, sign: str) -> float:
    """Mean over days of the daily imported (positive part) or exported
    (negative part, reported negative) community energy."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    if sign not in ("import", "export"):
        raise ValueError(f"sign must be 'import' or 'export', got {sign!r}")
    clipped = np.maximum(series, 0.0) if sign == "import" else np.minimum(series, 0.0)
    daily = np.array([clipped[a:b].sum() for a, b in calendar.day_ranges()])
    return float(daily.mean())


def avg_daily_extreme(series, calendar: Calendar, which: str) -> float:
    """Mean over days of the daily max (peak) or min (valley)."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    if which not in ("peak", "valley"):
        raise ValueError(f"which must be 'peak' or 'valley', got {which!r}")
    fn = np.max if which == "peak" else np.min
    return float(np.mean([fn(series[a:b]) for a, b in calendar.day_ranges()]))


def absolute_extreme(series, which: str) -> float:
    """Global max (peak) or min (valley) of the series."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    return float(series.max() if which == "peak" else series.min())


def avg_daily_ramping(series, calendar: Calendar) -> tuple[float, float]:
    """(mean over days of the daily sum of |step-to-step change|,
    companion per-step mean of the same changes).

    Differencing is global: the first step of each day uses the previous
    day's last value, so only the very first step lacks a predecessor.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    grad = np.abs(np.diff(series))
    daily = []
    for a, b in calendar.day_ranges():
        lo = max(a, 1)
        daily.append(grad[lo - 1:b - 1].sum())
    literal = float(np.mean(daily))
    per_step = float(grad.mean()) if grad.size else 0.0
    return literal, per_step


def load_factor_complement(series, windows) -> tuple[float, int]:
    """Mean over windows of 1 - mean/max; windows whose max is not positive
    are skipped and tallied."""
    series = np.asarray(series, dtype=np.float64)
    values = []
    skipped = 0
    for a, b in windows:
        window = series[a:b]
        mx = window.max()
        if mx <= 0:
            skipped += 1
            continue
        values.append(1.0 - window.mean() / mx)
    if not values:
        raise ValueError("all windows skipped (no positive maxima)")
    return float(np.mean(values)), skipped


def compute_metrics(community_net_load, calendar: Calendar) -> MetricsReport:
    series = np.asarray(community_net_load, dtype=np.float64)
    days = calendar.day_ranges()
    months = [(a, b) for a, b in calendar.month_ranges]
    clipped_pos = np.maximum(series, 0.0)
    clipped_neg = np.minimum(series, 0.0)
    daily_import = np.array([clipped_pos[a:b].sum() for a, b in days])
    daily_export = np.array([clipped_neg[a:b].sum() for a, b in days])
    daily_peak = np.array([series[a:b].max() for a, b in days])
    daily_valley = np.array([series[a:b].min() for a, b in days])
    literal_ramp, per_step_ramp = avg_daily_ramping(series, calendar)
    grad = np.abs(np.diff(series))
    daily_ramp = np.array([grad[max(a, 1) - 1:b - 1].sum() for a, b in days])

    def lf_values(windows):
        vals = []
        skipped = 0
        for a, b in windows:
            mx = series[a:b].max()
            if mx <= 0:
                vals.append(math.nan)
                skipped += 1
            else:
                vals.append(1.0 - series[a:b].mean() / mx)
        return np.array(vals), skipped

    daily_lf, d_skip = lf_values(days)
    monthly_lf, m_skip = lf_values(months)
    lf_d, _ = load_factor_complement(series, days)
    lf_m, _ = load_factor_complement(series, months)

    return MetricsReport(
        avg_daily_import=float(daily_import.mean()),
        avg_daily_export=float(daily_export.mean()),
        avg_daily_peak=float(daily_peak.mean()),
        avg_daily_valley=float(daily_valley.mean()),
        peak=float(series.max()),
        valley=float(series.min()),
        avg_daily_ramp=literal_ramp,
        ramp_per_step=per_step_ramp,
        load_factor_complement_daily=lf_d,
        load_factor_complement_monthly=lf_m,
        lf_daily_skipped=d_skip,
        lf_monthly_skipped=m_skip,
        daily_import=daily_import,
        daily_export=daily_export,
        daily_peak=daily_peak,
        daily_valley=daily_valley,
        daily_ramp=daily_ramp,
        daily_lf_complement=daily_lf,
        monthly_lf_complement=monthly_lf,
    )


def profile_series(trace: SimulationTrace, calendar: Calendar, groupby: str,
                   quantity: str) -> list[tuple[str, float, float]]:
    """Grouped (label, mean, std) rows for the figure CSVs.

    Quantities: ``net_load`` (community), ``mean_soc`` (community mean over
    buildings), ``cumulative_mean_bill`` (per-building cumulative bills).
    Group keys: ``hour_of_day``, ``hour_of_day_season``, or ``step`` (the
    latter aggregates across buildings instead of across days).
    """
    if quantity == "net_load":
        per_step = trace.community_net_load
        per_building = None
    elif quantity == "mean_soc":
        per_step = trace.soc.mean(axis=0)
        per_building = trace.soc
    elif quantity == "cumulative_mean_bill":
        per_building = trace.cumulative_bills()
        per_step = per_building.mean(axis=0)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")

    if groupby == "step":
        if per_building is None:
            raise ValueError("groupby='step' needs a per-building quantity")
        return [(str(t), float(per_building[:, t].mean()), float(per_building[:, t].std()))
                for t in range(per_building.shape[1])]

    hours = calendar.hour_of_day()
    if groupby == "hour_of_day":
        labels = [f"{h:02d}" for h in hours]
        keys = [f"{h:02d}" for h in range(calendar.steps_per_day)]
    elif groupby == "hour_of_day_season":
        seasons = calendar.season_of_step()
        labels = [f"{s}-{h:02d}" for s, h in zip(seasons, hours)]
        season_order = []
        for _, _, name in calendar.season_ranges:
            if name not in season_order:
                season_order.append(name)
        keys = [f"{s}-{h:02d}" for s in season_order for h in range(calendar.steps_per_day)]
    else:
        raise ValueError(f"unknown groupby {groupby!r}")

    grouped: dict[str, list[float]] = {k: [] for k in keys}
    for label, value in zip(labels, per_step):
        grouped[label].append(value)
    out = []
    for key in keys:
        samples = np.array(grouped[key])
        if samples.size:
            out.append((key, float(samples.mean()), float(samples.std())))
    return out


def write_profile_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("group,mean,std\n")
        for group, mean, std in rows:
            fh.write(f"{group},{mean!r},{std!r}\n")


def write_metrics_json(path, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_daily_csv(path, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("day,import_kwh,export_kwh,peak_kwh,valley_kwh,ramp_kwh,load_factor_complement\n")
        for d in range(len(report.daily_import)):
            lf = report.daily_lf_complement[d]
            fh.write(
                f"{d},{float(report.daily_import[d])!r},{float(report.daily_export[d])!r},"
                f"{float(report.daily_peak[d])!r},{float(report.daily_valley[d])!r},"
                f"{float(report.daily_ramp[d])!r},{'' if math.isnan(lf) else repr(float(lf))}\n"
            )


def write_monthly_csv(path, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("month,load_factor_complement\n")
        for m, lf in enumerate(report.monthly_lf_complement):
            fh.write(f"{m},{'' if math.isnan(lf) else repr(float(lf))}\n")

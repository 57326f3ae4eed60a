"""Batch runner and report emitter.

Subcommands: ``run`` (one scenario end to end into a run directory),
``compare`` (side-by-side metric table over completed runs), ``validate``
(dataset invariant check), ``ingest`` (CityLearn layout to the canonical
format).  Reruns with the same config and seed produce byte-identical
metric and trace files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import yaml

from . import __version__
from ._kernels import BACKEND
from .config import SimConfig
from .domain import CommunityDataset, GridTariff, validate_dataset
from .equilibrium import compute_background, write_convergence_csv
from .ingest import (
    CityLearnMapping,
    IngestError,
    default_citylearn_dir,
    generate_synthetic,
    load_citylearn,
    read_canonical,
    write_canonical,
)
from .mdp import Scenario, build_mdp
from .metrics import (
    MetricsReport,
    compute_metrics,
    profile_series,
    write_daily_csv,
    write_metrics_json,
    write_monthly_csv,
    write_profile_csv,
)
from .simulate import SimulationTrace, run_scenario, write_trace_csv
from .solver import policy_values, write_policy_csv

MANIFEST_VERSION = 1

# Direction of improvement per headline metric (negative-valued metrics
# improve toward zero, i.e. upward).
METRIC_DIRECTIONS = {
    "avg_daily_import": "min",
    "avg_daily_export": "max",
    "avg_daily_peak": "min",
    "avg_daily_valley": "max",
    "peak": "min",
    "valley": "max",
    "avg_daily_ramp": "min",
    "load_factor_complement_daily": "min",
    "load_factor_complement_monthly": "min",
}


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return cfg


def _tariff_from(cfg: dict) -> GridTariff | None:
    if "tariff" not in cfg:
        return None
    return GridTariff(**cfg["tariff"])


def sim_config_from(cfg: dict, seed_override: int | None = None) -> SimConfig:
    sim = SimConfig.from_dict(cfg.get("simulation", {}))
    if seed_override is not None:
        sim = sim.with_seed(seed_override)
    return sim


def load_dataset(cfg: dict) -> CommunityDataset:
    ds_cfg = cfg.get("dataset", {})
    kind = ds_cfg.get("kind")
    tariff = _tariff_from(cfg)
    if kind == "synthetic":
        syn = dict(ds_cfg.get("synthetic", {}))
        profile = dict(syn.get("profile", {}))
        if tariff is not None:
            profile["tariff"] = tariff
        return generate_synthetic(
            seed=syn.get("seed", 0),
            n_buildings=syn.get("n_buildings", 2),
            T=syn.get("steps", 48),
            profile=profile,
        )
    if kind == "canonical":
        ds = read_canonical(ds_cfg["path"])
        if tariff is not None:
            ds = CommunityDataset(calendar=ds.calendar, tariff=tariff, buildings=ds.buildings)
        return ds
    if kind == "citylearn":
        path = ds_cfg.get("path") or default_citylearn_dir()
        if path is None:
            raise IngestError(
                "no CityLearn dataset: set dataset.path or LEMSIM_CITYLEARN_DIR "
                "(see scripts/fetch_citylearn.py)"
            )
        overrides = dict(ds_cfg.get("citylearn_mapping", {}))
        if tariff is not None:
            overrides["tariff"] = tariff
        return load_citylearn(path, CityLearnMapping().with_overrides(overrides))
    raise ValueError(f"dataset.kind must be synthetic, canonical, or citylearn (got {kind!r})")


def dataset_hashes(ds: CommunityDataset) -> dict[str, str]:
    out = {}
    for b in ds.buildings:
        h = hashlib.sha256()
        h.update(b.load.tobytes())
        h.update(b.generation.tobytes())
        h.update(repr(b.battery).encode())
        out[b.id] = h.hexdigest()
    meta = hashlib.sha256()
    meta.update(repr(ds.tariff).encode())
    meta.update(repr(ds.calendar).encode())
    out["community"] = meta.hexdigest()
    return out


def _write_figures(fig_dir: Path, trace: SimulationTrace, calendar) -> None:
    fig_dir.mkdir(parents=True, exist_ok=True)
    write_profile_csv(fig_dir / "net_load_hourly.csv",
                      profile_series(trace, calendar, "hour_of_day", "net_load"))
    write_profile_csv(fig_dir / "soc_hourly.csv",
                      profile_series(trace, calendar, "hour_of_day", "mean_soc"))
    write_profile_csv(fig_dir / "net_load_hourly_seasonal.csv",
                      profile_series(trace, calendar, "hour_of_day_season", "net_load"))
    write_profile_csv(fig_dir / "soc_hourly_seasonal.csv",
                      profile_series(trace, calendar, "hour_of_day_season", "mean_soc"))
    write_profile_csv(fig_dir / "cumulative_bill.csv",
                      profile_series(trace, calendar, "step", "cumulative_mean_bill"))


def _persist_policies(out: Path, ds: CommunityDataset, trace: SimulationTrace,
                      sim: SimConfig) -> None:
    """Policy CSVs with the value column evaluated against the final
    environment (for the market scenario: the other buildings' final flows)."""
    policies_dir = out / "policies"
    policies_dir.mkdir(exist_ok=True)
    for b in ds.buildings:
        if trace.scenario is Scenario.ALEX:
            background = compute_background(ds, trace.joint_policy, b.id, sim)
            mdp = build_mdp(b, ds.tariff, trace.scenario, sim.n_quant, background=background)
        else:
            mdp = build_mdp(b, ds.tariff, trace.scenario, sim.n_quant, w_sq=sim.w_sq)
        policy = trace.joint_policy[b.id]
        table = policy_values(mdp, policy)
        write_policy_csv(policies_dir / f"{b.id}.csv", policy, table)


def run_to_directory(ds: CommunityDataset, scenario: Scenario, sim: SimConfig,
                     out_dir, config_snapshot: dict) -> tuple[MetricsReport, SimulationTrace]:
    """Execute one scenario and persist every artifact into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_scenario(ds, scenario, sim)
    report = compute_metrics(trace.community_net_load, ds.calendar)

    write_trace_csv(out / "trace.csv", trace)
    write_metrics_json(out / "metrics.json", report)
    write_daily_csv(out / "metrics_daily.csv", report)
    write_monthly_csv(out / "metrics_monthly.csv", report)
    _write_figures(out / "figures", trace, ds.calendar)
    _persist_policies(out, ds, trace, sim)
    if trace.convergence is not None:
        write_convergence_csv(out / "convergence.csv", trace.convergence)

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "scenario": scenario.value,
        "seed": sim.seed,
        "converged": trace.converged,
        "simulation": sim.to_dict(),
        "config": config_snapshot,
        "dataset_hashes": dataset_hashes(ds),
        "calendar": {
            "step_count": ds.calendar.step_count,
            "steps_per_day": ds.calendar.steps_per_day,
            "day_count": ds.calendar.day_count,
        },
        "files": {
            "trace": "trace.csv",
            "metrics": "metrics.json",
            "policies": "policies/",
            "convergence": "convergence.csv" if trace.convergence is not None else None,
        },
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, trace


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    scenario_name = args.scenario or cfg.get("scenario")
    if not scenario_name:
        print("error: no scenario given (flag --scenario or config key 'scenario')", file=sys.stderr)
        return 2
    try:
        scenario = Scenario.parse(scenario_name)
        ds = load_dataset(cfg)
    except (IngestError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    violations = validate_dataset(ds)
    if violations:
        for v in violations:
            print(f"invalid dataset: {v}", file=sys.stderr)
        return 1
    sim = sim_config_from(cfg, args.seed)
    report, trace = run_to_directory(ds, scenario, sim, args.out, cfg)
    print(f"run complete: scenario={scenario.value} out={args.out} converged={trace.converged}")
    for key, value in report.headline().items():
        print(f"  {key} = {value:.4f}")
    if not trace.converged:
        print("warning: equilibrium did not converge within the round cap (manifest flagged)")
    return 0


def _load_run(run_dir: Path) -> tuple[dict, dict]:
    with open(run_dir / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(run_dir / "metrics.json", encoding="utf-8") as fh:
        metrics = json.load(fh)
    return manifest, metrics


def _better(direction: str, a: float, b: float) -> bool:
    return a < b if direction == "min" else a > b


def hypothesis_lines(by_scenario: dict[str, dict]) -> list[str]:
    """Ordering checks over the three canonical scenarios, when present."""
    lines = []
    needed = {"NoDERMS", "IndividualDERMS", "ALEX"}
    if not needed.issubset(by_scenario):
        return lines
    no, ind, alex = (by_scenario[k] for k in ("NoDERMS", "IndividualDERMS", "ALEX"))

    def no_worse(alex_v, other_v, direction):
        return alex_v == other_v or _better(direction, alex_v, other_v)

    h1_no = all(no_worse(alex[m], no[m], d) for m, d in METRIC_DIRECTIONS.items())
    h1_ind = all(no_worse(alex[m], ind[m], d) for m, d in METRIC_DIRECTIONS.items())
    lines.append(f"H1 vs NoDERMS (no metric worse): {'PASS' if h1_no else 'FAIL'}")
    lines.append(f"H1 vs IndividualDERMS (no metric worse, tie ok on peak): {'PASS' if h1_ind else 'FAIL'}")

    def consumption(m):
        return m["avg_daily_import"] + m["avg_daily_export"]

    h2_cons = consumption(alex) >= consumption(ind) >= consumption(no)
    h2_flows = (alex["avg_daily_import"] < ind["avg_daily_import"]
                and abs(alex["avg_daily_export"]) < abs(ind["avg_daily_export"]))
    lines.append(f"H2 consumption ordering ALEX >= IndividualDERMS >= NoDERMS: "
                 f"{'PASS' if h2_cons else 'FAIL'}")
    lines.append(f"H2 import/export magnitudes ALEX < IndividualDERMS: "
                 f"{'PASS' if h2_flows else 'FAIL'}")
    ramp_literal = alex["avg_daily_ramp"] <= ind["avg_daily_ramp"] <= no["avg_daily_ramp"]
    ramp_step = alex["ramp_per_step"] <= ind["ramp_per_step"] <= no["ramp_per_step"]
    lines.append(f"Ramping ordering (daily-sum and per-step): "
                 f"{'PASS' if ramp_literal and ramp_step else 'FAIL'}")
    return lines


def cmd_compare(args) -> int:
    runs = []
    for run_dir in args.runs:
        run_dir = Path(run_dir)
        try:
            manifest, metrics = _load_run(run_dir)
        except FileNotFoundError as exc:
            print(f"error: {run_dir} is not a completed run directory ({exc})", file=sys.stderr)
            return 1
        runs.append((run_dir.name, manifest, metrics))
    if len(runs) < 2:
        print("error: compare needs at least two run directories", file=sys.stderr)
        return 2
    calendars = {json.dumps(m["calendar"], sort_keys=True) for _, m, _ in runs}
    if len(calendars) > 1:
        print("error: runs cover incompatible calendars", file=sys.stderr)
        return 1

    labels = [f"{name}[{manifest['scenario']}]" for name, manifest, _ in runs]
    width = max(len(lbl) for lbl in labels) + 2
    name_w = max(len(k) for k in METRIC_DIRECTIONS) + 2
    header = "metric".ljust(name_w) + "".join(lbl.rjust(width) for lbl in labels)
    lines = [header]
    csv_rows = ["metric," + ",".join(labels) + ",best"]
    for metric, direction in METRIC_DIRECTIONS.items():
        values = [metrics[metric] for _, _, metrics in runs]
        best = min(values) if direction == "min" else max(values)
        cells = []
        for v in values:
            mark = "*" if v == best else " "
            cells.append(f"{v:.4f}{mark}".rjust(width))
        lines.append(metric.ljust(name_w) + "".join(cells))
        best_labels = ";".join(lbl for lbl, v in zip(labels, values) if v == best)
        csv_rows.append(f"{metric}," + ",".join(repr(v) for v in values) + f",{best_labels}")

    by_scenario = {manifest["scenario"]: metrics for _, manifest, metrics in runs}
    hyp = hypothesis_lines(by_scenario)
    print("\n".join(lines))
    if hyp:
        print()
        print("\n".join(hyp))
    out_csv = Path(args.out) if args.out else Path("comparison.csv")
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write("\n".join(csv_rows) + "\n")
        for line in hyp:
            fh.write(f"# {line}\n")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    try:
        ds = load_dataset(cfg)
    except (IngestError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    violations = validate_dataset(ds)
    if violations:
        for v in violations:
            print(v)
        return 1
    print(f"dataset ok: {len(ds.buildings)} buildings, {ds.calendar.step_count} steps")
    return 0


def cmd_ingest(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    ds_cfg = cfg.get("dataset", {})
    path = args.source or ds_cfg.get("path") or default_citylearn_dir()
    if path is None:
        print("error: no CityLearn directory (use --source or LEMSIM_CITYLEARN_DIR)", file=sys.stderr)
        return 1
    overrides = dict(ds_cfg.get("citylearn_mapping", {}))
    tariff = _tariff_from(cfg)
    if tariff is not None:
        overrides["tariff"] = tariff
    try:
        ds = load_citylearn(path, CityLearnMapping().with_overrides(overrides))
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_canonical(ds, args.out)
    print(f"wrote canonical dataset: {args.out} ({len(ds.buildings)} buildings, "
          f"{ds.calendar.step_count} steps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lemsim", description="community energy market simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario into a run directory")
    p_run.add_argument("--config", required=True, help="YAML run config")
    p_run.add_argument("--scenario", choices=[s.value for s in Scenario], default=None)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", required=True, help="run directory to create")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare completed run directories")
    p_cmp.add_argument("runs", nargs="+", help="run directories")
    p_cmp.add_argument("--out", default=None, help="comparison CSV path")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="validate the configured dataset")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_ing = sub.add_parser("ingest", help="convert a CityLearn directory to canonical CSV")
    p_ing.add_argument("--config", default=None, help="optional YAML config with mapping overrides")
    p_ing.add_argument("--source", default=None, help="CityLearn dataset directory")
    p_ing.add_argument("--out", required=True, help="canonical dataset directory to write")
    p_ing.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

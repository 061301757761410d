"""Command-line front end: campaigns, isolation sweeps, capacity searches,
scenario-probability tables and config validation.

Exit codes: 0 success, 2 configuration/usage error, 3 campaign failure.
"""

import argparse
import json
import math
import os
import sys

from . import engine, linkadapt, metrics, radio, tdd
from .config import ConfigError, ScenarioConfig

TABLE1_LABELS = {
    tdd.InterferenceScenario.DL_TO_DL: "DL-to-DL (BS-to-UE)",
    tdd.InterferenceScenario.DL_TO_UL: "DL-to-UL (BS-to-BS)",
    tdd.InterferenceScenario.UL_TO_UL: "UL-to-UL (UE-to-BS)",
    tdd.InterferenceScenario.UL_TO_DL: "UL-to-DL (UE-to-UE)",
}


def _parse_set_value(text: str):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"malformed --set override {pair!r}, expected key=value")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = _parse_set_value(value.strip())
    return overrides


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_json(args.config)
    overrides = _parse_overrides(args.set)
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.drops is not None:
        overrides["drops"] = args.drops
    if args.threads is not None:
        overrides["threads"] = args.threads
    return cfg.apply_overrides(overrides)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("config", help="scenario config JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field (repeatable)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--drops", type=int, help="override the drop count")
    p.add_argument("--threads", type=int,
                   help="drop-level parallelism (0 = auto, 1 = serial)")
    p.add_argument("--out", default="coexsim_out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coexsim",
        description="eMBB/URLLC TDD coexistence system-level simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a campaign")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep-isolation", help="relative capacity vs isolation")
    _add_common(p_sweep)
    p_sweep.add_argument("--grid", help="comma-separated isolation grid in dB")

    p_cap = sub.add_parser("capacity", help="system capacity bisection")
    _add_common(p_cap)
    p_cap.add_argument("--direction", choices=("dl", "ul", "both"), default="both")
    p_cap.add_argument("--lo", type=float, help="lower rate bracket")
    p_cap.add_argument("--hi", type=float, help="upper rate bracket")
    p_cap.add_argument("--tol", type=float, help="rate tolerance")

    p_t1 = sub.add_parser("table1", help="interference scenario probabilities")
    p_t1.add_argument("aggressor", help="aggressor TDD pattern, e.g. DDDU")
    p_t1.add_argument("victim", help="victim TDD pattern, e.g. DUDU")
    p_t1.add_argument("--mode", choices=("aligned", "marginal"), default="aligned")

    p_mcs = sub.add_parser("mcs-table", help="dump the MCS table as CSV")
    p_mcs.add_argument("--gap-db", type=float, default=3.0,
                       help="Shannon gap for the SINR thresholds")

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config", help="scenario config JSON file")
    p_val.add_argument("--set", action="append", metavar="KEY=VALUE")

    return parser


def _cmd_table1(args) -> int:
    try:
        agg = tdd.parse_pattern(args.aggressor)
        vic = tdd.parse_pattern(args.victim)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    mix = tdd.scenario_probabilities(agg, vic, tdd.MixMode(args.mode))
    print(f"# aggressor={agg} victim={vic} mode={args.mode}")
    for scenario in tdd.SCENARIO_ORDER:
        pct = float(mix[scenario]) * 100.0
        print(f"{TABLE1_LABELS[scenario]}\t{pct:g}%")
    return 0


def _cmd_mcs_table(args) -> int:
    print("modulation,code_rate,spectral_efficiency,threshold_db")
    for e in linkadapt.build_mcs_table(args.gap_db):
        print(f"{e.modulation},{e.code_rate},{e.spectral_efficiency:.9g},"
              f"{e.sinr_threshold_db:.9g}")
    return 0


def _cmd_validate(args) -> int:
    cfg = ScenarioConfig.from_json(args.config)
    cfg = cfg.apply_overrides(_parse_overrides(args.set))
    print(f"config OK (hash {cfg.config_hash()[:12]})")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    result = engine.run_campaign(cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "results.csv")
    json_path = os.path.join(args.out, "results.json")
    engine.write_campaign_csv(result, csv_path)
    engine.write_campaign_json(result, json_path)
    for r in result.rows:
        print(f"{r.direction:>4}  {r.metric:<32} {r.value:.6g}"
              + (f"  +-{r.ci95:.3g}" if not math.isnan(r.ci95) else ""))
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    grid = None
    if args.grid:
        try:
            grid = tuple(float(v) for v in args.grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"malformed --grid: {exc}") from exc
    result = engine.sweep_isolation(cfg, grid)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    engine.write_sweep_csv(result, csv_path)
    sidecar = {
        "provenance": engine.provenance_block(result.config, result.config_hash),
        "config": result.config,
        "full_isolation_capacity": result.full_isolation_capacity,
    }
    json_path = os.path.join(args.out, "sweep.json")
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for p in result.points:
        print(f"{p.direction}  iso={p.isolation_db:g} dB  capacity={p.capacity:.6g}"
              f"  relative={p.relative_capacity:.4f}")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_capacity(args) -> int:
    cfg = _load_config(args)
    overrides = {}
    if args.lo is not None:
        overrides["capacity_lo_rate"] = args.lo
    if args.hi is not None:
        overrides["capacity_hi_rate"] = args.hi
    if args.tol is not None:
        overrides["capacity_tol_rate"] = args.tol
    if overrides:
        cfg = cfg.apply_overrides(overrides)
    ctxs = engine.build_contexts(cfg)
    directions = ("dl", "ul") if args.direction == "both" else (args.direction,)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for direction in directions:
        res = engine.capacity_at_isolation(cfg, ctxs, direction, cfg.extra_isolation_db)
        rows.append(res)
        print(f"{direction}  capacity={res.capacity:.6g} packets/s/m2  "
              f"bracket=({res.bracket[0]:.6g}, {res.bracket[1]:.6g})  "
              f"evaluations={res.evaluations}  flags={list(res.flags)}")
    payload = {
        "provenance": engine.provenance_block(cfg.to_dict(), cfg.config_hash()),
        "config": cfg.to_dict(),
        "results": [
            {
                "direction": r.direction,
                "capacity": r.capacity,
                "bracket": list(r.bracket),
                "evaluations": r.evaluations,
                "flags": list(r.flags),
            }
            for r in rows
        ],
    }
    json_path = os.path.join(args.out, "capacity.json")
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {json_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep-isolation": _cmd_sweep,
        "capacity": _cmd_capacity,
        "table1": _cmd_table1,
        "mcs-table": _cmd_mcs_table,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except engine.CampaignError as exc:
        print(f"campaign failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

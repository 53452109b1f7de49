"""Command-line front end.

    flatplan plan      motion-law samples (CSV)
    flatplan simulate  simulated trajectory (CSV)
    flatplan run       full pipeline, trajectory CSV and summary JSON
    flatplan table     the three reference scenarios against published values

Exit codes: 0 success, 2 config error, 3 planner conditioning error,
4 simulation instability.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from flatplan.errors import ConfigError, FlatPlanError
from flatplan.scenarios import (
    ScenarioConfig,
    config_to_dict,
    format_table,
    load_config,
    plan_csv,
    plan_scenario,
    reproduce_results_table,
    run_scenario,
    sample_grid,
    scenario_config,
    table_csv,
    trajectory_csv,
)
from flatplan.varplanner import STRATEGIES, StrategySpec

log = logging.getLogger("flatplan")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config JSON (a summary JSON also works)")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3),
                   help="start from a reference scenario instead of the defaults")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--r", type=float, help="control-effort weighting factor")
    p.add_argument("--p", type=float, help="potential-energy weighting factor")
    p.add_argument("--dt", type=float, help="integration step (s)")
    p.add_argument("--t-free", type=float, help="free-response duration after the motion (s)")
    p.add_argument("--k-scale", type=float, help="plant stiffness multiplier")
    p.add_argument("--c-scale", type=float, help="plant damping multiplier")
    p.add_argument("--out", help="CSV output path ('-' for stdout)")


def resolve_config(args) -> ScenarioConfig:
    if args.scenario is not None:
        base = scenario_config(args.scenario)
    else:
        base = ScenarioConfig()
    cfg = load_config(args.config, base) if args.config else base
    strat = cfg.strategy
    sim = cfg.sim
    try:
        strat = StrategySpec(
            kind=args.strategy or strat.kind,
            r=strat.r if args.r is None else args.r,
            p=strat.p if args.p is None else args.p,
        )
        overrides = {
            k: v
            for k, v in (("dt", args.dt), ("t_free", args.t_free),
                         ("k_scale", args.k_scale), ("c_scale", args.c_scale))
            if v is not None
        }
        sim = replace(sim, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(cfg, strategy=strat, sim=sim)


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _print_metrics(report) -> None:
    for k, v in report.metrics.as_dict().items():
        print(f"{k:>18}: {v:.6g}", file=sys.stderr)


def cmd_plan(args) -> int:
    cfg = resolve_config(args)
    law = plan_scenario(cfg)
    _write(args.out, plan_csv(law, cfg.robot, sample_grid(cfg)))
    print(f"condition_number: {law.condition_number:.6g}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    report = run_scenario(cfg)
    _write(args.out, trajectory_csv(report))
    return 0


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    report = run_scenario(cfg)
    if args.out:
        _write(args.out, trajectory_csv(report))
    if args.summary:
        _write(args.summary, report.to_json())
    else:
        sys.stdout.write(report.to_json())
    _print_metrics(report)
    return 0


def cmd_table(args) -> int:
    overrides = {k: v for k, v in (("dt", args.dt), ("t_free", args.t_free)) if v is not None}
    try:
        rows = reproduce_results_table(workers=args.workers, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(format_table(rows))
    if args.out:
        _write(args.out, table_csv(rows))
    n_ok = sum(r.all_ok for r in rows)
    print(f"{n_ok}/{len(rows)} rows within tolerance", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatplan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="emit motion-law samples")
    _add_config_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="emit the simulated trajectory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="full pipeline with summary report")
    _add_config_flags(p)
    p.add_argument("--summary", help="summary JSON path (default: stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="reproduce the results table")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-free", type=float)
    p.add_argument("--out", help="table CSV path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("config", help="print the resolved config as JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_config)
    return parser


def cmd_config(args) -> int:
    import json

    _write(args.out, json.dumps(config_to_dict(resolve_config(args)), indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FlatPlanError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error [ConfigError]: {exc}", file=sys.stderr)
        return ConfigError.code


if __name__ == "__main__":
    sys.exit(main())

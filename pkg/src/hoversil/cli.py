"""Command-line front end: single runs, mitigation matrices, model checks.

Exit codes follow the convention 0 = ran clean, 2 = violations (monitor
trips on a run, rule failures on a model check), 1 = bad input or I/O.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .harness import (
    HarnessError,
    RunReport,
    run,
    run_matrix,
    write_matrix,
    write_report,
)
from .stpa import (
    ModelError,
    UcaCategory,
    check_completeness,
    load_bundled_model,
    load_model_file,
    uca_candidate_matrix,
)

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2


def _parse_mitigations(text: str) -> tuple[str, ...]:
    if text.strip().lower() in ("", "none"):
        return ()
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_seeds(text: str) -> tuple[int, ...]:
    """'7' is a single seed, '3..12' an inclusive range."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return tuple(range(lo, hi + 1))
    return (int(text),)


def _parse_mitigation_sets(path: str) -> list[tuple[str, ...]]:
    """One set per line, flags comma-separated; 'none' or a blank line is
    the empty set; '#' starts a comment."""
    sets: list[tuple[str, ...]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            sets.append(_parse_mitigations(line))
    if not sets:
        raise ValueError(f"{path}: no mitigation sets found")
    return sets


def _apply_cli_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    scenario = args.scenario
    if scenario == "none":
        cfg, scenario = replace(cfg, scenario=None), None
    mits = _parse_mitigations(args.mitigations) if args.mitigations is not None else None
    return apply_overrides(cfg, scenario=scenario, mitigations=mits, seed=args.seed)


def _print_run_summary(report: RunReport) -> None:
    scen = report.scenario or "none"
    mits = "+".join(report.mitigations) or "none"
    print(f"scenario={scen} mitigations={mits} seed={report.seed}")
    if report.abort_reason is not None:
        print(f"aborted: {report.abort_reason}")
    if report.touchdown_time is not None:
        print(f"touchdown at {report.touchdown_time:.2f} s, "
              f"{report.landing_error:.3f} m from the pad")
    elif report.landing_error is not None:
        print(f"no touchdown declared; came to rest {report.landing_error:.3f} m "
              f"from the pad")
    else:
        print(f"airborne at end of run ({report.end_time:.1f} s)")
    if report.post_touchdown_thrust_ticks:
        print(f"post-touchdown thrust ticks: {report.post_touchdown_thrust_ticks}")
    if report.violations:
        for v in report.violations:
            print(f"violation {v.constraint} ({v.hazard}) at t={v.time:.2f}: {v.detail}")
    else:
        print("no violations")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_cli_overrides(load_config(args.config), args)
    report = run(cfg)
    if args.out is not None:
        path = write_report(report, args.out, args.format)
        print(path)
    else:
        _print_run_summary(report)
    return EXIT_VIOLATIONS if report.violations else EXIT_CLEAN


def _cmd_matrix(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    mitigation_sets = _parse_mitigation_sets(args.mitigation_sets)
    seeds = _parse_seeds(args.seeds)
    rows = run_matrix(cfg, scenarios, mitigation_sets, seeds)
    if args.out is not None:
        path = write_matrix(rows, args.out, args.format)
        print(path)
    else:
        for r in rows:
            tripped = ", ".join(f"{sc}={rate:.0%}" for sc, rate in r.violation_rates if rate)
            err = "-" if r.mean_landing_error is None else f"{r.mean_landing_error:.3f} m"
            print(f"{r.scenario}/{r.mitigations}: runs={r.runs} mean_err={err} "
                  f"{tripped or 'clean'}")
    any_trips = any(rate > 0 for r in rows for _, rate in r.violation_rates)
    return EXIT_VIOLATIONS if any_trips else EXIT_CLEAN


def _load_graph(path: Optional[str]):
    return load_bundled_model() if path is None else load_model_file(path)


def _cmd_model_check(args: argparse.Namespace) -> int:
    graph = _load_graph(args.file)
    report = check_completeness(graph)
    print(f"losses={len(graph.losses)} hazards={len(graph.hazards)} "
          f"constraints={len(graph.constraints)} actions={len(graph.actions)} "
          f"ucas={len(graph.ucas)} scenarios={len(graph.scenarios)}")
    for r in report.results:
        if r.passed:
            print(f"rule {r.rule}: ok ({r.description})")
        else:
            print(f"rule {r.rule}: FAIL ({r.description}): {', '.join(r.failures)}")
    return EXIT_CLEAN if report.all_passed else EXIT_VIOLATIONS


def _cmd_model_matrix(args: argparse.Namespace) -> int:
    graph = _load_graph(args.file)
    cells = uca_candidate_matrix(graph, args.action)
    print(f"action: {args.action}")
    for cat in UcaCategory:
        ids = ", ".join(sorted(cells[cat])) or "-"
        print(f"{cat.value}: {ids}")
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hoversil",
        description="Deterministic hover take-off/landing simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and report it")
    p_run.add_argument("--config", required=True, help="run config file (YAML)")
    p_run.add_argument("--scenario", help="scenario id override ('none' clears)")
    p_run.add_argument("--mitigations", help="comma-separated mitigation flags")
    p_run.add_argument("--seed", type=int, help="seed override")
    p_run.add_argument("--out", help="directory to write the report into")
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.set_defaults(func=_cmd_run)

    p_mx = sub.add_parser("matrix", help="scenario x mitigation-set sweep")
    p_mx.add_argument("--config", required=True, help="base config file (YAML)")
    p_mx.add_argument("--scenarios", required=True,
                      help="comma-separated scenario ids ('none' = baseline)")
    p_mx.add_argument("--mitigation-sets", required=True,
                      help="file with one mitigation set per line")
    p_mx.add_argument("--seeds", required=True, help="seed or inclusive range n..m")
    p_mx.add_argument("--out", help="directory to write the table into")
    p_mx.add_argument("--format", choices=("json", "csv"), default="json")
    p_mx.set_defaults(func=_cmd_matrix)

    p_model = sub.add_parser("model", help="inspect the hazard-analysis model")
    model_sub = p_model.add_subparsers(dest="model_command", required=True)

    p_check = model_sub.add_parser("check", help="structural completeness rules")
    p_check.add_argument("--file", help="model file (default: bundled analysis)")
    p_check.set_defaults(func=_cmd_model_check)

    p_amx = model_sub.add_parser("matrix", help="guideword cells for one action")
    p_amx.add_argument("--action", required=True, help="control action name")
    p_amx.add_argument("--file", help="model file (default: bundled analysis)")
    p_amx.set_defaults(func=_cmd_model_matrix)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HarnessError, ModelError, KeyError, ValueError, OSError) as exc:
        # str() of a KeyError is the repr of its argument
        reason = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {reason}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

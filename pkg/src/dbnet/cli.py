"""Command-line interface: validate, simulate, and explore scenarios.

Exit codes: 0 success (including truncated exploration, reported as a
warning), 1 parse/validation failure, 2 I/O failure, 3 bad run configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import dsl
from .errors import ConfigError, DbNetError
from .datatypes import render_literal
from .persistence import instance_to_json, instance_to_text
from .query import Query, entails, free_vars
from .semantics import (
    Snapshot,
    binding_to_json,
    build_lts,
    enabled_firings,
    fire,
    firing_record,
    snapshot_digest,
    token_text,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_CONFIG = 3


def _use_color(stream) -> bool:
    env = os.environ.get("DBNET_COLOR")
    if env == "0":
        return False
    if env == "1":
        return True
    return hasattr(stream, "isatty") and stream.isatty()


def _emit(message: str, severity: str = "error", stream=None) -> None:
    stream = stream or sys.stderr
    if _use_color(stream):
        color = {"error": "\x1b[31m", "warning": "\x1b[33m"}.get(severity, "")
        message = f"{color}{message}\x1b[0m" if color else message
    print(message, file=stream)


@dataclass
class RunConfig:
    """A validated run description: CLI flags merged over the scenario's
    config section. Construction fails with ConfigError on unusable setups
    (random policy without a seed, exhaustive run with missing domains)."""

    scenario_path: str
    seed: Optional[int] = None
    policy: str = "exhaustive"
    steps: int = 10
    max_states: Optional[int] = None
    max_depth: Optional[int] = None
    workers: int = 1
    goal_query: Optional[Query] = None
    marking_conditions: list[tuple[str, str, int]] = field(default_factory=list)
    out_path: Optional[Path] = None
    final_db_path: Optional[Path] = None


def simulate_config(args, scenario: dsl.Scenario) -> RunConfig:
    seed = args.seed if args.seed is not None else scenario.config.get("seed")
    steps = args.steps if args.steps is not None else scenario.config.get("steps", 10)
    if args.policy == "random" and seed is None:
        raise ConfigError("random policy requires --seed (or a config seed)")
    out_path = Path(args.out)
    final_db = Path(args.final_db) if args.final_db else out_path.with_suffix(".final.txt")
    return RunConfig(
        scenario_path=args.file,
        seed=seed,
        policy=args.policy,
        steps=steps,
        out_path=out_path,
        final_db_path=final_db,
    )


def explore_config(args, scenario: dsl.Scenario) -> RunConfig:
    _check_exhaustive_domains(scenario)
    query, conditions = _parse_goal(scenario, args.goal, args.goal_marking or [])
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return RunConfig(
        scenario_path=args.file,
        policy="exhaustive",
        max_states=args.max_states if args.max_states is not None else scenario.config.get("max_states"),
        max_depth=args.max_depth if args.max_depth is not None else scenario.config.get("max_depth"),
        workers=args.workers,
        goal_query=query,
        marking_conditions=conditions,
        out_path=Path(args.out) if args.out else None,
    )


def _load(path: str) -> dsl.Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _IoFailure(str(exc)) from None
    scenario = dsl.elaborate(dsl.parse(text))
    for warning in scenario.warnings:
        _emit(str(warning), "warning")
    return scenario


class _IoFailure(Exception):
    pass


# --- validate ------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        _load(args.file)
    except _IoFailure as exc:
        _emit(f"i/o error: {exc}")
        return EXIT_IO
    except dsl.DslSyntaxError as exc:
        _emit(str(exc.diagnostic))
        return EXIT_INVALID
    except dsl.DslValidationError as exc:
        for diag in exc.diagnostics:
            _emit(str(diag), diag.severity)
        return EXIT_INVALID
    print(f"{args.file}: ok")
    return EXIT_OK


# --- simulate ------------------------------------------------------------------

_MARKING_GOAL = re.compile(
    r"^\s*marking\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\)\s*(>=|<=|=|<|>)\s*(\d+)\s*$"
)


def _dump_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(", ", ": "))


def _write_final_db(path: str, snap: Snapshot) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_text(snap.instance))


def cmd_simulate(args) -> int:
    try:
        scenario = _load(args.file)
    except _IoFailure as exc:
        _emit(f"i/o error: {exc}")
        return EXIT_IO
    except (dsl.DslSyntaxError, dsl.DslValidationError) as exc:
        for diag in getattr(exc, "diagnostics", [getattr(exc, "diagnostic", None)]):
            if diag is not None:
                _emit(str(diag), getattr(diag, "severity", "error"))
        return EXIT_INVALID

    try:
        config = simulate_config(args, scenario)
    except ConfigError as exc:
        _emit(f"config error: {exc}")
        return EXIT_CONFIG

    net = scenario.net
    rng = random.Random(config.seed)
    snap = scenario.initial
    records: list[dict] = []
    deadlock = False
    interactive = config.policy == "interactive"

    try:
        for step in range(1, config.steps + 1):
            firings = enabled_firings(net, snap, scenario.domains)
            if not firings:
                deadlock = True
                break
            if interactive:
                choice = _prompt_choice(net, snap, firings)
                if choice is None:
                    break
            else:
                choice = rng.randrange(len(firings))
            t, sigma = firings[choice]
            after, committed = fire(net, snap, t, sigma, check=False)
            records.append(firing_record(net, step, t, sigma, committed, snap, after))
            snap = after
    except ConfigError as exc:
        _emit(f"config error: {exc}")
        return EXIT_CONFIG

    summary = {
        "summary": True,
        "steps": len(records),
        "deadlock": deadlock,
        "final_db": instance_to_json(snap.instance),
        "state": snapshot_digest(net, snap),
    }
    try:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(_dump_json(record) + "\n")
            fh.write(_dump_json(summary) + "\n")
        _write_final_db(config.final_db_path, snap)
    except OSError as exc:
        _emit(f"i/o error: {exc}")
        return EXIT_IO
    note = " (deadlock)" if deadlock else ""
    print(
        f"simulated {len(records)} step(s){note}; trace: {config.out_path}; "
        f"final db: {config.final_db_path}"
    )
    return EXIT_OK


def _prompt_choice(net, snap: Snapshot, firings) -> Optional[int]:
    print("\nview places:")
    for place in net.view_places():
        tokens = snap.marking.tokens(place.name)
        body = ", ".join(token_text(tok) for tok in tokens) or "(empty)"
        print(f"  {place.name}: {body}")
    print("enabled firings:")
    for i, (t, sigma) in enumerate(firings):
        bound = ", ".join(f"{v.name}={render_literal(val)}" for v, val in sorted(sigma.items(), key=lambda kv: kv[0].name))
        print(f"  [{i}] {t.name} {{{bound}}}")
    while True:
        try:
            raw = input("fire which? (empty to stop) ")
        except EOFError:
            return None
        raw = raw.strip()
        if not raw:
            return None
        if raw.isdigit() and int(raw) < len(firings):
            return int(raw)
        print(f"please enter an index between 0 and {len(firings) - 1}")


# --- explore -------------------------------------------------------------------


def _parse_marking_condition(text: str) -> tuple[str, str, int]:
    m = _MARKING_GOAL.match(text)
    if m is None:
        raise ConfigError(f"cannot parse marking condition {text!r}")
    return m.group(1), m.group(2), int(m.group(3))


def _parse_goal(scenario: dsl.Scenario, goal_text: Optional[str], marking_texts: list[str]):
    query: Optional[Query] = None
    conditions: list[tuple[str, str, int]] = []
    if goal_text:
        parts = [p for p in re.split(r"\s+and\s+", goal_text) if p.strip()]
        if all(_MARKING_GOAL.match(p) for p in parts):
            conditions.extend(_parse_marking_condition(p) for p in parts)
        else:
            query = dsl.elaborate_formula(scenario, goal_text)
            if free_vars(query):
                raise ConfigError("goal query must be boolean (no free variables)")
    for text in marking_texts:
        conditions.append(_parse_marking_condition(text))
    for place, _, _ in conditions:
        if place not in scenario.net.places:
            raise ConfigError(f"goal mentions unknown place {place!r}")
    return query, conditions


_OPS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


def _make_goal(net, query: Optional[Query], conditions):
    if query is None and not conditions:
        return None

    def goal(snap: Snapshot) -> bool:
        if query is not None and not entails(snap.instance, {}, query, types=net.types):
            return False
        for place, op, k in conditions:
            if not _OPS[op](len(snap.marking.tokens(place)), k):
                return False
        return True

    return goal


def cmd_explore(args) -> int:
    try:
        scenario = _load(args.file)
    except _IoFailure as exc:
        _emit(f"i/o error: {exc}")
        return EXIT_IO
    except (dsl.DslSyntaxError, dsl.DslValidationError) as exc:
        for diag in getattr(exc, "diagnostics", [getattr(exc, "diagnostic", None)]):
            if diag is not None:
                _emit(str(diag), getattr(diag, "severity", "error"))
        return EXIT_INVALID

    net = scenario.net
    try:
        config = explore_config(args, scenario)
    except (ConfigError, dsl.DslValidationError, dsl.DslSyntaxError) as exc:
        _emit(f"config error: {exc}")
        return EXIT_CONFIG
    goal = _make_goal(net, config.goal_query, config.marking_conditions)

    lts = build_lts(
        net,
        scenario.initial,
        domains=scenario.domains,
        max_states=config.max_states,
        max_depth=config.max_depth,
        workers=config.workers,
        goal=goal,
    )

    witness = [
        {"transition": name, "binding": binding_to_json(sigma), "committed": committed}
        for name, sigma, committed in lts.witness_path()
    ]
    report = {
        "states": lts.state_count,
        "edges": lts.edge_count,
        "truncated": lts.truncated,
        "truncation_reason": lts.truncation_reason,
        "monitors": {
            "max_place_tokens": lts.monitors.max_place_tokens,
            "max_instance_facts": lts.monitors.max_instance_facts,
            "max_depth": lts.monitors.max_depth,
        },
        "goal": {
            "specified": goal is not None,
            "reachable": (lts.goal_state is not None) if goal is not None else None,
            "witness": witness if lts.goal_state is not None else [],
            "witness_length": len(witness),
        },
    }
    if config.out_path:
        try:
            with open(config.out_path, "w", encoding="utf-8") as fh:
                fh.write(_dump_json(report) + "\n")
        except OSError as exc:
            _emit(f"i/o error: {exc}")
            return EXIT_IO

    print(f"states: {lts.state_count}")
    print(f"edges: {lts.edge_count}")
    print(f"truncated: {'yes (' + lts.truncation_reason + ')' if lts.truncated else 'no'}")
    print(
        "bound monitors: "
        f"max tokens in a place = {lts.monitors.max_place_tokens}, "
        f"max instance size = {lts.monitors.max_instance_facts}, "
        f"max depth = {lts.monitors.max_depth}"
    )
    if goal is not None:
        if lts.goal_state is not None:
            print(f"goal: reachable (witness of length {len(witness)})")
            for entry in witness:
                print(f"  fire {entry['transition']} {_dump_json(entry['binding'])}")
        else:
            within = "within bounds" if lts.truncated else "anywhere (exploration exhausted)"
            print(f"goal: not reachable {within}")
    if lts.truncated:
        _emit(f"warning: exploration truncated: {lts.truncation_reason}", "warning")
    return EXIT_OK


def _check_exhaustive_domains(scenario: dsl.Scenario) -> None:
    """Exhaustive exploration needs an input domain for every external
    normal variable; fail early with a config error instead of mid-run."""
    for t in scenario.net.transitions.values():
        for v in sorted(t.external_vars() - t.fresh_vars(), key=lambda v: v.name):
            if v.type_name not in scenario.domains:
                raise ConfigError(
                    f"transition {t.name!r}: external variable {v.name!r} needs an "
                    f"input domain for type {v.type_name!r}"
                )


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbnet",
        description="Validate, simulate, and explore db-net scenarios (.dbnet files).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate a scenario")
    p_validate.add_argument("file")
    p_validate.set_defaults(func=cmd_validate)

    p_sim = sub.add_parser("simulate", help="run a seeded or interactive simulation")
    p_sim.add_argument("file")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--steps", type=int, default=None)
    p_sim.add_argument("--policy", choices=["random", "interactive"], default="random")
    p_sim.add_argument("--out", default="trace.jsonl", help="trace output (JSON lines)")
    p_sim.add_argument("--final-db", default=None, help="final database instance output")
    p_sim.set_defaults(func=cmd_simulate)

    p_exp = sub.add_parser("explore", help="bounded exhaustive state-space exploration")
    p_exp.add_argument("file")
    p_exp.add_argument("--max-states", type=int, default=None)
    p_exp.add_argument("--max-depth", type=int, default=None)
    p_exp.add_argument("--goal", default=None, help="boolean query or marking(<place>) >= k")
    p_exp.add_argument(
        "--goal-marking",
        action="append",
        default=None,
        metavar="COND",
        help="additional marking condition, e.g. 'marking(done) >= 1' (repeatable)",
    )
    p_exp.add_argument("--workers", type=int, default=1)
    p_exp.add_argument("--out", default=None, help="summary output (JSON)")
    p_exp.set_defaults(func=cmd_explore)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DbNetError as exc:
        _emit(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: gen, plan, refine, bench, render, match.

Exit codes: 0 on success, 1 when no plan was found, 2 on input errors.
`--seed` falls back to the DBRP_SEED environment variable; a JSON config
file given with `--config` supplies defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .astar import NoPlanFound, PlannerConfig, plan as astar_plan
from .costs import CostConfig
from .expansion import ExpansionConfig
from .matching import CountMismatch, match_instances, matching_cost
from .mcts import MctsConfig, mcts_plan
from .refine import optimize_buffers, prune_redundant
from .render import render_svg
from .scene import InvalidPlan, Plan, is_goal, replay
from .scenegen import GenerationFailed, generate_pair
from .sceneio import (
    SchemaError,
    detections_from_json,
    dump_json,
    load_json,
    plan_from_json,
    plan_to_json,
    scene_from_json,
    scene_to_json,
)

EXIT_OK = 0
EXIT_NO_PLAN = 1
EXIT_INPUT = 2

ALGO_CHOICES = bench_mod.ALGORITHMS


def _seed_value(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DBRP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise SchemaError(f"DBRP_SEED must be an integer, got {env!r}") from exc
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbrp", description=__doc__)
    parser.add_argument("--config", type=Path, help="JSON file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random start/goal scene pair")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--mode", choices=("ee", "mb"), default="ee")
    p.add_argument("--stacks", action="store_true", help="sample pre-existing stacks")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("plan", help="plan a scene file")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--algo", choices=ALGO_CHOICES, default="astar-ds")
    p.add_argument("--time-limit", type=float, default=360.0)
    p.add_argument("--buffers", type=int, default=4, help="candidate actions per object")
    p.add_argument("--stack-fraction", type=float, default=0.6)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("refine", help="prune and re-buffer an existing plan")
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--mode", choices=("static", "dynamic"), default="dynamic")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bench", help="run a benchmark matrix")
    p.add_argument("--matrix", type=Path, help="matrix JSON; omit for the desk-scale default")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--raw", type=Path, help="line-delimited raw trial records")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("render", help="render a scene (and optional plan) to SVG")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--plan", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("match", help="match detections between two scenes")
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        doc = load_json(args.config)
        if not isinstance(doc, dict):
            raise SchemaError("config: expected a JSON object")
        explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in doc.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and attr not in explicit:
                setattr(args, attr, value)
    return args


def _cmd_gen(args) -> int:
    seed = _seed_value(args)
    state, goal = generate_pair(args.n, args.phi, mode=args.mode, with_stacks=args.stacks, seed=seed)
    cost = CostConfig.for_mode(args.mode)
    dump_json(scene_to_json(state, goal, cost), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    state, goal, cost = scene_from_json(load_json(args.scene))
    seed = _seed_value(args)
    algo = args.algo
    expansion = ExpansionConfig(
        n_buf=args.buffers,
        stack_fraction=args.stack_fraction,
        seed=seed,
        stacking=algo.rsplit("-", 1)[1],
        resolution=args.resolution,
    )
    try:
        if algo.startswith("astar"):
            cfg = PlannerConfig(time_limit=args.time_limit, seed=seed, expansion=expansion, cost=cost)
            result = astar_plan(state, goal, cfg)
        else:
            mcfg = MctsConfig(
                time_budget=args.time_limit, max_iterations=None, seed=seed, expansion=expansion, cost=cost
            )
            result = mcts_plan(state, goal, mcfg)
            if result is None:
                raise NoPlanFound("tree search exhausted its budget")
    except NoPlanFound as exc:
        print(f"no plan: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    dump_json(plan_to_json(result), args.out)
    print(f"wrote {args.out} (cost {result.total_cost:.4f}, {len(result.actions)} actions)")
    return EXIT_OK


def _cmd_refine(args) -> int:
    state, goal, cost = scene_from_json(load_json(args.scene))
    raw = plan_from_json(load_json(args.plan))
    pruned = prune_redundant(state, raw, cost)
    refined = optimize_buffers(state, pruned, cost, mode=args.mode, resolution=args.resolution)
    states, _ = replay(state, refined.actions)
    if not is_goal(states[-1], goal, 1.0 / args.resolution):
        raise InvalidPlan("refined plan no longer reaches the goal")
    dump_json(plan_to_json(refined), args.out)
    print(
        f"wrote {args.out} (cost {raw.total_cost:.4f} -> {refined.total_cost:.4f}, "
        f"{len(raw.actions)} -> {len(refined.actions)} actions)"
    )
    return EXIT_OK


def _cmd_bench(args) -> int:
    matrix = bench_mod.SuiteMatrix.from_json(load_json(args.matrix)) if args.matrix else bench_mod.SuiteMatrix.desk()
    report = bench_mod.run_suite(matrix, jobs=args.jobs, raw_path=args.raw, progress=args.progress)
    dump_json(report.to_json(), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_render(args) -> int:
    state, goal, cost = scene_from_json(load_json(args.scene))
    plan_doc = None
    if args.plan:
        plan_doc = plan_from_json(load_json(args.plan))
        _, resolved = replay(state, plan_doc.actions)
        plan_doc = Plan(tuple(resolved), plan_doc.total_cost)
    args.out.write_text(render_svg(state, plan_doc, cost, title=args.scene.name))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_match(args) -> int:
    initial, target = detections_from_json(load_json(args.detections))
    mapping = match_instances(initial, target)
    doc = {
        "schema": 1,
        "pairs": [[i, mapping[i]] for i in sorted(mapping)],
        "total_cost": matching_cost(initial, target, mapping),
    }
    dump_json(doc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "plan": _cmd_plan,
    "refine": _cmd_refine,
    "bench": _cmd_bench,
    "render": _cmd_render,
    "match": _cmd_match,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config_defaults(parser, argv)
        return _COMMANDS[args.command](args)
    except (SchemaError, CountMismatch, GenerationFailed, InvalidPlan, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Trial runner and aggregate metrics for planner comparisons.

A trial is one seeded start/goal pair solved by one algorithm under a time
limit.  Aggregates follow the cost-over-success-rate convention: ESC is the
average successful cost divided by the success rate, OPS is the mean ESC
over the evaluated object counts, and PIR is the relative OPS reduction of
one algorithm over another in percent.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .astar import NoPlanFound, PlannerConfig, plan as astar_plan
from .costs import CostConfig
from .expansion import ExpansionConfig
from .mcts import MctsConfig, mcts_plan
from .scene import GoalSpec, InvalidPlan, Plan, SceneState, is_goal, replay
from .scenegen import GenerationFailed, generate_pair

ALGORITHMS = ("mcts-ns", "mcts-ds", "astar-ns", "astar-ss", "astar-ds")


class ZeroSuccess(Exception):
    """ESC is undefined when nothing succeeded."""


class EmptySet(Exception):
    """OPS needs at least one ESC value."""


def esc(avg_cost: float, success_rate: float) -> float:
    """Expected cost per success: average successful cost over success rate."""
    if success_rate <= 0:
        raise ZeroSuccess("success rate is zero")
    return avg_cost / success_rate


def ops(esc_values: Iterable[float]) -> float:
    values = list(esc_values)
    if not values:
        raise EmptySet("no ESC values to aggregate")
    return sum(values) / len(values)


def pir(ops_a: float, ops_b: float) -> float:
    """Relative OPS reduction of B over A, in percent; positive favours B."""
    if ops_a <= 0:
        raise ValueError("reference OPS must be positive")
    return (ops_a - ops_b) / ops_a * 100.0


@dataclass(frozen=True)
class TrialSpec:
    algo: str
    n: int
    phi: float
    mode: str
    seed: int
    time_limit: float = 60.0
    n_buf: int = 4
    stack_fraction: float = 0.6
    resolution: int = 100
    margin_cells: int = 1

    def stacking(self) -> str:
        return self.algo.rsplit("-", 1)[1]


@dataclass(frozen=True)
class TrialResult:
    algo: str
    n: int
    phi: float
    mode: str
    seed: int
    success: bool
    cost: Optional[float]
    actions: Optional[int]
    wall_time: float
    error: Optional[str] = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "TrialResult":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


def _planner_for(spec: TrialSpec, cost: CostConfig):
    expansion = ExpansionConfig(
        n_buf=spec.n_buf,
        stack_fraction=spec.stack_fraction,
        seed=spec.seed,
        stacking=spec.stacking(),
        resolution=spec.resolution,
        margin_cells=spec.margin_cells,
    )
    if spec.algo.startswith("astar"):
        cfg = PlannerConfig(time_limit=spec.time_limit, seed=spec.seed, expansion=expansion, cost=cost)
        return lambda s0, goal: astar_plan(s0, goal, cfg)
    cfg = MctsConfig(
        time_budget=spec.time_limit,
        max_iterations=None,
        seed=spec.seed,
        expansion=expansion,
        cost=cost,
    )

    def run(s0: SceneState, goal: GoalSpec) -> Plan:
        result = mcts_plan(s0, goal, cfg)
        if result is None:
            raise NoPlanFound("tree search exhausted its budget")
        return result

    return run


def run_trial(spec: TrialSpec) -> TrialResult:
    """Generate the seeded pair, plan, and validate the result end to end."""
    if spec.algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {spec.algo!r}")
    cost = CostConfig.for_mode(spec.mode)
    base = dict(algo=spec.algo, n=spec.n, phi=spec.phi, mode=spec.mode, seed=spec.seed)
    try:
        s0, goal = generate_pair(spec.n, spec.phi, mode=spec.mode, seed=spec.seed)
    except GenerationFailed as exc:
        return TrialResult(**base, success=False, cost=None, actions=None, wall_time=0.0, error=str(exc))
    runner = _planner_for(spec, cost)
    start = time.monotonic()
    try:
        result = runner(s0, goal)
        wall = time.monotonic() - start
        states, _ = replay(s0, result.actions)
        tol = 1.0 / spec.resolution
        if not is_goal(states[-1], goal, tol):
            raise InvalidPlan("plan does not reach the goal")
        return TrialResult(
            **base, success=True, cost=result.total_cost, actions=len(result.actions), wall_time=wall
        )
    except (NoPlanFound, InvalidPlan) as exc:
        return TrialResult(
            **base,
            success=False,
            cost=None,
            actions=None,
            wall_time=time.monotonic() - start,
            error=str(exc),
        )


# --- aggregation ------------------------------------------------------------


@dataclass
class GroupStats:
    algo: str
    mode: str
    phi: float
    n: int
    trials: int
    successes: int
    success_rate: float
    avg_cost: Optional[float]
    avg_actions: Optional[float]
    avg_time: float
    esc: Optional[float]


@dataclass
class BenchmarkReport:
    groups: list[GroupStats]
    ops_table: dict[tuple[str, str, float], Optional[float]]
    pir_table: dict[tuple[str, float, str, str], float]

    def group(self, algo: str, mode: str, phi: float, n: int) -> GroupStats:
        for g in self.groups:
            if (g.algo, g.mode, g.phi, g.n) == (algo, mode, phi, n):
                return g
        raise KeyError((algo, mode, phi, n))

    def ops_for(self, algo: str, mode: str, phi: float) -> Optional[float]:
        return self.ops_table[(algo, mode, phi)]

    def pir_for(self, mode: str, phi: float, baseline: str, challenger: str) -> float:
        return self.pir_table[(mode, phi, baseline, challenger)]

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "groups": [asdict(g) for g in self.groups],
            "ops": [
                {"algo": k[0], "mode": k[1], "phi": k[2], "ops": v} for k, v in self.ops_table.items()
            ],
            "pir": [
                {"mode": k[0], "phi": k[1], "baseline": k[2], "algo": k[3], "pir": v}
                for k, v in self.pir_table.items()
            ],
        }


def aggregate(results: Iterable[TrialResult]) -> BenchmarkReport:
    """Pure fold over raw trial records; recomputable at any time."""
    results = list(results)
    keys = sorted({(r.algo, r.mode, r.phi, r.n) for r in results}, key=str)
    groups = []
    for algo, mode, phi, n in keys:
        rows = [r for r in results if (r.algo, r.mode, r.phi, r.n) == (algo, mode, phi, n)]
        wins = [r for r in rows if r.success]
        rate = len(wins) / len(rows)
        avg_cost = sum(r.cost for r in wins) / len(wins) if wins else None
        avg_actions = sum(r.actions for r in wins) / len(wins) if wins else None
        avg_time = sum(r.wall_time for r in rows) / len(rows)
        esc_value = esc(avg_cost, rate) if wins else None
        groups.append(
            GroupStats(algo, mode, phi, n, len(rows), len(wins), rate, avg_cost, avg_actions, avg_time, esc_value)
        )
    ops_table: dict[tuple[str, str, float], Optional[float]] = {}
    for algo, mode, phi in sorted({(g.algo, g.mode, g.phi) for g in groups}, key=str):
        escs = [g.esc for g in groups if (g.algo, g.mode, g.phi) == (algo, mode, phi)]
        ops_table[(algo, mode, phi)] = None if any(e is None for e in escs) else ops(escs)
    pir_table: dict[tuple[str, float, str, str], float] = {}
    for mode, phi in sorted({(g.mode, g.phi) for g in groups}, key=str):
        algos = sorted({g.algo for g in groups if (g.mode, g.phi) == (mode, phi)})
        for a in algos:
            for b in algos:
                if a == b:
                    continue
                ops_a, ops_b = ops_table[(a, mode, phi)], ops_table[(b, mode, phi)]
                if ops_a and ops_b and ops_a > 0:
                    pir_table[(mode, phi, a, b)] = pir(ops_a, ops_b)
    return BenchmarkReport(groups, ops_table, pir_table)


# --- suites -----------------------------------------------------------------


@dataclass(frozen=True)
class SuiteMatrix:
    algos: tuple[str, ...]
    n_values: tuple[int, ...]
    phis: tuple[float, ...]
    modes: tuple[str, ...]
    seeds: tuple[int, ...]
    time_limit: float = 60.0
    n_buf: int = 4
    stack_fraction: float = 0.6
    resolution: int = 100
    margin_cells: int = 1

    @classmethod
    def desk(cls) -> "SuiteMatrix":
        return cls(
            algos=ALGORITHMS,
            n_values=(4, 5, 6),
            phis=(0.2,),
            modes=("ee",),
            seeds=tuple(range(10)),
            time_limit=30.0,
        )

    @classmethod
    def from_json(cls, doc: dict) -> "SuiteMatrix":
        if doc.get("schema") != 1:
            raise ValueError("matrix: expected schema 1")
        seeds = doc.get("seeds")
        if seeds is None:
            seeds = list(range(int(doc.get("num_seeds", 10))))
        return cls(
            algos=tuple(doc["algos"]),
            n_values=tuple(int(v) for v in doc["n"]),
            phis=tuple(float(v) for v in doc["phi"]),
            modes=tuple(doc["modes"]),
            seeds=tuple(int(s) for s in seeds),
            time_limit=float(doc.get("time_limit", 60.0)),
            n_buf=int(doc.get("n_buf", 4)),
            stack_fraction=float(doc.get("stack_fraction", 0.6)),
            resolution=int(doc.get("resolution", 100)),
            margin_cells=int(doc.get("margin_cells", 1)),
        )

    def trial_specs(self) -> list[TrialSpec]:
        return [
            TrialSpec(
                algo=a,
                n=n,
                phi=phi,
                mode=mode,
                seed=seed,
                time_limit=self.time_limit,
                n_buf=self.n_buf,
                stack_fraction=self.stack_fraction,
                resolution=self.resolution,
                margin_cells=self.margin_cells,
            )
            for mode in self.modes
            for phi in self.phis
            for a in self.algos
            for n in self.n_values
            for seed in self.seeds
        ]


def run_suite(
    matrix: SuiteMatrix,
    jobs: int = 1,
    raw_path: str | Path | None = None,
    progress: bool = False,
) -> BenchmarkReport:
    """Run every trial in the matrix; persist raw records; never abort."""
    specs = matrix.trial_specs()
    results: list[TrialResult] = []
    sink = open(raw_path, "w") if raw_path else None
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(run_trial, specs, chunksize=1):
                    results.append(result)
                    if sink:
                        sink.write(json.dumps(result.to_json()) + "\n")
                    if progress:
                        print(f"[{len(results)}/{len(specs)}] {result.algo} n={result.n} "
                              f"ok={result.success}", flush=True)
        else:
            for spec in specs:
                result = run_trial(spec)
                results.append(result)
                if sink:
                    sink.write(json.dumps(result.to_json()) + "\n")
                if progress:
                    print(f"[{len(results)}/{len(specs)}] {result.algo} n={result.n} "
                          f"ok={result.success}", flush=True)
    finally:
        if sink:
            sink.close()
    return aggregate(results)


def load_raw(path: str | Path) -> list[TrialResult]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(TrialResult.from_json(json.loads(line)))
    return out

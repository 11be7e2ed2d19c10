"""Best-first search over scene states with a stacking-aware lower bound.

The search pops nodes by f = g + h from a priority heap, deduplicates states
through quantized signatures (reopening on a lower g), and keeps a feasible
incumbent at all times: goal pops tighten it, periodic greedy dives complete
promising frontier nodes cheaply, and a time-budgeted tree-search fallback
guarantees one early.  Nodes that cannot beat the incumbent are pruned, and
the run ends when the heap's best f can no longer improve on it, on a stall,
or on timeout, returning the cheapest plan seen.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import CostConfig, action_cost, make_plan, travel
from .expansion import ExpansionConfig, successors, valid_stack_targets
from .mcts import MctsConfig, mcts_plan
from .scene import (
    Action,
    DEFAULT_CATEGORY_TABLE,
    GoalSpec,
    Plan,
    SceneState,
    StackGoal,
    apply_action,
    is_goal,
    object_at_goal,
    state_key,
)

_F_SLACK = 1e-9


class NoPlanFound(Exception):
    """Neither the search nor its fallback produced a plan in time."""


@dataclass(frozen=True)
class PlannerConfig:
    time_limit: float = 360.0
    seed: int = 0
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    cost: CostConfig = field(default_factory=CostConfig.ee)
    goal_tol: Optional[float] = None
    goal_attempt_period: int = 50
    goal_attempt_budget: float = 1.0
    goal_attempt_iterations: int = 3000
    dive_period: int = 40
    dive_tries: int = 2
    optimality_gap: float = 0.02
    stall_limit: Optional[int] = 1200
    max_expansions: Optional[int] = None

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.goal_attempt_period < 1 or self.dive_period < 1:
            raise ValueError("periods must be positive")

    @property
    def tol(self) -> float:
        return self.goal_tol if self.goal_tol is not None else self.expansion.goal_tol


@dataclass
class SearchNode:
    state: SceneState
    g: float
    h: float
    parent: Optional["SearchNode"]
    action_in: Optional[Action]

    @property
    def f(self) -> float:
        return self.g + self.h

    def path_actions(self) -> list[Action]:
        out: list[Action] = []
        node = self
        while node.parent is not None:
            out.append(node.action_in)
            node = node.parent
        return out[::-1]


@dataclass
class SearchStats:
    expansions: int = 0
    generated: int = 0
    attempts: int = 0
    dives: int = 0
    duplicates: int = 0
    reopened: int = 0
    timed_out: bool = False
    expanded_states: list[SceneState] = field(default_factory=list)


def compatible_bases(state: SceneState) -> dict[str, frozenset[str]]:
    """Per object, the ids whose category can support it (fixed per scene)."""
    out: dict[str, frozenset[str]] = {}
    for o in state.objects:
        ok = DEFAULT_CATEGORY_TABLE.bases_for(o.category)
        out[o.id] = frozenset(b.id for b in state.objects if b.id != o.id and b.category in ok)
    return out


def _heuristic_fast(
    state: SceneState,
    goal: GoalSpec,
    cfg: CostConfig,
    pair_ok: Optional[dict[str, frozenset[str]]],
    tol: float,
) -> float:
    total = 0.0
    remaining = 0
    forest = state.forest
    positions = state.positions
    mb = cfg.mode == "mb"
    cpp = cfg.c_pp
    clear: list[tuple[str, tuple[float, float]]] = []
    if pair_ok is not None:
        clear = [(o.id, positions[o.id]) for o in state.objects if forest.is_clear(o.id)]
    for obj, target in goal.items():
        pos = positions[obj]
        on = forest.base(obj)
        if isinstance(target, StackGoal):
            if on == target.base:
                continue
            gp = positions[target.base]
            direct = abs(pos[0] - gp[0]) if mb else math.hypot(pos[0] - gp[0], pos[1] - gp[1])
        else:
            dx = pos[0] - target.pos[0]
            dy = pos[1] - target.pos[1]
            euclid = math.hypot(dx, dy)
            if on is None and euclid <= tol + _F_SLACK:
                continue
            direct = abs(dx) if mb else euclid
        remaining += 1
        best = direct
        if pair_ok is not None:
            ok = pair_ok[obj]
            riders = forest.above(obj)
            for cid, cpos in clear:
                if cid not in ok or cid in riders:
                    continue
                cand = (abs(pos[0] - cpos[0]) if mb else math.hypot(pos[0] - cpos[0], pos[1] - cpos[1])) + cpp
                if cand < best:
                    best = cand
        total += best
    return total + remaining * cpp


def heuristic(
    state: SceneState,
    goal: GoalSpec,
    cfg: CostConfig,
    stacking: str = "ds",
    tol: float = 0.01,
) -> float:
    """Lower bound: per off-goal object, the cheaper of travelling straight to
    its target or to the nearest stackable clear base plus one extra
    pick-and-place; plus one pick-and-place per off-goal object."""
    pair_ok = compatible_bases(state) if stacking != "ns" else None
    return _heuristic_fast(state, goal, cfg, pair_ok, tol)


def greedy_dive(
    state: SceneState,
    goal: GoalSpec,
    cfg: PlannerConfig,
    max_depth: int,
    rng=None,
    epsilon: float = 0.0,
    pair_ok: Optional[dict[str, frozenset[str]]] = None,
) -> Optional[tuple[float, list[Action]]]:
    """Depth-first completion choosing the locally cheapest successor.

    With `epsilon` > 0 the walk sometimes takes the second-best step, which
    gets retries past the corners a strict greedy runs into.  Returns (cost
    including the return leg, actions) or None on a dead end.
    """
    tol = cfg.tol
    if pair_ok is None and cfg.expansion.stacking != "ns":
        pair_ok = compatible_bases(state)
    actions: list[Action] = []
    total = 0.0
    cur = state
    for _ in range(max_depth):
        if is_goal(cur, goal, tol):
            return total + travel(cfg.cost, cur.manipulator, cfg.cost.home), actions
        ranked = []
        for action in successors(cur, goal, cfg.expansion, tol):
            child = apply_action(cur, action, check=False)
            step = action_cost(cfg.cost, cur.manipulator, action.resolved(cur))
            score = step + _heuristic_fast(child, goal, cfg.cost, pair_ok, tol)
            ranked.append((score, step, action, child))
        if not ranked:
            return None
        ranked.sort(key=lambda r: r[0])
        pick = 0
        if epsilon > 0 and len(ranked) > 1 and rng is not None and rng.random() < epsilon:
            pick = 1
        _, step, action, child = ranked[pick]
        total += step
        actions.append(action)
        cur = child
    if is_goal(cur, goal, tol):
        return total + travel(cfg.cost, cur.manipulator, cfg.cost.home), actions
    return None


def goal_attempt(
    state: SceneState,
    goal: GoalSpec,
    budget: float,
    cfg: PlannerConfig,
    attempt_seed: int = 0,
) -> Optional[Plan]:
    """Quick feasible completion from `state` via the tree-search fallback."""
    if budget <= 0:
        return None
    if is_goal(state, goal, cfg.tol):
        return make_plan(cfg.cost, state, [])
    mcfg = MctsConfig(
        time_budget=budget,
        max_iterations=cfg.goal_attempt_iterations,
        seed=stable_attempt_seed(cfg.seed, attempt_seed),
        expansion=cfg.expansion,
        cost=cfg.cost,
        goal_tol=cfg.tol,
    )
    return mcts_plan(state, goal, mcfg)


def stable_attempt_seed(seed: int, attempt_index: int) -> int:
    return (seed * 1_000_003 + attempt_index * 7919 + 17) % (2**63)


def plan_with_stats(
    s0: SceneState, goal: GoalSpec, cfg: PlannerConfig, keep_states: bool = False
) -> tuple[Plan, SearchStats]:
    tol = cfg.tol
    stats = SearchStats()
    deadline = time.monotonic() + cfg.time_limit
    stacking = cfg.expansion.stacking
    resolution = cfg.expansion.resolution
    pair_ok = compatible_bases(s0) if stacking != "ns" else None
    h0 = _heuristic_fast(s0, goal, cfg.cost, pair_ok, tol)
    root = SearchNode(s0, 0.0, h0, None, None)
    counter = itertools.count()
    heap: list[tuple[float, float, int, SearchNode]] = [(root.f, root.h, next(counter), root)]
    best_g: dict[tuple, float] = {state_key(s0, resolution): 0.0}
    incumbent: Optional[tuple[float, list[Action]]] = None
    since_improvement = 0
    dive_depth = 3 * max(len(goal), 2)

    def consider(cost: float, actions: list[Action]) -> None:
        nonlocal incumbent, since_improvement
        if incumbent is None or cost < incumbent[0] - _F_SLACK:
            incumbent = (cost, actions)
            since_improvement = 0

    dive_rng = np.random.default_rng(stable_attempt_seed(cfg.seed, 555))
    f_pop_max = 0.0
    while heap:
        if time.monotonic() >= deadline:
            stats.timed_out = True
            break
        f, _, _, node = heapq.heappop(heap)
        if incumbent is not None and f >= incumbent[0] - _F_SLACK:
            break  # nothing left can beat the incumbent
        key = state_key(node.state, resolution)
        if node.g > best_g.get(key, float("inf")) + _F_SLACK:
            stats.duplicates += 1
            continue
        f_pop_max = max(f_pop_max, f)
        if (
            cfg.optimality_gap > 0
            and incumbent is not None
            and incumbent[0] <= f_pop_max * (1.0 + cfg.optimality_gap) + _F_SLACK
        ):
            break  # incumbent provably within the accepted gap
        if is_goal(node.state, goal, tol):
            consider(node.g + travel(cfg.cost, node.state.manipulator, cfg.cost.home), node.path_actions())
            continue
        stats.expansions += 1
        since_improvement += 1
        if keep_states:
            stats.expanded_states.append(node.state)
        if (stats.expansions - 1) % cfg.dive_period == 0:
            for try_idx in range(max(cfg.dive_tries, 1)):
                dive = greedy_dive(
                    node.state,
                    goal,
                    cfg,
                    dive_depth,
                    rng=dive_rng,
                    epsilon=0.0 if try_idx == 0 else 0.3,
                    pair_ok=pair_ok,
                )
                stats.dives += 1
                if dive is not None:
                    consider(node.g + dive[0], node.path_actions() + dive[1])
                    break
        if incumbent is None and (stats.expansions - 1) % cfg.goal_attempt_period == 0:
            attempt = goal_attempt(node.state, goal, cfg.goal_attempt_budget, cfg, stats.attempts)
            stats.attempts += 1
            if attempt is not None:
                consider(node.g + attempt.total_cost, node.path_actions() + list(attempt.actions))
        if cfg.stall_limit is not None and incumbent is not None and since_improvement > cfg.stall_limit:
            break
        if cfg.max_expansions is not None and stats.expansions >= cfg.max_expansions:
            stats.timed_out = True
            break
        for action in successors(node.state, goal, cfg.expansion, tol):
            child_state = apply_action(node.state, action, check=False)
            g = node.g + action_cost(cfg.cost, node.state.manipulator, action.resolved(node.state))
            child_key = state_key(child_state, resolution)
            seen = best_g.get(child_key)
            if seen is not None and g >= seen - _F_SLACK:
                stats.duplicates += 1
                continue
            h = _heuristic_fast(child_state, goal, cfg.cost, pair_ok, tol)
            if incumbent is not None and g + h >= incumbent[0] - _F_SLACK:
                continue  # cannot beat the incumbent
            if seen is not None:
                stats.reopened += 1
            best_g[child_key] = g
            stats.generated += 1
            heapq.heappush(heap, (g + h, h, next(counter), SearchNode(child_state, g, h, node, action)))

    if incumbent is None:
        remaining = deadline - time.monotonic()
        if remaining > 0.01:
            attempt = goal_attempt(s0, goal, min(remaining, cfg.goal_attempt_budget), cfg, 10_001)
            stats.attempts += 1
            if attempt is not None:
                incumbent = (attempt.total_cost, list(attempt.actions))
    if incumbent is None:
        raise NoPlanFound(f"no plan within {cfg.time_limit:.1f}s")
    return make_plan(cfg.cost, s0, incumbent[1]), stats


def plan(s0: SceneState, goal: GoalSpec, cfg: PlannerConfig) -> Plan:
    """Best plan found within the configured budget; raises NoPlanFound."""
    result, _ = plan_with_stats(s0, goal, cfg)
    return result

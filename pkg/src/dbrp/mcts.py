"""Feasibility-first Monte Carlo tree search over rearrangement states.

The tree expands with the same bounded successor generator as the heap
planner; rollouts sample goal-biased random actions.  The search returns the
first action sequence that reaches the goal, which favours fast feasibility
over cost, and may manipulate the same object consecutively when allowed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import CostConfig, make_plan
from .expansion import ExpansionConfig, successors, valid_stack_targets
from .geometry import StateOccupancy
from .scene import (
    Action,
    GoalSpec,
    Plan,
    PositionGoal,
    SceneState,
    StackGoal,
    apply_action,
    is_goal,
    object_at_goal,
    off_goal_objects,
    validate_action,
)


@dataclass(frozen=True)
class MctsConfig:
    time_budget: Optional[float] = None
    max_iterations: Optional[int] = 20_000
    exploration: float = math.sqrt(2.0)
    rollout_depth_factor: int = 3
    seed: int = 0
    allow_consecutive: bool = True
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    cost: CostConfig = field(default_factory=CostConfig.ee)
    goal_tol: Optional[float] = None

    def __post_init__(self) -> None:
        if self.time_budget is None and self.max_iterations is None:
            raise ValueError("need a time or iteration budget")
        if self.time_budget is not None and self.time_budget < 0:
            raise ValueError("time budget must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("iteration budget must be nonnegative")
        if self.exploration <= 0:
            raise ValueError("exploration constant must be positive")

    @property
    def tol(self) -> float:
        return self.goal_tol if self.goal_tol is not None else self.expansion.goal_tol


def goal_fraction_reward(state: SceneState, goal: GoalSpec, tol: float) -> float:
    """Fraction of satisfied goals, with a +1 bonus when all are met."""
    total = len(goal.targets)
    if total == 0:
        return 2.0
    done = total - len(off_goal_objects(state, goal, tol))
    reward = done / total
    if done == total:
        reward += 1.0
    return reward


def sample_rollout_action(
    state: SceneState,
    goal: GoalSpec,
    cfg: ExpansionConfig,
    rng: np.random.Generator,
    tol: float,
    avoid_obj: Optional[str] = None,
) -> Optional[Action]:
    """One random valid action biased toward direct goal completion."""
    pending = [o for o in off_goal_objects(state, goal, tol) if o != avoid_obj]
    if cfg.stacking == "ss":
        pending = [o for o in pending if state.forest.is_clear(o)]
    if not pending:
        return None
    occ = StateOccupancy(state, cfg.resolution, cfg.margin_cells)
    order = rng.permutation(len(pending))
    for idx in order:
        obj = pending[int(idx)]
        spec = state.spec(obj)
        target = goal.target(obj)
        direct: Action
        if isinstance(target, StackGoal):
            direct = Action.stack(obj, target.base)
        else:
            direct = Action.move(obj, target.pos)
        if validate_action(state, direct):
            return direct
        want_stack = cfg.stacking != "ns" and rng.random() < cfg.stack_fraction
        if want_stack:
            targets = valid_stack_targets(state, obj)
            if targets:
                return Action.stack(obj, targets[int(rng.integers(len(targets)))])
        spots = occ.sample_free((spec.width, spec.depth), obj, 1, rng)
        if spots:
            return Action.move(obj, spots[0])
    return None


class _Node:
    __slots__ = ("state", "parent", "action_in", "untried", "children", "visits", "value")

    def __init__(self, state: SceneState, parent: Optional["_Node"], action_in: Optional[Action]):
        self.state = state
        self.parent = parent
        self.action_in = action_in
        self.untried: Optional[list[Action]] = None
        self.children: list[_Node] = []
        self.visits = 0
        self.value = 0.0

    def path_actions(self) -> list[Action]:
        out: list[Action] = []
        node = self
        while node.parent is not None:
            out.append(node.action_in)
            node = node.parent
        return out[::-1]


def _uct_child(node: _Node, c: float) -> _Node:
    log_n = math.log(node.visits + 1)
    best, best_score = node.children[0], -math.inf
    for child in node.children:
        score = child.value / child.visits + c * math.sqrt(log_n / child.visits)
        if score > best_score:
            best, best_score = child, score
    return best


def mcts_plan(s0: SceneState, goal: GoalSpec, cfg: MctsConfig) -> Optional[Plan]:
    """A feasible plan from s0 to the goal, or None on budget exhaustion."""
    tol = cfg.tol
    if is_goal(s0, goal, tol):
        return make_plan(cfg.cost, s0, [])
    deadline = time.monotonic() + cfg.time_budget if cfg.time_budget is not None else None
    rng = np.random.default_rng(cfg.seed)
    root = _Node(s0, None, None)
    depth_cap = max(cfg.rollout_depth_factor * len(goal.targets), 4)
    iterations = 0
    while True:
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            return None
        if deadline is not None and time.monotonic() >= deadline:
            return None
        iterations += 1

        node = root
        while node.untried == [] and node.children:
            node = _uct_child(node, cfg.exploration)
        if node.untried is None:
            acts = successors(node.state, goal, cfg.expansion, tol)
            if not cfg.allow_consecutive and node.action_in is not None:
                kept = [a for a in acts if a.obj != node.action_in.obj]
                acts = kept or acts
            node.untried = acts
        if node.untried:
            pick = int(rng.integers(len(node.untried)))
            action = node.untried.pop(pick)
            child = _Node(apply_action(node.state, action), node, action)
            node.children.append(child)
            node = child
            if is_goal(node.state, goal, tol):
                return make_plan(cfg.cost, s0, node.path_actions())

        state = node.state
        rollout_actions: list[Action] = []
        last_obj = node.action_in.obj if (node.action_in and not cfg.allow_consecutive) else None
        for _ in range(depth_cap):
            if is_goal(state, goal, tol):
                return make_plan(cfg.cost, s0, node.path_actions() + rollout_actions)
            action = sample_rollout_action(state, goal, cfg.expansion, rng, tol, avoid_obj=last_obj)
            if action is None:
                break
            state = apply_action(state, action)
            rollout_actions.append(action)
            last_obj = action.obj if not cfg.allow_consecutive else None
        if is_goal(state, goal, tol):
            return make_plan(cfg.cost, s0, node.path_actions() + rollout_actions)

        reward = goal_fraction_reward(state, goal, tol)
        while node is not None:
            node.visits += 1
            node.value += reward
            node = node.parent

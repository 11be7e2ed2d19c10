"""Bounded successor-action generation for the search planners.

Each off-goal object contributes at most `n_buf` candidate actions: a
sampled share of stack placements onto valid bases and the remainder as
moves.  When the object's goal placement is free only the direct goal action
is emitted; otherwise buffer positions are sampled from free space.  The
stacking mode selects dynamic ("ds"), static ("ss", loaded bases frozen), or
no stacking ("ns").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import StateOccupancy
from .scene import (
    Action,
    DEFAULT_CATEGORY_TABLE,
    GoalSpec,
    PositionGoal,
    SceneState,
    StackGoal,
    object_at_goal,
    stable_hash,
    state_key,
    validate_action,
)

STACKING_MODES = ("ds", "ss", "ns")


@dataclass(frozen=True)
class ExpansionConfig:
    n_buf: int = 4
    stack_fraction: float = 0.6
    seed: int = 0
    stacking: str = "ds"
    resolution: int = 100
    margin_cells: int = 1

    def __post_init__(self) -> None:
        if self.n_buf < 1:
            raise ValueError("n_buf must be at least 1")
        if not 0 <= self.stack_fraction <= 1:
            raise ValueError("stack_fraction must lie in [0, 1]")
        if self.stacking not in STACKING_MODES:
            raise ValueError(f"stacking must be one of {STACKING_MODES}")

    @property
    def goal_tol(self) -> float:
        return 1.0 / self.resolution


def valid_stack_targets(state: SceneState, obj: str) -> list[str]:
    """Clear-topped bases outside obj's sub-stack that accept its category."""
    ok_bases = DEFAULT_CATEGORY_TABLE.bases_for(state.spec(obj).category)
    blocked = set(state.substack(obj))
    forest = state.forest
    return [
        o.id
        for o in state.objects
        if o.category in ok_bases and o.id not in blocked and forest.is_clear(o.id)
    ]


def expansion_rng(cfg: ExpansionConfig, state: SceneState) -> np.random.Generator:
    """Generator derived from the seed and the quantized state, so repeated
    expansion of the same state is reproducible and parallel-safe."""
    return np.random.default_rng(stable_hash(state_key(state, cfg.resolution), cfg.seed))


def successors(
    state: SceneState,
    goal: GoalSpec,
    cfg: ExpansionConfig,
    tol: float | None = None,
    occ: StateOccupancy | None = None,
) -> list[Action]:
    """Candidate actions for every off-goal object; empty means a dead end."""
    tol = cfg.goal_tol if tol is None else tol
    rng = expansion_rng(cfg, state)
    if occ is None:
        occ = StateOccupancy(state, cfg.resolution, cfg.margin_cells)
    n_stack_quota = max(math.floor(cfg.stack_fraction * cfg.n_buf), 1)
    actions: list[Action] = []
    for spec in state.objects:
        obj = spec.id
        if object_at_goal(state, goal, obj, tol):
            continue
        if cfg.stacking == "ss" and not state.forest.is_clear(obj):
            continue  # static stacks pin their base until unloaded
        sampled_stacks: list[Action] = []
        if cfg.stacking != "ns":
            targets = valid_stack_targets(state, obj)
            take = min(n_stack_quota, len(targets))
            if take:
                chosen = rng.choice(len(targets), size=take, replace=False)
                sampled_stacks = [Action.stack(obj, targets[int(c)]) for c in chosen]
        n_move = cfg.n_buf - len(sampled_stacks)
        target = goal.target(obj)
        footprint = (spec.width, spec.depth)
        goal_actions: list[Action] = []
        buffer_moves: list[Action] = []
        if isinstance(target, StackGoal):
            direct = Action.stack(obj, target.base)
            if validate_action(state, direct):
                sampled_stacks = [a for a in sampled_stacks if not a.same_op(direct)]
                goal_actions = [direct]
            else:
                buffer_moves = [
                    Action.move(obj, p) for p in occ.sample_free(footprint, obj, n_move, rng)
                ]
        else:
            direct = Action.move(obj, target.pos)
            if validate_action(state, direct):
                goal_actions = [direct]
            else:
                buffer_moves = [
                    Action.move(obj, p) for p in occ.sample_free(footprint, obj, n_move, rng)
                ]
        overflow = len(sampled_stacks) + len(goal_actions) + len(buffer_moves) - cfg.n_buf
        if overflow > 0:
            sampled_stacks = sampled_stacks[: max(len(sampled_stacks) - overflow, 0)]
        actions.extend(sampled_stacks + goal_actions + buffer_moves)
    return actions

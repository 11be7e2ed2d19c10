"""Seeded random start/goal scene pairs at a requested footprint density.

Objects are uniformly sized squares so that n * side^2 equals the density
times the table area exactly.  Both layouts are rejection-sampled to be
collision-free; categories are drawn uniformly over the four groups, and the
goal of each object is its placement in the target layout.
"""

from __future__ import annotations

import math

import numpy as np

from .costs import CostConfig
from .scene import (
    Category,
    DEFAULT_CATEGORY_TABLE,
    GoalSpec,
    ObjectSpec,
    PositionGoal,
    SceneState,
    StackForest,
    StackGoal,
    _rects_overlap,
)

_CATEGORIES = (
    Category.PRIMARY_BASE,
    Category.SECONDARY_BASE,
    Category.LOW_MASS,
    Category.HIGH_MASS,
)


class GenerationFailed(Exception):
    """Rejection sampling could not place every object."""


def _sample_layout(
    rng: np.random.Generator,
    specs: list[ObjectSpec],
    table: tuple[float, float],
    max_attempts: int,
    tries_per_object: int = 200,
) -> dict[str, tuple[float, float]]:
    """Sequential rejection sampling, restarting the layout when an object
    cannot be placed (a dense random prefix may leave no room)."""
    attempts = 0
    while True:
        placed: dict[str, tuple[float, float]] = {}
        for spec in specs:
            half_w, half_d = spec.width / 2, spec.depth / 2
            for _ in range(tries_per_object):
                attempts += 1
                if attempts > max_attempts:
                    raise GenerationFailed(
                        f"no collision-free layout for {len(specs)} objects after {max_attempts} attempts"
                    )
                x = rng.uniform(half_w, table[0] - half_w)
                y = rng.uniform(half_d, table[1] - half_d)
                if all(
                    not _rects_overlap((x, y), spec, placed[other.id], other)
                    for other in specs
                    if other.id in placed
                ):
                    placed[spec.id] = (float(x), float(y))
                    break
            else:
                break  # restart the whole layout
        if len(placed) == len(specs):
            return placed


def _sample_stacks(
    rng: np.random.Generator,
    specs: list[ObjectSpec],
    accept_prob: float = 0.5,
) -> list[tuple[str, str]]:
    """Random category-valid edges; one item per base, no cycles."""
    pairs = [
        (t.id, b.id)
        for t in specs
        for b in specs
        if t.id != b.id and DEFAULT_CATEGORY_TABLE.stackable(t.category, b.category)
    ]
    order = rng.permutation(len(pairs))
    has_base: set[str] = set()
    has_cargo: set[str] = set()
    base_of: dict[str, str] = {}
    edges: list[tuple[str, str]] = []
    for idx in order:
        top, base = pairs[idx]
        if top in has_base or base in has_cargo:
            continue
        cur = base
        cyclic = False
        while cur in base_of:
            cur = base_of[cur]
            if cur == top:
                cyclic = True
                break
        if cyclic:
            continue
        if rng.random() < accept_prob:
            edges.append((top, base))
            has_base.add(top)
            has_cargo.add(base)
            base_of[top] = base
    return edges


def _snap_to_bases(
    positions: dict[str, tuple[float, float]], forest: StackForest, specs: list[ObjectSpec]
) -> dict[str, tuple[float, float]]:
    snapped = {}
    for spec in specs:
        cur = spec.id
        while forest.base(cur) is not None:
            cur = forest.base(cur)
        snapped[spec.id] = positions[cur]
    return snapped


def generate_pair(
    n: int,
    phi: float,
    mode: str = "ee",
    table: tuple[float, float] | None = None,
    with_stacks: bool = False,
    seed: int = 0,
    max_attempts: int = 10_000,
) -> tuple[SceneState, GoalSpec]:
    """Start state and goal for n uniform squares at density phi."""
    if not 0 < phi < 1:
        raise ValueError("phi must be in (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    cost = CostConfig.for_mode(mode)
    table = table or cost.table
    side = math.sqrt(phi * table[0] * table[1] / n)
    if side > min(table):
        raise GenerationFailed(f"object side {side:.3f} exceeds table short edge")
    rng = np.random.default_rng(seed)
    cats = rng.integers(0, len(_CATEGORIES), size=n)
    specs = [ObjectSpec(f"o{i}", _CATEGORIES[int(cats[i])], side, side) for i in range(n)]

    start_pos = _sample_layout(rng, specs, table, max_attempts)
    goal_pos = _sample_layout(rng, specs, table, max_attempts)

    start_forest = StackForest()
    goal_forest = StackForest()
    if with_stacks:
        start_forest = StackForest.from_pairs(_sample_stacks(rng, specs))
        goal_forest = StackForest.from_pairs(_sample_stacks(rng, specs))
        start_pos = _snap_to_bases(start_pos, start_forest, specs)
        goal_pos = _snap_to_bases(goal_pos, goal_forest, specs)

    state = SceneState.build(
        objects=specs,
        positions=start_pos,
        forest=start_forest,
        manipulator=cost.home,
        table=table,
    )
    targets: dict[str, object] = {}
    for spec in specs:
        base = goal_forest.base(spec.id)
        if base is not None:
            targets[spec.id] = StackGoal(base)
        else:
            targets[spec.id] = PositionGoal(goal_pos[spec.id])
    return state, GoalSpec.build(targets)


def goal_state(state: SceneState, goal: GoalSpec) -> SceneState:
    """The arrangement implied by a goal, for validity checks and rendering."""
    pos = {obj: state.position(obj) for obj in state.ids()}
    edges = []
    for obj, target in goal.items():
        if isinstance(target, StackGoal):
            edges.append((obj, target.base))
        else:
            pos[obj] = target.pos
    forest = StackForest.from_pairs(edges)
    for obj, target in goal.items():
        if isinstance(target, StackGoal):
            cur = obj
            hops = 0
            while forest.base(cur) is not None:
                cur = forest.base(cur)
                hops += 1
                if hops > len(pos):
                    raise ValueError("goal stacking contains a cycle")
            pos[obj] = pos[cur]
    return SceneState.build(
        objects=state.objects,
        positions=pos,
        forest=forest,
        manipulator=state.manipulator,
        table=state.table,
    )

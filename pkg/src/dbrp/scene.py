"""Scene state, stacking rules, and the pick-and-place transition function.

A scene is a set of rectangular objects on a rectangular table plus a
"stacked on" forest and the manipulator position.  Moving an object carries
everything stacked on it; stacking snaps the moved sub-stack onto the base.
States are immutable values: applying an action returns a new state.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional

Point = tuple[float, float]

_EPS = 1e-9


class InvalidAction(Exception):
    """An action whose preconditions do not hold in the given state."""


class InvalidPlan(Exception):
    """A plan that fails to replay from its initial state."""


class Category(Enum):
    PRIMARY_BASE = "primary_base"
    SECONDARY_BASE = "secondary_base"
    LOW_MASS = "low_mass"
    HIGH_MASS = "high_mass"


@dataclass(frozen=True)
class CategoryTable:
    """Lookup of which (top, base) category pairs form a stable stack.

    Primary bases hold anything, secondary bases hold only low-mass items,
    and items never serve as bases.
    """

    pairs: frozenset[tuple[Category, Category]] = frozenset(
        {
            (Category.LOW_MASS, Category.SECONDARY_BASE),
            (Category.LOW_MASS, Category.PRIMARY_BASE),
            (Category.SECONDARY_BASE, Category.PRIMARY_BASE),
            (Category.HIGH_MASS, Category.PRIMARY_BASE),
        }
    )

    def __post_init__(self) -> None:
        on: dict[Category, frozenset[Category]] = {}
        for cat in Category:
            on[cat] = frozenset(b for t, b in self.pairs if t is cat)
        object.__setattr__(self, "_bases_for", on)

    def stackable(self, top: Category, base: Category) -> bool:
        return base in self._bases_for[top]

    def bases_for(self, top: Category) -> frozenset[Category]:
        """Base categories that can support `top`."""
        return self._bases_for[top]


DEFAULT_CATEGORY_TABLE = CategoryTable()


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    category: Category
    width: float
    depth: float

    def __post_init__(self) -> None:
        if self.width <= 0 or self.depth <= 0:
            raise ValueError(f"object {self.id}: footprint must be positive")


@dataclass(frozen=True)
class StackForest:
    """Acyclic "is stacked on" relation; every base supports one item."""

    base_of: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "_base_map", {t: b for t, b in self.base_of})
        object.__setattr__(self, "_cargo_map", {b: t for t, b in self.base_of})

    @classmethod
    def from_pairs(cls, pairs) -> "StackForest":
        return cls(tuple(sorted((str(t), str(b)) for t, b in pairs)))

    def base(self, obj: str) -> Optional[str]:
        return self._base_map.get(obj)

    def cargo(self, base: str) -> Optional[str]:
        """The single object directly stacked on `base`, if any."""
        return self._cargo_map.get(base)

    def is_clear(self, base: str) -> bool:
        return base not in self._cargo_map

    def above(self, obj: str) -> list[str]:
        """Transitive dependents of `obj`, nearest first."""
        out: list[str] = []
        cur = self._cargo_map.get(obj)
        while cur is not None:
            out.append(cur)
            cur = self._cargo_map.get(cur)
        return out

    def without(self, obj: str) -> "StackForest":
        if obj not in self._base_map:
            return self
        return StackForest(tuple(p for p in self.base_of if p[0] != obj))

    def with_edge(self, top: str, base: str) -> "StackForest":
        kept = tuple(p for p in self.base_of if p[0] != top)
        return StackForest(tuple(sorted(kept + ((top, base),))))


class SceneState:
    """Immutable arrangement: objects, positions, stacking, manipulator."""

    __slots__ = ("objects", "positions", "forest", "manipulator", "table", "_specs")

    def __init__(self, objects, positions, forest, manipulator, table, _specs=None):
        self.objects: tuple[ObjectSpec, ...] = tuple(objects)
        self.positions: dict[str, Point] = dict(positions)
        self.forest: StackForest = forest
        self.manipulator: Point = manipulator
        self.table: tuple[float, float] = table
        self._specs: dict[str, ObjectSpec] = _specs if _specs is not None else {o.id: o for o in self.objects}

    @classmethod
    def build(cls, objects, positions, forest=None, manipulator=(0.0, 0.0), table=(1.0, 1.0)):
        return cls(
            objects=tuple(objects),
            positions={k: (float(v[0]), float(v[1])) for k, v in dict(positions).items()},
            forest=forest or StackForest(),
            manipulator=(float(manipulator[0]), float(manipulator[1])),
            table=(float(table[0]), float(table[1])),
        )

    def spec(self, obj: str) -> ObjectSpec:
        return self._specs[obj]

    def position(self, obj: str) -> Point:
        return self.positions[obj]

    def ids(self) -> Iterator[str]:
        for o in self.objects:
            yield o.id

    def roots(self) -> list[str]:
        """Objects resting directly on the table."""
        return [o.id for o in self.objects if self.forest.base(o.id) is None]

    def substack(self, obj: str) -> list[str]:
        """`obj` followed by everything stacked above it."""
        return [obj] + self.forest.above(obj)

    def moved(self, updates: dict, forest: StackForest, manipulator: Point) -> "SceneState":
        pos = dict(self.positions)
        pos.update(updates)
        return SceneState(self.objects, pos, forest, manipulator, self.table, self._specs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SceneState):
            return NotImplemented
        return (
            self.objects == other.objects
            and self.positions == other.positions
            and self.forest == other.forest
            and self.manipulator == other.manipulator
            and self.table == other.table
        )

    def __repr__(self) -> str:
        return (
            f"SceneState({len(self.objects)} objects, {len(self.forest.base_of)} stacks, "
            f"manipulator={self.manipulator})"
        )


class ActionKind(Enum):
    MOVE = "move"
    STACK = "stack"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    obj: str
    to: Optional[Point] = None
    base: Optional[str] = None
    pick: Optional[Point] = None
    place: Optional[Point] = None

    @classmethod
    def move(cls, obj: str, to: Point) -> "Action":
        return cls(ActionKind.MOVE, obj, to=(float(to[0]), float(to[1])))

    @classmethod
    def stack(cls, obj: str, base: str) -> "Action":
        return cls(ActionKind.STACK, obj, base=base)

    def resolved(self, state: SceneState) -> "Action":
        """Fill pick/place from the state the action executes in."""
        pick = state.positions[self.obj]
        place = self.to if self.kind is ActionKind.MOVE else state.positions[self.base]
        return Action(self.kind, self.obj, self.to, self.base, pick, place)

    def same_op(self, other: "Action") -> bool:
        return (self.kind, self.obj, self.to, self.base) == (other.kind, other.obj, other.to, other.base)


@dataclass(frozen=True)
class Plan:
    actions: tuple[Action, ...]
    total_cost: float

    def __len__(self) -> int:
        return len(self.actions)


# --- goals ------------------------------------------------------------------


@dataclass(frozen=True)
class PositionGoal:
    pos: Point


@dataclass(frozen=True)
class StackGoal:
    base: str


class GoalSpec:
    """One target per object: an absolute position or a base to rest on."""

    __slots__ = ("targets", "_map")

    def __init__(self, targets):
        self.targets: tuple[tuple[str, object], ...] = tuple(targets)
        self._map = dict(self.targets)

    @classmethod
    def build(cls, mapping) -> "GoalSpec":
        return cls(tuple(sorted(dict(mapping).items(), key=lambda kv: kv[0])))

    def target(self, obj: str):
        return self._map[obj]

    def items(self):
        return self.targets

    def __len__(self) -> int:
        return len(self.targets)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GoalSpec):
            return NotImplemented
        return self.targets == other.targets

    def __repr__(self) -> str:
        return f"GoalSpec({len(self.targets)} targets)"


# --- validity ---------------------------------------------------------------


def _rects_overlap(p1: Point, s1: ObjectSpec, p2: Point, s2: ObjectSpec) -> bool:
    """Strict positive-area overlap; touching footprints are allowed."""
    return (
        abs(p1[0] - p2[0]) < (s1.width + s2.width) / 2 - _EPS
        and abs(p1[1] - p2[1]) < (s1.depth + s2.depth) / 2 - _EPS
    )


def _inside_table(pos: Point, spec: ObjectSpec, table: tuple[float, float]) -> bool:
    w2, d2 = spec.width / 2, spec.depth / 2
    return (
        pos[0] - w2 >= -_EPS
        and pos[0] + w2 <= table[0] + _EPS
        and pos[1] - d2 >= -_EPS
        and pos[1] + d2 <= table[1] + _EPS
    )


def state_violations(state: SceneState, table: CategoryTable = DEFAULT_CATEGORY_TABLE) -> list[str]:
    """All failed state invariants, empty when the state is valid."""
    bad: list[str] = []
    ids = list(state.ids())
    if len(set(ids)) != len(ids):
        bad.append("duplicate object ids")
        return bad
    seen: set[str] = set()
    for top, base in state.forest.base_of:
        if top not in state._specs or base not in state._specs:
            bad.append(f"stack edge references unknown object ({top} on {base})")
            continue
        if top in seen:
            bad.append(f"{top} stacked on more than one base")
        seen.add(top)
        if not table.stackable(state.spec(top).category, state.spec(base).category):
            bad.append(f"{top} cannot rest on {base}")
        if state.position(top) != state.position(base):
            bad.append(f"{top} position differs from its base {base}")
    cargo_count: dict[str, int] = {}
    for top, base in state.forest.base_of:
        cargo_count[base] = cargo_count.get(base, 0) + 1
    for base, cnt in cargo_count.items():
        if cnt > 1:
            bad.append(f"{base} supports {cnt} items")
    for obj in ids:
        hops, cur = 0, obj
        while cur is not None:
            cur = state.forest.base(cur)
            hops += 1
            if hops > len(ids):
                bad.append(f"stack cycle through {obj}")
                break
    roots = state.roots()
    for r in roots:
        if not _inside_table(state.position(r), state.spec(r), state.table):
            bad.append(f"{r} outside table")
    for i, a in enumerate(roots):
        for b in roots[i + 1 :]:
            if _rects_overlap(state.position(a), state.spec(a), state.position(b), state.spec(b)):
                bad.append(f"{a} overlaps {b}")
    mx, my = state.manipulator
    if not (-_EPS <= mx <= state.table[0] + _EPS and -_EPS <= my <= state.table[1] + _EPS):
        bad.append("manipulator outside workspace")
    return bad


def assert_valid_state(state: SceneState) -> None:
    bad = state_violations(state)
    if bad:
        raise ValueError("invalid scene state: " + "; ".join(bad))


def validate_action(
    state: SceneState,
    action: Action,
    occ=None,
    table: CategoryTable = DEFAULT_CATEGORY_TABLE,
) -> bool:
    """Whether `action` may execute in `state`.

    Moves need an in-table, collision-free placement against all other root
    footprints; stacks need a clear-topped base outside the moved sub-stack
    with a category-stable new contact pair.  With `occ` (an OccupancyIndex
    excluding the moved object) the move placement test uses the grid,
    otherwise exact rectangle overlap is used.
    """
    if action.obj not in state._specs:
        return False
    spec = state.spec(action.obj)
    if action.kind is ActionKind.MOVE:
        if action.to is None:
            return False
        if occ is not None:
            from .geometry import is_placement_free

            return is_placement_free(occ, (spec.width, spec.depth), action.to)
        if not _inside_table(action.to, spec, state.table):
            return False
        skip = set(state.substack(action.obj))
        for r in state.roots():
            if r in skip:
                continue
            if _rects_overlap(action.to, spec, state.position(r), state.spec(r)):
                return False
        return True
    if action.base is None or action.base not in state._specs:
        return False
    if action.base == action.obj or action.base in state.substack(action.obj):
        return False
    if not state.forest.is_clear(action.base):
        return False
    return table.stackable(spec.category, state.spec(action.base).category)


def apply_action(state: SceneState, action: Action, check: bool = True) -> SceneState:
    """Execute an action, carrying the moved object's sub-stack.

    `check=False` skips validation for actions a generator already vetted.
    """
    if check and not validate_action(state, action):
        raise InvalidAction(f"invalid {action.kind.value} of {action.obj}")
    dest = action.to if action.kind is ActionKind.MOVE else state.position(action.base)
    updates = {obj: dest for obj in state.substack(action.obj)}
    if action.kind is ActionKind.MOVE:
        forest = state.forest.without(action.obj)
    else:
        forest = state.forest.with_edge(action.obj, action.base)
    return state.moved(updates, forest, dest)


def replay(state: SceneState, actions) -> tuple[list[SceneState], list[Action]]:
    """States visited and pick/place-resolved actions; raises InvalidPlan."""
    states = [state]
    resolved: list[Action] = []
    for i, action in enumerate(actions):
        cur = states[-1]
        if not validate_action(cur, action):
            raise InvalidPlan(f"action {i} ({action.kind.value} {action.obj}) invalid on replay")
        resolved.append(action.resolved(cur))
        states.append(apply_action(cur, action, check=False))
    return states, resolved


# --- goal tests -------------------------------------------------------------


def object_at_goal(state: SceneState, goal: GoalSpec, obj: str, tol: float) -> bool:
    target = goal.target(obj)
    if isinstance(target, StackGoal):
        return state.forest.base(obj) == target.base
    if state.forest.base(obj) is not None:
        return False
    px, py = state.positions[obj]
    return math.hypot(px - target.pos[0], py - target.pos[1]) <= tol + _EPS


def is_goal(state: SceneState, goal: GoalSpec, tol: float) -> bool:
    return all(object_at_goal(state, goal, obj, tol) for obj, _ in goal.items())


def off_goal_objects(state: SceneState, goal: GoalSpec, tol: float) -> list[str]:
    return [obj for obj, _ in goal.items() if not object_at_goal(state, goal, obj, tol)]


# --- canonical keys ---------------------------------------------------------


def state_key(state: SceneState, resolution: int) -> tuple:
    """Quantized canonical form: cell per root, edges, manipulator cell."""
    parts = []
    for o in state.objects:
        base = state.forest.base(o.id)
        if base is not None:
            parts.append((o.id, "on", base))
        else:
            x, y = state.positions[o.id]
            parts.append((o.id, int(x * resolution), int(y * resolution)))
    mx, my = state.manipulator
    return (tuple(parts), (int(mx * resolution), int(my * resolution)))


def stable_hash(key: tuple, seed: int = 0) -> int:
    """Deterministic 64-bit hash of a canonical key, stable across runs."""
    digest = hashlib.blake2b(repr((seed, key)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")

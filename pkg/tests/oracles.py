"""Independent reference implementations used to verify the library.

Everything here recomputes results through a different route than the code
under test: per-cell loops instead of prefix sums, permutation enumeration
instead of the assignment solver, and a plain best-first search with its own
transition rules instead of the production planner.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from dbrp.scene import (
    Action,
    Category,
    DEFAULT_CATEGORY_TABLE,
    GoalSpec,
    PositionGoal,
    SceneState,
    StackGoal,
)


# --- geometry ----------------------------------------------------------------


def naive_window_count(grid: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> int:
    """Occupied cells in the inclusive window, one cell at a time."""
    count = 0
    for r in range(max(r0, 0), min(r1, grid.shape[0] - 1) + 1):
        for c in range(max(c0, 0), min(c1, grid.shape[1] - 1) + 1):
            if grid[r, c]:
                count += 1
    return count


def naive_placement_free(idx, footprint, at, margin_cells=None) -> bool:
    """Same window definition as the index query, counted cell by cell."""
    from dbrp.geometry import _object_cells

    w, d = footprint
    eps = 1e-9
    if (
        at[0] - w / 2 < -eps
        or at[0] + w / 2 > idx.table[0] + eps
        or at[1] - d / 2 < -eps
        or at[1] + d / 2 > idx.table[1] + eps
    ):
        return False
    m = idx.margin_cells if margin_cells is None else margin_cells
    rows, cols = idx.grid.shape
    r0, r1, c0, c1 = _object_cells((rows, cols), idx.resolution, at, w, d)
    return naive_window_count(idx.grid, r0 - m, r1 + m, c0 - m, c1 + m) == 0


# --- matching ----------------------------------------------------------------


def brute_force_min_cost(cost: np.ndarray) -> float:
    """Minimum assignment cost over all permutations (n <= ~8)."""
    n = cost.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = sum(cost[i, perm[i]] for i in range(n))
        best = min(best, total)
    return best


# --- exhaustive planning oracle ----------------------------------------------


class GridWorld:
    """Cell-quantized rearrangement instance for exhaustive search.

    Positions live on an axis-aligned grid of cell centers; footprints are
    smaller than a cell, so placements collide exactly when two roots share a
    cell.  Action generation mirrors the planner's published rules (all valid
    stack placements plus either the direct goal move when its cell is free
    or moves to every free cell) but is enumerated exhaustively here.
    """

    def __init__(self, state: SceneState, goal: GoalSpec, resolution: int, c_pp: float, home, tol: float):
        self.resolution = resolution
        self.cell = 1.0 / resolution
        self.c_pp = c_pp
        self.home = home
        self.tol = tol
        self.ids = [o.id for o in state.objects]
        self.cats = {o.id: o.category for o in state.objects}
        self.cols = round(state.table[0] * resolution)
        self.rows = round(state.table[1] * resolution)
        self.goal_cells = {}
        for obj, target in goal.items():
            assert isinstance(target, PositionGoal), "oracle handles position goals"
            self.goal_cells[obj] = self.to_cell(target.pos)
        self.start = self.encode(state)

    def to_cell(self, pos) -> tuple[int, int]:
        return (int(round(pos[0] * self.resolution - 0.5)), int(round(pos[1] * self.resolution - 0.5)))

    def center(self, cell) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell, (cell[1] + 0.5) * self.cell)

    def encode(self, state: SceneState):
        entries = []
        for obj in self.ids:
            base = state.forest.base(obj)
            if base is not None:
                entries.append(("on", base))
            else:
                entries.append(self.to_cell(state.positions[obj]))
        return (tuple(entries), state.manipulator)

    # -- state helpers (entries indexed like self.ids) --

    def _positions(self, entries):
        pos = {}
        remaining = dict(zip(self.ids, entries))
        # roots first, then follow chains
        for obj, e in remaining.items():
            if not (isinstance(e, tuple) and e and e[0] == "on"):
                pos[obj] = e
        changed = True
        while changed:
            changed = False
            for obj, e in remaining.items():
                if obj in pos:
                    continue
                if e[1] in pos:
                    pos[obj] = pos[e[1]]
                    changed = True
        return pos

    def _cargo(self, entries):
        cargo = {}
        for obj, e in zip(self.ids, entries):
            if isinstance(e, tuple) and e and e[0] == "on":
                cargo[e[1]] = obj
        return cargo

    def _at_goal(self, obj, entries, pos) -> bool:
        e = entries[self.ids.index(obj)]
        if isinstance(e, tuple) and e and e[0] == "on":
            return False
        gx, gy = self.center(self.goal_cells[obj])
        px, py = self.center(pos[obj])
        return math.hypot(px - gx, py - gy) <= self.tol + 1e-12

    def _chain_of(self, obj, entries):
        """obj plus everything transitively stacked on it."""
        cargo = self._cargo(entries)
        out = [obj]
        cur = cargo.get(obj)
        while cur is not None:
            out.append(cur)
            cur = cargo.get(cur)
        return out

    def successors(self, key):
        entries, manip = key
        entries = list(entries)
        pos = self._positions(entries)
        cargo = self._cargo(entries)
        occupied = {
            pos[obj]
            for obj, e in zip(self.ids, entries)
            if not (isinstance(e, tuple) and e and e[0] == "on")
        }
        out = []
        for idx, obj in enumerate(self.ids):
            if self._at_goal(obj, entries, pos):
                continue
            chain = self._chain_of(obj, entries)
            pick = self.center(pos[obj])
            # stack placements onto every valid clear base
            for base in self.ids:
                if base in chain or base in cargo:
                    continue
                if not DEFAULT_CATEGORY_TABLE.stackable(self.cats[obj], self.cats[base]):
                    continue
                new_entries = list(entries)
                new_entries[idx] = ("on", base)
                place = self.center(pos[base])
                cost = math.hypot(manip[0] - pick[0], manip[1] - pick[1])
                cost += math.hypot(pick[0] - place[0], pick[1] - place[1]) + self.c_pp
                out.append(((tuple(new_entries), place), cost))
            # move: direct to goal when free, otherwise to any free cell
            own_cell = pos[obj] if not (isinstance(entries[idx], tuple) and entries[idx][0] == "on") else None
            blocked = occupied - ({own_cell} if own_cell else set())
            goal_cell = self.goal_cells[obj]
            if goal_cell not in blocked:
                targets = [goal_cell]
            else:
                targets = [
                    (i, j)
                    for i in range(self.cols)
                    for j in range(self.rows)
                    if (i, j) not in blocked and (i, j) != own_cell
                ]
            for cell in targets:
                new_entries = list(entries)
                new_entries[idx] = cell
                place = self.center(cell)
                cost = math.hypot(manip[0] - pick[0], manip[1] - pick[1])
                cost += math.hypot(pick[0] - place[0], pick[1] - place[1]) + self.c_pp
                out.append(((tuple(new_entries), place), cost))
        return out

    def is_goal(self, key) -> bool:
        entries, _ = key
        pos = self._positions(list(entries))
        return all(self._at_goal(obj, list(entries), pos) for obj in self.ids)

    def bound(self, key) -> float:
        """Independent lower bound: one pick per off-goal object plus the
        largest single direct carry distance."""
        entries, _ = key
        pos = self._positions(list(entries))
        off = [obj for obj in self.ids if not self._at_goal(obj, list(entries), pos)]
        worst = 0.0
        for obj in off:
            px, py = self.center(pos[obj])
            gx, gy = self.center(self.goal_cells[obj])
            worst = max(worst, math.hypot(px - gx, py - gy))
        return len(off) * self.c_pp + worst

    def optimal_cost(self, max_pops: int = 400_000):
        """Exact cheapest total (actions plus return home), or None."""
        start = self.start
        counter = itertools.count()
        heap = [(self.bound(start), next(counter), start, 0.0)]
        best_g = {start: 0.0}
        best_total = math.inf
        while heap:
            f, _, key, g = heapq.heappop(heap)
            if f >= best_total - 1e-12:
                break
            if g > best_g.get(key, math.inf) + 1e-12:
                continue
            if self.is_goal(key):
                manip = key[1]
                best_total = min(
                    best_total, g + math.hypot(manip[0] - self.home[0], manip[1] - self.home[1])
                )
                continue
            if next(counter) > max_pops:
                raise RuntimeError("oracle search exceeded its pop budget")
            for child, step in self.successors(key):
                g2 = g + step
                if g2 >= best_g.get(child, math.inf) - 1e-12:
                    continue
                best_g[child] = g2
                heapq.heappush(heap, (g2 + self.bound(child), next(counter), child, g2))
        return None if best_total is math.inf else best_total


def oracle_optimal_cost(state: SceneState, goal: GoalSpec, resolution: int, c_pp: float, home, tol: float):
    return GridWorld(state, goal, resolution, c_pp, home, tol).optimal_cost()

"""Post-processing of plans: redundancy pruning, then buffer optimization.

Pruning collapses consecutive manipulations of one object into a single
action and drops actions whose removal leaves the final arrangement and
replay validity intact without raising the cost.  Buffer optimization
re-places each temporarily parked object at the location minimizing the four
travel legs that depend on it, choosing between free table positions and, in
dynamic mode, clear-topped bases that may themselves move while loaded.
"""

from __future__ import annotations

import numpy as np

from .costs import CostConfig, plan_cost, make_plan, travel
from .geometry import StateOccupancy
from .scene import (
    Action,
    ActionKind,
    DEFAULT_CATEGORY_TABLE,
    GoalSpec,
    InvalidPlan,
    Plan,
    Point,
    SceneState,
    replay,
)

_SLACK = 1e-9


def _final_state(s0: SceneState, actions: list[Action]) -> SceneState:
    states, _ = replay(s0, actions)
    return states[-1]


def _same_arrangement(a: SceneState, b: SceneState) -> bool:
    return a.positions == b.positions and a.forest.base_of == b.forest.base_of


def _try_variant(
    s0: SceneState,
    candidate: list[Action],
    reference_final: SceneState,
    max_cost: float,
    cfg: CostConfig,
) -> float | None:
    """Cost of the candidate if it replays to the same arrangement, else None."""
    try:
        final = _final_state(s0, candidate)
    except InvalidPlan:
        return None
    if not _same_arrangement(final, reference_final):
        return None
    cost = plan_cost(cfg, s0, candidate)
    if cost > max_cost + _SLACK:
        return None
    return cost


def prune_redundant(s0: SceneState, plan: Plan, cfg: CostConfig) -> Plan:
    """Remove consecutive and effect-less redundancies, never raising cost."""
    actions = list(plan.actions)
    reference_final = _final_state(s0, actions)
    cost = plan_cost(cfg, s0, actions)
    changed = True
    while changed:
        changed = False
        # collapse runs of consecutive actions on one object to the last one
        t = 0
        while t < len(actions) - 1:
            end = t
            while end + 1 < len(actions) and actions[end + 1].obj == actions[t].obj:
                end += 1
            if end > t:
                collapsed = actions[:t] + [actions[end]] + actions[end + 1 :]
                new_cost = _try_variant(s0, collapsed, reference_final, cost, cfg)
                if new_cost is None:
                    dropped = actions[:t] + actions[end + 1 :]
                    new_cost = _try_variant(s0, dropped, reference_final, cost, cfg)
                    if new_cost is not None:
                        actions, cost, changed = dropped, new_cost, True
                        continue
                else:
                    actions, cost, changed = collapsed, new_cost, True
                    continue
            t = end + 1
        # drop single actions whose effect is undone or irrelevant downstream
        t = 0
        while t < len(actions):
            candidate = actions[:t] + actions[t + 1 :]
            new_cost = _try_variant(s0, candidate, reference_final, cost, cfg)
            if new_cost is not None:
                actions, cost, changed = candidate, new_cost, True
            else:
                t += 1
    return make_plan(cfg, s0, actions)


def _buffer_pairs(actions: list[Action]) -> list[tuple[int, int]]:
    """(b, i) index pairs of consecutive manipulations of the same object."""
    by_obj: dict[str, list[int]] = {}
    for t, action in enumerate(actions):
        by_obj.setdefault(action.obj, []).append(t)
    pairs = []
    for indices in by_obj.values():
        pairs.extend(zip(indices, indices[1:]))
    return sorted(pairs)


def _four_legs(
    cfg: CostConfig,
    p_at_b,
    p_at_i,
    pick_b: Point,
    pick_b1: Point | None,
    place_im1: Point | None,
    place_i: Point,
):
    """Travel legs touched by the buffer: carry in, depart, approach, carry out.

    `p_at_b`/`p_at_i` are the buffer's positions when the object is parked and
    retrieved; adjacent-leg anchors may be None when b+1 == i, in which case
    those legs vanish (the shared point is the buffer itself).
    """

    def dist(a, bx, by):
        if cfg.mode == "mb":
            return np.abs(a[0] - bx)
        return np.hypot(a[0] - bx, a[1] - by)

    bx, by = p_at_b
    ix, iy = p_at_i
    total = dist(pick_b, bx, by) + dist(place_i, ix, iy)
    if pick_b1 is not None:
        total = total + dist(pick_b1, bx, by)
    if place_im1 is not None:
        total = total + dist(place_im1, ix, iy)
    return total


def optimize_buffers(
    s0: SceneState,
    plan: Plan,
    cfg: CostConfig,
    mode: str = "dynamic",
    resolution: int = 100,
    margin_cells: int = 1,
) -> Plan:
    """Rewrite each buffer placement to its cheapest candidate location.

    `mode` "static" evaluates free table positions only; "dynamic" also
    evaluates stacking onto clear bases, accounting for the base's possibly
    different position when the object is retrieved.
    """
    if mode not in ("static", "dynamic"):
        raise ValueError("mode must be 'static' or 'dynamic'")
    actions = list(plan.actions)
    cost = plan_cost(cfg, s0, actions)
    for b, i in _buffer_pairs(actions):
        states, resolved = replay(s0, actions)
        final_ref = states[-1]
        obj = actions[b].obj
        spec = s0.spec(obj)
        pick_b = resolved[b].pick
        adjacent = b + 1 == i
        pick_b1 = None if adjacent else resolved[b + 1].pick
        place_im1 = None if adjacent else resolved[i - 1].place
        place_i = resolved[i].place

        candidates: list[tuple[float, tuple, Action]] = []

        # current action, kept on ties
        cur = resolved[b]
        cur_at_i = resolved[i].pick
        candidates.append(
            (
                float(_four_legs(cfg, cur.place, cur_at_i, pick_b, pick_b1, place_im1, place_i)),
                (0, 0),
                actions[b],
            )
        )

        # static candidates: free cells across the whole parked window
        mask = None
        xs = ys = None
        for t in range(b, i + 1):
            occ = StateOccupancy(states[t], resolution, margin_cells)
            m, xs, ys = occ.free_mask((spec.width, spec.depth), exclude=obj)
            mask = m if mask is None else (mask & m)
            if not mask.any():
                break
        if mask is not None and mask.any() and xs is not None and len(xs):
            js, iis = np.nonzero(mask)
            cxs, cys = xs[iis], ys[js]
            vals = _four_legs(cfg, (cxs, cys), (cxs, cys), pick_b, pick_b1, place_im1, place_i)
            for v, x, y, j, ii in zip(vals, cxs, cys, js, iis):
                candidates.append((float(v), (1, int(j), int(ii)), Action.move(obj, (float(x), float(y)))))

        if mode == "dynamic":
            riders = set(states[b].substack(obj))
            for other in s0.ids():
                if other in riders:
                    continue
                if not DEFAULT_CATEGORY_TABLE.stackable(spec.category, states[b].spec(other).category):
                    continue
                if states[b].forest.cargo(other) is not None:
                    continue
                if any(states[t].forest.cargo(other) not in (None, obj) for t in range(b + 1, i + 1)):
                    continue
                pj_b = states[b].position(other)
                pj_i = states[i].position(other)
                val = float(_four_legs(cfg, pj_b, pj_i, pick_b, pick_b1, place_im1, place_i))
                candidates.append((val, (2, other), Action.stack(obj, other)))

        candidates.sort(key=lambda c: (c[0], c[1]))
        for val, _, replacement in candidates:
            if replacement.same_op(actions[b]):
                break  # keeping the current action is already best
            trial = actions[:b] + [replacement] + actions[b + 1 :]
            try:
                trial_final = _final_state(s0, trial)
            except InvalidPlan:
                continue
            if not _same_arrangement(trial_final, final_ref):
                continue
            trial_cost = plan_cost(cfg, s0, trial)
            if trial_cost > cost + _SLACK:
                continue
            actions, cost = trial, trial_cost
            break
    return make_plan(cfg, s0, actions)

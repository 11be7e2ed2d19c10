"""Travel-distance cost model for stationary (EE) and mobile-base (MB) runs.

Every action costs the approach leg to the pick point, the carry leg to the
place point, and a constant pick-and-place charge.  A plan additionally pays
the return leg from the final place point back to the home position.  EE
distance is planar Euclidean; MB distance projects both points onto a rail
along the table's long edge and measures the rail displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .scene import Action, InvalidPlan, Plan, Point, SceneState, replay

DEFAULT_CPP = 0.2


@dataclass(frozen=True)
class CostConfig:
    mode: str = "ee"  # "ee" | "mb"
    c_pp: float = DEFAULT_CPP
    home: Point = (0.5, 0.0)
    table: tuple[float, float] = (1.0, 1.0)
    rail_y: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("ee", "mb"):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        if self.c_pp < 0:
            raise ValueError("c_pp must be nonnegative")

    @classmethod
    def ee(cls, c_pp: float = DEFAULT_CPP) -> "CostConfig":
        return cls(mode="ee", c_pp=c_pp, home=(0.5, 0.0), table=(1.0, 1.0))

    @classmethod
    def mb(cls, c_pp: float = DEFAULT_CPP) -> "CostConfig":
        # 2x1 table in units normalized by the short edge; rail along x at y=0
        return cls(mode="mb", c_pp=c_pp, home=(0.0, 0.0), table=(2.0, 1.0))

    @classmethod
    def for_mode(cls, mode: str, c_pp: float = DEFAULT_CPP) -> "CostConfig":
        return cls.ee(c_pp) if mode == "ee" else cls.mb(c_pp)


def travel(cfg: CostConfig, a: Point, b: Point) -> float:
    if cfg.mode == "mb":
        return abs(a[0] - b[0])
    return math.hypot(a[0] - b[0], a[1] - b[1])


def action_cost(cfg: CostConfig, manip_at: Point, action: Action) -> float:
    """Approach + carry + pick-and-place charge for one resolved action."""
    if action.pick is None or action.place is None:
        raise ValueError("action must carry resolved pick/place points")
    return travel(cfg, manip_at, action.pick) + travel(cfg, action.pick, action.place) + cfg.c_pp


def plan_cost(cfg: CostConfig, s0: SceneState, plan: Plan | list | tuple) -> float:
    """Total cost of replaying `plan` from `s0`, including the return leg."""
    actions = plan.actions if isinstance(plan, Plan) else tuple(plan)
    _, resolved = replay(s0, actions)
    manip = s0.manipulator
    total = 0.0
    for action in resolved:
        total += action_cost(cfg, manip, action)
        manip = action.place
    return total + travel(cfg, manip, cfg.home)


def make_plan(cfg: CostConfig, s0: SceneState, actions) -> Plan:
    """Plan with resolved pick/place points and its replayed total cost."""
    _, resolved = replay(s0, actions)
    manip = s0.manipulator
    total = 0.0
    for action in resolved:
        total += action_cost(cfg, manip, action)
        manip = action.place
    return Plan(tuple(resolved), total + travel(cfg, manip, cfg.home))

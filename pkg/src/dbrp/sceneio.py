"""JSON schemas for scenes, goals, plans, detections, and benchmark inputs.

All documents carry `"schema": 1`.  Scene files bundle the table, cost mode,
objects, pre-existing stacks, and the goal; plan files list executed actions
with resolved pick/place points and the total cost.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .costs import CostConfig
from .matching import Detection
from .scene import (
    Action,
    ActionKind,
    Category,
    GoalSpec,
    ObjectSpec,
    Plan,
    PositionGoal,
    SceneState,
    StackForest,
    StackGoal,
    assert_valid_state,
)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Malformed or wrong-version input document."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _check_schema(doc: dict, kind: str) -> None:
    _require(isinstance(doc, dict), f"{kind}: document must be a JSON object")
    _require(doc.get("schema") == SCHEMA_VERSION, f"{kind}: expected schema {SCHEMA_VERSION}")


def scene_to_json(state: SceneState, goal: GoalSpec, cost: CostConfig) -> dict:
    objects = []
    for spec in state.objects:
        x, y = state.position(spec.id)
        objects.append(
            {"id": spec.id, "category": spec.category.value, "w": spec.width, "d": spec.depth, "x": x, "y": y}
        )
    goal_entries: list[dict] = []
    for obj, target in goal.items():
        if isinstance(target, StackGoal):
            goal_entries.append({"id": obj, "on": target.base})
        else:
            goal_entries.append({"id": obj, "x": target.pos[0], "y": target.pos[1]})
    return {
        "schema": SCHEMA_VERSION,
        "table": {"w": state.table[0], "h": state.table[1]},
        "mode": cost.mode,
        "c_pp": cost.c_pp,
        "objects": objects,
        "stacks": [[top, base] for top, base in state.forest.base_of],
        "goal": goal_entries,
    }


def scene_from_json(doc: dict) -> tuple[SceneState, GoalSpec, CostConfig]:
    _check_schema(doc, "scene")
    _require("table" in doc and "objects" in doc and "goal" in doc, "scene: missing table/objects/goal")
    table = (float(doc["table"]["w"]), float(doc["table"]["h"]))
    mode = doc.get("mode", "ee")
    _require(mode in ("ee", "mb"), f"scene: unknown mode {mode!r}")
    cost = CostConfig(
        mode=mode,
        c_pp=float(doc.get("c_pp", CostConfig.for_mode(mode).c_pp)),
        home=CostConfig.for_mode(mode).home,
        table=table,
    )
    specs = []
    positions = {}
    categories = {c.value: c for c in Category}
    for entry in doc["objects"]:
        _require(entry.get("category") in categories, f"scene: bad category {entry.get('category')!r}")
        specs.append(
            ObjectSpec(str(entry["id"]), categories[entry["category"]], float(entry["w"]), float(entry["d"]))
        )
        positions[str(entry["id"])] = (float(entry["x"]), float(entry["y"]))
    forest = StackForest.from_pairs(doc.get("stacks", []))
    state = SceneState.build(
        objects=specs, positions=positions, forest=forest, manipulator=cost.home, table=table
    )
    assert_valid_state(state)
    targets: dict[str, Any] = {}
    for entry in doc["goal"]:
        obj = str(entry["id"])
        _require(obj in positions, f"scene: goal references unknown object {obj!r}")
        if "on" in entry:
            targets[obj] = StackGoal(str(entry["on"]))
        else:
            targets[obj] = PositionGoal((float(entry["x"]), float(entry["y"])))
    _require(len(targets) == len(specs), "scene: every object needs exactly one goal entry")
    return state, GoalSpec.build(targets), cost


def plan_to_json(plan: Plan) -> dict:
    actions = []
    for a in plan.actions:
        entry: dict[str, Any] = {"kind": a.kind.value, "object": a.obj}
        if a.kind is ActionKind.MOVE:
            entry["to"] = [a.to[0], a.to[1]]
        else:
            entry["base"] = a.base
        if a.pick is not None:
            entry["pick"] = [a.pick[0], a.pick[1]]
        if a.place is not None:
            entry["place"] = [a.place[0], a.place[1]]
        actions.append(entry)
    return {"schema": SCHEMA_VERSION, "actions": actions, "total_cost": plan.total_cost}


def plan_from_json(doc: dict) -> Plan:
    _check_schema(doc, "plan")
    _require("actions" in doc, "plan: missing actions")
    actions = []
    for entry in doc["actions"]:
        kind = entry.get("kind")
        if kind == "move":
            action = Action.move(str(entry["object"]), tuple(entry["to"]))
        elif kind == "stack":
            action = Action.stack(str(entry["object"]), str(entry["base"]))
        else:
            raise SchemaError(f"plan: unknown action kind {kind!r}")
        actions.append(action)
    return Plan(tuple(actions), float(doc.get("total_cost", 0.0)))


def detections_from_json(doc: dict) -> tuple[list[Detection], list[Detection]]:
    _check_schema(doc, "detections")
    _require("initial" in doc and "target" in doc, "detections: missing initial/target lists")

    def parse(entries) -> list[Detection]:
        return [
            Detection(str(e["label"]), float(e["cx"]), float(e["cy"]), float(e["w"]), float(e["h"]))
            for e in entries
        ]

    return parse(doc["initial"]), parse(doc["target"])


def load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def dump_json(doc: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")

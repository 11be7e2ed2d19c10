"""Tabletop rearrangement planning with movable stacks as dynamic buffers."""

from .astar import NoPlanFound, PlannerConfig, heuristic, plan
from .bench import SuiteMatrix, TrialResult, esc, ops, pir, run_suite
from .costs import CostConfig, action_cost, plan_cost, travel
from .expansion import ExpansionConfig, successors, valid_stack_targets
from .geometry import OccupancyIndex, build_index, is_placement_free, sample_free_positions
from .matching import Detection, match_instances
from .mcts import MctsConfig, mcts_plan
from .refine import optimize_buffers, prune_redundant
from .scene import (
    Action,
    Category,
    GoalSpec,
    ObjectSpec,
    Plan,
    PositionGoal,
    SceneState,
    StackForest,
    StackGoal,
    apply_action,
    is_goal,
    validate_action,
)
from .scenegen import generate_pair

__version__ = "0.1.0"

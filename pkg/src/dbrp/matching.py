"""One-to-one correspondence of detections between two scenes.

Detections are matched per class label by minimizing the summed Euclidean
distance between bounding-box centers.  Ties between equal-cost assignments
resolve to the lexicographically smallest column choice per row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

_TIE_TOL = 1e-9


class CountMismatch(Exception):
    """A class label with unequal instance counts in the two scenes."""


@dataclass(frozen=True)
class Detection:
    label: str
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("detection box must have positive size")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)


def _cost_matrix(initial: list[Detection], target: list[Detection]) -> np.ndarray:
    a = np.array([d.center for d in initial], dtype=float)
    b = np.array([d.center for d in target], dtype=float)
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def _optimal_total(cost: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def lexmin_assignment(cost: np.ndarray) -> list[int]:
    """Minimum-cost assignment, preferring lower column indices on ties."""
    n = cost.shape[0]
    remaining = list(range(n))
    best = _optimal_total(cost)
    fixed = 0.0
    out: list[int] = []
    for row in range(n):
        for col in remaining:
            sub_rows = [r for r in range(row + 1, n)]
            sub_cols = [c for c in remaining if c != col]
            rest = _optimal_total(cost[np.ix_(sub_rows, sub_cols)]) if sub_rows else 0.0
            if fixed + cost[row, col] + rest <= best + _TIE_TOL:
                out.append(col)
                fixed += cost[row, col]
                remaining.remove(col)
                break
    return out


def match_instances(initial: list[Detection], target: list[Detection]) -> dict[int, int]:
    """Index map initial -> target minimizing center distance within each class."""
    by_label_initial: dict[str, list[int]] = {}
    by_label_target: dict[str, list[int]] = {}
    for i, d in enumerate(initial):
        by_label_initial.setdefault(d.label, []).append(i)
    for j, d in enumerate(target):
        by_label_target.setdefault(d.label, []).append(j)
    labels = sorted(set(by_label_initial) | set(by_label_target))
    mapping: dict[int, int] = {}
    for label in labels:
        ini = by_label_initial.get(label, [])
        tgt = by_label_target.get(label, [])
        if len(ini) != len(tgt):
            raise CountMismatch(f"class {label!r}: {len(ini)} initial vs {len(tgt)} target instances")
        if not ini:
            continue
        cost = _cost_matrix([initial[i] for i in ini], [target[j] for j in tgt])
        cols = lexmin_assignment(cost)
        for local_row, local_col in enumerate(cols):
            mapping[ini[local_row]] = tgt[local_col]
    return mapping


def matching_cost(initial: list[Detection], target: list[Detection], mapping: dict[int, int]) -> float:
    total = 0.0
    for i, j in mapping.items():
        a, b = initial[i].center, target[j].center
        total += float(np.hypot(a[0] - b[0], a[1] - b[1]))
    return total

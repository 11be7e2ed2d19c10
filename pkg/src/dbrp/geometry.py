"""Occupancy grid with a summed-area table for O(1) placement queries.

The table is rasterized at `resolution` cells per unit.  A cell is occupied
when any root footprint overlaps it with positive area, so the raster is a
conservative cover of the exact geometry.  Placement queries test an
inflated window (footprint plus a clearance margin in whole cells) with four
prefix-sum lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import Point, SceneState

_EPS = 1e-9


class ResolutionTooCoarse(Exception):
    """A footprint rasterized to zero cells at the requested resolution."""


def cell_span(lo: float, hi: float, resolution: int, n_cells: int) -> tuple[int, int]:
    """Inclusive cell range covered with positive area by [lo, hi), clipped."""
    i0 = math.floor(lo * resolution + _EPS)
    i1 = math.ceil(hi * resolution - _EPS) - 1
    return max(i0, 0), min(i1, n_cells - 1)


@dataclass
class OccupancyIndex:
    resolution: int
    table: tuple[float, float]
    margin_cells: int
    grid: np.ndarray  # bool, shape (rows, cols) = (H*res, W*res)
    sat: np.ndarray  # int64, shape (rows+1, cols+1); sat[r+1, c+1] = count through cell (r, c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def window_count(self, r0: int, r1: int, c0: int, c1: int) -> int:
        """Occupied cells in the inclusive cell window; empty window is 0."""
        if r1 < r0 or c1 < c0:
            return 0
        s = self.sat
        return int(s[r1 + 1, c1 + 1] - s[r0, c1 + 1] - s[r1 + 1, c0] + s[r0, c0])


def _object_cells(idx_shape: tuple[int, int], resolution: int, pos: Point, w: float, d: float):
    rows, cols = idx_shape
    c0, c1 = cell_span(pos[0] - w / 2, pos[0] + w / 2, resolution, cols)
    r0, r1 = cell_span(pos[1] - d / 2, pos[1] + d / 2, resolution, rows)
    return r0, r1, c0, c1


def build_index(
    state: SceneState,
    exclude: str | None = None,
    resolution: int = 100,
    margin_cells: int = 1,
) -> OccupancyIndex:
    """Rasterize every root footprint except `exclude` and its sub-stack."""
    rows = round(state.table[1] * resolution)
    cols = round(state.table[0] * resolution)
    grid = np.zeros((rows, cols), dtype=bool)
    skip = set(state.substack(exclude)) if exclude is not None else set()
    for obj in state.roots():
        if obj in skip:
            continue
        spec = state.spec(obj)
        r0, r1, c0, c1 = _object_cells((rows, cols), resolution, state.position(obj), spec.width, spec.depth)
        if r1 < r0 or c1 < c0:
            raise ResolutionTooCoarse(f"{obj} covers no cells at resolution {resolution}")
        grid[r0 : r1 + 1, c0 : c1 + 1] = True
    sat = np.zeros((rows + 1, cols + 1), dtype=np.int64)
    np.cumsum(np.cumsum(grid, axis=0, dtype=np.int64), axis=1, out=sat[1:, 1:])
    return OccupancyIndex(resolution, state.table, margin_cells, grid, sat)


def is_placement_free(
    idx: OccupancyIndex,
    footprint: tuple[float, float],
    at: Point,
    margin_cells: int | None = None,
) -> bool:
    """Whether the footprint fits at `at` with the clearance margin clear."""
    w, d = footprint
    if (
        at[0] - w / 2 < -_EPS
        or at[0] + w / 2 > idx.table[0] + _EPS
        or at[1] - d / 2 < -_EPS
        or at[1] + d / 2 > idx.table[1] + _EPS
    ):
        return False
    m = idx.margin_cells if margin_cells is None else margin_cells
    rows, cols = idx.shape
    r0, r1, c0, c1 = _object_cells((rows, cols), idx.resolution, at, w, d)
    return idx.window_count(max(r0 - m, 0), min(r1 + m, rows - 1), max(c0 - m, 0), min(c1 + m, cols - 1)) == 0


def _center_range(extent: float, half: float, resolution: int) -> tuple[int, int]:
    """Cells whose centers admit the footprint inside [0, extent]."""
    lo = math.ceil(half * resolution - 0.5 - _EPS)
    hi = math.floor((extent - half) * resolution - 0.5 + _EPS)
    return lo, hi


def free_position_mask(
    idx: OccupancyIndex,
    footprint: tuple[float, float],
    margin_cells: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mask, xs, ys): mask[j, i] says the center (xs[i], ys[j]) is free."""
    w, d = footprint
    rows, cols = idx.shape
    i_lo, i_hi = _center_range(idx.table[0], w / 2, idx.resolution)
    j_lo, j_hi = _center_range(idx.table[1], d / 2, idx.resolution)
    cell = 1.0 / idx.resolution
    if i_lo > i_hi or j_lo > j_hi:
        return np.zeros((0, 0), dtype=bool), np.zeros(0), np.zeros(0)
    xs = (np.arange(i_lo, i_hi + 1) + 0.5) * cell
    ys = (np.arange(j_lo, j_hi + 1) + 0.5) * cell
    m = idx.margin_cells if margin_cells is None else margin_cells
    # window spans shift by one cell per candidate cell, so compute the span
    # for the first candidate and broadcast
    c0, c1 = cell_span(xs[0] - w / 2, xs[0] + w / 2, idx.resolution, cols)
    r0, r1 = cell_span(ys[0] - d / 2, ys[0] + d / 2, idx.resolution, rows)
    ci = np.arange(len(xs))
    rj = np.arange(len(ys))
    c0s = np.clip(c0 - m + ci, 0, cols)
    c1s = np.clip(c1 + m + ci + 1, 0, cols)
    r0s = np.clip(r0 - m + rj, 0, rows)
    r1s = np.clip(r1 + m + rj + 1, 0, rows)
    s = idx.sat
    counts = (
        s[np.ix_(r1s, c1s)] - s[np.ix_(r0s, c1s)] - s[np.ix_(r1s, c0s)] + s[np.ix_(r0s, c0s)]
    )
    return counts == 0, xs, ys


def sample_free_positions(
    idx: OccupancyIndex,
    footprint: tuple[float, float],
    k: int,
    rng: np.random.Generator,
) -> list[Point]:
    """Up to k distinct cell-centered free placements, uniform without replacement."""
    if k <= 0:
        return []
    mask, xs, ys = free_position_mask(idx, footprint)
    js, iis = np.nonzero(mask)
    if len(js) == 0:
        return []
    take = min(k, len(js))
    chosen = rng.choice(len(js), size=take, replace=False)
    return [(float(xs[iis[c]]), float(ys[js[c]])) for c in chosen]


class StateOccupancy:
    """Shared per-state raster answering per-object exclusion queries in O(1).

    The grid counts overlapping root rasters additively, so excluding one
    object reduces to subtracting the overlap of its cell rectangle with the
    query window, which avoids rebuilding the index for every moved object.
    """

    def __init__(self, state: SceneState, resolution: int = 100, margin_cells: int = 1):
        self.state = state
        self.resolution = resolution
        self.margin_cells = margin_cells
        self.rows = round(state.table[1] * resolution)
        self.cols = round(state.table[0] * resolution)
        grid = np.zeros((self.rows, self.cols), dtype=np.int32)
        self.rects: dict[str, tuple[int, int, int, int]] = {}
        for obj in state.roots():
            spec = state.spec(obj)
            r0, r1, c0, c1 = _object_cells(
                (self.rows, self.cols), resolution, state.position(obj), spec.width, spec.depth
            )
            if r1 < r0 or c1 < c0:
                raise ResolutionTooCoarse(f"{obj} covers no cells at resolution {resolution}")
            self.rects[obj] = (r0, r1, c0, c1)
            grid[r0 : r1 + 1, c0 : c1 + 1] += 1
        self.sat = np.zeros((self.rows + 1, self.cols + 1), dtype=np.int64)
        np.cumsum(np.cumsum(grid, axis=0, dtype=np.int64), axis=1, out=self.sat[1:, 1:])
        self._mask_cache: dict[tuple, tuple] = {}

    def _window_count(self, r0: int, r1: int, c0: int, c1: int) -> int:
        if r1 < r0 or c1 < c0:
            return 0
        s = self.sat
        return int(s[r1 + 1, c1 + 1] - s[r0, c1 + 1] - s[r1 + 1, c0] + s[r0, c0])

    def _excluded_overlap(self, exclude: str | None, r0: int, r1: int, c0: int, c1: int) -> int:
        if exclude is None:
            return 0
        rect = self.rects.get(exclude)
        if rect is None:  # stacked objects occupy no table cells
            return 0
        er0, er1, ec0, ec1 = rect
        dr = min(r1, er1) - max(r0, er0) + 1
        dc = min(c1, ec1) - max(c0, ec0) + 1
        return max(dr, 0) * max(dc, 0)

    def placement_free(
        self,
        footprint: tuple[float, float],
        at: Point,
        exclude: str | None = None,
        margin_cells: int | None = None,
    ) -> bool:
        w, d = footprint
        if (
            at[0] - w / 2 < -_EPS
            or at[0] + w / 2 > self.state.table[0] + _EPS
            or at[1] - d / 2 < -_EPS
            or at[1] + d / 2 > self.state.table[1] + _EPS
        ):
            return False
        m = self.margin_cells if margin_cells is None else margin_cells
        r0, r1, c0, c1 = _object_cells((self.rows, self.cols), self.resolution, at, w, d)
        r0, r1 = max(r0 - m, 0), min(r1 + m, self.rows - 1)
        c0, c1 = max(c0 - m, 0), min(c1 + m, self.cols - 1)
        return self._window_count(r0, r1, c0, c1) == self._excluded_overlap(exclude, r0, r1, c0, c1)

    def _window_table(self, footprint: tuple[float, float], margin_cells: int | None):
        """Cached window sums over every candidate cell for one footprint."""
        w, d = footprint
        m = self.margin_cells if margin_cells is None else margin_cells
        key = (round(w * self.resolution, 6), round(d * self.resolution, 6), m)
        hit = self._mask_cache.get(key)
        if hit is not None:
            return hit
        i_lo, i_hi = _center_range(self.state.table[0], w / 2, self.resolution)
        j_lo, j_hi = _center_range(self.state.table[1], d / 2, self.resolution)
        if i_lo > i_hi or j_lo > j_hi:
            empty = (None, np.zeros(0), np.zeros(0), None, None, None, None)
            self._mask_cache[key] = empty
            return empty
        cell = 1.0 / self.resolution
        xs = (np.arange(i_lo, i_hi + 1) + 0.5) * cell
        ys = (np.arange(j_lo, j_hi + 1) + 0.5) * cell
        c0, c1 = cell_span(xs[0] - w / 2, xs[0] + w / 2, self.resolution, self.cols)
        r0, r1 = cell_span(ys[0] - d / 2, ys[0] + d / 2, self.resolution, self.rows)
        c0s = np.clip(c0 - m + np.arange(len(xs)), 0, self.cols)
        c1s = np.clip(c1 + m + np.arange(len(xs)) + 1, 0, self.cols)
        r0s = np.clip(r0 - m + np.arange(len(ys)), 0, self.rows)
        r1s = np.clip(r1 + m + np.arange(len(ys)) + 1, 0, self.rows)
        s = self.sat
        counts = s[np.ix_(r1s, c1s)] - s[np.ix_(r0s, c1s)] - s[np.ix_(r1s, c0s)] + s[np.ix_(r0s, c0s)]
        entry = (counts, xs, ys, c0s, c1s, r0s, r1s)
        self._mask_cache[key] = entry
        return entry

    def free_mask(
        self,
        footprint: tuple[float, float],
        exclude: str | None = None,
        margin_cells: int | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized free_position_mask with one object excluded."""
        counts, xs, ys, c0s, c1s, r0s, r1s = self._window_table(footprint, margin_cells)
        if counts is None:
            return np.zeros((0, 0), dtype=bool), xs, ys
        rect = self.rects.get(exclude) if exclude is not None else None
        if rect is not None:
            er0, er1, ec0, ec1 = rect
            dc = np.maximum(np.minimum(c1s - 1, ec1) - np.maximum(c0s, ec0) + 1, 0)
            dr = np.maximum(np.minimum(r1s - 1, er1) - np.maximum(r0s, er0) + 1, 0)
            return counts == dr[:, None] * dc[None, :], xs, ys
        return counts == 0, xs, ys

    def sample_free(
        self,
        footprint: tuple[float, float],
        exclude: str | None,
        k: int,
        rng: np.random.Generator,
        probe_attempts: int = 16,
    ) -> list[Point]:
        """Up to k distinct free cell centers; random probing with an exact fallback."""
        if k <= 0:
            return []
        w, d = footprint
        i_lo, i_hi = _center_range(self.state.table[0], w / 2, self.resolution)
        j_lo, j_hi = _center_range(self.state.table[1], d / 2, self.resolution)
        if i_lo > i_hi or j_lo > j_hi:
            return []
        cell = 1.0 / self.resolution
        if self.sat[-1, -1] > 0.35 * self.rows * self.cols:
            probe_attempts = 0  # crowded table: probing mostly misses
        found: list[Point] = []
        tried: set[tuple[int, int]] = set()
        for _ in range(probe_attempts):
            if len(found) >= k:
                return found
            i = int(rng.integers(i_lo, i_hi + 1))
            j = int(rng.integers(j_lo, j_hi + 1))
            if (i, j) in tried:
                continue
            tried.add((i, j))
            at = ((i + 0.5) * cell, (j + 0.5) * cell)
            if self.placement_free(footprint, at, exclude):
                found.append(at)
        if len(found) >= k:
            return found
        # exact fallback: resample uniformly over every free cell center
        mask, xs, ys = self.free_mask(footprint, exclude)
        js, iis = np.nonzero(mask)
        if len(js) == 0:
            return []
        chosen = rng.choice(len(js), size=min(k, len(js)), replace=False)
        return [(float(xs[iis[c]]), float(ys[js[c]])) for c in chosen]

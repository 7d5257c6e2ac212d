"""Discretized configuration space and Anytime Repairing A* over it."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, joint_positions


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    r: float


class NoPath(Exception):
    pass


def _segments_hit(p0: np.ndarray, p1: np.ndarray, c: Circle) -> np.ndarray:
    """Whether segments p0->p1 (arrays of shape (..., 2)) come within c.r of the center."""
    center = np.array([c.x, c.y])
    d = p1 - p0
    dd = np.einsum("...i,...i->...", d, d)
    t = np.clip(np.einsum("...i,...i->...", center - p0, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = p0 + t[..., None] * d
    return np.einsum("...i,...i->...", closest - center, closest - center) <= c.r * c.r


def in_collision(arm: ArmModel, q, obstacles) -> np.ndarray | bool:
    """True where any link segment touches an obstacle. ``q`` may be batched."""
    pts = joint_positions(arm, q)
    hit = np.zeros(pts.shape[:-2], dtype=bool)
    for c in obstacles:
        for k in range(3):
            hit |= _segments_hit(pts[..., k, :], pts[..., k + 1, :], c)
    return hit if hit.ndim else bool(hit)


class CSpaceGrid:
    """Joint-space lattice with 26-connected moves and collision-checked cells.

    Cell ``(i, j, k)`` is the configuration ``lo + index * resolution`` per
    joint. Move cost is the Euclidean joint-space length of the step.
    """

    def __init__(self, arm: ArmModel, resolution=np.pi / 8, obstacles=()):
        self.arm = arm
        res = np.broadcast_to(np.asarray(resolution, dtype=float), (3,)).copy()
        if np.any(res <= 0):
            raise ValueError("resolution must be positive")
        self.resolution = res
        self.lo = np.array([lo for lo, _ in arm.joint_limits])
        hi = np.array([hi for _, hi in arm.joint_limits])
        self.shape = tuple(int(math.floor((h - l) / r + 1e-9)) + 1 for l, h, r in zip(self.lo, hi, res))
        self.obstacles = tuple(obstacles)
        axes = [self.lo[i] + res[i] * np.arange(self.shape[i]) for i in range(3)]
        Q = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        self.valid = ~in_collision(arm, Q, self.obstacles) if self.obstacles else np.ones(self.shape, dtype=bool)
        self.moves = [m for m in itertools.product((-1, 0, 1), repeat=3) if m != (0, 0, 0)]
        self.move_cost = [float(np.sqrt(np.sum((np.array(m) * res) ** 2))) for m in self.moves]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def flat(self, cell) -> int:
        return int(np.ravel_multi_index(tuple(cell), self.shape))

    def cell(self, flat: int) -> tuple[int, int, int]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def q(self, cell) -> np.ndarray:
        return self.lo + self.resolution * np.asarray(cell, dtype=float)

    def contains(self, cell) -> bool:
        return all(0 <= c < n for c, n in zip(cell, self.shape))

    def is_valid(self, cell) -> bool:
        return self.contains(cell) and bool(self.valid[tuple(cell)])

    def neighbors(self, cell):
        """Valid neighbor cells with move costs, in fixed move order."""
        i, j, k = cell
        for (a, b, c), cost in zip(self.moves, self.move_cost):
            n = (i + a, j + b, k + c)
            if self.is_valid(n):
                yield n, cost

    def heuristic(self, a, b) -> float:
        """Straight-line joint-space distance; consistent for these move costs."""
        return float(np.sqrt(np.sum(((np.asarray(a) - np.asarray(b)) * self.resolution) ** 2)))

    def nearest_valid(self, q) -> tuple[int, int, int]:
        """Valid cell closest to ``q`` in joint space (ties to the lowest index)."""
        idx = np.argwhere(self.valid)
        if len(idx) == 0:
            raise NoPath("grid has no valid cell")
        d = np.sum(((idx * self.resolution + self.lo) - np.asarray(q)) ** 2, axis=1)
        return tuple(int(v) for v in idx[int(np.argmin(d))])


@dataclass(frozen=True)
class AraConfig:
    eps_init: float = 3.0
    eps_step: float = 0.5
    eps_final: float = 1.0

    def __post_init__(self):
        if not self.eps_init >= self.eps_final >= 1.0:
            raise ValueError("need eps_init >= eps_final >= 1")
        if self.eps_step <= 0:
            raise ValueError("eps_step must be positive")


@dataclass
class AraSolution:
    path: list[tuple[int, int, int]]
    cost: float
    eps: float
    expansions: int = 0
    moves: int = field(init=False)

    def __post_init__(self):
        self.moves = len(self.path) - 1


def ara_star(grid: CSpaceGrid, start, goal, cfg: AraConfig = AraConfig()) -> list[AraSolution]:
    """Anytime Repairing A*; one published solution per inflation level.

    Each level reuses the previous search: states whose cost improved after
    they were closed wait in INCONS and rejoin OPEN when the inflation drops.
    Ties in OPEN are broken by flat cell index, so results are deterministic.
    """
    start, goal = tuple(start), tuple(goal)
    for c, what in ((start, "start"), (goal, "goal")):
        if not grid.is_valid(c):
            raise ValueError(f"{what} cell {c} is not a valid cell")
    s0, sg = grid.flat(start), grid.flat(goal)
    if s0 == sg:
        return [AraSolution([start], 0.0, cfg.eps_final)]

    res = grid.resolution
    goal_arr = np.asarray(goal)
    h_cache: dict[int, float] = {}

    def h(s: int) -> float:
        v = h_cache.get(s)
        if v is None:
            d = (np.asarray(grid.cell(s)) - goal_arr) * res
            v = h_cache[s] = math.sqrt(float(d @ d))
        return v

    succ_cache: dict[int, list[tuple[int, float]]] = {}

    def succ(s: int):
        out = succ_cache.get(s)
        if out is None:
            out = succ_cache[s] = [(grid.flat(n), c) for n, c in grid.neighbors(grid.cell(s))]
        return out

    g: dict[int, float] = {s0: 0.0}
    parent: dict[int, int | None] = {s0: None}
    open_key: dict[int, float] = {}
    heap: list[tuple[float, int]] = []
    closed: set[int] = set()
    incons: set[int] = set()
    expansions = 0
    eps = cfg.eps_init

    def push(s: int):
        k = g[s] + eps * h(s)
        open_key[s] = k
        heapq.heappush(heap, (k, s))

    def improve_path():
        nonlocal expansions
        while heap:
            k, s = heap[0]
            if open_key.get(s) != k:
                heapq.heappop(heap)
                continue
            if g.get(sg, math.inf) <= k:
                return
            heapq.heappop(heap)
            del open_key[s]
            closed.add(s)
            expansions += 1
            gs = g[s]
            for n, c in succ(s):
                ng = gs + c
                if ng < g.get(n, math.inf):
                    g[n] = ng
                    parent[n] = s
                    if n in closed:
                        incons.add(n)
                    else:
                        push(n)

    def publish() -> AraSolution:
        path = [sg]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        return AraSolution([grid.cell(s) for s in reversed(path)], g[sg], eps, expansions)

    push(s0)
    improve_path()
    if sg not in g:
        raise NoPath(f"no path from {start} to {goal}")
    out = [publish()]
    while eps > cfg.eps_final:
        eps = max(eps - cfg.eps_step, cfg.eps_final)
        members = set(open_key) | incons
        incons.clear()
        open_key.clear()
        heap.clear()
        for s in sorted(members):
            push(s)
        closed.clear()
        improve_path()
        out.append(publish())
    return out


def path_cost(grid: CSpaceGrid, path) -> float:
    return math.fsum(grid.heuristic(a, b) for a, b in zip(path, path[1:]))

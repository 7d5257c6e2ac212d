"""Expert trajectories, dense terminal sampling and the JSON-lines dataset."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .arm import ArmModel, forward_kinematics
from .search import AraConfig, CSpaceGrid, NoPath, ara_star

log = logging.getLogger(__name__)


@dataclass
class Trajectory:
    traj_id: int
    cells: list[tuple[int, int, int]]
    states: list[np.ndarray]
    observation: dict
    cost: float

    @property
    def T(self) -> int:
        return len(self.states) - 1

    @property
    def final_q(self) -> np.ndarray:
        return self.states[-1]


def observation(grid: CSpaceGrid, goal_cell) -> dict:
    return {
        "obstacles": [[c.x, c.y, c.r] for c in grid.obstacles],
        "goal_cell": [int(v) for v in goal_cell],
    }


def resolve_goal_cell(grid: CSpaceGrid, target_xy) -> tuple[int, int, int]:
    """Valid cell whose end effector lands closest to ``target_xy`` (lowest index on ties)."""
    best, best_d = None, np.inf
    for idx in np.argwhere(grid.valid):
        f = forward_kinematics(grid.arm, grid.q(idx))
        d = (f.x - target_xy[0]) ** 2 + (f.y - target_xy[1]) ** 2
        if d < best_d:
            best, best_d = tuple(int(v) for v in idx), d
    if best is None:
        raise NoPath("grid has no valid cell")
    return best


def expert_trajectory(grid: CSpaceGrid, start, goal, cfg: AraConfig = AraConfig(), traj_id: int = 0) -> Trajectory:
    """The final (least inflated) ARA* solution, recorded at every grid transition."""
    sol = ara_star(grid, start, goal, cfg)[-1]
    return Trajectory(traj_id, sol.path, [grid.q(c) for c in sol.path], observation(grid, goal), sol.cost)


def generate_trajectories(n: int, arm: ArmModel, grid: CSpaceGrid, goal_cell, seed: int,
                          cfg: AraConfig = AraConfig()) -> list[Trajectory]:
    """Expert trajectories from random valid starts to ``goal_cell``.

    Trajectory ``i`` depends only on ``(seed, i)``; starts from which the goal
    is unreachable are logged and skipped.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if grid.arm != arm:
        raise ValueError("grid was built for a different arm")
    valid = np.flatnonzero(grid.valid.ravel())
    out = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        start = grid.cell(int(valid[rng.integers(len(valid))]))
        try:
            out.append(expert_trajectory(grid, start, goal_cell, cfg, traj_id=i))
        except NoPath:
            log.warning("trajectory %d: goal unreachable from start %s, skipped", i, start)
    return out


def dense_goal_samples(traj: Trajectory, K: int, delta: float, grid: CSpaceGrid, rng: np.random.Generator,
                       budget: int | None = None) -> list[np.ndarray]:
    """Up to ``K`` distinct valid cells within L-inf joint distance ``delta`` of the final state.

    Sampling is by rejection over integer offsets; if fewer than ``K`` are found
    within ``budget`` draws, what was found is returned and a warning logged.
    """
    if K <= 0 or delta <= 0:
        raise ValueError("K and delta must be positive")
    reach = np.floor(delta / grid.resolution + 1e-9).astype(int)
    goal = np.asarray(traj.cells[-1])
    budget = budget if budget is not None else 50 * K
    found: dict[tuple[int, int, int], None] = {}
    for _ in range(budget):
        if len(found) == K:
            break
        cell = tuple(int(v) for v in goal + rng.integers(-reach, reach + 1))
        if grid.is_valid(cell):
            found.setdefault(cell)
    if len(found) < K:
        log.warning("dense sampling found %d of %d states within %.3g rad", len(found), K, delta)
    return [grid.q(c) for c in found]


def dataset_rows(traj: Trajectory, dense: list[np.ndarray] = ()) -> list[dict]:
    """One row per recorded state; the final state and dense samples are terminal."""
    final_q = [float(v) for v in traj.final_q]
    rows = []
    for t, q in enumerate(traj.states):
        rows.append({"traj_id": traj.traj_id, "t": t, "q": [float(v) for v in q], "o": traj.observation,
                     "terminal": t == traj.T, "final_q": final_q})
    for k, q in enumerate(dense):
        rows.append({"traj_id": traj.traj_id, "t": traj.T + 1 + k, "q": [float(v) for v in q],
                     "o": traj.observation, "terminal": True, "final_q": final_q})
    return rows


def write_jsonl(rows, path) -> int:
    n = 0
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")
            n += 1
    return n

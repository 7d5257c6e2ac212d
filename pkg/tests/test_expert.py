import json
import math

import numpy as np
import pytest

from expert_oracle import fk_chain, grid_distances
from reactexec.expert import (
    AraConfig, ArmModel, Circle, CSpaceGrid, NoPath, ara_star, combined_loss, dataset_rows, dense_goal_samples,
    forward_kinematics, frame_points, generate_trajectories, jacobian, joint_space_loss, op_space_loss,
    op_space_loss_grad,
)
from reactexec.expert.arm import Frame, joint_positions
from reactexec.expert.dataset import expert_trajectory, resolve_goal_cell, write_jsonl
from reactexec.expert.search import in_collision, path_cost

ARM = ArmModel()
UNIT = ArmModel((1.0, 1.0, 1.0))


def rand_q(rng, n=None):
    return rng.uniform(-np.pi, np.pi, size=(3,) if n is None else (n, 3))


def test_fk_examples():
    f = forward_kinematics(UNIT, [0, 0, 0])
    assert (f.x, f.y, f.theta) == pytest.approx((3, 0, 0))
    f = forward_kinematics(UNIT, [np.pi / 2, 0, 0])
    assert (f.x, f.y, f.theta) == pytest.approx((0, 3, np.pi / 2), abs=1e-12)


def test_fk_matches_transform_chain():
    rng = np.random.default_rng(0)
    arms = [ARM, UNIT, ArmModel((0.3, 0.7, 0.2), base_pose=(0.5, -0.2, 0.4))]
    for arm in arms:
        for q in rand_q(rng, 200):
            f = forward_kinematics(arm, q)
            x, y, th = fk_chain(arm, q)
            assert (f.x, f.y) == pytest.approx((x, y), abs=1e-12)
            assert math.remainder(f.theta - th, 2 * np.pi) == pytest.approx(0, abs=1e-12)
            assert joint_positions(arm, q)[-1] == pytest.approx([x, y], abs=1e-12)


def test_fk_rejects_out_of_limit():
    with pytest.raises(ValueError):
        forward_kinematics(ARM, [4.0, 0, 0])
    with pytest.raises(ValueError):
        forward_kinematics(ARM, [0, 0])
    with pytest.raises(ValueError):
        ArmModel((1.0, -1.0, 1.0))
    with pytest.raises(ValueError):
        ArmModel(joint_limits=((1, 0),) * 3)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    h = 1e-6
    for q in rand_q(rng, 50) * 0.9:
        J = jacobian(ARM, q)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fp, fm = forward_kinematics(ARM, q + e), forward_kinematics(ARM, q - e)
            col = np.array([fp.x - fm.x, fp.y - fm.y, fp.theta - fm.theta]) / (2 * h)
            assert J[:, k] == pytest.approx(col, abs=1e-7)


def test_frame_points():
    a, b = frame_points(Frame(0, 0, 0), 1)
    assert a == pytest.approx([1, 0]) and b == pytest.approx([0, 1])
    a, b = frame_points(Frame(0, 0, np.pi / 2), 1)
    assert a == pytest.approx([0, 1], abs=1e-12) and b == pytest.approx([-1, 0], abs=1e-12)
    a, b = frame_points(Frame(3, 0, 0), 0.1)
    assert a == pytest.approx([3.1, 0]) and b == pytest.approx([3, 0.1])


def test_op_space_loss_examples():
    rng = np.random.default_rng(2)
    q = rand_q(rng)
    assert op_space_loss(q, q, ARM) == 0.0
    # moving the base translates the whole frame, so both points move by delta
    moved = ArmModel(ARM.link_lengths, base_pose=(0.25, 0.0, 0.0))
    fa, fb = forward_kinematics(ARM, q), forward_kinematics(moved, q)
    assert fb.x - fa.x == pytest.approx(0.25)
    pa = frame_points(fa, 0.1)
    pb = frame_points(fb, 0.1)
    assert sum(np.linalg.norm(x - y) for x, y in zip(pa, pb)) == pytest.approx(2 * 0.25)


def test_op_space_loss_matches_geometry():
    rng = np.random.default_rng(3)
    for _ in range(100):
        q1, q2 = rand_q(rng), rand_q(rng)
        d = rng.uniform(0.05, 0.5)
        pts = []
        for q in (q1, q2):
            x, y, th = fk_chain(ARM, q)
            pts.append((np.array([x + d * np.cos(th), y + d * np.sin(th)]),
                        np.array([x - d * np.sin(th), y + d * np.cos(th)])))
        want = np.linalg.norm(pts[0][0] - pts[1][0]) + np.linalg.norm(pts[0][1] - pts[1][1])
        assert op_space_loss(q1, q2, ARM, d) == pytest.approx(want, rel=1e-12)


def test_joint_and_combined_loss():
    assert joint_space_loss([0, 0, 0], [0, 0, 0]) == 0
    assert joint_space_loss([0, 0, 0], [1, 1, 1]) == 1
    a, b = np.array([0.1, -0.4, 2.0]), np.array([0.3, 0.2, 1.0])
    assert joint_space_loss(a, b) == pytest.approx(((0.2 ** 2) + (0.6 ** 2) + 1.0) / 3)
    j, o = joint_space_loss(a, b), op_space_loss(a, b, ARM)
    assert combined_loss(a, b, ARM, lam=1.0) == pytest.approx(j)
    assert combined_loss(a, b, ARM, lam=0.0) == pytest.approx(o)
    assert combined_loss(a, b, ARM) == pytest.approx((j + o) / 2)
    with pytest.raises(ValueError):
        combined_loss(a, b, ARM, lam=1.5)


def test_op_space_gradient_close_to_fd():
    rng = np.random.default_rng(4)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        q, qe = rand_q(rng) * 0.95, rand_q(rng) * 0.95
        g = op_space_loss_grad(q, qe, ARM)
        fd = np.array([(op_space_loss(q + h * e, qe, ARM) - op_space_loss(q - h * e, qe, ARM)) / (2 * h)
                       for e in np.eye(3)])
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst <= 1e-5


# ---------------------------------------------------------------------------
# search


def random_grid(rng, res=np.pi / 8, n_obstacles=None):
    obstacles = []
    for _ in range(int(rng.integers(1, 4)) if n_obstacles is None else n_obstacles):
        # keep obstacles away from the base so some configurations stay free
        ang, dist = rng.uniform(-np.pi, np.pi), rng.uniform(0.45, 1.1)
        obstacles.append(Circle(dist * np.cos(ang), dist * np.sin(ang), rng.uniform(0.05, 0.2)))
    return CSpaceGrid(ARM, res, obstacles)


def pick_cells(rng, grid):
    valid = np.flatnonzero(grid.valid.ravel())
    a, b = rng.choice(valid, size=2, replace=False)
    return grid.cell(int(a)), grid.cell(int(b))


def test_grid_validity_matches_collision_checker():
    rng = np.random.default_rng(5)
    grid = random_grid(rng, n_obstacles=3)
    for _ in range(200):
        c = tuple(int(v) for v in rng.integers(0, grid.shape))
        assert grid.is_valid(c) == (not in_collision(ARM, grid.q(c), grid.obstacles))
    assert len(grid.moves) == 26


def test_obstacle_free_final_cost_is_optimal():
    grid = CSpaceGrid(ARM, np.pi / 8)
    start, goal = (2, 3, 4), (12, 5, 15)
    sols = ara_star(grid, start, goal)
    best = grid_distances(grid, start)[grid.flat(goal)]
    assert sols[-1].cost == pytest.approx(best, rel=1e-12)
    assert [s.eps for s in sols] == [3.0, 2.5, 2.0, 1.5, 1.0]


def test_start_equals_goal():
    grid = CSpaceGrid(ARM, np.pi / 8)
    (sol,) = ara_star(grid, (5, 5, 5), (5, 5, 5))
    assert sol.cost == 0 and sol.moves == 0 and sol.path == [(5, 5, 5)]


def test_paths_are_valid_neighbour_chains():
    rng = np.random.default_rng(6)
    grid = random_grid(rng, n_obstacles=3)
    start, goal = pick_cells(rng, grid)
    try:
        sols = ara_star(grid, start, goal)
    except NoPath:
        pytest.skip("disconnected pair")
    for s in sols:
        assert s.path[0] == start and s.path[-1] == goal
        assert all(grid.is_valid(c) for c in s.path)
        assert all(max(abs(a - b) for a, b in zip(p, q)) == 1 for p, q in zip(s.path, s.path[1:]))
        assert path_cost(grid, s.path) == pytest.approx(s.cost, rel=1e-12)


def test_ara_bound_small_sample():
    rng = np.random.default_rng(7)
    for _ in range(15):
        grid = random_grid(rng)
        start, goal = pick_cells(rng, grid)
        best = grid_distances(grid, start)[grid.flat(goal)]
        if not np.isfinite(best):
            with pytest.raises(NoPath):
                ara_star(grid, start, goal)
            continue
        sols = ara_star(grid, start, goal, AraConfig(3.0, 0.5, 1.0))
        for s in sols:
            assert s.cost <= s.eps * best * (1 + 1e-9)
        assert all(a.cost >= b.cost for a, b in zip(sols, sols[1:]))
        assert sols[-1].cost == pytest.approx(best, rel=1e-9)


def test_ara_rejects_invalid_endpoints():
    grid = CSpaceGrid(ARM, np.pi / 8)
    with pytest.raises(ValueError):
        ara_star(grid, (-1, 0, 0), (1, 1, 1))
    with pytest.raises(ValueError):
        AraConfig(0.5, 0.5, 1.0)


def test_ara_is_deterministic():
    rng = np.random.default_rng(8)
    grid = random_grid(rng, n_obstacles=2)
    start, goal = pick_cells(rng, grid)
    try:
        a, b = ara_star(grid, start, goal), ara_star(grid, start, goal)
    except NoPath:
        pytest.skip("disconnected pair")
    assert [(s.path, s.cost) for s in a] == [(s.path, s.cost) for s in b]


# ---------------------------------------------------------------------------
# dataset


@pytest.fixture(scope="module")
def scene():
    grid = CSpaceGrid(ARM, np.pi / 8, [Circle(0.1, 0.55, 0.12)])
    goal = resolve_goal_cell(grid, (0.6, 0.5))
    return grid, goal


def test_generated_trajectories_are_valid_and_repeatable(scene):
    grid, goal = scene
    a = generate_trajectories(4, ARM, grid, goal, seed=3)
    b = generate_trajectories(4, ARM, grid, goal, seed=3)
    # starts cut off from the goal by the obstacle are skipped
    assert 1 <= len(a) <= 4
    assert [t.traj_id for t in a] == [t.traj_id for t in b]
    for t, u in zip(a, b):
        assert t.cells == u.cells
        assert t.cells[-1] == goal
        assert all(grid.is_valid(c) for c in t.cells)
        assert all(max(abs(x - y) for x, y in zip(p, q)) == 1 for p, q in zip(t.cells, t.cells[1:]))
    # the same pair always yields the same trajectory
    t0 = a[0]
    again = expert_trajectory(grid, t0.cells[0], goal)
    assert again.cells == t0.cells
    with pytest.raises(ValueError):
        generate_trajectories(0, ARM, grid, goal, seed=3)


def test_open_space_yields_every_trajectory():
    grid = CSpaceGrid(ARM, np.pi / 8)
    goal = resolve_goal_cell(grid, (0.6, 0.5))
    trajs = generate_trajectories(5, ARM, grid, goal, seed=0)
    assert [t.traj_id for t in trajs] == list(range(5))


def test_dense_samples(scene):
    grid, goal = scene
    (t,) = generate_trajectories(1, ARM, grid, goal, seed=1)
    rng = np.random.default_rng(0)
    # radius below one cell: only the goal cell itself
    tiny = dense_goal_samples(t, 5, 0.5 * grid.resolution[0], grid, rng)
    assert len(tiny) == 1 and tiny[0] == pytest.approx(t.final_q)
    samples = dense_goal_samples(t, 10, 3 * np.pi / 16, grid, rng)
    assert len(samples) == 10
    assert len({tuple(np.round(s, 9)) for s in samples}) == 10
    for s in samples:
        assert np.max(np.abs(s - t.final_q)) <= 3 * np.pi / 16 + 1e-9
        assert not in_collision(ARM, s, grid.obstacles)
    with pytest.raises(ValueError):
        dense_goal_samples(t, 0, 0.1, grid, rng)


def test_dense_samples_skip_obstacles():
    # a big obstacle right next to the goal region
    grid = CSpaceGrid(ARM, np.pi / 8, [Circle(0.75, 0.3, 0.2)])
    goal = resolve_goal_cell(grid, (0.6, 0.5))
    (t,) = generate_trajectories(1, ARM, grid, goal, seed=2)
    samples = dense_goal_samples(t, 30, np.pi / 4, grid, np.random.default_rng(1))
    assert samples
    assert not any(in_collision(ARM, s, grid.obstacles) for s in samples)


def test_dataset_rows_and_labels(scene, tmp_path):
    grid, goal = scene
    (t,) = generate_trajectories(1, ARM, grid, goal, seed=4)
    # three cells each way: up to 7**3 candidate states around the goal
    dense = dense_goal_samples(t, 100, 3 * np.pi / 8, grid, np.random.default_rng(2))
    rows = dataset_rows(t, dense)
    assert len(rows) == t.T + 1 + len(dense)
    assert len(dense) == 100
    for r in rows:
        assert r["terminal"] == (r["t"] >= t.T)
        assert set(r) == {"traj_id", "t", "q", "o", "terminal", "final_q"}
        assert len(r["q"]) == 3 and set(r["o"]) == {"obstacles", "goal_cell"}
    assert sum(r["terminal"] for r in rows) == 1 + 100
    path = tmp_path / "d.jsonl"
    assert write_jsonl(rows, path) == len(rows)
    back = [json.loads(l) for l in path.read_text().splitlines()]
    assert back[0]["q"] == rows[0]["q"]

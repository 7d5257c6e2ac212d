import numpy as np

from reactexec.experiment import ExperimentSpec, run_experiment
from reactexec.expert import ArmModel, Circle, CSpaceGrid, generate_trajectories
from reactexec.expert.dataset import resolve_goal_cell
from reactexec.report import plot_results, plot_trajectories


def test_results_figure(tmp_path):
    table = run_experiment(ExperimentSpec(task="reordering", trials=20))
    path = tmp_path / "results.png"
    plot_results(table, path, title="reordering")
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_results_figure_without_failures(tmp_path):
    from reactexec.sim import FailureModel, SensorModel

    table = run_experiment(ExperimentSpec(trials=5, failure=FailureModel(), sensor=SensorModel()))
    path = tmp_path / "clean.svg"
    plot_results(table, path)
    assert path.read_text().lstrip().startswith("<?xml")


def test_trajectory_figure(tmp_path):
    arm = ArmModel()
    grid = CSpaceGrid(arm, np.pi / 8, [Circle(0.1, 0.55, 0.12)])
    goal = resolve_goal_cell(grid, (0.6, 0.5))
    trajs = generate_trajectories(3, arm, grid, goal, seed=0)
    path = tmp_path / "arm.png"
    plot_trajectories(trajs, grid, path, target=(0.6, 0.5))
    assert path.stat().st_size > 1000

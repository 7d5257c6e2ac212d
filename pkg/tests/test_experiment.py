import pytest

from reactexec.domain import Domain
from reactexec.executor import ExecConfig
from reactexec.experiment import (
    ExperimentSpec, goal_order_of, mode_config, run_episode, run_experiment, tower_size,
)
from reactexec.logic import Universe
from reactexec.sim import FailureModel, Scenario, SensorModel, parse_scenario, reset, tower_goal

U4 = Universe.blocks(4)
D4 = Domain.blocks(4)
QUIET = dict(failure=FailureModel(), sensor=SensorModel())


def test_mode_configs():
    assert mode_config("none") == ExecConfig(1, 0)
    assert mode_config("retrials") == ExecConfig(1, 5)
    assert mode_config("retrials-only") == ExecConfig(1, 5)
    assert mode_config("full") == ExecConfig(5, 5)
    with pytest.raises(ValueError):
        mode_config("turbo")


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(reset_policy="never")
    with pytest.raises(ValueError):
        ExperimentSpec(task="juggling")
    with pytest.raises(ValueError):
        ExperimentSpec(scenario=parse_scenario("layout table\n"))


def test_goal_order_and_tower_size():
    goal = tower_goal("rgby", U4)
    order = goal_order_of(goal)
    assert order == [U4[c].index for c in "rgby"]
    assert tower_size(reset(Scenario.tower("rgby", U4)), order) == 4
    assert tower_size(reset(Scenario.tower("gby", U4)), order) == 3
    assert tower_size(reset(Scenario.table(U4)), order) == 1
    assert tower_size(reset(Scenario.tower("yr", U4)), order) == 0


@pytest.mark.parametrize("task", ["stacking", "reordering"])
def test_zero_noise_every_mode_succeeds(task):
    table = run_experiment(ExperimentSpec(task=task, trials=40, **QUIET))
    for row in table.rows:
        assert (row.successes, row.failures) == (40, 0)
        assert row.max_replans_used == 1


def test_identical_specs_give_identical_tables():
    spec = ExperimentSpec(task="reordering", trials=60, master_seed=4)
    a, b = run_experiment(spec), run_experiment(spec)
    assert a.to_text() == b.to_text() and a.to_csv() == b.to_csv()


def test_parallel_matches_serial():
    serial = run_experiment(ExperimentSpec(task="stacking", trials=40, master_seed=2))
    parallel = run_experiment(ExperimentSpec(task="stacking", trials=40, master_seed=2, jobs=3))
    assert serial.to_csv() == parallel.to_csv()


def test_rows_add_up_and_record_failures():
    spec = ExperimentSpec(task="reordering", trials=80, master_seed=1, failure=FailureModel(p_fail=0.3))
    table = run_experiment(spec)
    for row in table.rows:
        assert row.successes + row.failures == 80
        assert sum(row.failure_plan_lengths.values()) == row.failures
        assert sum(row.tower_sizes.values()) == 80
    header, body = table.columns()
    assert header[:7] == ["mode", "replans", "retrials", "successes", "failures", "success_rate",
                          "successful_replans"]
    assert len(body) == 3
    assert table.row("retrials-only").mode == "retrials"
    assert table.to_csv().splitlines()[0] == ",".join(header)


def test_reset_on_failure_carries_world():
    sc = parse_scenario("layout tower g b r y\ngoal On(r,g), On(g,b), On(b,y)\n")
    spec = ExperimentSpec(scenario=sc, trials=3, reset_policy="failure", modes=("full",), **QUIET)
    row = run_experiment(spec).rows[0]
    # after the first success the goal already holds, so later episodes start solved
    assert row.successes == 3
    spec_reset = ExperimentSpec(scenario=sc, trials=3, reset_policy="episode", modes=("full",), **QUIET)
    assert run_experiment(spec_reset).rows[0].skill_calls == 3 * row.skill_calls


def test_run_episode_examples():
    r = run_episode(reset(Scenario.table(U4)), tower_goal("rgby", U4), "full", D4, FailureModel(), SensorModel())
    assert r.success and r.initial_plan_length == 6 and r.tower_size == 4
    # already solved
    r = run_episode(reset(Scenario.tower("rgby", U4)), tower_goal("rgby", U4), "none", D4,
                    FailureModel(), SensorModel())
    assert r.success and r.outcome.skill_events == []
    # an ejected block that cannot be recovered
    sc = parse_scenario("unreachable g\ngoal On(r,g)\n")
    r = run_episode(reset(sc), sc.goal, "full", D4, FailureModel(), SensorModel())
    assert not r.success and r.outcome.replans_used == 5

"""Monte-Carlo episodes and ablation experiments over the blocks world."""

from __future__ import annotations

import csv
import io
import itertools
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import Domain, standard_domain
from .executor import ExecConfig, ExecOutcome, execute
from .logic import GoalConditions, Universe
from .planner import Planner
from .sim import (
    BlocksWorldEnv,
    FailureModel,
    Scenario,
    SensorModel,
    WorldState,
    goal_achieved_gt,
    reset,
    tower_goal,
)

# total planner calls, retrials per step
MODE_CONFIGS = {
    "none": ExecConfig(max_replans=1, max_retrials=0),
    "retrials": ExecConfig(max_replans=1, max_retrials=5),
    "full": ExecConfig(max_replans=5, max_retrials=5),
}
MODE_ALIASES = {"retrials-only": "retrials", "no-recovery": "none"}
TASKS = ("stacking", "reordering")


def mode_config(mode: str) -> ExecConfig:
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODE_CONFIGS:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODE_CONFIGS)}")
    return MODE_CONFIGS[mode]


@dataclass
class EpisodeResult:
    success: bool
    outcome: ExecOutcome
    goal: GoalConditions
    initial_plan_length: int | None
    tower_size: int
    final_world: WorldState = field(repr=False)


def tower_size(w: WorldState, goal_order: list[int] | None) -> int:
    """Height of the correctly ordered partial tower, counted up from the goal's base."""
    if not goal_order:
        return 0
    base = goal_order[-1]
    if w.held == base or w.support.get(base) is not None:
        return 0
    size = 1
    for upper, lower in zip(reversed(goal_order[:-1]), reversed(goal_order[1:])):
        if w.support.get(upper) != lower:
            break
        size += 1
    return size


def goal_order_of(goal: GoalConditions) -> list[int] | None:
    """Recover a single top-to-bottom chain from a goal made only of On atoms."""
    if not goal.atoms or any(a.name != "On" for a in goal.atoms):
        return None
    below = {a.args[0].index: a.args[1].index for a in goal.atoms}
    tops = set(below) - set(below.values())
    if len(tops) != 1:
        return None
    order = [tops.pop()]
    while order[-1] in below:
        order.append(below[order[-1]])
    return order if len(order) == len(below) + 1 else None


def run_episode(world: WorldState, goal: GoalConditions, mode: str | ExecConfig, domain: Domain,
                failure: FailureModel, sensor: SensorModel, planner: Planner | None = None,
                forced=None) -> EpisodeResult:
    """One executor episode; success is judged on ground truth at the end."""
    cfg = mode if isinstance(mode, ExecConfig) else mode_config(mode)
    planner = planner or Planner(domain)
    env = BlocksWorldEnv(world, failure, sensor, forced)
    outcome = execute(goal, cfg, env, planner, domain)
    plans = outcome.plans
    first = len(plans[0].plan) if plans and not plans[0].no_plan_reason else None
    return EpisodeResult(
        goal_achieved_gt(env.world, goal), outcome, goal, first,
        tower_size(env.world, goal_order_of(goal)), env.world,
    )


@dataclass
class ExperimentSpec:
    task: str = "stacking"
    modes: tuple[str, ...] = ("none", "retrials", "full")
    trials: int = 250
    master_seed: int = 0
    failure: FailureModel = field(default_factory=FailureModel.default)
    sensor: SensorModel = field(default_factory=SensorModel.learned)
    reset_policy: str = "episode"  # or "failure"
    scenario: Scenario | None = None
    jobs: int = 1
    n_blocks: int = 4
    schemas: list | None = None  # skill library; the standard one when None

    def domain(self) -> Domain:
        U = self.scenario.universe if self.scenario is not None else Universe.blocks(self.n_blocks)
        return Domain(self.schemas if self.schemas is not None else standard_domain(), U)

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if self.reset_policy not in ("episode", "failure"):
            raise ValueError(f"reset policy must be episode or failure, got {self.reset_policy!r}")
        if self.task not in TASKS and self.scenario is None:
            raise ValueError(f"unknown task {self.task!r}")
        if self.scenario is not None and self.scenario.goal is None:
            raise ValueError("scenario needs a goal line")
        self.modes = tuple(MODE_ALIASES.get(m, m) for m in self.modes)
        for m in self.modes:
            mode_config(m)


def _trial_streams(master_seed: int, trial: int):
    """(task rng, world seed) for a trial; identical across modes so trials are paired."""
    task_ss, world_ss = np.random.SeedSequence([master_seed, trial]).spawn(2)
    return np.random.default_rng(task_ss), world_ss


def _sample_goal(rng: np.random.Generator, world: WorldState) -> GoalConditions:
    """A random full-tower order that is not already achieved."""
    U = world.universe
    orders = list(itertools.permutations(range(len(U))))
    while True:
        order = orders[int(rng.integers(len(orders)))]
        goal = tower_goal(order, U)
        if not goal_achieved_gt(world, goal):
            return goal


def _initial(spec: ExperimentSpec, trial: int, carried: WorldState | None):
    task_rng, world_ss = _trial_streams(spec.master_seed, trial)
    if spec.scenario is not None:
        world = reset(spec.scenario, world_ss)
        if carried is not None:
            world = carried.replace(rng=world.rng, sensor_rng=world.sensor_rng)
        return world, spec.scenario.goal
    U = Universe.blocks(spec.n_blocks)
    if spec.task == "stacking":
        world = reset(Scenario.table(U), world_ss)
    else:
        order = [int(i) for i in task_rng.permutation(len(U))]
        world = reset(Scenario.tower([U[i].name for i in order], U), world_ss)
    if carried is not None:
        world = carried.replace(rng=world.rng, sensor_rng=world.sensor_rng)
    return world, _sample_goal(task_rng, world)


def _run_block(args) -> list[tuple]:
    spec, mode, trials = args
    domain = spec.domain()
    planner = Planner(domain)
    out = []
    for t in trials:
        world, goal = _initial(spec, t, None)
        r = run_episode(world, goal, mode, domain, spec.failure, spec.sensor, planner)
        out.append(_summary(r))
    return out


def _summary(r: EpisodeResult) -> tuple:
    counts = Counter((e.plan_index, e.step) for e in r.outcome.skill_events)
    return (r.success, r.outcome.replans_used, r.initial_plan_length, r.tower_size,
            len(r.outcome.skill_events), max(counts.values(), default=0))


@dataclass
class ModeRow:
    mode: str
    successes: int = 0
    failures: int = 0
    successful_replans: int = 0
    failure_plan_lengths: Counter = field(default_factory=Counter)
    tower_sizes: Counter = field(default_factory=Counter)
    max_replans_used: int = 0
    max_step_executions: int = 0
    skill_calls: int = 0

    @property
    def trials(self) -> int:
        return self.successes + self.failures

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def add(self, summary: tuple) -> None:
        success, replans, plan_len, size, calls, step_max = summary
        if success:
            self.successes += 1
            if replans > 1:
                self.successful_replans += 1
        else:
            self.failures += 1
            self.failure_plan_lengths[plan_len if plan_len is not None else "none"] += 1
        self.tower_sizes[size] += 1
        self.max_replans_used = max(self.max_replans_used, replans)
        self.max_step_executions = max(self.max_step_executions, step_max)
        self.skill_calls += calls


@dataclass
class ResultsTable:
    spec: ExperimentSpec
    rows: list[ModeRow]

    def row(self, mode: str) -> ModeRow:
        mode = MODE_ALIASES.get(mode, mode)
        return next(r for r in self.rows if r.mode == mode)

    def columns(self) -> tuple[list[str], list[list]]:
        keys = {k for r in self.rows for k in r.failure_plan_lengths}
        # numeric plan lengths longest first, then "none" for episodes that never got a plan
        lengths = sorted((k for k in keys if k != "none"), reverse=True) + (["none"] if "none" in keys else [])
        sizes = sorted({k for r in self.rows for k in r.tower_sizes}, reverse=True)
        header = ["mode", "replans", "retrials", "successes", "failures", "success_rate", "successful_replans"]
        header += [f"fail_len_{k}" for k in lengths] + [f"tower_{k}" for k in sizes]
        body = []
        for r in self.rows:
            cfg = mode_config(r.mode)
            body.append(
                [r.mode, cfg.max_replans, cfg.max_retrials, r.successes, r.failures, f"{100 * r.success_rate:.1f}",
                 r.successful_replans]
                + [r.failure_plan_lengths.get(k, 0) for k in lengths]
                + [r.tower_sizes.get(k, 0) for k in sizes]
            )
        return header, body

    def to_text(self) -> str:
        header, body = self.columns()
        cells = [header] + [[str(c) for c in row] for row in body]
        widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
        lines = ["  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(row, widths)))
                 for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header, body = self.columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()


def run_experiment(spec: ExperimentSpec) -> ResultsTable:
    """Run every mode over the same trial seeds.

    With ``reset_policy="failure"`` a successful episode's final world becomes
    the next episode's start, so trials run in order and ``jobs`` is ignored.
    """
    rows = []
    for mode in spec.modes:
        row = ModeRow(mode)
        if spec.reset_policy == "episode":
            trials = list(range(spec.trials))
            if spec.jobs > 1:
                chunks = [trials[i::spec.jobs] for i in range(spec.jobs)]
                with ProcessPoolExecutor(spec.jobs) as pool:
                    parts = list(pool.map(_run_block, [(spec, mode, c) for c in chunks]))
                by_trial = {}
                for chunk, part in zip(chunks, parts):
                    by_trial.update(zip(chunk, part))
                summaries = [by_trial[t] for t in trials]
            else:
                summaries = _run_block((spec, mode, trials))
            for s in summaries:
                row.add(s)
        else:
            domain = spec.domain()
            planner = Planner(domain)
            carried = None
            for t in range(spec.trials):
                world, goal = _initial(spec, t, carried)
                r = run_episode(world, goal, mode, domain, spec.failure, spec.sensor, planner)
                row.add(_summary(r))
                carried = r.final_world if r.success else None
        rows.append(row)
    return ResultsTable(spec, rows)

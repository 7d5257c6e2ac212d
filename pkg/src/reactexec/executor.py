"""Plan execution with precondition backtracking, per-step retrials and bounded replanning."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol

from .domain import Domain, GroundedSkill, Plan
from .logic import GoalConditions, LogicalState, satisfies
from .planner import NoPlanFound


class Environment(Protocol):
    def observe(self) -> LogicalState: ...

    def execute_skill(self, s: GroundedSkill): ...


@dataclass(frozen=True)
class ExecConfig:
    """Execution budgets.

    ``max_replans`` is the total number of planner calls per episode.
    ``max_retrials`` is how many times a plan step may be re-executed after its
    first attempt, so a step runs at most ``max_retrials + 1`` times per plan.
    """

    max_replans: int = 5
    max_retrials: int = 5

    def __post_init__(self):
        if self.max_replans < 0 or self.max_retrials < 0:
            raise ValueError("execution budgets must be non-negative")


@dataclass
class TraceEvent:
    kind: str  # "plan" or "skill"
    plan_index: int
    step: int = -1
    skill: str = ""
    attempt: int = 0
    precondition_backtracks: int = 0
    termination_observed: bool = True
    mode: str = ""
    plan: list[str] = field(default_factory=list)
    no_plan_reason: str = ""
    sensed: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if v not in ("", [], None) or k in ("kind", "plan_index")}
        return json.dumps(d, sort_keys=True)


@dataclass
class ExecOutcome:
    success: bool
    replans_used: int
    trace: list[TraceEvent] = field(default_factory=list)

    @property
    def plans(self) -> list[TraceEvent]:
        return [e for e in self.trace if e.kind == "plan"]

    @property
    def skill_events(self) -> list[TraceEvent]:
        return [e for e in self.trace if e.kind == "skill"]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for e in self.trace:
                f.write(e.to_json() + "\n")


def _snapshot(o: LogicalState) -> list[str]:
    return [str(a) for a in o]


def execute_plan(o: LogicalState, goal: GoalConditions, plan: Plan, cfg: ExecConfig, env: Environment,
                 domain: Domain, trace: list[TraceEvent] | None = None, plan_index: int = 0) -> bool:
    """Run ``plan`` from observation ``o``; True on sensed goal satisfaction.

    Before each step, walk back through the plan until a step whose
    preconditions hold in the current observation is found; running off the
    front fails. Retrial counters are per plan position.
    """
    trace = trace if trace is not None else []
    executions = [0] * len(plan)
    i = 0
    while i < len(plan):
        backtracks = 0
        while not domain.preconditions_hold(plan[i], o):
            i -= 1
            backtracks += 1
            if i < 0:
                return False
        executions[i] += 1
        if executions[i] > cfg.max_retrials + 1:
            return False
        ev = env.execute_skill(plan[i])
        o = env.observe()
        trace.append(TraceEvent(
            "skill", plan_index, i, str(plan[i]), executions[i], backtracks,
            getattr(ev, "terminated", True), getattr(ev, "mode", ""), sensed=_snapshot(o),
        ))
        if satisfies(o, goal):
            return True
        i += 1
    return False


def execute(goal: GoalConditions, cfg: ExecConfig, env: Environment,
            planner: Callable[[LogicalState, GoalConditions], Plan], domain: Domain | None = None) -> ExecOutcome:
    """Observe, plan, execute; repeat until success or the planner budget is spent.

    A planner failure (no plan within bounds) uses up one planner call.
    """
    domain = domain if domain is not None else planner.domain
    trace: list[TraceEvent] = []
    replans = 0
    while replans < cfg.max_replans:
        o = env.observe()
        try:
            p = planner(o, goal)
        except NoPlanFound as e:
            replans += 1
            trace.append(TraceEvent("plan", replans - 1, no_plan_reason=e.reason, sensed=_snapshot(o)))
            continue
        replans += 1
        trace.append(TraceEvent("plan", replans - 1, plan=[str(s) for s in p], sensed=_snapshot(o)))
        if not p and satisfies(o, goal):
            return ExecOutcome(True, replans, trace)
        if execute_plan(o, goal, p, cfg, env, domain, trace, replans - 1):
            return ExecOutcome(True, replans, trace)
    return ExecOutcome(False, replans, trace)

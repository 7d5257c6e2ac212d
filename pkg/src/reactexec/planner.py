"""Breadth-first forward planner over grounded skills."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .domain import Domain, InapplicableSkill, Plan
from .logic import GoalConditions, LogicalState, satisfies


@dataclass(frozen=True)
class PlannerConfig:
    max_depth: int = 20
    max_expansions: int = 200_000

    def __post_init__(self):
        if self.max_depth <= 0 or self.max_expansions <= 0:
            raise ValueError("planner bounds must be positive")


class NoPlanFound(Exception):
    """No plan within bounds. ``reason`` is exhausted, depth_cap or expansion_cap."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def plan(state: LogicalState, goal: GoalConditions, domain: Domain, cfg: PlannerConfig = PlannerConfig()) -> Plan:
    """Shortest plan from ``state`` to ``goal``.

    Among shortest plans the one found first in BFS order wins, with successors
    generated in the domain's grounded-skill order, so results are
    deterministic. ``state`` may be physically inconsistent.
    """
    start = domain.state_mask(state)
    try:
        goal_mask = domain.mask(goal.atoms)
    except KeyError:
        raise NoPlanFound("exhausted") from None
    steps = _search(domain, start, goal_mask, cfg)
    if isinstance(steps, str):
        raise NoPlanFound(steps)
    return Plan(domain.skills[i] for i in steps)


def _search(domain: Domain, start: int, goal: int, cfg: PlannerConfig) -> tuple[int, ...] | str:
    if start & goal == goal:
        return ()
    # goal atoms that are false now and that no skill adds can never become true
    if goal & ~start & ~domain.achievable:
        return "exhausted"
    ops = [(c.pos, c.neg, c.any_of, c.add, c.delete, c.support) for c in domain.compiled]
    parent: dict[int, tuple[int, int] | None] = {start: None}
    frontier = [start]
    expansions = 0
    depth = 0
    while frontier:
        if depth >= cfg.max_depth:
            return "depth_cap"
        layer: list[int] = []
        for m in frontier:
            expansions += 1
            if expansions > cfg.max_expansions:
                return "expansion_cap"
            for k, (pos, neg, any_of, add, delete, support) in enumerate(ops):
                if m & pos != pos or m & neg:
                    continue
                if any_of and not all(m & g for g in any_of):
                    continue
                if support:
                    hits = [p for p in support if m & p[0]]
                    if len(hits) != 1:
                        continue
                    n = (m | add | hits[0][1]) & ~(delete | hits[0][0])
                else:
                    n = (m | add) & ~delete
                if n in parent:
                    continue
                parent[n] = (m, k)
                if n & goal == goal:
                    return _unwind(parent, n)
                layer.append(n)
        frontier = layer
        depth += 1
    return "exhausted"


def _unwind(parent: dict[int, tuple[int, int] | None], m: int) -> tuple[int, ...]:
    out = []
    while parent[m] is not None:
        m, k = parent[m]
        out.append(k)
    return tuple(reversed(out))


class Planner:
    """Memoizing planner bound to a domain; callable as ``planner(state, goal)``.

    Planning is a pure function of (state, goal), so results are cached by
    bitmask. Repeated sensed states are common in Monte-Carlo runs.
    """

    def __init__(self, domain: Domain, cfg: PlannerConfig = PlannerConfig(), cache_size: int = 65536):
        self.domain = domain
        self.cfg = cfg
        self.calls = 0
        self._cached = lru_cache(maxsize=cache_size)(lambda s, g: _search(domain, s, g, cfg))

    def __call__(self, state: LogicalState, goal: GoalConditions) -> Plan:
        self.calls += 1
        try:
            goal_mask = self.domain.mask(goal.atoms)
        except KeyError:
            raise NoPlanFound("exhausted") from None
        steps = self._cached(self.domain.state_mask(state), goal_mask)
        if isinstance(steps, str):
            raise NoPlanFound(steps)
        return Plan(self.domain.skills[i] for i in steps)


def validate_plan(p: Plan, state: LogicalState, goal: GoalConditions, domain: Domain) -> bool:
    """True iff every step's preconditions hold in turn and the end state meets ``goal``."""
    s = state
    for skill in p:
        if not domain.preconditions_hold(skill, s):
            return False
        try:
            s = domain.apply_effects(skill, s)
        except InapplicableSkill:
            return False
    return satisfies(s, goal)


def predicted_states(p: Plan, state: LogicalState, domain: Domain) -> list[LogicalState]:
    """States the planner expects after each step, starting with ``state``."""
    out = [state]
    for skill in p:
        out.append(domain.apply_effects(skill, out[-1]))
    return out

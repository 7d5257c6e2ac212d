"""Stochastic blocks world: ground truth, skill execution with failures, noisy sensing."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .domain import GroundedSkill, preconditions_hold
from .logic import (
    CLOSE,
    IN_HAND,
    IN_WORKSPACE,
    LEARNED_PREDICATES,
    ON,
    ON_TOP,
    Atom,
    GoalConditions,
    LogicalState,
    Universe,
    ground_all,
    parse_atom,
    satisfies,
)

log = logging.getLogger(__name__)

MODES = ("nominal", "noop", "drop", "topple", "flail")


def _check_rate(name: str, p: float, upper_open: bool = False) -> None:
    if not (0.0 <= p < 1.0 if upper_open else 0.0 <= p <= 1.0):
        raise ValueError(f"{name}={p} out of range")


@dataclass(frozen=True)
class FailureModel:
    """Per-skill failure probability plus the parameters of each failure mode.

    ``p_fail`` is either one rate for every skill or a mapping from skill name
    to rate (missing names fail with probability 0).
    """

    p_fail: float | Mapping[str, float] = 0.0
    topple_base: float = 0.0
    p_eject: float = 0.0
    p_drop_close: float = 0.0
    p_eject_hard: float = 0.0

    def __post_init__(self):
        rates = self.p_fail.values() if isinstance(self.p_fail, Mapping) else [self.p_fail]
        for p in rates:
            _check_rate("p_fail", p)
        for name in ("topple_base", "p_eject", "p_drop_close", "p_eject_hard"):
            _check_rate(name, getattr(self, name))

    def fail_rate(self, skill_name: str) -> float:
        if isinstance(self.p_fail, Mapping):
            return self.p_fail.get(skill_name, 0.0)
        return self.p_fail

    @classmethod
    def default(cls) -> "FailureModel":
        return cls(p_fail=0.10, topple_base=0.05, p_eject=0.3, p_drop_close=0.3, p_eject_hard=0.1)


@dataclass(frozen=True)
class SensorModel:
    """Independent per-atom flip rates, keyed by predicate name.

    A rate of 1 is allowed for ``fp``/``fn`` to script a predicate that is
    always or never sensed.
    """

    fp: Mapping[str, float] = field(default_factory=dict)
    fn: Mapping[str, float] = field(default_factory=dict)
    term_fp: float = 0.0
    term_fn: float = 0.0

    def __post_init__(self):
        for table in (self.fp, self.fn):
            for name, p in table.items():
                _check_rate(f"rate[{name}]", p)
        _check_rate("term_fp", self.term_fp, upper_open=True)
        _check_rate("term_fn", self.term_fn, upper_open=True)

    @classmethod
    def learned(cls, fp: float = 0.02, fn: float = 0.02) -> "SensorModel":
        """Noise on the learned predicates only; manual ones stay exact."""
        return cls({p: fp for p in LEARNED_PREDICATES}, {p: fn for p in LEARNED_PREDICATES})


@dataclass(frozen=True, eq=False)
class WorldState:
    """Ground truth of the scene.

    ``support`` maps each non-held block index to the block it rests on, or
    None for the table. The generators are shared by states derived from this
    one; ``rng`` drives skill outcomes and ``sensor_rng`` drives observations.
    """

    universe: Universe
    support: Mapping[int, int | None]
    held: int | None
    in_workspace: tuple[bool, ...]
    close_pairs: frozenset[tuple[int, int]]
    recoverable: tuple[bool, ...]
    rng: np.random.Generator = field(repr=False)
    sensor_rng: np.random.Generator = field(repr=False)

    def __post_init__(self):
        n = len(self.universe)
        object.__setattr__(self, "support", dict(self.support))
        if self.held is not None and self.held in self.support:
            raise ValueError("held block cannot rest on anything")
        if set(self.support) | ({self.held} if self.held is not None else set()) != set(range(n)):
            raise ValueError("every block must be held or supported")
        seen_under = set()
        for x, y in self.support.items():
            if y is None:
                continue
            if y == x or y not in self.support:
                raise ValueError(f"block {x} rests on invalid block {y}")
            if y in seen_under:
                raise ValueError(f"two blocks rest on block {y}")
            seen_under.add(y)
        for x in self.support:
            seen = {x}
            y = self.support[x]
            while y is not None:
                if y in seen:
                    raise ValueError("cyclic support")
                seen.add(y)
                y = self.support[y]
        if len(self.in_workspace) != n or len(self.recoverable) != n:
            raise ValueError("per-block flags must cover the universe")
        for a, b in self.close_pairs:
            if not 0 <= a < b < n:
                raise ValueError(f"close pair {(a, b)} not canonical")

    def key(self) -> tuple:
        """Hashable snapshot of the physical state (generators excluded)."""
        return (tuple(sorted(self.support.items(), key=lambda kv: kv[0])), self.held,
                self.in_workspace, tuple(sorted(self.close_pairs)), self.recoverable)

    def block_on(self, y: int) -> int | None:
        for x, s in self.support.items():
            if s == y:
                return x
        return None

    def tower(self, x: int) -> list[int]:
        """The stack containing ``x``, listed top to bottom."""
        top = x
        while (z := self.block_on(top)) is not None:
            top = z
        out = [top]
        while (y := self.support[out[-1]]) is not None:
            out.append(y)
        return out

    def towers(self) -> list[list[int]]:
        bases = sorted(x for x, s in self.support.items() if s is None)
        return [self.tower(b) for b in bases]

    def replace(self, **changes) -> "WorldState":
        return dataclasses.replace(self, **changes)


def _streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    """Initial layout plus goal.

    ``layout`` is ``table``, ``tower`` (``order`` lists blocks top to bottom)
    or ``custom`` (``on``, ``held``, ``out``, ``close``, ``unreachable``).
    """

    universe: Universe
    layout: str = "table"
    order: tuple[str, ...] = ()
    on: tuple[tuple[str, str], ...] = ()
    held: str | None = None
    out: tuple[str, ...] = ()
    close: tuple[tuple[str, str], ...] = ()
    unreachable: tuple[str, ...] = ()
    goal: GoalConditions | None = None

    @classmethod
    def table(cls, universe: Universe | None = None, goal: GoalConditions | None = None) -> "Scenario":
        return cls(universe or Universe.blocks(4), "table", goal=goal)

    @classmethod
    def tower(cls, order, universe: Universe | None = None, goal: GoalConditions | None = None) -> "Scenario":
        return cls(universe or Universe.blocks(4), "tower", order=tuple(order), goal=goal)


def tower_goal(order, universe: Universe) -> GoalConditions:
    """Goal atoms for a tower listed top to bottom."""
    objs = [universe[o] for o in order]
    return GoalConditions(Atom(ON, (objs[i], objs[i + 1])) for i in range(len(objs) - 1))


def reset(scenario: Scenario, seed=0) -> WorldState:
    """Build the initial world for ``scenario``; the layout itself is seed-independent."""
    U = scenario.universe
    n = len(U)
    rng, sensor_rng = _streams(seed)
    idx = lambda name: U[name].index  # noqa: E731
    support: dict[int, int | None] = {}
    held = None
    in_ws = [True] * n
    close: set[tuple[int, int]] = set()
    recoverable = [True] * n
    if scenario.layout == "table":
        support = {i: None for i in range(n)}
    elif scenario.layout == "tower":
        order = [idx(o) for o in scenario.order]
        if len(set(order)) != len(order):
            raise ValueError("tower lists a block twice")
        support = {i: None for i in range(n)}
        for a, b in zip(order, order[1:]):
            support[a] = b
    elif scenario.layout == "custom":
        held = idx(scenario.held) if scenario.held is not None else None
        support = {i: None for i in range(n) if i != held}
        for a, b in scenario.on:
            if idx(a) == held or idx(b) == held:
                raise ValueError("held block cannot be part of a stack")
            support[idx(a)] = idx(b)
        for o in scenario.out:
            in_ws[idx(o)] = False
        for o in scenario.unreachable:
            in_ws[idx(o)] = False
            recoverable[idx(o)] = False
        for a, b in scenario.close:
            i, j = sorted((idx(a), idx(b)))
            close.add((i, j))
    else:
        raise ValueError(f"unknown layout {scenario.layout!r}")
    return WorldState(U, support, held, tuple(in_ws), frozenset(close), tuple(recoverable), rng, sensor_rng)


def parse_scenario(text: str, universe: Universe | None = None) -> Scenario:
    """Parse a scenario file.

    Lines: ``blocks <names...>``, ``layout table|tower <blocks...>|custom``,
    ``on X Y``, ``held X``, ``out X``, ``unreachable X``, ``close X Y`` and
    ``goal Atom, Atom, ...``. ``#`` starts a comment. Tower blocks are listed
    top to bottom. Without a ``layout`` line the layout is ``custom`` if any
    per-block line is present and ``table`` otherwise.
    """
    U = universe
    fields: dict = {"layout": None, "order": (), "on": [], "held": None, "out": [], "close": [], "unreachable": []}
    goal_text = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        toks = rest.split()
        try:
            if word == "blocks":
                U = Universe(toks)
            elif word == "layout":
                if toks[0] not in ("table", "tower", "custom"):
                    raise ValueError(f"unknown layout {toks[0]!r}")
                fields["layout"] = toks[0]
                if toks[0] == "tower":
                    fields["order"] = tuple(toks[1:])
                elif len(toks) != 1:
                    raise ValueError(f"layout {toks[0]} takes no blocks")
            elif word in ("on", "close"):
                if len(toks) != 2:
                    raise ValueError(f"{word} takes two blocks")
                fields[word].append((toks[0], toks[1]))
            elif word == "held":
                fields["held"] = toks[0]
            elif word in ("out", "unreachable"):
                fields[word].extend(toks)
            elif word == "goal":
                goal_text = rest
            else:
                raise ValueError(f"unknown directive {word!r}")
        except (IndexError, ValueError) as e:
            raise ValueError(f"line {lineno}: {e}") from None
    U = U or Universe.blocks(4)
    custom = any(fields[k] for k in ("on", "held", "out", "close", "unreachable"))
    if fields["layout"] is None:
        fields["layout"] = "custom" if custom else "table"
    elif custom and fields["layout"] != "custom":
        raise ValueError(f"on/held/out/close/unreachable lines need layout custom, not {fields['layout']}")
    names = [*fields["order"], *(x for p in fields["on"] + fields["close"] for x in p), *fields["out"],
             *fields["unreachable"], *([fields["held"]] if fields["held"] else [])]
    for name in names:
        U[name]
    goal = None
    if goal_text is not None:
        from .domain import _split_top

        goal = GoalConditions(parse_atom(piece, U) for piece, _ in _split_top(goal_text))
    return Scenario(
        U, fields["layout"], tuple(fields["order"]), tuple(fields["on"]), fields["held"], tuple(fields["out"]),
        tuple(fields["close"]), tuple(fields["unreachable"]), goal,
    )


# ---------------------------------------------------------------------------
# ground truth and sensing


def project_ground_truth(w: WorldState) -> LogicalState:
    U = w.universe.objects
    atoms = []
    covered = {y for y in w.support.values() if y is not None}
    for x, y in w.support.items():
        if y is not None:
            atoms.append(Atom(ON, (U[x], U[y])))
        if x not in covered:
            atoms.append(Atom(ON_TOP, (U[x],)))
    if w.held is not None:
        atoms.append(Atom(IN_HAND, (U[w.held],)))
    atoms.extend(Atom(IN_WORKSPACE, (U[i],)) for i, f in enumerate(w.in_workspace) if f)
    atoms.extend(Atom(CLOSE, (U[a], U[b])) for a, b in w.close_pairs)
    return LogicalState(atoms)


def goal_achieved_gt(w: WorldState, goal: GoalConditions) -> bool:
    return satisfies(project_ground_truth(w), goal)


_RATE_CACHE: dict = {}


def _rate_vectors(universe: Universe, sm: SensorModel):
    key = (universe, tuple(sorted(sm.fp.items())), tuple(sorted(sm.fn.items())))
    hit = _RATE_CACHE.get(key)
    if hit is None:
        atoms = ground_all(universe)
        fp = np.array([sm.fp.get(a.name, 0.0) for a in atoms])
        fn = np.array([sm.fn.get(a.name, 0.0) for a in atoms])
        hit = _RATE_CACHE[key] = (atoms, fp, fn)
    return hit


def observe(w: WorldState, sm: SensorModel) -> LogicalState:
    """Ground truth with each atom flipped independently (true->false at fn, false->true at fp).

    Exactly one uniform draw per atom is consumed from ``w.sensor_rng`` so the
    stream advances identically regardless of the rates.
    """
    atoms, fp, fn = _rate_vectors(w.universe, sm)
    truth_set = project_ground_truth(w).atoms
    truth = np.fromiter((a in truth_set for a in atoms), dtype=bool, count=len(atoms))
    u = w.sensor_rng.random(len(atoms))
    sensed = np.where(truth, u >= fn, u < fp)
    return LogicalState(a for a, s in zip(atoms, sensed) if s)


# ---------------------------------------------------------------------------
# skill execution


@dataclass(frozen=True)
class SkillEvent:
    skill: str
    mode: str
    terminated: bool = True
    ejected: tuple[int, ...] = ()


def _place_on_table(w: WorldState, x: int, p_close: float, rng) -> WorldState:
    """Put ``x`` on the table inside the workspace, possibly next to another table block."""
    support = dict(w.support)
    support[x] = None
    held = None if w.held == x else w.held
    in_ws = list(w.in_workspace)
    in_ws[x] = True
    close = set(w.close_pairs)
    if rng.random() < p_close:
        partners = sorted(y for y, s in support.items() if s is None and y != x and in_ws[y])
        if partners:
            y = partners[int(rng.integers(len(partners)))]
            close.add((min(x, y), max(x, y)))
    return w.replace(support=support, held=held, in_workspace=tuple(in_ws), close_pairs=frozenset(close))


def _topple(w: WorldState, tower: list[int], fm: FailureModel, rng) -> tuple[WorldState, tuple[int, ...]]:
    """Everything above the base of ``tower`` (and any held block) falls to the table."""
    scattered = tower[:-1]
    if w.held is not None:
        scattered = [w.held] + scattered
    support = dict(w.support)
    in_ws = list(w.in_workspace)
    recoverable = list(w.recoverable)
    for x in scattered:
        support[x] = None
    w = w.replace(support=support, held=None)
    ejected = []
    for x in scattered:
        if rng.random() < fm.p_eject:
            ejected.append(x)
            in_ws[x] = False
            if rng.random() < fm.p_eject_hard:
                recoverable[x] = False
    w = w.replace(in_workspace=tuple(in_ws), recoverable=tuple(recoverable))
    for x in scattered:
        if x not in ejected:
            w = _place_on_table(w, x, fm.p_drop_close, rng)
    return w, tuple(ejected)


def _gt_preconditions(w: WorldState, s: GroundedSkill) -> bool:
    if not preconditions_hold(s, project_ground_truth(w), w.universe):
        return False
    if s.name == "Pull" and not w.recoverable[s.args[0].index]:
        return False
    return True


def _target_tower(w: WorldState, s: GroundedSkill) -> list[int]:
    if s.name == "Stack":
        return w.tower(s.args[1].index)
    if s.name == "ReachOnTower":
        return w.tower(s.args[0].index)
    return []


def _nominal(w: WorldState, s: GroundedSkill) -> WorldState:
    x = s.args[0].index
    name = s.name
    if name in ("ReachOnTable", "ReachOnTower"):
        support = dict(w.support)
        del support[x]
        return w.replace(support=support, held=x)
    if name == "Stack":
        support = dict(w.support)
        support[x] = s.args[1].index
        return w.replace(support=support, held=None)
    if name == "Unstack":
        support = dict(w.support)
        support[x] = None
        in_ws = list(w.in_workspace)
        in_ws[x] = True
        return w.replace(support=support, held=None, in_workspace=tuple(in_ws))
    if name == "Pull":
        in_ws = list(w.in_workspace)
        in_ws[x] = True
        return w.replace(in_workspace=tuple(in_ws))
    if name == "Singulate":
        pair = (min(x, s.args[1].index), max(x, s.args[1].index))
        return w.replace(close_pairs=w.close_pairs - {pair})
    raise ValueError(f"the simulator has no behaviour for skill {name!r}")


def execute_skill(w: WorldState, s: GroundedSkill, fm: FailureModel,
                  forced: str | None = None) -> tuple[WorldState, SkillEvent]:
    """Run one skill to termination.

    If its ground-truth preconditions fail the skill flails and nothing
    changes. Otherwise, for Stack and ReachOnTower, the target stack of height
    h topples with probability ``topple_base * (h - 1)``; then with probability
    ``p_fail`` a failure mode is drawn uniformly among the ones that make sense
    for the skill (no-op, drop, topple); otherwise the nominal effects apply.
    ``forced`` overrides the draw with a given mode, for scripted tests.
    """
    rng = w.rng
    if not _gt_preconditions(w, s):
        return w, SkillEvent(str(s), "flail")
    tower = _target_tower(w, s)
    holds = s.name in ("ReachOnTable", "ReachOnTower", "Stack", "Unstack")
    mode = forced
    if mode is None:
        if len(tower) >= 2 and rng.random() < min(1.0, fm.topple_base * (len(tower) - 1)):
            mode = "topple"
        elif rng.random() < fm.fail_rate(s.name):
            options = ["noop"] + (["drop"] if holds else []) + (["topple"] if len(tower) >= 2 else [])
            mode = options[int(rng.integers(len(options)))]
        else:
            mode = "nominal"
    if mode not in MODES or mode == "flail":
        raise ValueError(f"cannot force mode {mode!r}")
    if mode == "nominal":
        return _nominal(w, s), SkillEvent(str(s), mode)
    if mode == "noop":
        return w, SkillEvent(str(s), mode)
    if mode == "drop":
        if not holds:
            raise ValueError(f"{s} holds no block to drop")
        x = s.args[0].index
        if w.held is None or w.held != x:
            w = _nominal(w, s) if s.name.startswith("Reach") else w
        return _place_on_table(w, x, fm.p_drop_close, rng), SkillEvent(str(s), mode)
    if len(tower) < 2:
        raise ValueError(f"{s}: no stack to topple")
    w2, ejected = _topple(w, tower, fm, rng)
    return w2, SkillEvent(str(s), mode, ejected=ejected)


class BlocksWorldEnv:
    """The executor's view of the simulator: ``observe()`` and ``execute_skill(s)``.

    ``forced`` maps the 0-based index of an ``execute_skill`` call to a failure
    mode, for scripted failure injection.
    """

    def __init__(self, world: WorldState, failure: FailureModel = FailureModel(),
                 sensor: SensorModel = SensorModel(), forced: Mapping[int, str] | None = None):
        self.world = world
        self.failure = failure
        self.sensor = sensor
        self.forced = dict(forced or {})
        self.calls = 0
        self.events: list[SkillEvent] = []

    def observe(self) -> LogicalState:
        return observe(self.world, self.sensor)

    def execute_skill(self, s: GroundedSkill) -> SkillEvent:
        forced = self.forced.get(self.calls)
        self.calls += 1
        sm = self.sensor
        premature = bool(sm.term_fp) and self.world.sensor_rng.random() < sm.term_fp
        if premature and forced is None:
            # termination fired before the policy got anywhere
            forced = "noop"
        self.world, ev = execute_skill(self.world, s, self.failure, forced)
        if sm.term_fn and self.world.sensor_rng.random() < sm.term_fn:
            ev = dataclasses.replace(ev, terminated=False)
        self.events.append(ev)
        return ev

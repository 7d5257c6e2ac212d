"""Skill schemas with preconditions and effects, grounding, and the domain file format.

A domain file looks like::

    # comments start with '#'
    skill Stack/2:
        source: learned
        pre: InHand($0), OnTop($1), InWorkspace($1)
        add: On($0,$1), OnTop($0)
        del: InHand($0), OnTop($1)

Literal templates use ``$k`` for the k-th skill parameter and ``!`` for
negation. Besides plain predicates, three derived conditions are understood in
``pre:`` lines: ``hand-empty``, ``on-table($k)`` and ``not-close($k)``; they
expand into conjunctions of ground literals (``!on-table`` becomes a
disjunction). ``leave-support($k)`` in a ``del:`` line is the one
state-dependent effect: the block under ``$k`` loses ``On($k, .)`` and gains
``OnTop``. A ``symmetric: true`` line makes a two-argument skill ground only
over unordered pairs.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .logic import (
    BLOCK_PREDICATES,
    CLOSE,
    IN_HAND,
    IN_WORKSPACE,
    ON,
    ON_TOP,
    Atom,
    LogicalState,
    ObjectId,
    PredicateSchema,
    Universe,
    ground_all,
)

DERIVED = ("hand-empty", "on-table", "not-close", "leave-support")
DERIVED_ARITY = {"hand-empty": 0, "on-table": 1, "not-close": 1, "leave-support": 1}


class DomainError(ValueError):
    """Raised for malformed or inconsistent domain definitions."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + message)


class InapplicableSkill(Exception):
    """A state-dependent effect could not be resolved in the given state."""


@dataclass(frozen=True)
class Literal:
    """A precondition or effect template.

    ``predicate`` is a :class:`PredicateSchema` for ordinary literals or one of
    the derived keywords in ``DERIVED``. ``slots`` holds parameter indices
    (ints) or bound object names (strs).
    """

    predicate: PredicateSchema | str
    slots: tuple[int | str, ...] = ()
    positive: bool = True

    @property
    def derived(self) -> bool:
        return isinstance(self.predicate, str)

    @property
    def name(self) -> str:
        return self.predicate if isinstance(self.predicate, str) else self.predicate.name

    def __str__(self) -> str:
        args = ",".join(f"${s}" if isinstance(s, int) else s for s in self.slots)
        body = self.name if self.predicate == "hand-empty" else f"{self.name}({args})"
        return body if self.positive else "!" + body


def lit(predicate: PredicateSchema | str, *slots: int | str, positive: bool = True) -> Literal:
    return Literal(predicate, tuple(slots), positive)


def neg(predicate: PredicateSchema | str, *slots: int | str) -> Literal:
    return Literal(predicate, tuple(slots), False)


@dataclass(frozen=True)
class SkillSchema:
    name: str
    arity: int
    preconditions: tuple[Literal, ...] = ()
    add_effects: tuple[Literal, ...] = ()
    delete_effects: tuple[Literal, ...] = ()
    source: str = "learned"
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "preconditions", tuple(self.preconditions))
        object.__setattr__(self, "add_effects", tuple(self.add_effects))
        object.__setattr__(self, "delete_effects", tuple(self.delete_effects))
        validate_schema(self)


def validate_schema(s: SkillSchema) -> None:
    if s.arity < 0:
        raise DomainError(f"skill {s.name}: negative arity")
    if s.symmetric and s.arity != 2:
        raise DomainError(f"skill {s.name}: only binary skills can be symmetric")
    if s.source not in ("learned", "manual"):
        raise DomainError(f"skill {s.name}: source must be learned or manual, got {s.source!r}")
    for group, where in ((s.preconditions, "pre"), (s.add_effects, "add"), (s.delete_effects, "del")):
        for l in group:
            want = DERIVED_ARITY[l.predicate] if l.derived else l.predicate.arity
            if len(l.slots) != want:
                raise DomainError(f"skill {s.name}: {l.name} takes {want} argument(s), got {len(l.slots)}")
            for slot in l.slots:
                if isinstance(slot, int) and not 0 <= slot < s.arity:
                    raise DomainError(f"skill {s.name}: parameter ${slot} out of range for arity {s.arity}")
            if where != "pre" and not l.positive:
                raise DomainError(f"skill {s.name}: negated literal {l} not allowed in effects")
            if l.derived and where == "pre" and l.predicate == "leave-support":
                raise DomainError(f"skill {s.name}: leave-support is an effect, not a precondition")
            if l.derived and where != "pre" and not (where == "del" and l.predicate == "leave-support"):
                raise DomainError(f"skill {s.name}: derived condition {l.name} not allowed in {where}")
    overlap = set(s.add_effects) & set(s.delete_effects)
    if overlap:
        raise DomainError(f"skill {s.name}: {sorted(map(str, overlap))} both added and deleted")


def standard_domain() -> list[SkillSchema]:
    """The six block-manipulation skills with their fixed preconditions and effects."""
    return [
        SkillSchema(
            "ReachOnTable", 1,
            preconditions=(lit(ON_TOP, 0), lit(IN_WORKSPACE, 0), lit("on-table", 0), lit("hand-empty"), lit("not-close", 0)),
            add_effects=(lit(IN_HAND, 0),),
            delete_effects=(lit(ON_TOP, 0),),
            source="learned",
        ),
        SkillSchema(
            "ReachOnTower", 1,
            preconditions=(lit(ON_TOP, 0), lit(IN_WORKSPACE, 0), neg("on-table", 0), lit("hand-empty")),
            add_effects=(lit(IN_HAND, 0),),
            delete_effects=(lit(ON_TOP, 0), lit("leave-support", 0)),
            source="learned",
        ),
        SkillSchema(
            "Stack", 2,
            preconditions=(lit(IN_HAND, 0), lit(ON_TOP, 1), lit(IN_WORKSPACE, 1)),
            add_effects=(lit(ON, 0, 1), lit(ON_TOP, 0)),
            delete_effects=(lit(IN_HAND, 0), lit(ON_TOP, 1)),
            source="learned",
        ),
        SkillSchema(
            "Unstack", 1,
            preconditions=(lit(IN_HAND, 0),),
            add_effects=(lit(ON_TOP, 0), lit(IN_WORKSPACE, 0)),
            delete_effects=(lit(IN_HAND, 0),),
            source="manual",
        ),
        SkillSchema(
            "Pull", 1,
            preconditions=(neg(IN_WORKSPACE, 0), lit(ON_TOP, 0), lit("on-table", 0), lit("hand-empty")),
            add_effects=(lit(IN_WORKSPACE, 0),),
            source="manual",
        ),
        SkillSchema(
            "Singulate", 2,
            preconditions=(lit(CLOSE, 0, 1), lit("on-table", 0), lit("on-table", 1), lit("hand-empty")),
            delete_effects=(lit(CLOSE, 0, 1),),
            source="manual",
            symmetric=True,
        ),
    ]


class GroundedSkill:
    """A skill schema bound to concrete, pairwise distinct objects."""

    __slots__ = ("schema", "args", "_key", "_hash")

    def __init__(self, schema: SkillSchema, args: Sequence[ObjectId]):
        args = tuple(args)
        if len(args) != schema.arity:
            raise ValueError(f"{schema.name} expects {schema.arity} args, got {len(args)}")
        if len(set(args)) != len(args):
            raise ValueError(f"{schema.name}: arguments must be distinct, got {[a.name for a in args]}")
        self.schema = schema
        self.args: tuple[ObjectId, ...] = args
        self._key = (schema.name, tuple(a.index for a in args))
        self._hash = hash(self._key)

    @property
    def name(self) -> str:
        return self.schema.name

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GroundedSkill) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "GroundedSkill") -> bool:
        return self._key < other._key

    def __str__(self) -> str:
        return f"{self.schema.name}({','.join(a.name for a in self.args)})"

    __repr__ = __str__


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundedSkill, ...] = ()

    def __init__(self, steps: Iterable[GroundedSkill] = ()):
        object.__setattr__(self, "steps", tuple(steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i: int) -> GroundedSkill:
        return self.steps[i]

    def to_text(self) -> str:
        return "".join(f"{i}: {s}\n" for i, s in enumerate(self.steps))


def ground_skills(schemas: Sequence[SkillSchema], universe: Universe) -> list[GroundedSkill]:
    """All groundings over distinct objects: schema order, then lexicographic args."""
    out: list[GroundedSkill] = []
    for schema in schemas:
        if schema.symmetric:
            tuples = itertools.combinations(universe.objects, schema.arity)
        else:
            tuples = itertools.permutations(universe.objects, schema.arity)
        out.extend(GroundedSkill(schema, args) for args in tuples)
    return out


@dataclass(frozen=True)
class GroundLiterals:
    """Preconditions and effects of a grounded skill over a concrete universe."""

    pos: frozenset[Atom]
    neg: frozenset[Atom]
    # each group needs at least one member true
    any_of: tuple[frozenset[Atom], ...]
    add: frozenset[Atom]
    delete: frozenset[Atom]
    # object whose supporting block is released on application, if any
    leave_support: ObjectId | None = None


def _resolve(slot: int | str, args: tuple[ObjectId, ...], universe: Universe) -> ObjectId:
    return args[slot] if isinstance(slot, int) else universe[slot]


def _expand_derived(l: Literal, args, universe: Universe) -> tuple[list[Atom], list[Atom]]:
    """Return (atoms that must all be absent, atoms of which one must be present)."""
    objs = [_resolve(s, args, universe) for s in l.slots]
    if l.predicate == "hand-empty":
        members = [Atom(IN_HAND, (z,)) for z in universe]
    elif l.predicate == "on-table":
        x = objs[0]
        members = [Atom(IN_HAND, (x,))] + [Atom(ON, (x, y)) for y in universe if y != x]
    elif l.predicate == "not-close":
        x = objs[0]
        members = [Atom(CLOSE, (x, y)) for y in universe if y != x]
        # not-close is itself a negative condition; its negation asks for some Close
        return (members, []) if l.positive else ([], members)
    else:
        raise DomainError(f"cannot expand {l} as a precondition")
    return (members, []) if l.positive else ([], members)


def ground_literals(skill: GroundedSkill, universe: Universe) -> GroundLiterals:
    pos: set[Atom] = set()
    negs: set[Atom] = set()
    any_of: list[frozenset[Atom]] = []
    for l in skill.schema.preconditions:
        if l.derived:
            absent, one_of = _expand_derived(l, skill.args, universe)
            negs.update(absent)
            if one_of:
                any_of.append(frozenset(one_of))
        else:
            a = Atom(l.predicate, tuple(_resolve(s, skill.args, universe) for s in l.slots))
            (pos if l.positive else negs).add(a)
    add = frozenset(
        Atom(l.predicate, tuple(_resolve(s, skill.args, universe) for s in l.slots)) for l in skill.schema.add_effects
    )
    delete: set[Atom] = set()
    leave = None
    for l in skill.schema.delete_effects:
        if l.derived:
            leave = _resolve(l.slots[0], skill.args, universe)
        else:
            delete.add(Atom(l.predicate, tuple(_resolve(s, skill.args, universe) for s in l.slots)))
    return GroundLiterals(frozenset(pos), frozenset(negs), tuple(any_of), add, frozenset(delete), leave)


_LITERAL_CACHE: dict[tuple[GroundedSkill, Universe], GroundLiterals] = {}


def _literals(skill: GroundedSkill, universe: Universe) -> GroundLiterals:
    key = (skill, universe)
    gl = _LITERAL_CACHE.get(key)
    if gl is None:
        gl = _LITERAL_CACHE[key] = ground_literals(skill, universe)
    return gl


def preconditions_hold(skill: GroundedSkill, state: LogicalState, universe: Universe) -> bool:
    gl = _literals(skill, universe)
    atoms = state.atoms
    return gl.pos <= atoms and gl.neg.isdisjoint(atoms) and all(not g.isdisjoint(atoms) for g in gl.any_of)


def apply_effects(skill: GroundedSkill, state: LogicalState, universe: Universe) -> LogicalState:
    """``(state | add) - delete``, resolving the released support from ``state``.

    Raises :class:`InapplicableSkill` when the skill releases a support but the
    held block does not rest on exactly one block in ``state``.
    """
    gl = _literals(skill, universe)
    add, delete = gl.add, gl.delete
    if gl.leave_support is not None:
        x = gl.leave_support
        unders = [a for a in state.atoms if a.name == "On" and a.args[0] == x]
        if len(unders) != 1:
            raise InapplicableSkill(f"{skill}: {x} rests on {len(unders)} blocks")
        add = add | {Atom(ON_TOP, (unders[0].args[1],))}
        delete = delete | {unders[0]}
    return LogicalState((state.atoms | add) - delete)


@dataclass(frozen=True)
class CompiledSkill:
    """Bitmask form of a grounded skill used by the planner."""

    skill: GroundedSkill
    pos: int
    neg: int
    any_of: tuple[int, ...]
    add: int
    delete: int
    # (On(x, y) bit, OnTop(y) bit) for each candidate support y
    support: tuple[tuple[int, int], ...] = ()

    def applicable(self, m: int) -> bool:
        if m & self.pos != self.pos or m & self.neg:
            return False
        for group in self.any_of:
            if not m & group:
                return False
        return True

    def apply(self, m: int) -> int | None:
        add, delete = self.add, self.delete
        if self.support:
            hits = [pair for pair in self.support if m & pair[0]]
            if len(hits) != 1:
                return None
            delete |= hits[0][0]
            add |= hits[0][1]
        return (m | add) & ~delete


class Domain:
    """A skill library grounded over a universe, with a fixed atom indexing."""

    def __init__(self, schemas: Sequence[SkillSchema], universe: Universe):
        self.schemas = list(schemas)
        self.universe = universe
        self.predicates = _predicates_of(self.schemas)
        self.atoms = ground_all(universe, self.predicates)
        self.index = {a: i for i, a in enumerate(self.atoms)}
        self.skills = ground_skills(self.schemas, universe)
        self.compiled = [self._compile(s) for s in self.skills]
        self.by_name = {str(s): s for s in self.skills}
        # atoms some skill can make true; anything else is static
        achievable = 0
        for c in self.compiled:
            achievable |= c.add
            for _, top in c.support:
                achievable |= top
        self.achievable = achievable

    @classmethod
    def blocks(cls, n: int = 4) -> "Domain":
        return cls(standard_domain(), Universe.blocks(n))

    def mask(self, atoms: Iterable[Atom]) -> int:
        m = 0
        for a in atoms:
            m |= 1 << self.index[a]
        return m

    def state_mask(self, state: LogicalState) -> int:
        return self.mask(a for a in state.atoms if a in self.index)

    def state_of(self, m: int) -> LogicalState:
        return LogicalState(a for i, a in enumerate(self.atoms) if m >> i & 1)

    def skill(self, text: str) -> GroundedSkill:
        """Look up a grounded skill by ``Name(a,b)``; object aliases are accepted."""
        m = re.match(r"^\s*(\w+)\(([^()]*)\)\s*$", text)
        if not m:
            raise ValueError(f"malformed skill {text!r}")
        name, argstr = m.groups()
        args = [self.universe[a.strip()] for a in argstr.split(",")] if argstr.strip() else []
        key = f"{name}({','.join(a.name for a in args)})"
        if key not in self.by_name:
            raise ValueError(f"unknown grounded skill {text!r}")
        return self.by_name[key]

    def preconditions_hold(self, skill: GroundedSkill, state: LogicalState) -> bool:
        return preconditions_hold(skill, state, self.universe)

    def apply_effects(self, skill: GroundedSkill, state: LogicalState) -> LogicalState:
        return apply_effects(skill, state, self.universe)

    def _compile(self, skill: GroundedSkill) -> CompiledSkill:
        gl = ground_literals(skill, self.universe)
        support: tuple[tuple[int, int], ...] = ()
        if gl.leave_support is not None:
            x = gl.leave_support
            support = tuple(
                (1 << self.index[Atom(ON, (x, y))], 1 << self.index[Atom(ON_TOP, (y,))])
                for y in self.universe if y != x
            )
        return CompiledSkill(
            skill, self.mask(gl.pos), self.mask(gl.neg), tuple(self.mask(g) for g in gl.any_of),
            self.mask(gl.add), self.mask(gl.delete), support,
        )


def _predicates_of(schemas: Sequence[SkillSchema]) -> tuple[PredicateSchema, ...]:
    preds = list(BLOCK_PREDICATES)
    for s in schemas:
        for l in (*s.preconditions, *s.add_effects, *s.delete_effects):
            if not l.derived and l.predicate not in preds:
                preds.append(l.predicate)
    return tuple(preds)


# ---------------------------------------------------------------------------
# domain file format

_HEADER_RE = re.compile(r"^skill\s+([A-Za-z_]\w*)(?:\(([^()]*)\))?\s*/\s*(\d+)\s*:\s*$")
_LIT_RE = re.compile(r"^(!?)([A-Za-z_][\w-]*)(?:\(([^()]*)\))?$")


def _split_top(text: str) -> list[tuple[str, int]]:
    """Split on commas outside parentheses; returns (piece, offset) pairs."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append((text[start:i], start))
            start = i + 1
    parts.append((text[start:], start))
    return [(p.strip(), off + len(p) - len(p.lstrip())) for p, off in parts if p.strip()]


def parse_domain(text: str, predicates: Sequence[PredicateSchema] = BLOCK_PREDICATES) -> list[SkillSchema]:
    """Parse a domain file into skill schemas.

    Extra predicates can be declared with ``predicate Name/arity`` lines
    (append ``symmetric`` for unordered binary predicates).
    """
    preds = {p.name: p for p in predicates}
    schemas: list[SkillSchema] = []
    names: set[str] = set()
    cur: dict | None = None

    def finish():
        if cur is None:
            return
        try:
            schemas.append(SkillSchema(
                cur["name"], cur["arity"], tuple(cur["pre"]), tuple(cur["add"]), tuple(cur["del"]),
                cur["source"], cur["symmetric"],
            ))
        except DomainError as e:
            raise DomainError(str(e), cur["line"], 1) from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if indent == 0:
            if body.startswith("predicate "):
                m = re.match(r"^predicate\s+([A-Za-z_]\w*)\s*/\s*(\d+)(\s+symmetric)?\s*$", body)
                if not m:
                    raise DomainError(f"malformed predicate declaration {body!r}", lineno, 1)
                try:
                    p = PredicateSchema(m.group(1), int(m.group(2)), bool(m.group(3)))
                except ValueError as e:
                    raise DomainError(str(e), lineno, 1) from None
                if p.name in preds and preds[p.name] != p:
                    raise DomainError(f"predicate {p.name} redeclared differently", lineno, 1)
                preds[p.name] = p
                continue
            m = _HEADER_RE.match(body)
            if not m:
                raise DomainError(f"expected 'skill <Name>/<arity>:', got {body!r}", lineno, 1)
            finish()
            name, params, arity = m.group(1), m.group(2), int(m.group(3))
            if name in names:
                raise DomainError(f"duplicate skill {name}", lineno, 7)
            names.add(name)
            param_names: list[str] = []
            if params is not None:
                param_names = [p.strip() for p in params.split(",") if p.strip()]
                if len(param_names) != arity:
                    raise DomainError(
                        f"arity mismatch: {name} declares {arity} parameter(s) but lists {len(param_names)}",
                        lineno, 7 + len(name),
                    )
            cur = {"name": name, "arity": arity, "params": param_names, "pre": [], "add": [], "del": [],
                   "source": "learned", "symmetric": False, "line": lineno}
            continue
        if cur is None:
            raise DomainError("indented line outside a skill block", lineno, indent + 1)
        key, sep, rest = body.partition(":")
        key = key.strip()
        if not sep:
            raise DomainError(f"expected '<field>: ...', got {body!r}", lineno, indent + 1)
        value_col = indent + len(key) + 2
        if key == "source":
            cur["source"] = rest.strip()
        elif key == "symmetric":
            v = rest.strip().lower()
            if v not in ("true", "false", "yes", "no"):
                raise DomainError(f"symmetric expects true/false, got {v!r}", lineno, value_col)
            cur["symmetric"] = v in ("true", "yes")
        elif key in ("pre", "add", "del"):
            for piece, off in _split_top(rest):
                cur[key].append(_parse_literal(piece, cur, preds, lineno, value_col + off))
        else:
            raise DomainError(f"unknown field {key!r}", lineno, indent + 1)
    finish()
    return schemas


def _parse_literal(piece: str, cur: dict, preds: dict, lineno: int, col: int) -> Literal:
    m = _LIT_RE.match(piece.replace(" ", ""))
    if not m:
        raise DomainError(f"malformed literal {piece!r}", lineno, col)
    bang, name, argstr = m.groups()
    slots: list[int | str] = []
    if argstr:
        for tok in argstr.split(","):
            if tok.startswith("$"):
                if not tok[1:].isdigit():
                    raise DomainError(f"bad parameter {tok!r}", lineno, col)
                slots.append(int(tok[1:]))
            elif tok in cur["params"]:
                slots.append(cur["params"].index(tok))
            else:
                slots.append(tok)
    for s in slots:
        if isinstance(s, int) and s >= cur["arity"]:
            raise DomainError(f"arity mismatch: ${s} used in {cur['name']}/{cur['arity']}", lineno, col)
    if name in DERIVED:
        want = DERIVED_ARITY[name]
        if len(slots) != want:
            raise DomainError(f"arity mismatch: {name} takes {want} argument(s)", lineno, col)
        return Literal(name, tuple(slots), not bang)
    if name not in preds:
        raise DomainError(f"unknown predicate {name!r}", lineno, col)
    p = preds[name]
    if len(slots) != p.arity:
        raise DomainError(f"arity mismatch: {name} takes {p.arity} argument(s), got {len(slots)}", lineno, col)
    return Literal(p, tuple(slots), not bang)


def serialize_domain(schemas: Sequence[SkillSchema]) -> str:
    lines: list[str] = []
    for p in _predicates_of(schemas):
        if p not in BLOCK_PREDICATES:
            lines.append(f"predicate {p.name}/{p.arity}" + (" symmetric" if p.symmetric else ""))
    for s in schemas:
        lines.append(f"skill {s.name}/{s.arity}:")
        lines.append(f"    source: {s.source}")
        if s.symmetric:
            lines.append("    symmetric: true")
        for key, group in (("pre", s.preconditions), ("add", s.add_effects), ("del", s.delete_effects)):
            if group:
                lines.append(f"    {key}: " + ", ".join(str(l) for l in group))
    return "\n".join(lines) + ("\n" if lines else "")

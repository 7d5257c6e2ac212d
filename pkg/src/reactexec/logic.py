"""Objects, predicates, grounded atoms and logical states."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


@dataclass(frozen=True, order=True)
class ObjectId:
    index: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    arity: int
    # symmetric binary predicates are stored with the lower index first
    symmetric: bool = False

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError(f"predicate {self.name}: arity must be 1 or 2, got {self.arity}")
        if self.symmetric and self.arity != 2:
            raise ValueError(f"predicate {self.name}: only binary predicates can be symmetric")


ON = PredicateSchema("On", 2)
IN_HAND = PredicateSchema("InHand", 1)
ON_TOP = PredicateSchema("OnTop", 1)
IN_WORKSPACE = PredicateSchema("InWorkspace", 1)
CLOSE = PredicateSchema("Close", 2, symmetric=True)

BLOCK_PREDICATES = (ON, IN_HAND, ON_TOP, IN_WORKSPACE, CLOSE)
LEARNED_PREDICATES = frozenset({"On", "InHand", "OnTop"})
MANUAL_PREDICATES = frozenset({"InWorkspace", "Close"})

BLOCK_NAMES = ("BlockRed", "BlockGreen", "BlockBlue", "BlockYellow")


class Universe:
    """A fixed, densely indexed set of objects.

    Objects can be looked up by full name or by a short alias. For names of the
    form ``Block<Color>`` the alias is the lowercase initial of the color, so
    ``r`` resolves to ``BlockRed``.
    """

    def __init__(self, names: Sequence[str]):
        if not names:
            raise ValueError("universe must contain at least one object")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate object names in {list(names)}")
        self.objects: tuple[ObjectId, ...] = tuple(ObjectId(i, n) for i, n in enumerate(names))
        self._lookup: dict[str, ObjectId] = {o.name: o for o in self.objects}
        aliases: dict[str, list[ObjectId]] = {}
        for o in self.objects:
            if o.name.startswith("Block") and len(o.name) > 5:
                aliases.setdefault(o.name[5].lower(), []).append(o)
        for alias, objs in aliases.items():
            if len(objs) == 1 and alias not in self._lookup:
                self._lookup[alias] = objs[0]
        self._hash = hash(self.objects)

    @classmethod
    def blocks(cls, n: int = 4) -> "Universe":
        if n <= len(BLOCK_NAMES):
            return cls(BLOCK_NAMES[:n])
        return cls([f"b{i}" for i in range(n)])

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self) -> Iterator[ObjectId]:
        return iter(self.objects)

    def __getitem__(self, key: int | str) -> ObjectId:
        if isinstance(key, int):
            return self.objects[key]
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"unknown object {key!r}") from None

    def __contains__(self, obj: object) -> bool:
        return isinstance(obj, ObjectId) and obj.index < len(self.objects) and self.objects[obj.index] == obj

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Universe) and self.objects == other.objects

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Universe({[o.name for o in self.objects]})"


class Atom:
    """A predicate applied to concrete objects, e.g. ``On(BlockRed,BlockGreen)``.

    Atoms hash and compare by predicate name and argument tuple and sort by
    (name, argument indices).
    """

    __slots__ = ("schema", "args", "_key", "_hash")

    def __init__(self, schema: PredicateSchema, args: Sequence[ObjectId]):
        args = tuple(args)
        if len(args) != schema.arity:
            raise ValueError(f"{schema.name} expects {schema.arity} args, got {len(args)}")
        if schema.symmetric and args[0].index > args[1].index:
            args = (args[1], args[0])
        self.schema = schema
        self.args: tuple[ObjectId, ...] = args
        self._key = (schema.name, tuple(a.index for a in args), tuple(a.name for a in args))
        self._hash = hash(self._key)

    @property
    def name(self) -> str:
        return self.schema.name

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atom) and self._key == other._key

    def __lt__(self, other: "Atom") -> bool:
        return self._key < other._key

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return f"{self.schema.name}({','.join(a.name for a in self.args)})"

    __repr__ = __str__


def atom(schema: PredicateSchema, *args: ObjectId) -> Atom:
    return Atom(schema, tuple(args))


_ATOM_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\(([^()\s]*)\)$")


def parse_atom(text: str, universe: Universe, schemas: Iterable[PredicateSchema] = BLOCK_PREDICATES) -> Atom:
    """Parse ``Name(a)`` or ``Name(a,b)``. Object tokens may be names or aliases."""
    m = _ATOM_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed atom {text!r}")
    by_name = {s.name: s for s in schemas}
    name, argstr = m.groups()
    if name not in by_name:
        raise ValueError(f"unknown predicate {name!r}")
    args = tuple(universe[a] for a in argstr.split(",")) if argstr else ()
    return Atom(by_name[name], args)


def ground_all(universe: Universe, schemas: Sequence[PredicateSchema] = BLOCK_PREDICATES) -> list[Atom]:
    """Every well-formed atom, in schema order then lexicographic argument order.

    Reflexive binary atoms are never produced; symmetric predicates yield one
    atom per unordered pair.
    """
    out: list[Atom] = []
    for schema in schemas:
        if schema.arity == 1:
            out.extend(Atom(schema, (o,)) for o in universe)
        elif schema.symmetric:
            out.extend(Atom(schema, pair) for pair in itertools.combinations(universe.objects, 2))
        else:
            out.extend(Atom(schema, pair) for pair in itertools.permutations(universe.objects, 2))
    return out


@dataclass(frozen=True)
class LogicalState:
    atoms: frozenset[Atom] = frozenset()

    def __init__(self, atoms: Iterable[Atom] = ()):
        object.__setattr__(self, "atoms", frozenset(atoms))

    def __contains__(self, a: Atom) -> bool:
        return a in self.atoms

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def union(self, atoms: Iterable[Atom]) -> "LogicalState":
        return LogicalState(self.atoms.union(atoms))

    def difference(self, atoms: Iterable[Atom]) -> "LogicalState":
        return LogicalState(self.atoms.difference(atoms))

    def of(self, predicate: str) -> list[Atom]:
        return sorted(a for a in self.atoms if a.name == predicate)

    def __str__(self) -> str:
        return "{" + ", ".join(str(a) for a in self) + "}"


@dataclass(frozen=True)
class GoalConditions:
    atoms: frozenset[Atom] = frozenset()

    def __init__(self, atoms: Iterable[Atom] = ()):
        object.__setattr__(self, "atoms", frozenset(atoms))

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def __str__(self) -> str:
        return ", ".join(str(a) for a in self)


def satisfies(state: LogicalState, goal: GoalConditions) -> bool:
    return goal.atoms <= state.atoms


def hand_empty(state: LogicalState) -> bool:
    return not any(a.name == "InHand" for a in state.atoms)


def on_table(state: LogicalState, x: ObjectId) -> bool:
    return not any(
        (a.name == "InHand" and a.args[0] == x) or (a.name == "On" and a.args[0] == x)
        for a in state.atoms
    )


def is_consistent(state: LogicalState, universe: Universe | None = None) -> bool:
    """Physical sanity of the On/InHand/OnTop part of a state.

    On must be a partial injection without cycles, at most one block is held,
    a held block is in no On relation and is not OnTop, and OnTop(X) holds
    exactly when X is neither held nor covered. Without a universe, only
    objects mentioned by some atom are checked for the OnTop condition.
    """
    below: dict[ObjectId, ObjectId] = {}
    above: dict[ObjectId, ObjectId] = {}
    held: set[ObjectId] = set()
    on_top: set[ObjectId] = set()
    objects: set[ObjectId] = set(universe.objects) if universe is not None else set()
    for a in state.atoms:
        objects.update(a.args)
        if a.name == "On":
            x, y = a.args
            if x in below or y in above:
                return False
            below[x] = y
            above[y] = x
        elif a.name == "InHand":
            held.add(a.args[0])
        elif a.name == "OnTop":
            on_top.add(a.args[0])
    if len(held) > 1:
        return False
    for h in held:
        if h in below or h in above or h in on_top:
            return False
    for x in below:
        seen = {x}
        y = below.get(x)
        while y is not None:
            if y in seen:
                return False
            seen.add(y)
            y = below.get(y)
    for x in objects:
        if (x in on_top) != (x not in held and x not in above):
            return False
    return True

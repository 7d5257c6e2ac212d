"""Independent blocks-world reference model for the tests.

States are frozensets of plain tuples such as ``("On", "r", "g")``. The six
skills are re-implemented here from their written definitions, without using
the package's literal machinery, so planner results can be cross-checked.
"""

from __future__ import annotations

import itertools
from collections import deque


def held(s):
    return [a[1] for a in s if a[0] == "InHand"]


def below(s, x):
    return [a[2] for a in s if a[0] == "On" and a[1] == x]


def on_table(s, x):
    return ("InHand", x) not in s and not below(s, x)


def close_to(s, x):
    return any(a[0] == "Close" and x in a[1:] for a in s)


def successors(s, blocks):
    """(skill text, next state) pairs; skill text matches the package's str form."""
    out = []
    empty = not held(s)
    for x in blocks:
        if ("OnTop", x) in s and ("InWorkspace", x) in s and on_table(s, x) and empty and not close_to(s, x):
            out.append((f"ReachOnTable({x})", (s | {("InHand", x)}) - {("OnTop", x)}))
        if ("OnTop", x) in s and ("InWorkspace", x) in s and empty and not on_table(s, x):
            ys = below(s, x)
            if len(ys) == 1:
                y = ys[0]
                out.append((f"ReachOnTower({x})",
                            (s | {("InHand", x), ("OnTop", y)}) - {("OnTop", x), ("On", x, y)}))
        if ("InHand", x) in s:
            out.append((f"Unstack({x})", (s | {("OnTop", x), ("InWorkspace", x)}) - {("InHand", x)}))
        if ("InWorkspace", x) not in s and ("OnTop", x) in s and on_table(s, x) and empty:
            out.append((f"Pull({x})", s | {("InWorkspace", x)}))
    for x, y in itertools.permutations(blocks, 2):
        if ("InHand", x) in s and ("OnTop", y) in s and ("InWorkspace", y) in s:
            out.append((f"Stack({x},{y})", (s | {("On", x, y), ("OnTop", x)}) - {("InHand", x), ("OnTop", y)}))
    for x, y in itertools.combinations(blocks, 2):
        if ("Close", x, y) in s and on_table(s, x) and on_table(s, y) and empty:
            out.append((f"Singulate({x},{y})", s - {("Close", x, y)}))
    return [(k, frozenset(v)) for k, v in out]


def distances(start, blocks, limit=None):
    """BFS distance from ``start`` to every reachable state."""
    dist = {start: 0}
    q = deque([start])
    while q:
        s = q.popleft()
        if limit is not None and dist[s] >= limit:
            continue
        for _, n in successors(s, blocks):
            if n not in dist:
                dist[n] = dist[s] + 1
                q.append(n)
    return dist


def shortest(start, goal, blocks, limit=None):
    """Length of a shortest plan reaching a superset of ``goal``, or None."""
    goal = frozenset(goal)
    best = None
    for s, d in distances(start, blocks, limit).items():
        if goal <= s and (best is None or d < best):
            best = d
    return best


def tower(order, blocks):
    """All blocks in workspace, ``order`` stacked top to bottom, the rest on the table."""
    s = {("InWorkspace", b) for b in blocks}
    for a, b in zip(order, order[1:]):
        s.add(("On", a, b))
    covered = set(order[1:])
    s |= {("OnTop", b) for b in blocks if b not in covered}
    return frozenset(s)


def tower_goal(order):
    return frozenset(("On", a, b) for a, b in zip(order, order[1:]))


def to_tuples(state):
    """Package LogicalState -> oracle tuples (object names)."""
    return frozenset((a.name, *(o.name for o in a.args)) for a in state.atoms)


def configurations(blocks):
    """Every physically possible On/InHand/OnTop assignment, by brute force over support maps."""
    out = []
    for hand in [None, *blocks]:
        rest = [b for b in blocks if b != hand]
        for choice in itertools.product([None, *rest], repeat=len(rest)):
            sup = dict(zip(rest, choice))
            if any(sup[b] == b for b in rest):
                continue
            under = [v for v in sup.values() if v is not None]
            if len(under) != len(set(under)):
                continue
            # acyclic: walking down from any block reaches the table
            ok = True
            for b in rest:
                seen, cur = set(), b
                while cur is not None:
                    if cur in seen:
                        ok = False
                        break
                    seen.add(cur)
                    cur = sup[cur]
                if not ok:
                    break
            if not ok:
                continue
            s = {("On", x, y) for x, y in sup.items() if y is not None}
            s |= {("OnTop", b) for b in rest if b not in under}
            if hand is not None:
                s.add(("InHand", hand))
            out.append(frozenset(s))
    return out


def from_tuples(tuples, universe):
    from reactexec.logic import BLOCK_PREDICATES, Atom, LogicalState

    schemas = {p.name: p for p in BLOCK_PREDICATES}
    return LogicalState(Atom(schemas[t[0]], [universe[n] for n in t[1:]]) for t in tuples)


def consistent_states(blocks):
    """Every consistent state: configurations times all workspace and closeness flags."""
    pairs = list(itertools.combinations(blocks, 2))
    flags = [frozenset(c) for k in range(len(blocks) + 1) for c in itertools.combinations(blocks, k)]
    closes = [frozenset(c) for k in range(len(pairs) + 1) for c in itertools.combinations(pairs, k)]
    out = []
    for config in configurations(blocks):
        for inws in flags:
            for close in closes:
                out.append(config | {("InWorkspace", b) for b in inws} | {("Close", a, b) for a, b in close})
    return out


def all_atoms(blocks):
    out = [("On", a, b) for a, b in itertools.permutations(blocks, 2)]
    out += [(p, b) for p in ("InHand", "OnTop", "InWorkspace") for b in blocks]
    out += [("Close", a, b) for a, b in itertools.combinations(blocks, 2)]
    return out

"""The implicit configuration multigraph of a projection uniform Hamiltonian.

Vertices are n-bit strings.  For every term ``i`` whose groundspace subset
``S_i^x`` contains ``x``, each ``y`` in ``S_i^x`` (``x`` itself included) is
joined to ``x`` by ``M / |S_i^x|`` parallel edges, with ``M = (2^k)!``.  All
edge counts are exact Python integers.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .instance import Hamiltonian, LocalTerm, to_str


def edge_unit(h: Hamiltonian) -> int:
    """``M = (2^k)!`` for the instance locality ``k``."""
    return math.factorial(2 ** h.k)


def degree_bound(h: Hamiltonian) -> int:
    return h.m * 2 ** h.k * edge_unit(h)


def local_pattern(t: LocalTerm, x: str) -> str:
    return "".join(x[q] for q in t.qubits)


def subset_containing(t: LocalTerm, x: str) -> tuple[str, ...] | None:
    """``S_i^x`` as full n-bit strings, or None when x lies in no subset of the term."""
    j = t.subset_of.get(local_pattern(t, x))
    if j is None:
        return None
    chars = list(x)
    out = []
    for pat in t.subsets[j]:
        for q, b in zip(t.qubits, pat):
            chars[q] = b
        out.append("".join(chars))
    return tuple(out)


@dataclass(frozen=True)
class NeighborSet:
    entries: dict[str, int]
    degree: int


def neighbors(h: Hamiltonian, x: str) -> NeighborSet:
    if len(x) != h.n:
        raise ValueError(f"string {x!r} has length {len(x)}, expected {h.n}")
    unit = edge_unit(h)
    entries: dict[str, int] = {}
    for t in h.terms:
        sub = subset_containing(t, x)
        if sub is None:
            continue
        mult = unit // len(sub)
        for y in sub:
            entries[y] = entries.get(y, 0) + mult
    entries = dict(sorted(entries.items()))
    return NeighborSet(entries, sum(entries.values()))


def is_bad(h: Hamiltonian, x: str) -> bool:
    """True iff some term has ``<x|P_i|x> = 0``, i.e. x lies in none of its subsets."""
    return any(local_pattern(t, x) not in t.subset_of for t in h.terms)


def bad_terms(h: Hamiltonian, x: str) -> list[int]:
    return [i for i, t in enumerate(h.terms) if local_pattern(t, x) not in t.subset_of]


@dataclass(frozen=True)
class CutStats:
    boundary: int
    volume: int
    conductance: Fraction

    @property
    def conductance_float(self) -> float:
        return float(self.conductance)


def cut_stats(h: Hamiltonian, S, include_self_loops: bool = True) -> CutStats:
    """Multiplicity-weighted boundary, volume and conductance of a vertex set."""
    S = set(S)
    if not S:
        raise ValueError("cut_stats needs a non-empty set")
    boundary = volume = 0
    for x in S:
        nb = neighbors(h, x)
        if nb.degree == 0:
            raise ValueError(f"{x} has degree 0 (it lies in no subset of some term)")
        for y, mult in nb.entries.items():
            if y == x:
                if include_self_loops:
                    volume += mult
                continue
            volume += mult
            if y not in S:
                boundary += mult
    return CutStats(boundary, volume, Fraction(boundary, volume))


@dataclass(frozen=True)
class Component:
    strings: frozenset[str]
    has_bad: bool
    complete: bool
    bad: frozenset[str] = frozenset()


def connected_component(h: Hamiltonian, x: str, node_budget: int = 1 << 16) -> Component:
    """Breadth-first closure of ``x`` under the neighbor relation.

    ``complete`` is False when the budget ran out before the closure finished.
    """
    if node_budget <= 0:
        raise ValueError("node_budget must be positive")
    seen = {x}
    bad = set()
    queue = deque([x])
    while queue:
        cur = queue.popleft()
        if is_bad(h, cur):
            bad.add(cur)
        for y in neighbors(h, cur).entries:
            if y not in seen:
                if len(seen) >= node_budget:
                    return Component(frozenset(seen), bool(bad), False, frozenset(bad))
                seen.add(y)
                queue.append(y)
    return Component(frozenset(seen), bool(bad), True, frozenset(bad))


def boundary_vertices(h: Hamiltonian, support) -> set[str]:
    """Strings of ``support`` sharing a groundspace subset with some string outside it."""
    support = set(support)
    out = set()
    for x in support:
        for t in h.terms:
            sub = subset_containing(t, x)
            if sub is not None and any(y not in support for y in sub):
                out.add(x)
                break
    return out


def bad_strings(h: Hamiltonian) -> list[str]:
    return [to_str(x, h.n) for x in range(2 ** h.n) if is_bad(h, to_str(x, h.n))]

"""Backtracking subgraph isomorphism for substructure membership tests.

Matching preserves element labels and exact bond orders; target atoms may
carry extra bonds, charges or isotopes (the embedding is not induced).
Disconnected patterns are supported: each component must embed on a
disjoint atom set.
"""

from __future__ import annotations

from .graph import MolecularGraph


def subgraph_match(target: MolecularGraph, pattern: MolecularGraph) -> bool:
    """True iff ``pattern`` embeds in ``target``."""
    if len(pattern) == 0:
        return True
    if len(pattern) > len(target) or len(pattern.bonds) > len(target.bonds):
        return False
    used: set[int] = set()
    for component in pattern.components():
        if not _match_component(target, pattern, component, used):
            return False
    return True


def _match_component(
    target: MolecularGraph,
    pattern: MolecularGraph,
    component: list[int],
    used: set[int],
) -> bool:
    order = _search_order(pattern, component)
    return _extend(target, pattern, order, 0, {}, used)


def _search_order(pattern: MolecularGraph, component: list[int]) -> list[int]:
    """BFS order from the most connected atom keeps the search anchored."""
    start = max(component, key=pattern.degree)
    order = [start]
    seen = {start}
    cursor = 0
    while cursor < len(order):
        node = order[cursor]
        cursor += 1
        for nbr, _ in pattern.neighbors(node):
            if nbr not in seen:
                seen.add(nbr)
                order.append(nbr)
    return order


def _extend(
    target: MolecularGraph,
    pattern: MolecularGraph,
    order: list[int],
    depth: int,
    mapping: dict[int, int],
    used: set[int],
) -> bool:
    if depth == len(order):
        return True
    p = order[depth]
    p_atom = pattern.atoms[p]
    anchored = [
        (q, o) for q, o in pattern.neighbors(p) if q in mapping
    ]
    if anchored:
        q, o = anchored[0]
        candidates = [
            t for t, border in target.neighbors(mapping[q]) if border == o
        ]
    else:
        candidates = list(range(len(target)))
    for t in candidates:
        if t in used:
            continue
        t_atom = target.atoms[t]
        if t_atom.element != p_atom.element:
            continue
        if target.degree(t) < pattern.degree(p):
            continue
        ok = True
        for q, o in anchored:
            bond = target.bond_between(t, mapping[q])
            if bond is None or bond.order != o:
                ok = False
                break
        if not ok:
            continue
        mapping[p] = t
        used.add(t)
        if _extend(target, pattern, order, depth + 1, mapping, used):
            return True
        del mapping[p]
        used.discard(t)
    return False

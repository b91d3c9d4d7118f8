"""Kekulization: assign alternating double bonds to aromatic ring systems.

Aromatic atoms that must receive one double bond are identified by electron
parity, then paired off by a perfect matching over the aromatic bonds. When
no assignment exists (or an aromatic atom sits outside any ring) the
offending atoms are demoted to plain single-bonded form and an aromaticity
diagnostic is recorded, so the operation is total.
"""

from __future__ import annotations

from dataclasses import replace
from typing import TYPE_CHECKING

from .graph import GraphBuilder, MolecularGraph
from .valence import AROMATIC_VALENCE_ELECTRONS, ValenceTable

if TYPE_CHECKING:  # circular import guard; Diagnostic lives in parser
    from .parser import Diagnostic

_MATCH_STEP_LIMIT = 200_000


def kekulize(
    graph: MolecularGraph, table: ValenceTable | None = None
) -> tuple[MolecularGraph, list["Diagnostic"]]:
    """Return a kekulized copy of ``graph`` plus aromaticity diagnostics."""
    from .parser import Diagnostic, ErrorClass

    has_aromatic = any(a.aromatic for a in graph.atoms) or any(
        b.aromatic for b in graph.bonds
    )
    if not has_aromatic:
        return graph, []

    diagnostics: list[Diagnostic] = []
    builder = GraphBuilder()
    for atom in graph.atoms:
        builder.add_atom(atom)
    for bond in graph.bonds:
        builder.add_bond(bond.a, bond.b, bond.order, bond.aromatic)

    bridges = _find_bridges(graph)
    aromatic_atoms = {i for i, a in enumerate(graph.atoms) if a.aromatic}

    # Aromatic-flagged bonds must join two aromatic atoms; an explicit ':'
    # between plain atoms is an error. Bonds between aromatic atoms that are
    # not part of any ring (e.g. the biphenyl linker) silently become single.
    ring_bonds: set[tuple[int, int]] = set()
    for bond in graph.bonds:
        if not bond.aromatic:
            continue
        if bond.a not in aromatic_atoms or bond.b not in aromatic_atoms:
            diagnostics.append(
                Diagnostic(
                    ErrorClass.AROMATICITY,
                    position=min(bond.a, bond.b),
                    message=(
                        f"aromatic bond {bond.a}-{bond.b} joins "
                        "non-aromatic atoms"
                    ),
                    recovery_action="demoted to single bond",
                )
            )
            builder.set_bond(bond.a, bond.b, 1, aromatic=False)
        elif bond.key in bridges:
            builder.set_bond(bond.a, bond.b, 1, aromatic=False)
        else:
            ring_bonds.add(bond.key)

    adjacency: dict[int, list[int]] = {}
    for a, b in ring_bonds:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    # Aromatic atoms with no surviving aromatic ring bond cannot be part of
    # any aromatic system.
    for i in sorted(aromatic_atoms):
        if i not in adjacency:
            diagnostics.append(
                Diagnostic(
                    ErrorClass.AROMATICITY,
                    position=i,
                    message=f"aromatic atom {i} is outside any aromatic ring",
                    recovery_action="demoted to non-aromatic atom",
                )
            )
            builder.set_atom(i, replace(graph.atoms[i], aromatic=False))

    for component in _components(adjacency):
        needs = {i: _needs_double_bond(graph, i) for i in component}
        ok = _component_is_aromatic(component, adjacency, needs, graph)
        matching: dict[int, int] | None = None
        if ok:
            needy = [i for i in component if needs[i]]
            matching = _perfect_matching(needy, adjacency, needs)
            ok = matching is not None
        if ok and matching is not None:
            for a in component:
                builder.set_atom(a, replace(graph.atoms[a], aromatic=False))
            for a, b in ring_bonds:
                if a in needs:  # bond lies inside this component
                    order = 2 if matching.get(a) == b else 1
                    builder.set_bond(a, b, order, aromatic=False)
        else:
            diagnostics.append(
                Diagnostic(
                    ErrorClass.AROMATICITY,
                    position=min(component),
                    message=(
                        "aromatic ring system at atoms "
                        f"{sorted(component)} cannot be kekulized"
                    ),
                    recovery_action="demoted to single bonds",
                )
            )
            for a in component:
                builder.set_atom(a, replace(graph.atoms[a], aromatic=False))
            for a, b in ring_bonds:
                if a in needs:
                    builder.set_bond(a, b, 1, aromatic=False)

    return builder.build(), diagnostics


def _needs_double_bond(graph: MolecularGraph, i: int) -> bool:
    """Electron parity: an odd free-electron count demands one double bond."""
    atom = graph.atoms[i]
    electrons = AROMATIC_VALENCE_ELECTRONS.get(atom.element, 4)
    used = sum(order for _, order in graph.neighbors(i))
    hydrogens = atom.explicit_hydrogens or 0
    if (
        atom.element == "C"
        and atom.explicit_hydrogens is None
        and atom.charge == 0
        and graph.degree(i) == 2
    ):
        hydrogens = 1  # bare aromatic carbon with two ring bonds carries one H
    free = electrons - atom.charge - used - hydrogens
    return free % 2 != 0


def _pi_electron_count(
    component: list[int],
    needs: dict[int, bool],
    graph: MolecularGraph,
) -> int:
    total = 0
    for i in component:
        if needs[i]:
            total += 1
        else:
            atom = graph.atoms[i]
            electrons = AROMATIC_VALENCE_ELECTRONS.get(atom.element, 4)
            used = sum(order for _, order in graph.neighbors(i))
            free = electrons - atom.charge - used - (atom.explicit_hydrogens or 0)
            total += 2 if free >= 2 else 0
    return total


def _component_is_aromatic(
    component: list[int],
    adjacency: dict[int, list[int]],
    needs: dict[int, bool],
    graph: MolecularGraph,
) -> bool:
    """Monocycles must satisfy the 4n+2 electron rule; fused systems are
    judged by matchability alone."""
    if all(len(adjacency[i]) == 2 for i in component):
        return _pi_electron_count(component, needs, graph) % 4 == 2
    return True


def _components(adjacency: dict[int, list[int]]) -> list[list[int]]:
    seen: set[int] = set()
    out: list[list[int]] = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            node = stack.pop()
            comp.append(node)
            for nbr in adjacency[node]:
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        out.append(sorted(comp))
    return out


def _perfect_matching(
    needy: list[int],
    adjacency: dict[int, list[int]],
    needs: dict[int, bool],
) -> dict[int, int] | None:
    """Pair every needy atom with a needy neighbor; None when impossible.

    Degree-one propagation resolves the bulk; the remainder is settled by
    backtracking with a step limit that, if ever hit, simply reports failure
    (the caller demotes the system, preserving totality).
    """
    if len(needy) % 2 != 0:
        return None
    candidates = {
        i: [j for j in adjacency[i] if needs.get(j, False)] for i in needy
    }
    matching: dict[int, int] = {}
    steps = 0

    def backtrack(unmatched: set[int]) -> bool:
        nonlocal steps
        steps += 1
        if steps > _MATCH_STEP_LIMIT:
            return False
        if not unmatched:
            return True
        # Propagate forced pairings first.
        forced = None
        best = None
        for i in unmatched:
            options = [j for j in candidates[i] if j in unmatched]
            if not options:
                return False
            if len(options) == 1:
                forced = (i, options)
                break
            if best is None or len(options) < len(best[1]):
                best = (i, options)
        pick, options = forced if forced is not None else best  # type: ignore[misc]
        for j in options:
            matching[pick] = j
            matching[j] = pick
            unmatched.discard(pick)
            unmatched.discard(j)
            if backtrack(unmatched):
                return True
            unmatched.add(pick)
            unmatched.add(j)
            del matching[pick]
            del matching[j]
        return False

    if backtrack(set(needy)):
        return matching
    return None


def _find_bridges(graph: MolecularGraph) -> set[tuple[int, int]]:
    """Edges whose removal disconnects the graph (iterative low-link)."""
    n = len(graph)
    visited = [False] * n
    disc = [0] * n
    low = [0] * n
    bridges: set[tuple[int, int]] = set()
    timer = 0
    for root in range(n):
        if visited[root]:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            node, parent, state = stack.pop()
            if state == 0:
                if visited[node]:
                    continue
                visited[node] = True
                disc[node] = low[node] = timer
                timer += 1
                stack.append((node, parent, 1))
                for nbr, _ in graph.neighbors(node):
                    if not visited[nbr]:
                        stack.append((nbr, node, 0))
            else:
                for nbr, _ in graph.neighbors(node):
                    if nbr == parent:
                        continue
                    low[node] = min(low[node], low[nbr] if disc[nbr] > disc[node] else disc[nbr])
                    if disc[nbr] > disc[node] and low[nbr] > disc[node]:
                        key = (node, nbr) if node < nbr else (nbr, node)
                        bridges.add(key)
                if parent != -1:
                    low[parent] = min(low[parent], low[node])
        # reset nothing; disc/low persist per component
    return bridges

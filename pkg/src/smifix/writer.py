"""Serialization back to SMILES, including a canonical form.

Canonical ranks come from iterative neighborhood refinement seeded with atom
invariants; remaining ties are resolved by trying every member of the lowest
tied class and keeping the lexicographically smallest output, which makes
the canonical string independent of input atom order. The writer itself is
total: semantically invalid graphs serialize fine, which lets reports show a
molecule before correction.
"""

from __future__ import annotations

from .graph import MolecularGraph
from .valence import ORGANIC_SUBSET

_SEARCH_LEAF_LIMIT = 50_000
_BOND_TEXT = {1: "", 2: "=", 3: "#"}
_MAX_RING_DIGIT = 99


def canonical_rank(graph: MolecularGraph) -> tuple[int, ...]:
    """Total order over atoms, invariant under relabeling of the input."""
    fragments = _canonical_fragments(graph)
    ranks = [0] * len(graph)
    counter = 0
    for _, order in fragments:
        for atom in order:
            ranks[atom] = counter
            counter += 1
    return tuple(ranks)


def canonical_smiles(graph: MolecularGraph) -> str:
    """One string per isomorphism class; idempotent under re-parsing."""
    return ".".join(text for text, _ in _canonical_fragments(graph))


def write_smiles(graph: MolecularGraph, ranks: list[int] | None = None) -> str:
    """Serialize; with explicit ``ranks`` the DFS follows that order instead
    of the canonical one."""
    if ranks is None:
        return canonical_smiles(graph)
    components = graph.components()
    components.sort(key=lambda comp: min(ranks[i] for i in comp))
    parts = []
    for comp in components:
        start = min(comp, key=lambda i: ranks[i])
        parts.append(_component_text(graph, start, list(ranks)))
    return ".".join(parts)


def graphs_equivalent(a: MolecularGraph, b: MolecularGraph) -> bool:
    """Isomorphism as labeled graphs, via canonical-form equality."""
    if len(a) != len(b) or len(a.bonds) != len(b.bonds):
        return False
    return canonical_smiles(a) == canonical_smiles(b)


def _canonical_fragments(graph: MolecularGraph) -> list[tuple[str, list[int]]]:
    """Per-component canonical (text, atom order), sorted by text."""
    fragments = [
        _canonicalize_component(graph, comp) for comp in graph.components()
    ]
    fragments.sort(key=lambda item: item[0])
    return fragments


def _initial_invariants(graph: MolecularGraph, members: list[int]) -> dict[int, tuple]:
    out = {}
    for i in members:
        atom = graph.atoms[i]
        out[i] = (
            atom.element,
            atom.charge,
            atom.isotope or 0,
            -1 if atom.explicit_hydrogens is None else atom.explicit_hydrogens,
            graph.degree(i),
            sum(order for _, order in graph.neighbors(i)),
        )
    return out


def _refine(graph: MolecularGraph, colors: dict[int, int]) -> dict[int, int]:
    """Stable neighborhood refinement; never merges classes."""
    members = list(colors)
    while True:
        keys = {
            i: (
                colors[i],
                tuple(
                    sorted((order, colors[j]) for j, order in graph.neighbors(i))
                ),
            )
            for i in members
        }
        palette = {key: rank for rank, key in enumerate(sorted(set(keys.values())))}
        new_colors = {i: palette[keys[i]] for i in members}
        if len(set(new_colors.values())) == len(set(colors.values())):
            return new_colors
        colors = new_colors


def _canonicalize_component(
    graph: MolecularGraph, members: list[int]
) -> tuple[str, list[int]]:
    initial = _initial_invariants(graph, members)
    palette = {key: rank for rank, key in enumerate(sorted(set(initial.values())))}
    colors = _refine(graph, {i: palette[initial[i]] for i in members})
    budget = [_SEARCH_LEAF_LIMIT]
    text, order = _search(graph, members, colors, budget)
    return text, order


def _search(
    graph: MolecularGraph,
    members: list[int],
    colors: dict[int, int],
    budget: list[int],
) -> tuple[str, list[int]]:
    classes: dict[int, list[int]] = {}
    for i in members:
        classes.setdefault(colors[i], []).append(i)
    tied = sorted(c for c, group in classes.items() if len(group) > 1)
    if not tied:
        ranks = [0] * len(graph.atoms)
        for i in members:
            ranks[i] = colors[i]
        start = min(members, key=lambda i: colors[i])
        text = _component_text(graph, start, ranks)
        order = sorted(members, key=lambda i: colors[i])
        return text, order
    target = tied[0]
    best: tuple[str, list[int]] | None = None
    for member in sorted(classes[target]):
        if budget[0] <= 0 and best is not None:
            break
        budget[0] -= 1
        split = {i: colors[i] * 2 for i in members}
        split[member] -= 1
        candidate = _search(graph, members, _refine(graph, split), budget)
        if best is None or candidate[0] < best[0]:
            best = candidate
    assert best is not None
    return best


def _atom_text(graph: MolecularGraph, i: int) -> str:
    atom = graph.atoms[i]
    plain = (
        atom.element in ORGANIC_SUBSET
        and atom.charge == 0
        and atom.isotope is None
        and atom.explicit_hydrogens is None
    )
    if plain:
        return atom.element
    parts = ["["]
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(atom.element)
    if atom.explicit_hydrogens:
        parts.append("H" if atom.explicit_hydrogens == 1 else f"H{atom.explicit_hydrogens}")
    if atom.charge:
        if atom.charge == 1:
            parts.append("+")
        elif atom.charge == -1:
            parts.append("-")
        else:
            parts.append(f"{atom.charge:+d}")
    parts.append("]")
    return "".join(parts)


def _component_text(graph: MolecularGraph, start: int, ranks: list[int]) -> str:
    """Emit one connected component as text, DFS in rank order."""
    # Discovery pass: spanning tree plus ring-closure edges.
    preorder: dict[int, int] = {start: 0}
    parent: dict[int, int | None] = {start: None}
    children: dict[int, list[int]] = {start: []}
    ring_partners: dict[int, list[int]] = {}
    seen_ring_edges: set[tuple[int, int]] = set()
    stack: list[tuple[int, list[int], int]] = [
        (start, _ordered_neighbors(graph, start, ranks), 0)
    ]
    while stack:
        node, nbrs, cursor = stack.pop()
        advanced = False
        while cursor < len(nbrs):
            nbr = nbrs[cursor]
            cursor += 1
            if nbr not in preorder:
                preorder[nbr] = len(preorder)
                parent[nbr] = node
                children[node].append(nbr)
                children[nbr] = []
                stack.append((node, nbrs, cursor))
                stack.append((nbr, _ordered_neighbors(graph, nbr, ranks), 0))
                advanced = True
                break
            if nbr != parent[node]:
                key = (node, nbr) if node < nbr else (nbr, node)
                if key not in seen_ring_edges:
                    seen_ring_edges.add(key)
                    ring_partners.setdefault(node, []).append(nbr)
                    ring_partners.setdefault(nbr, []).append(node)
        if advanced:
            continue

    # Emission pass.
    out: list[str] = []
    digit_for: dict[tuple[int, int], int] = {}
    dropped: set[tuple[int, int]] = set()
    free_digits = list(range(1, _MAX_RING_DIGIT + 1))
    emit_stack: list[tuple[str, int, int] | str] = [("atom", start, 0)]
    while emit_stack:
        item = emit_stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        _, node, bond_in = item
        out.append(_BOND_TEXT.get(bond_in, ""))
        out.append(_atom_text(graph, node))
        partners = sorted(
            ring_partners.get(node, ()), key=lambda p: preorder[p]
        )
        for partner in partners:
            key = (node, partner) if node < partner else (partner, node)
            if key in dropped:
                continue
            if key in digit_for:
                digit = digit_for.pop(key)
                bond = graph.bond_between(node, partner)
                out.append(_BOND_TEXT[bond.order if bond else 1])
                out.append(_digit_text(digit))
                free_digits.append(digit)
                free_digits.sort()
            else:
                if not free_digits:
                    dropped.add(key)
                    continue
                digit = free_digits.pop(0)
                digit_for[key] = digit
                out.append(_digit_text(digit))
        kids = children[node]
        pushes: list[tuple[str, int, int] | str] = []
        for index, kid in enumerate(kids):
            bond = graph.bond_between(node, kid)
            order = bond.order if bond else 1
            last = index == len(kids) - 1
            if last:
                pushes.append(("atom", kid, order))
            else:
                pushes.append("(")
                pushes.append(("atom", kid, order))
                pushes.append(")")
        emit_stack.extend(reversed(pushes))
    return "".join(out)


def _ordered_neighbors(
    graph: MolecularGraph, node: int, ranks: list[int]
) -> list[int]:
    return sorted((nbr for nbr, _ in graph.neighbors(node)), key=lambda j: ranks[j])


def _digit_text(digit: int) -> str:
    return str(digit) if digit < 10 else f"%{digit:02d}"

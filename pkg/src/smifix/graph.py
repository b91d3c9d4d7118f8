"""Immutable molecular graph with valence arithmetic.

Hydrogens are never materialised as graph atoms; they exist only through the
``explicit_hydrogens`` field of bracket atoms and through valence arithmetic.
Aromatic flags are transient: they survive a lenient parse and are cleared by
kekulization, after which all bond orders are integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .valence import DEFAULT_TABLE, ValenceTable


@dataclass(frozen=True)
class Atom:
    """A graph node carrying the attributes a bracket atom can specify."""

    element: str
    charge: int = 0
    explicit_hydrogens: int | None = None
    isotope: int | None = None
    aromatic: bool = False

    def label(self) -> tuple:
        """Attributes that distinguish atoms for equivalence purposes."""
        return (self.element, self.charge, self.explicit_hydrogens, self.isotope)


@dataclass(frozen=True)
class Bond:
    """An undirected edge; at most one bond may exist per atom pair."""

    a: int
    b: int
    order: int = 1
    aromatic: bool = False

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("self-loop bond")
        if self.order not in (1, 2, 3):
            raise ValueError(f"bond order {self.order} out of range")

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


class MolecularGraph:
    """Atoms plus bonds; construction validates indices and uniqueness."""

    __slots__ = ("atoms", "_bonds", "_adjacency")

    def __init__(self, atoms: Iterable[Atom], bonds: Iterable[Bond] = ()) -> None:
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        n = len(self.atoms)
        bond_map: dict[tuple[int, int], Bond] = {}
        for bond in bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond {bond.key} references missing atom")
            if bond.key in bond_map:
                raise ValueError(f"duplicate bond {bond.key}")
            bond_map[bond.key] = bond
        self._bonds = bond_map
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for (i, j), bond in bond_map.items():
            adjacency[i].append((j, bond.order))
            adjacency[j].append((i, bond.order))
        self._adjacency: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(sorted(nbrs)) for nbrs in adjacency
        )

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def bonds(self) -> tuple[Bond, ...]:
        return tuple(self._bonds[key] for key in sorted(self._bonds))

    def bond_between(self, i: int, j: int) -> Bond | None:
        key = (i, j) if i < j else (j, i)
        return self._bonds.get(key)

    def neighbors(self, i: int) -> tuple[tuple[int, int], ...]:
        """Sorted ``(neighbor index, bond order)`` pairs of atom ``i``."""
        return self._adjacency[i]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, in order of smallest member."""
        seen = [False] * len(self.atoms)
        out: list[list[int]] = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                node = stack.pop()
                comp.append(node)
                for nbr, _ in self._adjacency[node]:
                    if not seen[nbr]:
                        seen[nbr] = True
                        stack.append(nbr)
            out.append(sorted(comp))
        return out


def used_valence(graph: MolecularGraph, atom: int) -> int:
    """Sum of incident bond orders plus the atom's explicit hydrogen count."""
    if not 0 <= atom < len(graph):
        raise IndexError(f"atom index {atom} out of range")
    total = sum(order for _, order in graph.neighbors(atom))
    hydrogens = graph.atoms[atom].explicit_hydrogens
    return total + (hydrogens or 0)


def free_valence(
    graph: MolecularGraph, atom: int, table: ValenceTable = DEFAULT_TABLE
) -> int:
    """Remaining bond capacity of ``atom``; negative when over-bonded.

    Uses the smallest allowed valence that accommodates the current bonds;
    if even the largest allowed valence is exceeded the (negative) slack
    against that largest valence is returned.
    """
    used = used_valence(graph, atom)
    node = graph.atoms[atom]
    allowed = table.allowed_valences(node.element, node.charge)
    for valence in allowed:
        if valence >= used:
            return valence - used
    return allowed[-1] - used


def is_semantically_valid(
    graph: MolecularGraph, table: ValenceTable = DEFAULT_TABLE
) -> bool:
    """True iff every atom has non-negative free valence."""
    return all(free_valence(graph, i, table) >= 0 for i in range(len(graph)))


class GraphBuilder:
    """Mutable accumulator used by the parsers and the grammar decoder."""

    def __init__(self) -> None:
        self.atoms: list[Atom] = []
        self.bonds: dict[tuple[int, int], Bond] = {}

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        return len(self.atoms) - 1

    def has_bond(self, i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return key in self.bonds

    def add_bond(self, i: int, j: int, order: int = 1, aromatic: bool = False) -> None:
        bond = Bond(i, j, order, aromatic)
        if bond.key in self.bonds:
            raise ValueError(f"duplicate bond {bond.key}")
        self.bonds[bond.key] = bond

    def set_bond(self, i: int, j: int, order: int, aromatic: bool = False) -> None:
        key = (i, j) if i < j else (j, i)
        self.bonds[key] = Bond(key[0], key[1], order, aromatic)

    def set_atom(self, i: int, atom: Atom) -> None:
        self.atoms[i] = atom

    def bond_order_sum(self, i: int) -> int:
        return sum(
            bond.order for bond in self.bonds.values() if i in (bond.a, bond.b)
        )

    def build(self) -> MolecularGraph:
        return MolecularGraph(self.atoms, self.bonds.values())


def relabel(graph: MolecularGraph, permutation: list[int]) -> MolecularGraph:
    """Return a copy with atom ``i`` moved to index ``permutation[i]``."""
    n = len(graph)
    if sorted(permutation) != list(range(n)):
        raise ValueError("not a permutation")
    atoms: list[Atom | None] = [None] * n
    for i, atom in enumerate(graph.atoms):
        atoms[permutation[i]] = atom
    bonds = [
        replace(bond, a=permutation[bond.a], b=permutation[bond.b])
        for bond in graph.bonds
    ]
    return MolecularGraph([a for a in atoms if a is not None], bonds)

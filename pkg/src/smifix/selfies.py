"""Grammar-constrained molecular string codec.

Every sequence of alphabet symbols decodes to a semantically valid graph:
the decoder tracks the head atom's remaining bond capacity and silently
reduces, reroutes or drops anything the capacity cannot accommodate. The
encoder is the correction entry point: it serializes even semantically
invalid graphs, relying on the subsequent decode to restore validity.

Symbol lexemes are bracketed strings such as ``[C]``, ``[=O]``, ``[Branch1]``
and ``[Ring1]``; ``[ε]`` is the pad symbol and ``.`` separates fragments.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .graph import Atom, GraphBuilder, MolecularGraph
from .valence import DEFAULT_TABLE, ValenceTable

EPSILON_RAW = "[ε]"
_EPSILON_ALIASES = {"ε", "epsilon", "nop"}
_INDEX_BASE = 16


class SymbolKind(enum.Enum):
    ATOM = "atom"
    BRANCH = "branch"
    RING = "ring"
    EPSILON = "epsilon"
    DOT = "dot"


@dataclass(frozen=True)
class SelfiesSymbol:
    kind: SymbolKind
    order: int = 1  # bond prefix: 1 bare, 2 '=', 3 '#'
    element: str = ""
    charge: int = 0
    hydrogens: int | None = None
    digits: int = 0  # index-digit count for BRANCH/RING, 1..3

    @property
    def raw(self) -> str:
        prefix = {1: "", 2: "=", 3: "#"}[self.order]
        if self.kind is SymbolKind.EPSILON:
            return EPSILON_RAW
        if self.kind is SymbolKind.DOT:
            return "."
        if self.kind is SymbolKind.BRANCH:
            return f"[{prefix}Branch{self.digits}]"
        if self.kind is SymbolKind.RING:
            return f"[{prefix}Ring{self.digits}]"
        h = "" if self.hydrogens is None else f"H{self.hydrogens}"
        q = f"{self.charge:+d}" if self.charge else ""
        return f"[{prefix}{self.element}{h}{q}]"


EPSILON = SelfiesSymbol(SymbolKind.EPSILON)
DOT = SelfiesSymbol(SymbolKind.DOT)


def atom_symbol(
    element: str,
    order: int = 1,
    charge: int = 0,
    hydrogens: int | None = None,
) -> SelfiesSymbol:
    return SelfiesSymbol(
        SymbolKind.ATOM,
        order=order,
        element=element,
        charge=charge,
        hydrogens=hydrogens,
    )


def branch_symbol(digits: int, order: int = 1) -> SelfiesSymbol:
    return SelfiesSymbol(SymbolKind.BRANCH, order=order, digits=digits)


def ring_symbol(digits: int, order: int = 1) -> SelfiesSymbol:
    return SelfiesSymbol(SymbolKind.RING, order=order, digits=digits)


_SYMBOL_RE = re.compile(
    r"""^\[(?P<prefix>=|\#)?(?:
        (?P<struct>Branch|Ring)(?P<size>[1-3])
        |
        (?P<element>[A-Z][a-z]?)
        (?:H(?P<hydrogens>\d*))?
        (?P<charge>\+\d+|-\d+|\++|-+)?
    )\]$""",
    re.VERBOSE,
)


def parse_symbol(lexeme: str) -> SelfiesSymbol | None:
    """Decode one lexeme; None when it fits no symbol shape."""
    if lexeme == ".":
        return DOT
    if (
        lexeme.startswith("[")
        and lexeme.endswith("]")
        and lexeme[1:-1] in _EPSILON_ALIASES
    ):
        return EPSILON
    match = _SYMBOL_RE.match(lexeme)
    if match is None:
        return None
    order = {None: 1, "=": 2, "#": 3}[match.group("prefix")]
    if match.group("struct"):
        kind = (
            SymbolKind.BRANCH if match.group("struct") == "Branch" else SymbolKind.RING
        )
        return SelfiesSymbol(kind, order=order, digits=int(match.group("size")))
    hydrogens_text = match.group("hydrogens")
    hydrogens = None
    if hydrogens_text is not None:
        hydrogens = int(hydrogens_text) if hydrogens_text else 1
    charge_text = match.group("charge")
    if charge_text is None:
        charge = 0
    elif len(charge_text) > 1 and charge_text[1:].isdigit():
        charge = int(charge_text)
    else:
        charge = charge_text.count("+") - charge_text.count("-")
    return atom_symbol(
        match.group("element"), order=order, charge=charge, hydrogens=hydrogens
    )


def alphabet(table: ValenceTable = DEFAULT_TABLE) -> tuple[SelfiesSymbol, ...]:
    """The full symbol set, in index order.

    The 14 core symbols come first in their fixed order, then the remaining
    ring and branch variants, then one atom symbol per (bond prefix, element)
    pair for every extended element of the valence table, elements sorted
    alphabetically and prefixes ascending.
    """
    core = [
        EPSILON,
        atom_symbol("F"),
        atom_symbol("O", order=2),
        atom_symbol("N", order=3),
        atom_symbol("O"),
        atom_symbol("N"),
        atom_symbol("N", order=2),
        atom_symbol("C"),
        atom_symbol("C", order=2),
        atom_symbol("C", order=3),
        branch_symbol(1),
        branch_symbol(2),
        branch_symbol(3),
        ring_symbol(1),
    ]
    extra: list[SelfiesSymbol] = [ring_symbol(2), ring_symbol(3)]
    for order in (2, 3):
        for size in (1, 2, 3):
            extra.append(branch_symbol(size, order=order))
    for order in (2, 3):
        for size in (1, 2, 3):
            extra.append(ring_symbol(size, order=order))
    core_elements = {"C", "N", "O", "F"}
    for element in sorted(e.symbol for e in table.elements):
        if element in core_elements:
            continue
        cap = min(3, table.max_valence(element))
        for order in range(1, cap + 1):
            extra.append(atom_symbol(element, order=order))
    return tuple(core + extra)


def symbol_index_map(
    table: ValenceTable = DEFAULT_TABLE,
) -> dict[SelfiesSymbol, int]:
    """Symbol to 1-based index; stable across runs for a given table."""
    return {symbol: i + 1 for i, symbol in enumerate(alphabet(table))}


_KNOWN_RAW: set[str] | None = None


def _default_known_raw() -> set[str]:
    global _KNOWN_RAW
    if _KNOWN_RAW is None:
        _KNOWN_RAW = {symbol.raw for symbol in alphabet()}
        _KNOWN_RAW.add(".")
    return _KNOWN_RAW


def tokenize_selfies(
    text: str, table: ValenceTable | None = None
) -> list[tuple[str, bool]]:
    """Split into (lexeme, in_alphabet) pairs covering the whole input.

    Bracket pairs form one lexeme each; every character outside a bracket
    pair is its own lexeme. Only alphabet symbols (and the ``.`` fragment
    separator) count as in-alphabet.
    """
    if table is None:
        known = _default_known_raw()
    else:
        known = {symbol.raw for symbol in alphabet(table)}
        known.add(".")
    out: list[tuple[str, bool]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "[":
            end = text.find("]", i + 1)
            if end == -1:
                out.append((ch, False))
                i += 1
                continue
            lexeme = text[i : end + 1]
            symbol = parse_symbol(lexeme)
            out.append((lexeme, symbol is not None and symbol.raw in known))
            i = end + 1
        else:
            out.append((ch, ch == "."))
            i += 1
    return out


def edit_invalid(
    text: str, table: ValenceTable | None = None
) -> list[SelfiesSymbol]:
    """Drop every token outside the alphabet; always yields a valid sequence."""
    symbols = []
    for lexeme, ok in tokenize_selfies(text, table):
        if ok:
            parsed = parse_symbol(lexeme)
            assert parsed is not None
            symbols.append(parsed)
    return symbols


@dataclass(frozen=True)
class DecodeStep:
    """What the decoder did with one symbol."""

    symbol: str
    action: str
    atom: int | None = None
    partner: int | None = None
    requested: int | None = None
    placed: int | None = None


@dataclass
class DecodeResult:
    graph: MolecularGraph
    trace: list[DecodeStep] = field(default_factory=list)


def decode(
    symbols: list[SelfiesSymbol], table: ValenceTable = DEFAULT_TABLE
) -> DecodeResult:
    """Derive a semantically valid graph from any symbol sequence.

    Derivation state is the head atom's remaining bond capacity ``k``. An
    atom symbol requesting bond order ``b`` binds with ``min(b, k, c)`` for
    element capacity ``c``; saturating the head (or a pad symbol) terminates
    the current scope, discarding its remaining symbols. A branch symbol
    reads its index digits, derives that many following symbols as a
    sub-scope bonded to the same head with a capped initial order, then
    resumes with the capacity the branch actually consumed. A ring symbol
    closes a bond to the atom placed ``Q+1`` steps earlier when capacity on
    both ends allows, and is skipped entirely when it does not.
    """
    decoder = _Decoder(table)
    fragment: list[SelfiesSymbol] = []
    for symbol in symbols:
        if symbol.kind is SymbolKind.DOT:
            decoder.run_fragment(fragment)
            decoder.trace.append(DecodeStep(symbol.raw, "fragment_separator"))
            fragment = []
        else:
            fragment.append(symbol)
    decoder.run_fragment(fragment)
    return DecodeResult(graph=decoder.builder.build(), trace=decoder.trace)


def decode_string(text: str, table: ValenceTable = DEFAULT_TABLE) -> DecodeResult:
    """Edit the raw text down to alphabet symbols, then decode."""
    return decode(edit_invalid(text), table)


class _Decoder:
    def __init__(self, table: ValenceTable) -> None:
        self.table = table
        self.builder = GraphBuilder()
        self.ledger: list[int] = []  # per-atom remaining capacity
        self.trace: list[DecodeStep] = []
        self.index_map = symbol_index_map(table)

    def run_fragment(self, symbols: list[SelfiesSymbol]) -> None:
        if symbols:
            self._derive(symbols, 0, len(symbols), head=None, k=0, branch_cap=None)

    def _read_digits(self, symbols, i, end, count) -> tuple[int, int]:
        value = 0
        for _ in range(count):
            digit = 0
            if i < end:
                digit = self.index_map.get(symbols[i], 1) - 1
                self.trace.append(
                    DecodeStep(symbols[i].raw, "index_digit", placed=digit)
                )
                i += 1
            value = value * _INDEX_BASE + digit
        return value, i

    def _place_atom(
        self, symbol: SelfiesSymbol, bond_to: int | None, max_order: int
    ) -> tuple[int, int] | None:
        """Add the atom, bonded to ``bond_to`` with at most ``max_order``.

        Returns (atom index, placed bond order); None when the atom has no
        capacity left for any bond, in which case nothing is added.
        """
        capacity = self.table.max_valence(symbol.element, symbol.charge)
        hydrogens = symbol.hydrogens
        if hydrogens is not None and hydrogens > capacity:
            hydrogens = capacity  # keep the atom itself within valence
        effective = capacity - (hydrogens or 0)
        if bond_to is None:
            idx = self.builder.add_atom(
                Atom(symbol.element, symbol.charge, hydrogens)
            )
            self.ledger.append(effective)
            self.trace.append(DecodeStep(symbol.raw, "atom", atom=idx, placed=0))
            return idx, 0
        order = min(symbol.order, max_order, effective)
        if order <= 0:
            self.trace.append(DecodeStep(symbol.raw, "ignored"))
            return None
        idx = self.builder.add_atom(Atom(symbol.element, symbol.charge, hydrogens))
        self.ledger.append(effective - order)
        self.builder.add_bond(bond_to, idx, order)
        self.ledger[bond_to] -= order
        self.trace.append(
            DecodeStep(
                symbol.raw,
                "atom" if order == symbol.order else "atom_reduced",
                atom=idx,
                partner=bond_to,
                requested=symbol.order,
                placed=order,
            )
        )
        return idx, order

    def _derive(
        self,
        symbols: list[SelfiesSymbol],
        i: int,
        end: int,
        head: int | None,
        k: int,
        branch_cap: int | None,
    ) -> int:
        """Derive one scope; returns the initial bond order it consumed."""
        first_order = 0
        parent = head if branch_cap is not None else None
        while i < end:
            symbol = symbols[i]
            i += 1
            kind = symbol.kind

            if branch_cap is not None:
                # Branch-start state: the first atom binds to the parent head
                # with a capped order; a pad symbol yields a lone carbon.
                if kind is SymbolKind.EPSILON:
                    placed = self._place_atom(atom_symbol("C"), parent, 1)
                    return placed[1] if placed else 0
                if kind is not SymbolKind.ATOM:
                    self.trace.append(DecodeStep(symbol.raw, "ignored"))
                    continue
                placed = self._place_atom(symbol, parent, branch_cap)
                if placed is None:
                    continue
                head, first_order = placed
                k = self.ledger[head]
                branch_cap = None
                if k == 0:
                    return first_order
                continue

            if head is None:
                # Initial state: an atom ignores its bond prefix and becomes
                # the head; everything else is a no-op.
                if kind is SymbolKind.ATOM:
                    placed = self._place_atom(symbol, None, 0)
                    assert placed is not None
                    head = placed[0]
                    k = self.ledger[head]
                    if k == 0:
                        return first_order
                else:
                    self.trace.append(DecodeStep(symbol.raw, "ignored"))
                continue

            # Regular state: head set and k >= 1.
            if kind is SymbolKind.EPSILON:
                self.trace.append(DecodeStep(symbol.raw, "terminated"))
                return first_order

            if kind is SymbolKind.ATOM:
                placed = self._place_atom(symbol, head, k)
                if placed is None:
                    continue
                head = placed[0]
                k = self.ledger[head]
                if k == 0:
                    return first_order
                continue

            if kind is SymbolKind.BRANCH:
                if k < 2:
                    self.trace.append(DecodeStep(symbol.raw, "ignored"))
                    continue
                value, i = self._read_digits(symbols, i, end, symbol.digits)
                length = value + 1
                sub_end = min(i + length, end)
                cap = _branch_cap(symbol.digits, symbol.order, k)
                self.trace.append(
                    DecodeStep(
                        symbol.raw, "branch", atom=head, requested=cap, placed=length
                    )
                )
                used = self._derive(symbols, i, sub_end, head, 0, cap)
                i = sub_end
                # Rings inside the branch may have consumed head capacity
                # beyond the branch bond itself, so resync with the ledger.
                k = min(k - used, self.ledger[head])
                if k == 0:
                    return first_order
                continue

            if kind is SymbolKind.RING:
                value, i = self._read_digits(symbols, i, end, symbol.digits)
                target = max(0, head - (value + 1))
                order = min(symbol.order, k, self.ledger[target])
                if (
                    target == head
                    or self.builder.has_bond(head, target)
                    or order <= 0
                ):
                    self.trace.append(
                        DecodeStep(
                            symbol.raw, "ring_skipped", atom=head, partner=target
                        )
                    )
                    continue
                self.builder.add_bond(head, target, order)
                self.ledger[head] -= order
                self.ledger[target] -= order
                k -= order
                self.trace.append(
                    DecodeStep(
                        symbol.raw,
                        "ring",
                        atom=head,
                        partner=target,
                        requested=symbol.order,
                        placed=order,
                    )
                )
                if k == 0:
                    return first_order
                continue

            # Stray DOT symbols only reach here via direct _derive calls.
            self.trace.append(DecodeStep(symbol.raw, "ignored"))
        return first_order


def _branch_cap(digits: int, prefix_order: int, k: int) -> int:
    """Maximum initial bond order granted to a branch opened at capacity k.

    Unprefixed branch symbols follow the derivation table's pattern (one
    digit grants a single bond; two or three digits grant k-1 or k-2); a
    bond prefix requests that order directly. The result always leaves the
    main chain at least one unit of capacity.
    """
    if prefix_order == 1:
        raw = (1, k - 1, k - 2)[digits - 1]
    else:
        raw = prefix_order
    return max(1, min(raw, 3, k - 1))


def encode(
    graph: MolecularGraph, ranks: list[int] | None = None
) -> list[SelfiesSymbol]:
    """Serialize a kekulized graph as a symbol sequence.

    No validity check is performed; decoding the result restores validity.
    ``ranks`` fixes the traversal order (defaults to canonical ranks).
    Isotope labels have no symbol form and are dropped.
    """
    if ranks is None:
        from .writer import canonical_rank

        ranks = list(canonical_rank(graph))
    components = graph.components()
    components.sort(key=lambda comp: min(ranks[i] for i in comp))
    out: list[SelfiesSymbol] = []
    position: dict[int, int] = {}
    for index, comp in enumerate(components):
        if index:
            out.append(DOT)
        start = min(comp, key=lambda i: ranks[i])
        out.extend(_encode_component(graph, start, ranks, position))
    return out


def encode_to_string(
    graph: MolecularGraph, ranks: list[int] | None = None
) -> str:
    return "".join(symbol.raw for symbol in encode(graph, ranks))


def _encode_component(
    graph: MolecularGraph,
    start: int,
    ranks: list[int],
    position: dict[int, int],
) -> list[SelfiesSymbol]:
    parent: dict[int, int | None] = {start: None}
    children: dict[int, list[int]] = {start: []}
    ring_close_at: dict[int, list[int]] = {}
    seen_ring: set[tuple[int, int]] = set()

    position[start] = len(position)
    stack = [(start, iter(_rank_sorted(graph, start, ranks)))]
    while stack:
        node, nbrs = stack[-1]
        advanced = False
        for nbr in nbrs:
            if nbr not in parent:
                parent[nbr] = node
                children[node].append(nbr)
                children[nbr] = []
                position[nbr] = len(position)
                stack.append((nbr, iter(_rank_sorted(graph, nbr, ranks))))
                advanced = True
                break
            if nbr != parent[node]:
                key = (node, nbr) if node < nbr else (nbr, node)
                if key not in seen_ring:
                    seen_ring.add(key)
                    late, early = (
                        (node, nbr)
                        if position[node] > position[nbr]
                        else (nbr, node)
                    )
                    ring_close_at.setdefault(late, []).append(early)
        if not advanced:
            stack.pop()

    def emit(node: int, bond_in: int) -> list[SelfiesSymbol]:
        atom = graph.atoms[node]
        symbols = [
            atom_symbol(
                atom.element,
                order=bond_in,
                charge=atom.charge,
                hydrogens=atom.explicit_hydrogens,
            )
        ]
        for early in sorted(ring_close_at.get(node, ()), key=lambda p: position[p]):
            bond = graph.bond_between(node, early)
            distance = position[node] - position[early] - 1
            size = _digit_count(distance)
            symbols.append(ring_symbol(size, order=bond.order if bond else 1))
            symbols.extend(_digit_symbols(distance, size))
        kids = children[node]
        if kids:
            encoded = []
            for kid in kids:
                bond = graph.bond_between(node, kid)
                encoded.append((kid, emit(kid, bond.order if bond else 1)))
            # The chain continues into the last child; if any other subtree
            # is too long for three index digits it continues there instead.
            tail = len(encoded) - 1
            if any(len(body) > _INDEX_BASE**3 for _, body in encoded[:-1]):
                tail = max(range(len(encoded)), key=lambda idx: len(encoded[idx][1]))
            for idx, (kid, body) in enumerate(encoded):
                if idx == tail:
                    continue
                bond = graph.bond_between(node, kid)
                size = _digit_count(len(body) - 1)
                symbols.append(branch_symbol(size, order=bond.order if bond else 1))
                symbols.extend(_digit_symbols(len(body) - 1, size))
                symbols.extend(body)
            symbols.extend(encoded[tail][1])
        return symbols

    return emit(start, 1)


def _rank_sorted(graph: MolecularGraph, node: int, ranks: list[int]) -> list[int]:
    return sorted((nbr for nbr, _ in graph.neighbors(node)), key=lambda j: ranks[j])


_DIGIT_SYMBOLS: tuple[SelfiesSymbol, ...] | None = None


def _digit_alphabet() -> tuple[SelfiesSymbol, ...]:
    # The first 16 alphabet entries are table-independent, giving one symbol
    # for every base-16 digit value.
    global _DIGIT_SYMBOLS
    if _DIGIT_SYMBOLS is None:
        _DIGIT_SYMBOLS = alphabet()[:_INDEX_BASE]
    return _DIGIT_SYMBOLS


def _digit_count(value: int) -> int:
    if value < _INDEX_BASE:
        return 1
    if value < _INDEX_BASE**2:
        return 2
    return 3


def _digit_symbols(value: int, count: int) -> list[SelfiesSymbol]:
    digits = _digit_alphabet()
    out = []
    for power in range(count - 1, -1, -1):
        out.append(digits[(value // _INDEX_BASE**power) % _INDEX_BASE])
    return out

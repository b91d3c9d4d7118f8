"""Strict and lenient parsers for molecular line notation.

Both parsers share one engine. The lenient parse is total: it recovers from
every malformed input by local repairs (skipping tokens, dropping dangling
bonds, implicitly closing branches) and records a diagnostic for each repair.
The strict parse succeeds only when that engine produces zero diagnostics,
the graph kekulizes cleanly, and every atom respects its valence, which makes
it the in-repo validity oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .graph import Atom, GraphBuilder, MolecularGraph, free_valence
from .kekulize import kekulize
from .tokenizer import (
    BOND_ORDER,
    STEREO_BONDS,
    Token,
    TokenKind,
    parse_bracket,
    tokenize,
)
from .valence import DEFAULT_TABLE, ValenceTable


class ErrorClass(enum.Enum):
    """The six invalid-string categories, plus the non-error marker."""

    VALID = "valid"
    SYNTAX = "syntax_error"
    UNCLOSED_RING = "unclosed_ring"
    PARENTHESES = "parentheses_error"
    BOND_EXISTS = "bond_already_exists"
    AROMATICITY = "aromaticity_error"
    VALENCE = "valence_error"


@dataclass(frozen=True)
class Diagnostic:
    error_class: ErrorClass
    position: int
    message: str
    recovery_action: str = ""


@dataclass
class ParseResult:
    graph: MolecularGraph
    diagnostics: list[Diagnostic]
    notes: list[str] = field(default_factory=list)


class ParseError(ValueError):
    """Strict-parse failure; carries the first diagnostic encountered."""

    def __init__(self, diagnostic: Diagnostic) -> None:
        super().__init__(
            f"{diagnostic.error_class.value} at {diagnostic.position}: "
            f"{diagnostic.message}"
        )
        self.diagnostic = diagnostic


@dataclass
class _Pending:
    """A bond symbol waiting for its right-hand atom or ring digit."""

    order: int
    colon: bool
    position: int


@dataclass
class _OpenRing:
    atom: int
    order: int | None
    colon: bool
    position: int


def parse_lenient(text: str, table: ValenceTable = DEFAULT_TABLE) -> ParseResult:
    """Parse any string into a syntactically well-formed graph.

    Recovery rules: unmatched ``)`` and unrecognized characters are skipped;
    unmatched ``(`` is implicitly closed at end of input; ring digits left
    open lose their pending bond; ring closures that would duplicate a bond
    or bond an atom to itself are dropped; conflicting ring bond orders keep
    the higher order; bond symbols with no following atom are dropped.
    Valence violations are recorded but the offending bonds are kept.
    """
    builder, diagnostics, notes = _build_graph(text)
    graph = builder.build()
    diagnostics.extend(_valence_diagnostics(graph, table))
    return ParseResult(graph=graph, diagnostics=diagnostics, notes=notes)


def parse_strict(text: str, table: ValenceTable = DEFAULT_TABLE) -> MolecularGraph:
    """Parse, kekulize and valence-check; raise ParseError on the first fault.

    The returned graph is kekulized and semantically valid.
    """
    graph, failure = _parse_checked(text, table)
    if failure is not None:
        raise ParseError(failure)
    assert graph is not None
    return graph


def classify_error(text: str, table: ValenceTable = DEFAULT_TABLE) -> ErrorClass:
    """Class of the first error in parse order, or VALID.

    Semantic checks (aromaticity, then valence) run only after the syntax
    phase produces no diagnostics, mirroring a sanitizing toolkit's order.
    """
    _, failure = _parse_checked(text, table)
    return ErrorClass.VALID if failure is None else failure.error_class


def _parse_checked(
    text: str, table: ValenceTable
) -> tuple[MolecularGraph | None, Diagnostic | None]:
    builder, diagnostics, _ = _build_graph(text)
    if diagnostics:
        return None, diagnostics[0]
    kekulized, aromatic_diags = kekulize(builder.build(), table)
    if aromatic_diags:
        return None, aromatic_diags[0]
    valence_diags = _valence_diagnostics(kekulized, table)
    if valence_diags:
        return None, valence_diags[0]
    return kekulized, None


def _valence_diagnostics(
    graph: MolecularGraph, table: ValenceTable
) -> list[Diagnostic]:
    out = []
    for i in range(len(graph)):
        slack = free_valence(graph, i, table)
        if slack < 0:
            atom = graph.atoms[i]
            out.append(
                Diagnostic(
                    ErrorClass.VALENCE,
                    position=i,
                    message=(
                        f"atom {i} ({atom.element}) exceeds its allowed "
                        f"valence by {-slack}"
                    ),
                    recovery_action="bonds kept",
                )
            )
    return out


def _build_graph(text: str) -> tuple[GraphBuilder, list[Diagnostic], list[str]]:
    builder = GraphBuilder()
    diagnostics: list[Diagnostic] = []
    notes: list[str] = []
    anchor: int | None = None
    pending: _Pending | None = None
    stack: list[tuple[int | None, int]] = []
    rings: dict[int, _OpenRing] = {}

    def syntax(pos: int, message: str, recovery: str) -> None:
        diagnostics.append(Diagnostic(ErrorClass.SYNTAX, pos, message, recovery))

    def drop_pending(reason: str) -> None:
        nonlocal pending
        if pending is not None:
            syntax(pending.position, f"bond symbol {reason}", "dropped bond")
            pending = None

    def connect(i: int, j: int, order: int | None, colon: bool) -> None:
        aromatic = colon or (
            order is None
            and builder.atoms[i].aromatic
            and builder.atoms[j].aromatic
        )
        builder.add_bond(i, j, order if order is not None else 1, aromatic)

    tokens = tokenize(text)
    if not tokens:
        syntax(0, "empty input", "none")

    for token in tokens:
        kind = token.kind
        if kind in (TokenKind.ORGANIC_ATOM, TokenKind.BRACKET_ATOM):
            atom = _make_atom(token, diagnostics, notes)
            if atom is None:
                continue
            idx = builder.add_atom(atom)
            if anchor is None:
                drop_pending("with no preceding atom")
            else:
                order = pending.order if pending is not None else None
                colon = pending.colon if pending is not None else False
                connect(anchor, idx, order, colon)
                pending = None
            anchor = idx
        elif kind == TokenKind.BOND:
            if pending is not None:
                drop_pending("followed by another bond symbol")
            if token.lexeme in STEREO_BONDS:
                notes.append(
                    f"stereo bond direction at {token.position} discarded"
                )
            pending = _Pending(
                order=BOND_ORDER[token.lexeme],
                colon=token.lexeme == ":",
                position=token.position,
            )
        elif kind == TokenKind.RING_DIGIT:
            digit = int(token.lexeme.lstrip("%"))
            close_order = pending.order if pending is not None else None
            close_colon = pending.colon if pending is not None else False
            pending = None
            if anchor is None:
                syntax(token.position, "ring digit before any atom", "ignored")
                continue
            entry = rings.pop(digit, None)
            if entry is None:
                rings[digit] = _OpenRing(
                    anchor, close_order, close_colon, token.position
                )
            elif entry.atom == anchor:
                diagnostics.append(
                    Diagnostic(
                        ErrorClass.BOND_EXISTS,
                        token.position,
                        f"ring digit {digit} bonds atom {anchor} to itself",
                        "dropped ring bond",
                    )
                )
            elif builder.has_bond(entry.atom, anchor):
                diagnostics.append(
                    Diagnostic(
                        ErrorClass.BOND_EXISTS,
                        token.position,
                        f"ring digit {digit} duplicates bond "
                        f"{entry.atom}-{anchor}",
                        "dropped ring bond",
                    )
                )
            else:
                order = entry.order
                if close_order is not None:
                    if order is not None and order != close_order:
                        syntax(
                            token.position,
                            f"ring digit {digit} bond order conflict",
                            "kept higher order",
                        )
                        order = max(order, close_order)
                    else:
                        order = close_order
                connect(entry.atom, anchor, order, entry.colon or close_colon)
        elif kind == TokenKind.OPEN_PAREN:
            if anchor is None:
                syntax(
                    token.position,
                    "branch opened before any atom",
                    "skipped parenthesis",
                )
                continue
            if pending is not None:
                syntax(
                    pending.position,
                    "bond symbol directly before a branch",
                    "applied inside branch",
                )
            stack.append((anchor, len(builder.atoms)))
        elif kind == TokenKind.CLOSE_PAREN:
            drop_pending("dangling before closing parenthesis")
            if not stack:
                diagnostics.append(
                    Diagnostic(
                        ErrorClass.PARENTHESES,
                        token.position,
                        "unmatched closing parenthesis",
                        "skipped parenthesis",
                    )
                )
                continue
            saved, atoms_at_open = stack.pop()
            if len(builder.atoms) == atoms_at_open:
                syntax(token.position, "empty branch", "removed branch")
            anchor = saved
        elif kind == TokenKind.DOT:
            drop_pending("dangling before fragment separator")
            if anchor is None:
                syntax(
                    token.position,
                    "fragment separator without preceding atom",
                    "ignored separator",
                )
            anchor = None
        else:
            syntax(
                token.position,
                f"unrecognized character {token.lexeme!r}",
                "skipped token",
            )

    end_events: list[tuple[int, Diagnostic]] = []
    if pending is not None:
        end_events.append(
            (
                pending.position,
                Diagnostic(
                    ErrorClass.SYNTAX,
                    pending.position,
                    "bond symbol at end of input",
                    "dropped bond",
                ),
            )
        )
    for saved, _ in stack:
        end_events.append(
            (
                len(text),
                Diagnostic(
                    ErrorClass.PARENTHESES,
                    len(text),
                    "unclosed branch parenthesis",
                    "implicitly closed at end of input",
                ),
            )
        )
    for digit, entry in rings.items():
        end_events.append(
            (
                entry.position,
                Diagnostic(
                    ErrorClass.UNCLOSED_RING,
                    entry.position,
                    f"ring digit {digit} never closed",
                    "dropped pending ring bond",
                ),
            )
        )
    for _, diag in sorted(end_events, key=lambda item: item[0]):
        diagnostics.append(diag)

    return builder, diagnostics, notes


def _make_atom(
    token: Token, diagnostics: list[Diagnostic], notes: list[str]
) -> Atom | None:
    if token.kind == TokenKind.ORGANIC_ATOM:
        lexeme = token.lexeme
        if lexeme[0].islower():
            return Atom(element=lexeme.upper(), aromatic=True)
        return Atom(element=lexeme)
    fields = parse_bracket(token.lexeme)
    if fields is None:
        diagnostics.append(
            Diagnostic(
                ErrorClass.SYNTAX,
                token.position,
                f"malformed bracket atom {token.lexeme!r}",
                "skipped token",
            )
        )
        return None
    if fields.chiral:
        notes.append(f"chirality at {token.position} discarded")
    return Atom(
        element=fields.element,
        charge=fields.charge,
        explicit_hydrogens=fields.hydrogens,
        isotope=fields.isotope,
        aromatic=fields.aromatic,
    )

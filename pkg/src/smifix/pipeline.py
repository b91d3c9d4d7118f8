"""End-to-end correction of invalid molecular strings.

An invalid string is parsed leniently, kekulized, serialized through the
grammar codec (which restores semantic validity) and written back out in
canonical form. Valid inputs bypass the round trip entirely, so correction
never distorts a molecule that did not need fixing. A deterministic corpus
mutator for fuzz and acceptance testing lives here too.
"""

from __future__ import annotations

import random
import string as _string
from dataclasses import dataclass, field

from .kekulize import kekulize
from .parser import (
    Diagnostic,
    ErrorClass,
    parse_lenient,
    _valence_diagnostics,
)
from .selfies import decode, encode
from .tokenizer import Token, TokenKind, tokenize
from .valence import DEFAULT_TABLE, ValenceTable
from .writer import canonical_smiles

#: Output used when correction collapses the molecule to nothing.
EMPTY_SENTINEL = ""


@dataclass
class CorrectionReport:
    input: str
    output: str
    diagnostics: list[Diagnostic]
    intermediate_selfies: str = ""
    was_already_valid: bool = False
    changed: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def is_sentinel(self) -> bool:
        return self.output == EMPTY_SENTINEL

    def error_classes(self) -> list[str]:
        """Distinct diagnostic classes, in first-occurrence order."""
        seen: list[str] = []
        for diag in self.diagnostics:
            name = diag.error_class.value
            if name not in seen:
                seen.append(name)
        return seen


def correct_smiles(
    text: str, table: ValenceTable = DEFAULT_TABLE
) -> CorrectionReport:
    """Turn any string into a valid molecule (or the empty sentinel).

    The output always satisfies the strict parser. Valid inputs come back
    as their canonical form with ``changed`` false; for invalid inputs
    ``changed`` reports whether the validity-restoring round trip had to
    alter the leniently parsed structure (rather than, say, only dropping
    an extra parenthesis).
    """
    lenient = parse_lenient(text, table)
    kekulized, aromatic_diags = kekulize(lenient.graph, table)
    syntax_diags = [
        d for d in lenient.diagnostics if d.error_class is not ErrorClass.VALENCE
    ]
    valence_diags = _valence_diagnostics(kekulized, table)
    diagnostics = syntax_diags + aromatic_diags + valence_diags

    if not diagnostics:
        return CorrectionReport(
            input=text,
            output=canonical_smiles(kekulized),
            diagnostics=[],
            was_already_valid=True,
            changed=False,
            notes=list(lenient.notes),
        )

    symbols = encode(kekulized, ranks=list(range(len(kekulized))))
    decoded = decode(symbols, table)
    notes = list(lenient.notes)
    if len(decoded.graph) == 0:
        output = EMPTY_SENTINEL
        changed = len(kekulized) > 0
        notes.append("empty decode result")
    else:
        output = canonical_smiles(decoded.graph)
        changed = output != canonical_smiles(kekulized)
    return CorrectionReport(
        input=text,
        output=output,
        diagnostics=diagnostics,
        intermediate_selfies="".join(s.raw for s in symbols),
        was_already_valid=False,
        changed=changed,
        notes=notes,
    )


_GARBAGE_CHARS = "qQxXzZ!?~^&*;,"
_MUTATIONS = (
    "insert_close_paren",
    "insert_open_paren",
    "delete_paren",
    "delete_ring_digit",
    "duplicate_ring_closure",
    "insert_bond",
    "insert_garbage",
    "case_flip",
)


def mutate_smiles(text: str, seed: int) -> str:
    """Apply one deterministic, error-inducing mutation to a valid string.

    The mutation class is drawn from the seed; classes that do not apply to
    the given string (no parenthesis to delete, no ring digit, ...) fall
    through to the next class in a fixed rotation, so the result is a pure
    function of ``(text, seed)``.
    """
    rng = random.Random(f"{seed}|{text}")
    tokens = tokenize(text)
    start = rng.randrange(len(_MUTATIONS))
    for offset in range(len(_MUTATIONS)):
        name = _MUTATIONS[(start + offset) % len(_MUTATIONS)]
        mutated = _apply_mutation(name, text, tokens, rng)
        if mutated is not None:
            return mutated
    return text + ")"  # unreachable for non-empty input


def _apply_mutation(
    name: str, text: str, tokens: list[Token], rng: random.Random
) -> str | None:
    if name == "insert_close_paren":
        pos = rng.randint(1, len(text)) if text else 0
        return text[:pos] + ")" + text[pos:]
    if name == "insert_open_paren":
        pos = rng.randint(0, len(text))
        return text[:pos] + "(" + text[pos:]
    if name == "delete_paren":
        spots = [
            t.position
            for t in tokens
            if t.kind in (TokenKind.OPEN_PAREN, TokenKind.CLOSE_PAREN)
        ]
        if not spots:
            return None
        pos = rng.choice(spots)
        return text[:pos] + text[pos + 1 :]
    if name == "delete_ring_digit":
        spots = [t for t in tokens if t.kind is TokenKind.RING_DIGIT]
        if not spots:
            return None
        token = rng.choice(spots)
        return text[: token.position] + text[token.position + len(token.lexeme) :]
    if name == "duplicate_ring_closure":
        atoms = [
            t
            for t in tokens
            if t.kind in (TokenKind.ORGANIC_ATOM, TokenKind.BRACKET_ATOM)
        ]
        pairs = [
            (a, b)
            for a, b in zip(atoms, atoms[1:])
            if b.position == a.position + len(a.lexeme)
        ]
        if not pairs:
            return None
        first, second = rng.choice(pairs)
        digit = _unused_ring_digit(tokens)
        if digit is None:
            return None
        end_first = first.position + len(first.lexeme)
        end_second = second.position + len(second.lexeme)
        return (
            text[:end_first]
            + digit
            + text[end_first:end_second]
            + digit
            + text[end_second:]
        )
    if name == "insert_bond":
        pos = rng.randint(0, len(text))
        return text[:pos] + rng.choice("=#") + text[pos:]
    if name == "insert_garbage":
        pos = rng.randint(0, len(text))
        return text[:pos] + rng.choice(_GARBAGE_CHARS) + text[pos:]
    if name == "case_flip":
        spots = [
            t
            for t in tokens
            if t.kind is TokenKind.ORGANIC_ATOM and len(t.lexeme) == 1
        ]
        if not spots:
            return None
        token = rng.choice(spots)
        flipped = token.lexeme.swapcase()
        return text[: token.position] + flipped + text[token.position + 1 :]
    raise ValueError(f"unknown mutation {name!r}")


def _unused_ring_digit(tokens: list[Token]) -> str | None:
    used = {
        int(t.lexeme.lstrip("%"))
        for t in tokens
        if t.kind is TokenKind.RING_DIGIT
    }
    for digit in range(1, 10):
        if digit not in used:
            return str(digit)
    return None

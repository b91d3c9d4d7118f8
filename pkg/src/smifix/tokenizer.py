"""Total tokenizer for molecular line notation.

Every character of the input is covered by exactly one token, so that
concatenating lexemes reproduces the input. Characters that fit no rule
become ``GARBAGE`` tokens instead of failing.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class TokenKind(enum.Enum):
    ORGANIC_ATOM = "organic_atom"
    BRACKET_ATOM = "bracket_atom"
    BOND = "bond"
    RING_DIGIT = "ring_digit"
    OPEN_PAREN = "open_paren"
    CLOSE_PAREN = "close_paren"
    DOT = "dot"
    GARBAGE = "garbage"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    position: int


_TWO_LETTER = ("Cl", "Br")
_ONE_LETTER = frozenset("BCNOPSFI")
_AROMATIC_ONE = frozenset("bcnops")
_BOND_CHARS = frozenset("-=#:/\\")

_BRACKET_RE = re.compile(
    r"""^\[
        (?P<isotope>\d+)?
        (?P<element>[A-Z][a-z]?|se|as|[bcnops])
        (?P<chiral>@{1,2})?
        (?P<hcount>H\d*)?
        (?P<charge>\+\d+|-\d+|\++|-+)?
    \]$""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class BracketFields:
    """Decoded contents of a bracket atom token."""

    element: str
    isotope: int | None
    hydrogens: int
    charge: int
    aromatic: bool
    chiral: str | None


def parse_bracket(lexeme: str) -> BracketFields | None:
    """Decode a ``[...]`` lexeme; None when the interior is malformed."""
    match = _BRACKET_RE.match(lexeme)
    if match is None:
        return None
    isotope = int(match.group("isotope")) if match.group("isotope") else None
    if isotope == 0:
        return None
    element = match.group("element")
    aromatic = element[0].islower()
    if aromatic:
        element = element[0].upper() + element[1:]
    hcount = match.group("hcount")
    if hcount is None:
        hydrogens = 0
    elif hcount == "H":
        hydrogens = 1
    else:
        hydrogens = int(hcount[1:])
    charge_text = match.group("charge")
    if charge_text is None:
        charge = 0
    elif charge_text in ("+", "-") or charge_text[1:].isdigit() is False:
        charge = charge_text.count("+") - charge_text.count("-")
    else:
        charge = int(charge_text)
    return BracketFields(
        element=element,
        isotope=isotope,
        hydrogens=hydrogens,
        charge=charge,
        aromatic=aromatic,
        chiral=match.group("chiral"),
    )


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens covering every character."""
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i + 1)
            if end == -1:
                tokens.append(Token(TokenKind.GARBAGE, ch, i))
                i += 1
            else:
                tokens.append(Token(TokenKind.BRACKET_ATOM, text[i : end + 1], i))
                i = end + 1
        elif text.startswith(_TWO_LETTER, i):
            tokens.append(Token(TokenKind.ORGANIC_ATOM, text[i : i + 2], i))
            i += 2
        elif ch in _ONE_LETTER or ch in _AROMATIC_ONE:
            tokens.append(Token(TokenKind.ORGANIC_ATOM, ch, i))
            i += 1
        elif ch in _BOND_CHARS:
            tokens.append(Token(TokenKind.BOND, ch, i))
            i += 1
        elif ch.isdigit():
            tokens.append(Token(TokenKind.RING_DIGIT, ch, i))
            i += 1
        elif ch == "%":
            if i + 2 < n and text[i + 1].isdigit() and text[i + 2].isdigit():
                tokens.append(Token(TokenKind.RING_DIGIT, text[i : i + 3], i))
                i += 3
            else:
                tokens.append(Token(TokenKind.GARBAGE, ch, i))
                i += 1
        elif ch == "(":
            tokens.append(Token(TokenKind.OPEN_PAREN, ch, i))
            i += 1
        elif ch == ")":
            tokens.append(Token(TokenKind.CLOSE_PAREN, ch, i))
            i += 1
        elif ch == ".":
            tokens.append(Token(TokenKind.DOT, ch, i))
            i += 1
        else:
            tokens.append(Token(TokenKind.GARBAGE, ch, i))
            i += 1
    return tokens


BOND_ORDER = {"-": 1, "=": 2, "#": 3, ":": 1, "/": 1, "\\": 1}
STEREO_BONDS = frozenset("/\\")

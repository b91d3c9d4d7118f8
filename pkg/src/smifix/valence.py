"""Element valence model.

Allowed bond counts per element drive every semantic check in the toolkit:
the lenient/strict parsers, the grammar decoder's capacity states, and the
validity metric all consult the same table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

#: Elements recognised when written bare (no brackets) in a molecular string.
ORGANIC_SUBSET = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})

#: Lowercase spellings accepted as aromatic atoms, mapped to their element.
AROMATIC_SYMBOLS = {
    "b": "B",
    "c": "C",
    "n": "N",
    "o": "O",
    "p": "P",
    "s": "S",
    "se": "Se",
    "as": "As",
}

#: Valence electron counts used to decide which aromatic atoms must receive
#: a double bond during kekulization.
AROMATIC_VALENCE_ELECTRONS = {
    "B": 3,
    "C": 4,
    "N": 5,
    "P": 5,
    "As": 5,
    "O": 6,
    "S": 6,
    "Se": 6,
}

#: Valence assigned to elements absent from the table when running leniently.
WILDCARD_VALENCE = 8

_DEFAULT_VALENCES: dict[str, tuple[int, ...]] = {
    "H": (1,),
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "F": (1,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}


class UnknownElementError(KeyError):
    """Raised by a strict valence table for elements it does not know."""


@dataclass(frozen=True)
class Element:
    """An element symbol with its ordered list of allowed total bond counts."""

    symbol: str
    valences: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.valences:
            raise ValueError(f"element {self.symbol!r} has no allowed valences")
        if any(v <= 0 for v in self.valences):
            raise ValueError(f"element {self.symbol!r} has non-positive valence")
        if list(self.valences) != sorted(set(self.valences)):
            raise ValueError(
                f"element {self.symbol!r} valences must be strictly increasing"
            )


class ValenceTable:
    """Mapping from element symbol to allowed valences.

    Formal charge shifts every allowed valence by the charge itself, floored
    at zero. Elements not present in the table are given a single wildcard
    valence of 8 unless the table was built with ``strict=True``, in which
    case they raise :class:`UnknownElementError`.
    """

    def __init__(
        self,
        elements: Iterable[Element] | None = None,
        *,
        strict: bool = False,
    ) -> None:
        if elements is None:
            elements = [Element(s, v) for s, v in _DEFAULT_VALENCES.items()]
        self._elements: dict[str, Element] = {}
        for elem in elements:
            if elem.symbol in self._elements:
                raise ValueError(f"duplicate element {elem.symbol!r}")
            self._elements[elem.symbol] = elem
        for required in ("C", "N", "O", "F"):
            if required not in self._elements:
                raise ValueError(f"valence table must contain {required}")
        self.strict = strict

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._elements

    @property
    def elements(self) -> tuple[Element, ...]:
        return tuple(self._elements.values())

    def allowed_valences(self, symbol: str, charge: int = 0) -> tuple[int, ...]:
        """Charge-adjusted allowed valences, sorted increasing; may be (0,)."""
        elem = self._elements.get(symbol)
        if elem is None:
            if self.strict:
                raise UnknownElementError(symbol)
            base: tuple[int, ...] = (WILDCARD_VALENCE,)
        else:
            base = elem.valences
        if charge == 0:
            return base
        shifted = sorted({max(0, v + charge) for v in base})
        return tuple(shifted)

    def max_valence(self, symbol: str, charge: int = 0) -> int:
        """The largest allowed bond count; the decoder's atom capacity."""
        return self.allowed_valences(symbol, charge)[-1]

    @classmethod
    def from_json_file(cls, path: str, *, strict: bool = False) -> "ValenceTable":
        """Load ``{"C": [4], "S": [2, 4, 6], ...}`` from a JSON file."""
        with open(path, "r", encoding="utf-8") as handle:
            raw: Mapping[str, list[int]] = json.load(handle)
        return cls(
            [Element(sym, tuple(vals)) for sym, vals in raw.items()],
            strict=strict,
        )


#: Shared default table; immutable in practice, safe to reuse everywhere.
DEFAULT_TABLE = ValenceTable()

"""Molecule-level evaluation metrics.

Validity, exact match, raw-string edit distance, circular-fingerprint
Tanimoto similarity, corpus diversity, substructure class membership and
the correction rate. Undefined values (empty corpus, no invalid inputs)
are returned as None rather than raised.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .graph import MolecularGraph
from .parser import ParseError, parse_strict
from .substructure import subgraph_match
from .valence import DEFAULT_TABLE, ValenceTable
from .writer import canonical_smiles

DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 2048


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bit set over hashed circular atom environments."""

    bits: int
    width: int = DEFAULT_WIDTH
    radius: int = DEFAULT_RADIUS

    def __post_init__(self) -> None:
        if self.width <= 0 or self.width & (self.width - 1):
            raise ValueError("fingerprint width must be a power of two")

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()


def _stable_hash(payload: tuple) -> int:
    digest = hashlib.blake2b(repr(payload).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def morgan_fingerprint(
    graph: MolecularGraph,
    radius: int = DEFAULT_RADIUS,
    width: int = DEFAULT_WIDTH,
) -> Fingerprint:
    """Hash every circular atom environment up to ``radius`` into bits.

    The initial atom invariant is (element, charge, degree, bond order sum,
    explicit hydrogens); each iteration folds in the sorted multiset of
    (bond order, neighbor invariant) pairs. Environments are deduplicated
    per molecule before setting bits.
    """
    invariants = []
    for i in range(len(graph)):
        atom = graph.atoms[i]
        invariants.append(
            _stable_hash(
                (
                    "init",
                    atom.element,
                    atom.charge,
                    graph.degree(i),
                    sum(order for _, order in graph.neighbors(i)),
                    atom.explicit_hydrogens,
                )
            )
        )
    environments = set(invariants)
    current = invariants
    for _ in range(radius):
        nxt = []
        for i in range(len(graph)):
            neighborhood = tuple(
                sorted((order, current[j]) for j, order in graph.neighbors(i))
            )
            nxt.append(_stable_hash(("iter", current[i], neighborhood)))
        environments.update(nxt)
        current = nxt
    bits = 0
    for env in environments:
        bits |= 1 << (env % width)
    return Fingerprint(bits=bits, width=width, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; defined as 1.0 when both are empty."""
    if a.width != b.width or a.radius != b.radius:
        raise ValueError("fingerprint width/radius mismatch")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def levenshtein(a: str, b: str) -> int:
    """Minimum insertions, deletions or substitutions between raw strings."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        row = [i]
        for j, ch_b in enumerate(b, start=1):
            row.append(
                min(
                    previous[j] + 1,
                    row[j - 1] + 1,
                    previous[j - 1] + (ch_a != ch_b),
                )
            )
        previous = row
    return previous[-1]


def validity(corpus: list[str], table: ValenceTable = DEFAULT_TABLE) -> float | None:
    """Fraction of strings the strict parser accepts; None for an empty corpus."""
    if not corpus:
        return None
    good = sum(1 for text in corpus if _try_parse(text, table) is not None)
    return good / len(corpus)


def exact_match(
    predictions: list[str],
    references: list[str],
    table: ValenceTable = DEFAULT_TABLE,
) -> float:
    """Fraction of pairs that are both valid and canonically identical."""
    if len(predictions) != len(references):
        raise ValueError("prediction/reference length mismatch")
    if not predictions:
        return 0.0
    hits = 0
    for pred, ref in zip(predictions, references):
        g_pred = _try_parse(pred, table)
        g_ref = _try_parse(ref, table)
        if g_pred is None or g_ref is None:
            continue
        if canonical_smiles(g_pred) == canonical_smiles(g_ref):
            hits += 1
    return hits / len(predictions)


def diversity(
    graphs: list[MolecularGraph],
    radius: int = DEFAULT_RADIUS,
    width: int = DEFAULT_WIDTH,
) -> float | None:
    """Mean pairwise Tanimoto distance; None below two molecules."""
    if len(graphs) < 2:
        return None
    prints = [morgan_fingerprint(g, radius, width) for g in graphs]
    total = 0.0
    pairs = 0
    for i in range(len(prints)):
        for j in range(i + 1, len(prints)):
            total += 1.0 - tanimoto(prints[i], prints[j])
            pairs += 1
    return total / pairs


def membership(graph: MolecularGraph, pattern: MolecularGraph) -> bool:
    """True iff ``pattern`` is an element- and order-preserving subgraph."""
    return subgraph_match(graph, pattern)


def correction_rate(invalid_before: int, valid_after: int) -> float | None:
    """valid_after / invalid_before; None when nothing was invalid."""
    if invalid_before < 0 or valid_after < 0 or valid_after > invalid_before:
        raise ValueError("counts must satisfy 0 <= valid_after <= invalid_before")
    if invalid_before == 0:
        return None
    return valid_after / invalid_before


#: Substructure definitions for the monomer classes used in evaluation.
#: Chain-extender patterns approximate the class by its short diol/diamine
#: backbones.
BUILTIN_PATTERNS: dict[str, tuple[str, ...]] = {
    "acrylate": ("C=CC(=O)O", "C=C(C)C(=O)O"),
    "isocyanate": ("N=C=O",),
    "chain_extender": ("OCCO", "OCCCO", "OCCCCO", "NCCN", "NCCCN", "NCCCCN"),
}


def builtin_pattern_graphs(
    name: str, table: ValenceTable = DEFAULT_TABLE
) -> list[MolecularGraph]:
    return [parse_strict(s, table) for s in BUILTIN_PATTERNS[name]]


def load_patterns(
    path: str, table: ValenceTable = DEFAULT_TABLE
) -> list[tuple[str, MolecularGraph]]:
    """Read ``name<TAB>smiles`` lines into named pattern graphs."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                name, smiles = line.split("\t", 1)
            except ValueError as exc:
                raise ValueError(
                    f"{path}:{line_no}: expected name<TAB>smiles"
                ) from exc
            out.append((name, parse_strict(smiles, table)))
    return out


@dataclass
class MetricsReport:
    validity: float | None = None
    exact_match: float | None = None
    mean_levenshtein: float | None = None
    mean_tanimoto: float | None = None
    diversity: float | None = None
    membership: float | None = None
    membership_by_class: dict[str, float] = field(default_factory=dict)
    correction_rate: float | None = None
    counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "validity": self.validity,
            "exact_match": self.exact_match,
            "mean_levenshtein": self.mean_levenshtein,
            "mean_tanimoto": self.mean_tanimoto,
            "diversity": self.diversity,
            "membership": self.membership,
            "membership_by_class": self.membership_by_class or None,
            "correction_rate": self.correction_rate,
            "counts": self.counts,
        }


def compute_metrics(
    predictions: list[str],
    references: list[str] | None = None,
    table: ValenceTable = DEFAULT_TABLE,
    patterns: list[tuple[str, MolecularGraph]] | None = None,
    radius: int = DEFAULT_RADIUS,
    width: int = DEFAULT_WIDTH,
) -> MetricsReport:
    """Assemble the full metric suite for a prediction corpus.

    Reference-based metrics (exact match, edit distance, pairwise Tanimoto,
    correction rate) are computed only when ``references`` is given; the
    correction rate treats the references as the pre-correction strings.
    """
    report = MetricsReport()
    parsed = [_try_parse(text, table) for text in predictions]
    valid_graphs = [g for g in parsed if g is not None]
    report.counts = {
        "predictions": len(predictions),
        "valid_predictions": len(valid_graphs),
    }
    report.validity = (
        len(valid_graphs) / len(predictions) if predictions else None
    )
    report.diversity = diversity(valid_graphs, radius, width)

    if patterns:
        per_class: dict[str, int] = {name: 0 for name, _ in patterns}
        any_hits = 0
        for graph in parsed:
            if graph is None:
                continue
            hit_any = False
            for name, pattern in patterns:
                if subgraph_match(graph, pattern):
                    per_class[name] += 1
                    hit_any = True
            if hit_any:
                any_hits += 1
        if predictions:
            report.membership = any_hits / len(predictions)
            report.membership_by_class = {
                name: count / len(predictions)
                for name, count in per_class.items()
            }

    if references is not None:
        if len(references) != len(predictions):
            raise ValueError("prediction/reference length mismatch")
        report.counts["references"] = len(references)
        if predictions:
            report.exact_match = exact_match(predictions, references, table)
            report.mean_levenshtein = sum(
                levenshtein(p, r) for p, r in zip(predictions, references)
            ) / len(predictions)
            ref_parsed = [_try_parse(text, table) for text in references]
            sims = []
            for pred_graph, ref_graph in zip(parsed, ref_parsed):
                if pred_graph is None or ref_graph is None:
                    continue
                sims.append(
                    tanimoto(
                        morgan_fingerprint(pred_graph, radius, width),
                        morgan_fingerprint(ref_graph, radius, width),
                    )
                )
            report.mean_tanimoto = sum(sims) / len(sims) if sims else None
            invalid_refs = [
                i for i, g in enumerate(ref_parsed) if g is None
            ]
            fixed = sum(1 for i in invalid_refs if parsed[i] is not None)
            report.counts["invalid_references"] = len(invalid_refs)
            report.counts["corrected"] = fixed
            report.correction_rate = correction_rate(len(invalid_refs), fixed)
    return report


def _try_parse(
    text: str, table: ValenceTable = DEFAULT_TABLE
) -> MolecularGraph | None:
    try:
        return parse_strict(text, table)
    except ParseError:
        return None

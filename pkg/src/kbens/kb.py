"""Signed triple stores: parsing, validation, vocabulary, and the truth
oracle induced by the asserted text alone.

A knowledge base here is a set of ground facts ``relation(subject, object)``,
each carrying an explicit polarity, over disjoint entity and relation
vocabularies.  No inference happens at this layer: a fact is TRUE if asserted
positively, FALSE if asserted negatively, and UNKNOWN if the store is silent.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .verdict import TernaryVerdict, Truth

POSITIVE = "+"
NEGATIVE = "-"


class KBError(ValueError):
    """Base class for knowledge-base construction and lookup failures."""


class KBSyntaxError(KBError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateTripleError(KBError):
    pass


class ContradictionError(KBError):
    pass


class UnknownTermError(KBError):
    pass


def check_term_name(name: str) -> str:
    """Validate an entity or relation identifier.

    Names are non-empty, contain no tab or newline, and carry no leading or
    trailing whitespace (the file format uses tabs as field separators).
    """
    if not isinstance(name, str) or not name:
        raise KBError(f"term name must be a non-empty string, got {name!r}")
    if "\t" in name or "\n" in name or "\r" in name:
        raise KBError(f"term name contains a tab or newline: {name!r}")
    if name != name.strip():
        raise KBError(f"term name has leading or trailing whitespace: {name!r}")
    return name


@dataclass(frozen=True, order=True)
class Query:
    """An unsigned triple pattern to be evaluated against a store or model."""

    relation: str
    subject: str
    object: str


@dataclass(frozen=True, order=True)
class SignedTriple:
    """One ground fact with polarity: relation(subject, object) holds (+) or
    does not hold (-)."""

    relation: str
    subject: str
    object: str
    positive: bool

    @property
    def polarity(self) -> str:
        return POSITIVE if self.positive else NEGATIVE

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.relation, self.subject, self.object)

    def as_query(self) -> Query:
        return Query(self.relation, self.subject, self.object)

    def as_line(self) -> str:
        return f"{self.relation}\t{self.subject}\t{self.object}\t{self.polarity}"


@dataclass(frozen=True)
class KnowledgeBase:
    """A validated, canonically ordered collection of signed triples.

    Construction is through :meth:`from_triples` or :func:`parse_kb`; the
    value is immutable afterwards and safe to share across threads.  Triples
    and vocabularies are stored sorted, so two stores built from the same
    facts in any order compare equal.
    """

    triples: tuple[SignedTriple, ...]
    entities: tuple[str, ...]
    relations: tuple[str, ...]

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[SignedTriple],
        extra_entities: Iterable[str] = (),
        extra_relations: Iterable[str] = (),
    ) -> "KnowledgeBase":
        """Build a store from triples, validating every invariant.

        ``extra_entities`` / ``extra_relations`` declare isolated vocabulary
        terms that no triple mentions.
        """
        triples = tuple(sorted(triples))
        seen: dict[tuple[str, str, str, bool], SignedTriple] = {}
        polarity_of: dict[tuple[str, str, str], bool] = {}
        entities: set[str] = set(check_term_name(e) for e in extra_entities)
        relations: set[str] = set(check_term_name(r) for r in extra_relations)
        for t in triples:
            check_term_name(t.relation)
            check_term_name(t.subject)
            check_term_name(t.object)
            full = (t.relation, t.subject, t.object, t.positive)
            if full in seen:
                raise DuplicateTripleError(f"duplicate triple: {t.as_line()!r}")
            seen[full] = t
            if t.key in polarity_of and polarity_of[t.key] != t.positive:
                raise ContradictionError(
                    f"{t.relation}({t.subject}, {t.object}) asserted with both polarities"
                )
            polarity_of[t.key] = t.positive
            entities.update((t.subject, t.object))
            relations.add(t.relation)
        clash = entities & relations
        if clash:
            raise KBError(
                f"entity and relation namespaces overlap: {sorted(clash)}"
            )
        return cls(
            triples=triples,
            entities=tuple(sorted(entities)),
            relations=tuple(sorted(relations)),
        )

    @cached_property
    def _polarity_index(self) -> dict[tuple[str, str, str], bool]:
        return {t.key: t.positive for t in self.triples}

    @cached_property
    def _entity_set(self) -> frozenset[str]:
        return frozenset(self.entities)

    @cached_property
    def _relation_set(self) -> frozenset[str]:
        return frozenset(self.relations)

    def asserted_polarity(self, relation: str, subject: str, object: str) -> Optional[bool]:
        """True/False if the triple is asserted with that polarity, else None."""
        return self._polarity_index.get((relation, subject, object))

    def check_query(self, q: Query) -> Query:
        if q.relation not in self._relation_set:
            raise UnknownTermError(f"unknown relation: {q.relation!r}")
        if q.subject not in self._entity_set:
            raise UnknownTermError(f"unknown entity: {q.subject!r}")
        if q.object not in self._entity_set:
            raise UnknownTermError(f"unknown entity: {q.object!r}")
        return q

    def serialize(self) -> str:
        """Canonical text form: one sorted triple per line.

        Isolated vocabulary terms declared at construction are not part of
        the file format and are not serialized.
        """
        return "".join(t.as_line() + "\n" for t in self.triples)

    def digest(self) -> str:
        """Content hash of the canonical serialization (hex SHA-256)."""
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()


def parse_kb(text: str) -> KnowledgeBase:
    """Parse the tab-separated file format into a validated store.

    One record per line: ``relation<TAB>subject<TAB>object<TAB>polarity``
    with polarity ``+`` or ``-``.  Lines starting with ``#`` and blank lines
    are ignored.  Raises :class:`KBSyntaxError` (with the offending line
    number), :class:`DuplicateTripleError`, or :class:`ContradictionError`.
    """
    triples: list[SignedTriple] = []
    seen_lines: dict[tuple[str, str, str, bool], int] = {}
    polarity_at: dict[tuple[str, str, str], tuple[bool, int]] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 4:
            raise KBSyntaxError(
                f"expected 4 tab-separated fields, got {len(fields)}: {raw!r}",
                line_number,
            )
        relation, subject, object_, polarity = fields
        if polarity not in (POSITIVE, NEGATIVE):
            raise KBSyntaxError(
                f"polarity must be '+' or '-', got {polarity!r}", line_number
            )
        try:
            for name in (relation, subject, object_):
                check_term_name(name)
        except KBError as exc:
            raise KBSyntaxError(str(exc), line_number) from exc
        triple = SignedTriple(relation, subject, object_, polarity == POSITIVE)
        full = (relation, subject, object_, triple.positive)
        if full in seen_lines:
            raise DuplicateTripleError(
                f"line {line_number}: duplicate of line {seen_lines[full]}: {raw!r}"
            )
        seen_lines[full] = line_number
        if triple.key in polarity_at and polarity_at[triple.key][0] != triple.positive:
            raise ContradictionError(
                f"line {line_number}: {relation}({subject}, {object_}) "
                f"contradicts line {polarity_at[triple.key][1]}"
            )
        polarity_at[triple.key] = (triple.positive, line_number)
        triples.append(triple)
    return KnowledgeBase.from_triples(triples)


def unstated_queries(kb: KnowledgeBase, include_self_pairs: bool = True) -> list[Query]:
    """Enumerate every fact the store is silent on, in lexicographic order.

    Covers all (relation, subject, object) combinations over the vocabulary,
    minus triples asserted with either polarity.  Self-pairs r(a, a) are
    included by default.
    """
    asserted = kb._polarity_index
    out: list[Query] = []
    for relation in kb.relations:
        for subject, object_ in itertools.product(kb.entities, kb.entities):
            if not include_self_pairs and subject == object_:
                continue
            if (relation, subject, object_) in asserted:
                continue
            out.append(Query(relation, subject, object_))
    return out


def assertion_oracle(kb: KnowledgeBase, q: Query) -> TernaryVerdict:
    """Ground-literal truth: TRUE if asserted positive, FALSE if asserted
    negative, UNKNOWN otherwise.  No inference rules apply.

    The reported fraction is 1, 0, or 0.5 respectively, with member_count 0
    since no fitted worlds are consulted.
    """
    kb.check_query(q)
    polarity = kb.asserted_polarity(q.relation, q.subject, q.object)
    if polarity is True:
        return TernaryVerdict(Truth.TRUE, 1.0, 0)
    if polarity is False:
        return TernaryVerdict(Truth.FALSE, 0.0, 0)
    return TernaryVerdict(Truth.UNKNOWN, 0.5, 0)

"""Aggregate models: per-term point clouds over a transform-diverse subset
of ensemble members.

Any invertible affine map of a zero-error embedding is again zero-error, so
two members related by one carry the same information.  The aggregate keeps
only members that are not affine images of each other, maps them into the
frame of the first retained member, and pools each term's images into a
cloud whose diameter measures how underdetermined that term is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .embedding import Embedding
from .ensemble import Ensemble
from .kb import Query, UnknownTermError
from .verdict import TernaryVerdict

DEFAULT_DEDUP_TOLERANCE = 1e-6


class DegenerateAggregateError(RuntimeError):
    """Fewer than two members survived deduplication."""


class FrameMismatchError(ValueError):
    """Embeddings do not share a vocabulary and dimension."""


@dataclass(frozen=True)
class Alignment:
    """Best affine map A x + t from one embedding's entity points onto
    another's, with the root-mean-square mismatch left over (entities moved
    through the full map, relation vectors through A alone)."""

    linear_map: np.ndarray
    translation: np.ndarray
    residual: float


def _check_same_frame(a: Embedding, b: Embedding) -> None:
    if a.dimension != b.dimension:
        raise FrameMismatchError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    if a.entity_names != b.entity_names or a.relation_names != b.relation_names:
        raise FrameMismatchError("embeddings cover different vocabularies")


def align(source: Embedding, reference: Embedding) -> Alignment:
    """Least-squares affine registration of ``source`` onto ``reference``.

    The map is fitted on entity points only (minimum-norm solution on rank
    deficiency); the residual also charges relation vectors mapped through
    the linear part, since translations cancel on vector differences.
    """
    _check_same_frame(source, reference)
    n = source.dimension
    x = source.entity_array
    y = reference.entity_array
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)  # (n+1, n)
    linear = coef[:n].T
    translation = coef[n]
    mismatch = design @ coef - y
    rel_mismatch = source.relation_array @ coef[:n] - reference.relation_array
    total = float(np.sum(mismatch * mismatch) + np.sum(rel_mismatch * rel_mismatch))
    count = x.shape[0] + source.relation_array.shape[0]
    residual = float(np.sqrt(total / count)) if count else 0.0
    return Alignment(linear_map=linear, translation=translation, residual=residual)


def is_affine_duplicate(
    m1: Embedding, m2: Embedding, dedup_tolerance: float = DEFAULT_DEDUP_TOLERANCE
) -> bool:
    """Whether either direction of affine registration leaves residual at or
    below the tolerance, i.e. the two members carry the same geometry."""
    if align(m1, m2).residual <= dedup_tolerance:
        return True
    return align(m2, m1).residual <= dedup_tolerance


@dataclass(frozen=True)
class AggregateModel:
    """Clouds of corresponding points for every term, one point per retained
    member, expressed in the reference member's frame.

    ``members`` keeps the retained embeddings in their native frames; truth
    evaluation uses those directly so alignment noise never affects verdicts.
    """

    member_indices: tuple[int, ...]
    members: tuple[Embedding, ...]
    entity_clouds: dict[str, np.ndarray]
    relation_clouds: dict[str, np.ndarray]
    diameters: dict[str, float]

    @property
    def reference_index(self) -> int:
        return self.member_indices[0]

    def cloud(self, term: str) -> np.ndarray:
        if term in self.entity_clouds:
            return self.entity_clouds[term]
        if term in self.relation_clouds:
            return self.relation_clouds[term]
        raise UnknownTermError(f"unknown term: {term!r}")

    def to_doc(self) -> dict:
        return {
            "member_indices": list(self.member_indices),
            "reference_index": self.reference_index,
            "entity_clouds": {t: c.tolist() for t, c in self.entity_clouds.items()},
            "relation_clouds": {t: c.tolist() for t, c in self.relation_clouds.items()},
            "diameters": dict(self.diameters),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, indent=2) + "\n"

    def clouds_tsv(self) -> str:
        """Rows ``term member_index x1 ... xN`` for external plotting."""
        lines = []
        for term in sorted(self.entity_clouds) + sorted(self.relation_clouds):
            points = self.cloud(term)
            for idx, point in zip(self.member_indices, points):
                coords = "\t".join(repr(float(v)) for v in point)
                lines.append(f"{term}\t{idx}\t{coords}")
        return "\n".join(lines) + "\n"


def _max_pairwise_distance(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))


def build_aggregate(
    ens: Ensemble,
    dedup_tolerance: float = DEFAULT_DEDUP_TOLERANCE,
    max_cloud_diameter: Optional[float] = None,
) -> AggregateModel:
    """Greedy member selection in ensemble order.

    A member is rejected if it is an affine duplicate of any retained one,
    or (when ``max_cloud_diameter`` is set) if mapping it into the reference
    frame would push some term's cloud diameter past the bound.  Raises
    :class:`DegenerateAggregateError` when fewer than two members survive.
    """
    if not ens.members:
        raise DegenerateAggregateError("ensemble has no members")
    retained: list[tuple[int, Embedding, Alignment]] = []
    for idx, member in enumerate(ens.members):
        if not retained:
            identity = Alignment(
                linear_map=np.eye(member.dimension),
                translation=np.zeros(member.dimension),
                residual=0.0,
            )
            retained.append((idx, member, identity))
            continue
        if any(is_affine_duplicate(member, kept, dedup_tolerance) for _, kept, _ in retained):
            continue
        reference = retained[0][1]
        alignment = align(member, reference)
        if max_cloud_diameter is not None:
            candidate = retained + [(idx, member, alignment)]
            ent_clouds, rel_clouds = _pool_clouds(candidate)
            worst = max(
                (_max_pairwise_distance(c) for c in list(ent_clouds.values()) + list(rel_clouds.values())),
                default=0.0,
            )
            if worst > max_cloud_diameter:
                continue
        retained.append((idx, member, alignment))
    if len(retained) < 2:
        raise DegenerateAggregateError(
            f"only {len(retained)} member(s) retained; aggregate needs at least 2"
        )
    entity_clouds, relation_clouds = _pool_clouds(retained)
    diameters = {t: _max_pairwise_distance(c) for t, c in entity_clouds.items()}
    diameters.update({t: _max_pairwise_distance(c) for t, c in relation_clouds.items()})
    for cloud in list(entity_clouds.values()) + list(relation_clouds.values()):
        cloud.flags.writeable = False
    return AggregateModel(
        member_indices=tuple(idx for idx, _, _ in retained),
        members=tuple(member for _, member, _ in retained),
        entity_clouds=entity_clouds,
        relation_clouds=relation_clouds,
        diameters=diameters,
    )


def _pool_clouds(
    retained: list[tuple[int, Embedding, Alignment]],
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    first = retained[0][1]
    entity_clouds: dict[str, np.ndarray] = {}
    relation_clouds: dict[str, np.ndarray] = {}
    ent_stack = np.array(
        [m.entity_array @ a.linear_map.T + a.translation for _, m, a in retained]
    )  # (k, n_ent, dim)
    rel_stack = np.array([m.relation_array @ a.linear_map.T for _, m, a in retained])
    for j, term in enumerate(first.entity_names):
        entity_clouds[term] = ent_stack[:, j, :].copy()
    for j, term in enumerate(first.relation_names):
        relation_clouds[term] = rel_stack[:, j, :].copy()
    return entity_clouds, relation_clouds


def aggregate_query(
    agg: AggregateModel,
    q: Query,
    tau: Optional[float] = None,
    quorum_slack: float = 0.0,
) -> TernaryVerdict:
    """Unanimity verdict over the retained members, each evaluated in its
    own pre-alignment coordinates."""
    count = sum(1 for m in agg.members if m.satisfies(q, tau=tau))
    return TernaryVerdict.from_fraction(
        count / len(agg.members), len(agg.members), quorum_slack
    )


def cloud_diameter(agg: AggregateModel, term: str) -> float:
    """Largest pairwise distance inside the term's aligned cloud; a proxy
    for how wide the term's range of possible meanings is."""
    if term not in agg.diameters:
        raise UnknownTermError(f"unknown term: {term!r}")
    return agg.diameters[term]

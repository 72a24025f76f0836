"""kbens: signed triple stores captured as ensembles of translational
embeddings, answering queries with TRUE / FALSE / UNKNOWN."""

__version__ = "0.1.0"

from .verdict import TernaryVerdict, Truth
from .kb import (
    ContradictionError,
    DuplicateTripleError,
    KBError,
    KBSyntaxError,
    KnowledgeBase,
    Query,
    SignedTriple,
    UnknownTermError,
    assertion_oracle,
    parse_kb,
    unstated_queries,
)
from .embedding import Embedding, EmbeddingConfig
from .trainer import (
    FitReport,
    NoConvergentDimensionError,
    Satisfiability,
    SatisfiabilityResult,
    TrainConfig,
    gradients,
    init_embedding,
    min_dimension_search,
    satisfiability_oracle,
    train,
    train_with_retries,
)
from .ensemble import (
    DigestMismatchError,
    Ensemble,
    EnsembleFitError,
    KnowledgeReport,
    fit_ensemble,
    knowledge_report,
    query_truth,
)
from .aggregate import (
    AggregateModel,
    Alignment,
    DegenerateAggregateError,
    aggregate_query,
    align,
    build_aggregate,
    cloud_diameter,
    is_affine_duplicate,
)

__all__ = [
    "AggregateModel",
    "Alignment",
    "ContradictionError",
    "DegenerateAggregateError",
    "DigestMismatchError",
    "DuplicateTripleError",
    "Embedding",
    "EmbeddingConfig",
    "Ensemble",
    "EnsembleFitError",
    "FitReport",
    "KBError",
    "KBSyntaxError",
    "KnowledgeBase",
    "KnowledgeReport",
    "NoConvergentDimensionError",
    "Query",
    "Satisfiability",
    "SatisfiabilityResult",
    "SignedTriple",
    "TernaryVerdict",
    "TrainConfig",
    "Truth",
    "UnknownTermError",
    "aggregate_query",
    "align",
    "assertion_oracle",
    "build_aggregate",
    "cloud_diameter",
    "fit_ensemble",
    "gradients",
    "init_embedding",
    "is_affine_duplicate",
    "knowledge_report",
    "min_dimension_search",
    "parse_kb",
    "query_truth",
    "satisfiability_oracle",
    "train",
    "train_with_retries",
    "unstated_queries",
]

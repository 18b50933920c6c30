"""Multi-agent rephrase classification with optional theory retrieval, plus evaluation tooling."""

from .agents import DeliberationPolicy, build_prompt, parse_verdict, retrieve_for_pair, run_deliberation
from .backend import LiveBackend, RetryPolicy, ScriptedBackend, scripted_backend
from .dataset import Dataset, class_support, load_annotations, load_dataset, save_dataset, select_subset
from .knowledge import Chunk, Document, KnowledgeIndex, bm25_score, build_index, chunk_document, retrieve
from .metrics import (
    ConfusionMatrix,
    build_confusion,
    cohens_kappa,
    evaluate,
    macro_f1,
    mcc_multiclass,
    per_category_kappa,
)
from .types import (
    AgentRole,
    ExperimentArm,
    RephraseCategory,
    RephrasePair,
    Transcript,
    Turn,
    Verdict,
    VerdictStatus,
    canonical_order,
    parse_category,
)

__version__ = "0.1.0"

__all__ = [
    "AgentRole",
    "bm25_score",
    "build_confusion",
    "build_index",
    "build_prompt",
    "canonical_order",
    "Chunk",
    "chunk_document",
    "class_support",
    "cohens_kappa",
    "ConfusionMatrix",
    "Dataset",
    "DeliberationPolicy",
    "Document",
    "evaluate",
    "ExperimentArm",
    "KnowledgeIndex",
    "LiveBackend",
    "load_annotations",
    "load_dataset",
    "macro_f1",
    "mcc_multiclass",
    "parse_category",
    "parse_verdict",
    "per_category_kappa",
    "RephraseCategory",
    "RephrasePair",
    "retrieve",
    "retrieve_for_pair",
    "RetryPolicy",
    "run_deliberation",
    "save_dataset",
    "scripted_backend",
    "ScriptedBackend",
    "select_subset",
    "Transcript",
    "Turn",
    "Verdict",
    "VerdictStatus",
]

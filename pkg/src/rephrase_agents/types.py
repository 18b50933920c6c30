"""Label space and the records passed between the pipeline stages."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .errors import UnknownLabel


class RephraseCategory(str, Enum):
    """The six classification outcomes; the value is the serialized name."""

    DEINTENSIFICATION = "deintensification"
    INTENSIFICATION = "intensification"
    SPECIFICATION = "specification"
    GENERALISATION = "generalisation"
    OTHER = "other"
    NO_REPHRASE = "no_rephrase"

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]

    def __str__(self) -> str:
        return self.value


_DISPLAY = {
    RephraseCategory.DEINTENSIFICATION: "Deintensification",
    RephraseCategory.INTENSIFICATION: "Intensification",
    RephraseCategory.SPECIFICATION: "Specification",
    RephraseCategory.GENERALISATION: "Generalisation",
    RephraseCategory.OTHER: "Other",
    RephraseCategory.NO_REPHRASE: "NoRephrase",
}

# Keys are folded with _fold(); no fuzzy matching beyond this table.
_ALIASES = {
    "deintensifying": RephraseCategory.DEINTENSIFICATION,
    "intensifying": RephraseCategory.INTENSIFICATION,
    "generalising": RephraseCategory.GENERALISATION,
    "norephrase": RephraseCategory.NO_REPHRASE,
    "notarephrase": RephraseCategory.NO_REPHRASE,
}


def _fold(label: str) -> str:
    return re.sub(r"[\s_\-]+", "", label.strip().lower())


_LOOKUP: dict[str, RephraseCategory] = {_fold(c.value): c for c in RephraseCategory}
_LOOKUP.update({_fold(c.display_name): c for c in RephraseCategory})
_LOOKUP.update(_ALIASES)


def parse_category(label: str) -> RephraseCategory:
    """Map a label to its category, ignoring case, spaces, hyphens and underscores.

    Accepts the canonical names and the fixed alias table ("Deintensifying",
    "Intensifying", "Generalising", "No_rephrase", "Not a Rephrase").
    Raises UnknownLabel for anything else.
    """
    if isinstance(label, RephraseCategory):
        return label
    key = _fold(label) if isinstance(label, str) else ""
    try:
        return _LOOKUP[key]
    except KeyError:
        raise UnknownLabel(str(label)) from None


def canonical_order() -> list[RephraseCategory]:
    """Fixed axis order for every matrix and report."""
    return list(RephraseCategory)


class AgentRole(str, Enum):
    ASSERTING = "asserting"
    ARGUING = "arguing"
    DISAGREEING = "disagreeing"
    BROKER_CRITIC = "broker"

    @property
    def display_name(self) -> str:
        return {
            AgentRole.ASSERTING: "Asserting Agent",
            AgentRole.ARGUING: "Arguing Agent",
            AgentRole.DISAGREEING: "Disagreeing Agent",
            AgentRole.BROKER_CRITIC: "Broker Critic Agent",
        }[self]


SPECIALIST_ROLES = (AgentRole.ASSERTING, AgentRole.ARGUING, AgentRole.DISAGREEING)


class ExperimentArm(str, Enum):
    """One cell of the agent-count x knowledge-access design."""

    SINGLE_ZERO_SHOT = "single_zero"
    SINGLE_RAG = "single_rag"
    MAS_ZERO_SHOT = "mas_zero"
    MAS_RAG = "mas_rag"

    @property
    def multi_agent(self) -> bool:
        return self in (ExperimentArm.MAS_ZERO_SHOT, ExperimentArm.MAS_RAG)

    @property
    def informed(self) -> bool:
        return self in (ExperimentArm.SINGLE_RAG, ExperimentArm.MAS_RAG)


class VerdictStatus(str, Enum):
    OK = "ok"
    PARSE_FAILURE = "parse_failure"
    BACKEND_FAILURE = "backend_failure"


@dataclass(frozen=True)
class RephrasePair:
    id: str
    input_text: str
    output_text: str
    input_illocution: str = ""
    output_illocution: str = ""
    gold: RephraseCategory | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "input_text": self.input_text,
            "output_text": self.output_text,
            "input_illocution": self.input_illocution,
            "output_illocution": self.output_illocution,
            "gold": self.gold.value if self.gold is not None else None,
        }


@dataclass(frozen=True)
class Verdict:
    """Broker outcome. ``category`` is None whenever status is not OK."""

    category: RephraseCategory | None
    justification: str
    status: VerdictStatus = VerdictStatus.OK

    @property
    def scored(self) -> bool:
        return self.status is VerdictStatus.OK

    def to_dict(self) -> dict[str, Any]:
        return {
            "category": self.category.value if self.category is not None else None,
            "justification": self.justification,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Verdict:
        status = VerdictStatus(data["status"])
        raw = data.get("category")
        # an OK verdict must carry a parseable label, so None is only allowed on failures
        category = None if raw is None and status is not VerdictStatus.OK else parse_category(raw)
        return cls(category, data.get("justification", ""), status)


@dataclass(frozen=True)
class Turn:
    role: AgentRole
    round: int
    content: str
    retrieved_passage_ids: tuple[str, ...] = ()
    input_tokens: int = 0
    output_tokens: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role.value,
            "round": self.round,
            "content": self.content,
            "retrieved_passage_ids": list(self.retrieved_passage_ids),
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Turn:
        return cls(
            role=AgentRole(data["role"]),
            round=int(data["round"]),
            content=data["content"],
            retrieved_passage_ids=tuple(data.get("retrieved_passage_ids", ())),
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
        )


@dataclass(frozen=True)
class Transcript:
    pair_id: str
    arm: ExperimentArm
    turns: tuple[Turn, ...]
    verdict: Verdict

    @property
    def input_tokens(self) -> int:
        return sum(t.input_tokens for t in self.turns)

    @property
    def output_tokens(self) -> int:
        return sum(t.output_tokens for t in self.turns)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "arm": self.arm.value,
            "turns": [t.to_dict() for t in self.turns],
            "verdict": self.verdict.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Transcript:
        return cls(
            pair_id=data["pair_id"],
            arm=ExperimentArm(data["arm"]),
            turns=tuple(Turn.from_dict(t) for t in data["turns"]),
            verdict=Verdict.from_dict(data["verdict"]),
        )


@dataclass(frozen=True)
class RetrievalResult:
    chunk_id: str
    score: float
    text: str


__all__ = [
    "AgentRole",
    "ExperimentArm",
    "RephraseCategory",
    "RephrasePair",
    "RetrievalResult",
    "SPECIALIST_ROLES",
    "Transcript",
    "Turn",
    "Verdict",
    "VerdictStatus",
    "canonical_order",
    "parse_category",
]

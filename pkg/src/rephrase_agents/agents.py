"""Agent prompts, verdict parsing and the broker-moderated deliberation.

A multi-agent run is a fixed round-robin: every round each specialist
speaks once in ``specialist_order``, then the broker speaks last and must
emit a verdict block. Single-agent arms consist of one broker call. The
broker is re-prompted with a format reminder when its verdict block cannot
be parsed.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .backend import ChatBackend, ChatMessage, CompletionRequest, DEFAULT_TEMPERATURE
from .errors import BackendError, ConfigError, UnknownLabel
from .knowledge import DEFAULT_TOP_K, KnowledgeIndex, retrieve
from .types import (
    SPECIALIST_ROLES,
    AgentRole,
    ExperimentArm,
    RephraseCategory,
    RephrasePair,
    RetrievalResult,
    Transcript,
    Turn,
    Verdict,
    VerdictStatus,
    canonical_order,
    parse_category,
)

log = logging.getLogger(__name__)

KNOWLEDGE_BEGIN = "=== Theoretical knowledge ==="
KNOWLEDGE_END = "=== End of theoretical knowledge ==="
VERDICT_BEGIN = "===VERDICT==="
VERDICT_END = "===END==="

CATEGORY_DEFINITIONS: dict[RephraseCategory, str] = {
    RephraseCategory.DEINTENSIFICATION: "Weakens a point",
    RephraseCategory.INTENSIFICATION: "Strengthens a point by reinforcing qualities",
    RephraseCategory.SPECIFICATION: "Adds detail or narrows scope",
    RephraseCategory.GENERALISATION: "Broadens or abstracts the original point",
    RephraseCategory.OTHER: "Rephrase types not covered",
    RephraseCategory.NO_REPHRASE: "Pairs that do not constitute reformulation (e.g., inferences)",
}

FORMAT_REMINDER = (
    "Your previous answer did not contain a valid verdict block. Reply again and finish with:\n"
    f"{VERDICT_BEGIN}\ncategory: <one of: {', '.join(c.value for c in canonical_order())}>\n"
    f"justification: <one or two sentences>\n{VERDICT_END}"
)


def render_definitions() -> str:
    return "\n".join(
        f"- {c.value} ({c.display_name}): {CATEGORY_DEFINITIONS[c]}" for c in canonical_order()
    )


@dataclass(frozen=True)
class AgentSpec:
    role: AgentRole
    system_prompt: str
    rag_enabled: bool = False


@dataclass(frozen=True)
class PromptSet:
    """Per-role system prompt templates.

    Templates use ``{definitions}`` and, optionally, ``{knowledge}``. When a
    template has no ``{knowledge}`` slot the knowledge section is placed in
    the user message instead.
    """

    templates: Mapping[AgentRole, str]

    def __post_init__(self) -> None:
        missing = [r.value for r in AgentRole if r not in self.templates]
        if missing:
            raise ConfigError(f"prompt set lacks templates for: {', '.join(missing)}")

    def has_knowledge_slot(self, role: AgentRole) -> bool:
        return "{knowledge}" in self.templates[role]

    def agent(self, role: AgentRole, rag_enabled: bool) -> AgentSpec:
        return AgentSpec(role, self.templates[role], rag_enabled)


def load_prompts(directory: str | Path | None = None) -> PromptSet:
    """Read ``<role>.txt`` for each role, defaulting to the packaged templates."""
    templates = {}
    if directory is None:
        base = resources.files("rephrase_agents") / "prompts"
        for role in AgentRole:
            templates[role] = (base / f"{role.value}.txt").read_text(encoding="utf-8")
    else:
        directory = Path(directory)
        for role in AgentRole:
            path = directory / f"{role.value}.txt"
            if not path.is_file():
                raise ConfigError(f"missing prompt file {path}")
            templates[role] = path.read_text(encoding="utf-8")
    return PromptSet(templates)


_DEFAULT_PROMPTS: PromptSet | None = None


def default_prompts() -> PromptSet:
    global _DEFAULT_PROMPTS
    if _DEFAULT_PROMPTS is None:
        _DEFAULT_PROMPTS = load_prompts()
    return _DEFAULT_PROMPTS


@dataclass(frozen=True)
class DeliberationPolicy:
    rounds: int = 2
    specialist_order: tuple[AgentRole, ...] = SPECIALIST_ROLES
    verdict_reprompts: int = 1
    top_k: int = DEFAULT_TOP_K
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if sorted(self.specialist_order) != sorted(SPECIALIST_ROLES) or len(self.specialist_order) != 3:
            raise ConfigError("specialist_order must be a permutation of the three specialist roles")
        if self.verdict_reprompts < 0:
            raise ConfigError("verdict_reprompts must be >= 0")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


# --- prompts -----------------------------------------------------------------


def render_knowledge(passages: Sequence[RetrievalResult]) -> str:
    lines = [
        KNOWLEDGE_BEGIN,
        "Ground your analysis in these passages from argumentation and rephrase theory; "
        "cite the bracketed passage ids you rely on.",
    ]
    lines += [f"[{p.chunk_id}] {p.text}" for p in passages]
    lines.append(KNOWLEDGE_END)
    return "\n".join(lines)


def render_history(history: Sequence[Turn]) -> str:
    if not history:
        return "Conversation so far: (none yet)"
    parts = ["Conversation so far:"]
    for t in history:
        parts.append(f"[Round {t.round}] {t.role.display_name}:\n{t.content.strip()}")
    return "\n\n".join(parts)


def _render_pair(pair: RephrasePair) -> str:
    return "\n".join(
        [
            f"Rephrase pair {pair.id}",
            f"Input (rephrasandum): {pair.input_text.strip()}",
            f"Input illocution: {pair.input_illocution.strip() or '(not given)'}",
            f"Output (rephrasans): {pair.output_text.strip()}",
            f"Output illocution: {pair.output_illocution.strip() or '(not given)'}",
        ]
    )


def build_prompt(
    role: AgentRole,
    pair: RephrasePair,
    history: Sequence[Turn] = (),
    passages: Sequence[RetrievalResult] = (),
    prompts: PromptSet | None = None,
    reminder: bool = False,
) -> list[ChatMessage]:
    """System + user message for one turn.

    Informed and zero-shot prompts share one template; they differ only by
    the delimited knowledge section, which is absent when ``passages`` is empty.
    """
    prompts = prompts or default_prompts()
    knowledge = render_knowledge(passages) if passages else ""
    template = prompts.templates[role]
    system = template.replace("{definitions}", render_definitions())
    in_system = prompts.has_knowledge_slot(role)
    if in_system:
        system = system.replace("{knowledge}", knowledge)

    sections = [_render_pair(pair)]
    if knowledge and not in_system:
        sections.append(knowledge)
    sections.append(render_history(history))
    sections.append(f"Your turn: {role.display_name}.")
    if reminder:
        sections.append(FORMAT_REMINDER)
    return [ChatMessage("system", system), ChatMessage("user", "\n\n".join(sections))]


def strip_knowledge(text: str) -> str:
    """Remove delimited knowledge sections (and the blank lines separating them)."""
    pattern = re.compile(
        r"\n*" + re.escape(KNOWLEDGE_BEGIN) + r".*?" + re.escape(KNOWLEDGE_END), re.DOTALL
    )
    return pattern.sub("", text)


def retrieve_for_pair(idx: KnowledgeIndex, pair: RephrasePair, k: int = DEFAULT_TOP_K) -> list[RetrievalResult]:
    query = " ".join([pair.input_text, pair.output_text, pair.input_illocution, pair.output_illocution])
    results = retrieve(idx, query, k)
    if not results:
        log.info("pair %s: no passages retrieved; knowledge section omitted", pair.id)
    return results


# --- verdicts ----------------------------------------------------------------

_KEY_RE = re.compile(r"^\s*(category|justification)\s*:\s*(.*)$", re.IGNORECASE)
_BLOCK_RE = re.compile(re.escape(VERDICT_BEGIN) + r"(.*?)" + re.escape(VERDICT_END), re.DOTALL)


def _parse_failure(reason: str) -> Verdict:
    return Verdict(None, reason, VerdictStatus.PARSE_FAILURE)


def parse_verdict(text: str) -> Verdict:
    """Read the last ``===VERDICT=== ... ===END===`` block in ``text``.

    Never raises: problems come back as a ParseFailure verdict whose
    justification names the reason.
    """
    blocks = _BLOCK_RE.findall(text)
    if not blocks:
        return _parse_failure("no verdict block found")
    # an unclosed opener before the last block would otherwise swallow it
    body = blocks[-1].rsplit(VERDICT_BEGIN, 1)[-1]

    categories: list[str] = []
    justification: list[str] = []
    in_justification = False
    for line in body.splitlines():
        m = _KEY_RE.match(line)
        if m and m.group(1).lower() == "category":
            categories.append(m.group(2).strip())
            in_justification = False
        elif m:
            justification.append(m.group(2).strip())
            in_justification = True
        elif in_justification and line.strip():
            justification.append(line.strip())
    if len(categories) != 1:
        return _parse_failure(f"expected one category line, found {len(categories)}")
    label = categories[0].strip("*`'\" ")
    try:
        category = parse_category(label)
    except UnknownLabel:
        return _parse_failure(f"unknown category label {label!r}")
    if not justification:
        return _parse_failure("verdict block has no justification line")
    return Verdict(category, " ".join(justification).strip(), VerdictStatus.OK)


# --- deliberation ------------------------------------------------------------


@dataclass
class _Session:
    pair: RephrasePair
    arm: ExperimentArm
    backend: ChatBackend
    policy: DeliberationPolicy
    prompts: PromptSet
    turns: list[Turn] = field(default_factory=list)

    def speak(self, role: AgentRole, rnd: int, passages: Sequence[RetrievalResult], reminder: bool = False) -> Turn:
        messages = build_prompt(role, self.pair, self.turns, passages, self.prompts, reminder)
        request = CompletionRequest(
            messages=tuple(messages),
            temperature=self.policy.temperature,
            max_output_tokens=self.policy.max_output_tokens,
            tag=f"{role.value}/{self.pair.id}",
        )
        response = self.backend.complete(request)
        turn = Turn(
            role=role,
            round=rnd,
            content=response.content,
            retrieved_passage_ids=tuple(p.chunk_id for p in passages),
            input_tokens=response.input_tokens,
            output_tokens=response.output_tokens,
        )
        self.turns.append(turn)
        return turn

    def transcript(self, verdict: Verdict) -> Transcript:
        return Transcript(self.pair.id, self.arm, tuple(self.turns), verdict)


def _union(passage_lists: Sequence[Sequence[RetrievalResult]]) -> list[RetrievalResult]:
    seen: dict[str, RetrievalResult] = {}
    for passages in passage_lists:
        for p in passages:
            seen.setdefault(p.chunk_id, p)
    return list(seen.values())


def run_deliberation(
    pair: RephrasePair,
    arm: ExperimentArm,
    backend: ChatBackend,
    idx: KnowledgeIndex | None = None,
    policy: DeliberationPolicy | None = None,
    prompts: PromptSet | None = None,
) -> Transcript:
    """Run one isolated deliberation for ``pair`` under ``arm``.

    Backend errors end the run with a BackendFailure verdict; the turns
    completed so far are kept in the transcript.
    """
    policy = policy or DeliberationPolicy()
    if arm.informed and idx is None:
        raise ConfigError(f"arm {arm.value} requires a knowledge index")
    if not arm.informed and idx is not None:
        raise ConfigError(f"arm {arm.value} is zero-shot and must not receive an index")

    session = _Session(pair, arm, backend, policy, prompts or default_prompts())
    try:
        broker_passages: list[RetrievalResult] = []
        broker_round = 1
        if arm.multi_agent:
            seen_passages = []
            for rnd in range(1, policy.rounds + 1):
                for role in policy.specialist_order:
                    passages = retrieve_for_pair(idx, pair, policy.top_k) if idx is not None else []
                    seen_passages.append(passages)
                    session.speak(role, rnd, passages)
            broker_passages = _union(seen_passages)
            broker_round = policy.rounds
        elif idx is not None:
            broker_passages = retrieve_for_pair(idx, pair, policy.top_k)

        turn = session.speak(AgentRole.BROKER_CRITIC, broker_round, broker_passages)
        verdict = parse_verdict(turn.content)
        for _ in range(policy.verdict_reprompts):
            if verdict.scored:
                break
            log.info("pair %s: unparseable verdict (%s); re-prompting broker", pair.id, verdict.justification)
            turn = session.speak(AgentRole.BROKER_CRITIC, broker_round, broker_passages, reminder=True)
            verdict = parse_verdict(turn.content)
    except BackendError as exc:
        log.warning("pair %s (%s): %s", pair.id, arm.value, exc)
        verdict = Verdict(None, f"{type(exc).__name__}: {exc}", VerdictStatus.BACKEND_FAILURE)
    return session.transcript(verdict)

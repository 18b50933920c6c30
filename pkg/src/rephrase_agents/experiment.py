"""Running experiment arms over a dataset with per-pair isolation.

Each pair gets its own deliberation; nothing but the read-only index and
the backend is shared between pairs. Results go to ``<out>/<arm>.jsonl``,
one RunRecord per line, always in dataset order.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
import tempfile
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .agents import DeliberationPolicy, PromptSet, run_deliberation
from .backend import ChatBackend
from .dataset import Dataset
from .errors import ConfigError, CorruptResultsFile
from .knowledge import KnowledgeIndex
from .types import ExperimentArm, RephrasePair, Transcript, Verdict, VerdictStatus

log = logging.getLogger(__name__)

ALL_ARMS = (
    ExperimentArm.SINGLE_ZERO_SHOT,
    ExperimentArm.SINGLE_RAG,
    ExperimentArm.MAS_ZERO_SHOT,
    ExperimentArm.MAS_RAG,
)

# statuses that resume() treats as final
_DONE = (VerdictStatus.OK, VerdictStatus.PARSE_FAILURE)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass(frozen=True)
class RunRecord:
    pair_id: str
    arm: ExperimentArm
    verdict: Verdict
    transcript: Transcript
    started_at: str
    finished_at: str
    input_tokens: int = 0
    output_tokens: int = 0
    attempt: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "arm": self.arm.value,
            "verdict": self.verdict.to_dict(),
            "transcript": self.transcript.to_dict(),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "attempt": self.attempt,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunRecord:
        return cls(
            pair_id=data["pair_id"],
            arm=ExperimentArm(data["arm"]),
            verdict=Verdict.from_dict(data["verdict"]),
            transcript=Transcript.from_dict(data["transcript"]),
            started_at=data["started_at"],
            finished_at=data["finished_at"],
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            attempt=int(data.get("attempt", 1)),
        )


def read_records(path: str | Path) -> list[RunRecord]:
    """Parse a results file; any bad line raises CorruptResultsFile with its number."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptResultsFile(str(path), lineno, exc) from None
    return records


@dataclass(frozen=True)
class RunConfig:
    arms: tuple[ExperimentArm, ...] = ALL_ARMS
    dataset: str = ""
    index: str | None = None
    policy: DeliberationPolicy = field(default_factory=DeliberationPolicy)
    workers: int = 4
    out: str = "results"
    model: str = ""
    temperature: float = 0.2
    backend: str = "live"
    prompts: str | None = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if any(a.informed for a in self.arms) and not self.index:
            names = ", ".join(a.value for a in self.arms if a.informed)
            raise ConfigError(f"informed arm(s) {names} require an index path")
        if self.policy.temperature != self.temperature:
            object.__setattr__(self, "policy", replace(self.policy, temperature=self.temperature))


def parse_arms(value: str | Sequence[str]) -> tuple[ExperimentArm, ...]:
    """``"all"`` or a comma-separated list of arm names."""
    items = value.split(",") if isinstance(value, str) else list(value)
    items = [i.strip() for i in items if i.strip()]
    if items == ["all"]:
        return ALL_ARMS
    try:
        return tuple(ExperimentArm(i) for i in items)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


POLICY_KEYS = ("rounds", "verdict_reprompts", "top_k", "max_output_tokens")
RUN_KEYS = ("arm", "dataset", "index", "workers", "out", "model", "temperature", "backend", "prompts")
CONFIG_KEYS = RUN_KEYS + POLICY_KEYS


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flatten an INI-style file (``[run]`` and ``[policy]`` sections) to key -> value."""
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    values: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = value
    return values


def _get(values: dict[str, Any], key: str, default: Any) -> Any:
    value = values.get(key)
    return default if value is None or value == "" else value


def make_config(values: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from flat key/value settings (config file merged with flags)."""
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    try:
        policy_args = {k: int(values[k]) for k in POLICY_KEYS if values.get(k) is not None}
        temperature = float(_get(values, "temperature", 0.2))
        workers = int(_get(values, "workers", 4))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        arms=parse_arms(values.get("arm") or "all"),
        dataset=values.get("dataset") or "",
        index=values.get("index") or None,
        policy=DeliberationPolicy(temperature=temperature, **policy_args),
        workers=workers,
        out=values.get("out") or "results",
        model=values.get("model") or "",
        temperature=temperature,
        backend=values.get("backend") or "live",
        prompts=values.get("prompts") or None,
    )


@dataclass(frozen=True)
class ArmSummary:
    arm: ExperimentArm
    path: Path
    executed: int
    skipped: int
    counts: dict[VerdictStatus, int]


def results_path(out_dir: str | Path, arm: ExperimentArm) -> Path:
    return Path(out_dir) / f"{arm.value}.jsonl"


def _deliberate(
    pair: RephrasePair,
    arm: ExperimentArm,
    backend: ChatBackend,
    idx: KnowledgeIndex | None,
    policy: DeliberationPolicy,
    prompts: PromptSet | None,
    attempt: int,
) -> RunRecord:
    started = _now()
    transcript = run_deliberation(pair, arm, backend, idx if arm.informed else None, policy, prompts)
    return RunRecord(
        pair_id=pair.id,
        arm=arm,
        verdict=transcript.verdict,
        transcript=transcript,
        started_at=started,
        finished_at=_now(),
        input_tokens=transcript.input_tokens,
        output_tokens=transcript.output_tokens,
        attempt=attempt,
    )


def _write_atomic(path: Path, records: Sequence[RunRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def execute_arm(
    cfg: RunConfig,
    arm: ExperimentArm,
    dataset: Dataset,
    backend: ChatBackend,
    idx: KnowledgeIndex | None = None,
    *,
    resume: bool = False,
    prompts: PromptSet | None = None,
    progress: Callable[[RunRecord], None] | None = None,
) -> ArmSummary:
    """Run ``arm`` over every pair and write the ordered results file.

    With ``resume=True`` an existing results file is honoured: pairs that
    already finished with ok or parse_failure are kept as-is, and
    backend_failure pairs are re-run with ``attempt`` incremented.
    """
    if arm.informed and idx is None:
        raise ConfigError(f"arm {arm.value} requires a knowledge index")
    path = results_path(cfg.out, arm)

    previous: dict[str, RunRecord] = {}
    if resume and path.exists():
        for rec in read_records(path):
            previous[rec.pair_id] = rec

    kept: dict[str, RunRecord] = {}
    todo: list[tuple[RephrasePair, int]] = []
    for pair in dataset:
        prior = previous.get(pair.id)
        if prior is not None and prior.verdict.status in _DONE:
            kept[pair.id] = prior
        else:
            todo.append((pair, prior.attempt + 1 if prior is not None else 1))
    if kept:
        log.info("%s: skipped %d finished pair(s)", arm.value, len(kept))

    def work(item: tuple[RephrasePair, int]) -> RunRecord:
        rec = _deliberate(item[0], arm, backend, idx, cfg.policy, prompts, item[1])
        if progress is not None:
            progress(rec)
        return rec

    if cfg.workers == 1 or len(todo) <= 1:
        fresh = [work(item) for item in todo]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            fresh = list(pool.map(work, todo))

    done = dict(kept)
    done.update((rec.pair_id, rec) for rec in fresh)
    ordered = [done[pair.id] for pair in dataset]
    _write_atomic(path, ordered)

    counts = {s: 0 for s in VerdictStatus}
    for rec in ordered:
        counts[rec.verdict.status] += 1
    return ArmSummary(arm, path, executed=len(fresh), skipped=len(kept), counts=counts)


def run_arm(
    cfg: RunConfig,
    arm: ExperimentArm,
    dataset: Dataset,
    backend: ChatBackend,
    idx: KnowledgeIndex | None = None,
    prompts: PromptSet | None = None,
) -> Path:
    """Fresh run of one arm; any previous results file is replaced."""
    return execute_arm(cfg, arm, dataset, backend, idx, prompts=prompts).path


def resume(
    cfg: RunConfig,
    arm: ExperimentArm,
    dataset: Dataset,
    backend: ChatBackend,
    idx: KnowledgeIndex | None = None,
    prompts: PromptSet | None = None,
) -> Path:
    return execute_arm(cfg, arm, dataset, backend, idx, resume=True, prompts=prompts).path


def strip_timestamps(record: dict[str, Any]) -> dict[str, Any]:
    """Record body without its wall-clock fields, for determinism comparisons."""
    return {k: v for k, v in record.items() if k not in ("started_at", "finished_at")}


__all__ = [
    "ALL_ARMS",
    "ArmSummary",
    "RunConfig",
    "RunRecord",
    "execute_arm",
    "make_config",
    "parse_arms",
    "read_config_file",
    "read_records",
    "results_path",
    "resume",
    "run_arm",
    "strip_timestamps",
]

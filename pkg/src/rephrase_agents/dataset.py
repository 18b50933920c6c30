"""Loading, validating and selecting gold-annotated rephrase pairs.

CSV files need a header row with ``id,input_text,output_text`` and may add
``input_illocution``, ``output_illocution`` and ``gold``. JSONL files carry
one object per line with the same field names. Row numbers in errors are
1-based data rows (the CSV header is not counted).
"""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import (
    DatasetError,
    DuplicateId,
    EmptyText,
    MissingColumn,
    MissingGold,
    UnknownId,
    UnknownLabel,
)
from .types import RephraseCategory, RephrasePair, canonical_order, parse_category

SCHEMA_VERSION = 1
REQUIRED_COLUMNS = ("id", "input_text", "output_text")
OPTIONAL_COLUMNS = ("input_illocution", "output_illocution", "gold")
COLUMNS = REQUIRED_COLUMNS + OPTIONAL_COLUMNS


@dataclass(frozen=True)
class Dataset:
    records: tuple[RephrasePair, ...]
    source_path: str = ""
    schema_version: int = SCHEMA_VERSION
    _by_id: dict[str, RephrasePair] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[str, RephrasePair] = {}
        for row, rec in enumerate(self.records, start=1):
            if rec.id in by_id:
                raise DuplicateId(rec.id, row)
            by_id[rec.id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[RephrasePair]:
        return iter(self.records)

    def __contains__(self, pair_id: object) -> bool:
        return pair_id in self._by_id

    def __getitem__(self, pair_id: str) -> RephrasePair:
        return self._by_id[pair_id]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def _iter_csv(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(missing)
        reader.fieldnames = header
        for row, raw in enumerate(reader, start=1):
            yield row, raw


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, encoding="utf-8") as fh:
        row = 0
        for line in fh:
            if not line.strip():
                continue
            row += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON ({exc.msg})", row) from None
            if not isinstance(obj, dict):
                raise DatasetError("expected a JSON object", row)
            missing = [c for c in REQUIRED_COLUMNS if c not in obj]
            if missing:
                raise MissingColumn(missing)
            yield row, obj


def _cell(raw: dict[str, Any], key: str) -> str:
    value = raw.get(key)
    return "" if value is None else str(value)


def _to_pair(raw: dict[str, Any], row: int) -> RephrasePair:
    pair_id = _cell(raw, "id").strip()
    if not pair_id:
        raise EmptyText("id", row)
    texts = {}
    for key in ("input_text", "output_text"):
        texts[key] = _cell(raw, key)
        if not texts[key].strip():
            raise EmptyText(key, row)
    gold_cell = _cell(raw, "gold").strip()
    try:
        gold = parse_category(gold_cell) if gold_cell else None
    except UnknownLabel:
        raise UnknownLabel(gold_cell, row) from None
    return RephrasePair(
        id=pair_id,
        input_text=texts["input_text"],
        output_text=texts["output_text"],
        input_illocution=_cell(raw, "input_illocution"),
        output_illocution=_cell(raw, "output_illocution"),
        gold=gold,
    )


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read and validate a dataset file, preserving record order.

    ``format`` is ``"csv"`` or ``"jsonl"``; inferred from the suffix when omitted.
    """
    path = Path(path)
    fmt = (format or _detect_format(path)).lower()
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported dataset format {format!r}")
    rows = _iter_csv(path) if fmt == "csv" else _iter_jsonl(path)

    records: list[RephrasePair] = []
    seen: set[str] = set()
    for row, raw in rows:
        pair = _to_pair(raw, row)
        if pair.id in seen:
            raise DuplicateId(pair.id, row)
        seen.add(pair.id)
        records.append(pair)
    return Dataset(tuple(records), source_path=str(path))


def save_dataset(d: Dataset | Iterable[RephrasePair], path: str | Path, format: str | None = None) -> Path:
    """Write records in canonical form (JSONL unless ``format='csv'``)."""
    path = Path(path)
    fmt = (format or _detect_format(path)).lower()
    records = list(d)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(COLUMNS))
            writer.writeheader()
            for rec in records:
                row = rec.to_dict()
                row["gold"] = row["gold"] or ""
                writer.writerow(row)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    return path


def select_subset(d: Dataset, ids: Sequence[str] | None = None, limit: int | None = None) -> Dataset:
    """Restrict ``d`` to ``ids`` (dataset order kept) and/or its first ``limit`` records."""
    records = d.records
    if ids is not None:
        unknown = [i for i in ids if i not in d]
        if unknown:
            raise UnknownId(unknown)
        wanted = set(ids)
        records = tuple(r for r in records if r.id in wanted)
    if limit is not None:
        if limit < 0:
            raise ValueError("limit must be non-negative")
        records = records[:limit]
    if records is d.records:
        return d
    return Dataset(records, source_path=d.source_path, schema_version=d.schema_version)


def class_support(d: Dataset | Iterable[RephrasePair]) -> dict[RephraseCategory, int]:
    counts = {c: 0 for c in canonical_order()}
    for row, rec in enumerate(d, start=1):
        if rec.gold is None:
            raise MissingGold(rec.id, row)
        counts[rec.gold] += 1
    return counts


LABEL_COLUMNS = ("label", "gold", "category", "prediction")


def load_annotations(path: str | Path, format: str | None = None) -> dict[str, RephraseCategory]:
    """Read ``id -> label`` from a CSV or JSONL file.

    The label comes from the first present column among ``label``, ``gold``,
    ``category`` and ``prediction``; ``pair_id`` is accepted in place of ``id``.
    Every row must carry a parseable label.
    """
    path = Path(path)
    fmt = (format or _detect_format(path)).lower()
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    try:
                        rows.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise DatasetError(f"invalid JSON ({exc.msg})", lineno) from None

    labels: dict[str, RephraseCategory] = {}
    for row, raw in enumerate(rows, start=1):
        raw = {str(k).strip(): v for k, v in raw.items()}
        id_key = "id" if "id" in raw else "pair_id"
        label_key = next((k for k in LABEL_COLUMNS if k in raw), None)
        if id_key not in raw or label_key is None:
            raise MissingColumn(["id", "label"])
        pair_id = _cell(raw, id_key).strip()
        if not pair_id:
            raise EmptyText(id_key, row)
        if pair_id in labels:
            raise DuplicateId(pair_id, row)
        label = _cell(raw, label_key).strip()
        if not label:
            raise MissingGold(pair_id, row)
        try:
            labels[pair_id] = parse_category(label)
        except UnknownLabel:
            raise UnknownLabel(label, row) from None
    return labels

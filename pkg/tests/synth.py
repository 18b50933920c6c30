"""Synthetic datasets, corpora and backend scripts shared by the tests."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from rephrase_agents.dataset import Dataset
from rephrase_agents.types import AgentRole, RephraseCategory, RephrasePair, canonical_order

SPECIALIST_TEXT = {
    AgentRole.ASSERTING: "The output keeps the subject and changes the predicate.",
    AgentRole.ARGUING: "This reads as a narrowing of scope, so I argue for specification.",
    AgentRole.DISAGREEING: "The change in force could also be an intensification.",
}

THEORY = {
    "taxonomy": (
        "Intensification strengthens a point by reinforcing qualities of the rephrasandum. "
        "Deintensification weakens a point. Specification adds detail or narrows scope while "
        "generalisation broadens or abstracts the original point."
    ),
    "iat": (
        "Inference anchoring theory links dialogue structure to argument structure. "
        "Rephrase relations hold between two propositions occupying the same position in "
        "the argument graph and are anchored in transitions between locutions."
    ),
    "fallacy": (
        "A straw man misrepresents the opponent's standpoint. Manipulative reformulation "
        "alters the commitment attributed to the speaker."
    ),
}


def verdict_text(category: RephraseCategory | str, why: str = "synthetic verdict") -> str:
    label = category.value if isinstance(category, RephraseCategory) else category
    return f"After weighing the panel.\n===VERDICT===\ncategory: {label}\njustification: {why}\n===END==="


def make_pairs(n: int = 20) -> list[RephrasePair]:
    """``n`` pairs cycling through all six categories."""
    cats = canonical_order()
    pairs = []
    for i in range(1, n + 1):
        cat = cats[(i - 1) % len(cats)]
        pairs.append(
            RephrasePair(
                id=f"p{i:02d}",
                input_text=f"Candidate {i} says the economy is doing great",
                output_text=f"Candidate {i} claims growth in manufacturing jobs",
                input_illocution=f"Speaker {i} asserts the economy is strong" if i % 3 else "",
                output_illocution=f"Speaker {i} restates with detail",
                gold=cat,
            )
        )
    return pairs


def make_dataset(n: int = 20) -> Dataset:
    return Dataset(tuple(make_pairs(n)))


def write_csv(path: Path, pairs: list[RephrasePair]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "input_text", "output_text", "input_illocution", "output_illocution", "gold"])
        for p in pairs:
            w.writerow(
                [p.id, p.input_text, p.output_text, p.input_illocution, p.output_illocution,
                 p.gold.display_name if p.gold else ""]
            )
    return path


def pair_script(
    pairs: list[RephrasePair],
    rounds: int = 2,
    predict: dict[str, RephraseCategory] | None = None,
    skip_broker: set[str] = frozenset(),
) -> dict[tuple[str, int], str]:
    """Bare-role specialist entries plus one pair-qualified broker verdict per pair.

    Pairs listed in ``skip_broker`` get no broker entry, so their broker call
    exhausts the script.
    """
    script: dict[tuple[str, int], str] = {}
    for role, text in SPECIALIST_TEXT.items():
        for r in range(1, rounds + 1):
            script[(role.value, r)] = f"{text} (round {r})"
    for p in pairs:
        if p.id in skip_broker:
            script[(f"broker/{p.id}", 0)] = ""  # pins the tag with no usable entry
            continue
        cat = (predict or {}).get(p.id, p.gold)
        script[(f"broker/{p.id}", 1)] = verdict_text(cat, f"pair {p.id} judged as {cat.value}")
    return script


def write_script(path: Path, script: dict[tuple[str, int], str]) -> Path:
    grouped: dict[str, list[str]] = {}
    for (tag, n), text in sorted(script.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if n == 0:
            grouped.setdefault(tag, [])
            continue
        grouped.setdefault(tag, []).append(text)
    path.write_text(json.dumps(grouped, indent=1), encoding="utf-8")
    return path


def write_corpus(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for name, body in THEORY.items():
        (directory / f"{name}.txt").write_text(body, encoding="utf-8")
    return directory

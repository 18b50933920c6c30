"""Offline walkthrough: index a tiny theory corpus, deliberate on two pairs, score the result.

Run with ``python3 demos/offline_walkthrough.py``. No network access or API key
is needed because every model reply comes from a scripted backend.
"""

import tempfile
from pathlib import Path

from rephrase_agents import (
    Document,
    ExperimentArm,
    RephraseCategory,
    RephrasePair,
    ScriptedBackend,
    build_index,
    chunk_document,
    evaluate,
    run_deliberation,
)
from rephrase_agents.metrics import Prediction
from rephrase_agents.reporting import render_report, render_text

# A two-document knowledge base is enough to see retrieval at work.
docs = [
    Document("taxonomy", "Rephrase types", "Specification adds detail or narrows the scope of the original point. "
             "Generalisation broadens it. Intensification strengthens a point."),
    Document("dialogue", "Dialogue anchoring", "Rephrase relations hold between propositions at the same position in the "
             "argument graph and are anchored in transitions between locutions."),
]
index = build_index([c for d in docs for c in chunk_document(d, max_words=20, overlap_words=5)])

pairs = [
    RephrasePair("d1", "We need more jobs", "We need more manufacturing jobs in Ohio",
                 gold=RephraseCategory.SPECIFICATION),
    RephrasePair("d2", "The plan is good", "The plan is absolutely the best plan ever",
                 gold=RephraseCategory.INTENSIFICATION),
]

# Specialist replies are shared templates; each broker reply is pinned to its pair.
script = {
    ("asserting", 1): "The output restates the input claim.",
    ("arguing", 1): "It narrows or strengthens the original point.",
    ("disagreeing", 1): "It might simply be a different claim.",
    ("asserting", 2): "Both spans occupy the same argumentative position.",
    ("arguing", 2): "The change is a reformulation, not a new claim.",
    ("disagreeing", 2): "I accept that it is a rephrase.",
    ("broker/d1", 1): "===VERDICT===\ncategory: Specification\njustification: adds place and sector\n===END===",
    ("broker/d2", 1): "===VERDICT===\ncategory: Intensifying\njustification: superlative force\n===END===",
}
backend = ScriptedBackend(script)

predictions = []
for pair in pairs:
    transcript = run_deliberation(pair, ExperimentArm.MAS_RAG, backend, index)
    print(f"{pair.id}: {len(transcript.turns)} turns, verdict {transcript.verdict.category.display_name}")
    for turn in transcript.turns[:3]:
        print(f"   round {turn.round} {turn.role.display_name}: passages {list(turn.retrieved_passage_ids)}")
    predictions.append(Prediction(pair.id, transcript.verdict.category, transcript.verdict.status))

# Only two of six classes occur, and absent classes score F1 = 0, so macro F1 is 1/3 while MCC is 1.
report = evaluate(predictions, {p.id: p.gold for p in pairs}, "mas_rag")
print()
print(render_text(report))

out = Path(tempfile.mkdtemp(prefix="rephrase-demo-"))
for path in render_report(report, ["csv", "svg"], out):
    print(f"wrote {path}")

"""Classification and agreement metrics over the six-way label space.

Conventions: precision, recall and F1 are 0 when their denominator is 0,
and a class that is neither present nor predicted still contributes F1 = 0
to the macro average. MCC is 0 when its denominator is 0.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, EmptyMatrix, IdSetMismatch, LengthMismatch, UnknownId
from .types import ExperimentArm, RephraseCategory, VerdictStatus, canonical_order, parse_category


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are gold labels, columns predictions, both in ``labels`` order."""

    counts: np.ndarray
    labels: tuple[RephraseCategory, ...] = field(default_factory=lambda: tuple(canonical_order()))

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.labels)
        if counts.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, key: tuple[RephraseCategory, RephraseCategory]) -> int:
        gold, pred = key
        return int(self.counts[self.labels.index(gold), self.labels.index(pred)])

    def permuted(self, labels: Sequence[RephraseCategory]) -> ConfusionMatrix:
        """Same counts with both axes re-ordered to ``labels``."""
        perm = [self.labels.index(c) for c in labels]
        return ConfusionMatrix(self.counts[np.ix_(perm, perm)], tuple(labels))


def build_confusion(
    gold: Sequence[RephraseCategory | str],
    pred: Sequence[RephraseCategory | str],
    labels: Sequence[RephraseCategory] | None = None,
) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold has {len(gold)} labels, pred has {len(pred)}")
    labels = tuple(labels or canonical_order())
    pos = {c: i for i, c in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        counts[pos[parse_category(g)], pos[parse_category(p)]] += 1
    return ConfusionMatrix(counts, labels)


@dataclass(frozen=True)
class ClassScores:
    category: RephraseCategory
    precision: float
    recall: float
    f1: float
    support: int


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def per_class_scores(cm: ConfusionMatrix) -> list[ClassScores]:
    counts = cm.counts
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    scores = []
    for i, c in enumerate(cm.labels):
        p = _ratio(tp[i], predicted[i])
        r = _ratio(tp[i], support[i])
        f1 = _ratio(2 * p * r, p + r)
        scores.append(ClassScores(c, float(p), float(r), float(f1), int(support[i])))
    return scores


def macro_from_per_class(f1_values: Iterable[float]) -> float:
    """Unweighted mean of per-class F1 values."""
    values = list(f1_values)
    if not values:
        raise EmptyInput("no per-class values to average")
    return math.fsum(values) / len(values)


def macro_f1(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("macro F1 of an empty confusion matrix")
    return macro_from_per_class(s.f1 for s in per_class_scores(cm))


def mcc_multiclass(cm: ConfusionMatrix) -> float:
    """Multiclass Matthews correlation computed from the confusion counts."""
    if cm.total == 0:
        raise EmptyMatrix("MCC of an empty confusion matrix")
    # python ints avoid overflow in the squared sums
    counts = cm.counts.tolist()
    s = sum(map(sum, counts))
    c = sum(counts[k][k] for k in range(len(counts)))
    t = [sum(row) for row in counts]
    p = [sum(col) for col in zip(*counts)]
    num = c * s - sum(pk * tk for pk, tk in zip(p, t))
    den_sq = (s * s - sum(pk * pk for pk in p)) * (s * s - sum(tk * tk for tk in t))
    if den_sq == 0:
        return 0.0
    return num / math.sqrt(den_sq)


# --- agreement ---------------------------------------------------------------


def _check_pair(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"annotation lists differ in length ({len(a)} vs {len(b)})")
    if not a:
        raise EmptyInput("kappa needs at least one item")


def cohens_kappa(a: Sequence, b: Sequence) -> float:
    """Cohen's kappa for two equal-length label sequences (any hashable labels).

    Returns 1.0 in the forced case where both annotators use one and the
    same label throughout (expected and observed agreement both 1).
    """
    _check_pair(a, b)
    n = len(a)
    observed = sum(x == y for x, y in zip(a, b)) / n
    count_a: dict = {}
    count_b: dict = {}
    for x in a:
        count_a[x] = count_a.get(x, 0) + 1
    for y in b:
        count_b[y] = count_b.get(y, 0) + 1
    expected = math.fsum(count_a[k] * count_b.get(k, 0) for k in count_a) / (n * n)
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def per_category_kappa(a: Sequence, b: Sequence, category: RephraseCategory | str) -> float:
    """One-vs-rest kappa: both lists are reduced to is/is-not ``category``."""
    _check_pair(a, b)
    target = parse_category(category)
    bin_a = [parse_category(x) is target for x in a]
    bin_b = [parse_category(y) is target for y in b]
    return cohens_kappa(bin_a, bin_b)


def is_degenerate_binary(a: Sequence, b: Sequence, category: RephraseCategory | str) -> bool:
    """True when one-vs-rest kappa hits the forced p_e = 1 case."""
    target = parse_category(category)
    bin_a = {parse_category(x) is target for x in a}
    bin_b = {parse_category(y) is target for y in b}
    return len(bin_a) == 1 and bin_a == bin_b


@dataclass(frozen=True)
class AgreementReport:
    overall: float
    per_category: dict[RephraseCategory, float]
    degenerate: frozenset[RephraseCategory]
    n_items: int


def agreement(a: Mapping[str, RephraseCategory], b: Mapping[str, RephraseCategory]) -> AgreementReport:
    """Kappa between two annotators keyed by pair id (id sets must match)."""
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        raise IdSetMismatch(only_a, only_b)
    ids = sorted(a)
    la = [a[i] for i in ids]
    lb = [b[i] for i in ids]
    return AgreementReport(
        overall=cohens_kappa(la, lb),
        per_category={c: per_category_kappa(la, lb, c) for c in canonical_order()},
        degenerate=frozenset(c for c in canonical_order() if is_degenerate_binary(la, lb, c)),
        n_items=len(ids),
    )


# --- evaluation reports ------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    pair_id: str
    category: RephraseCategory | None
    status: VerdictStatus = VerdictStatus.OK


@dataclass(frozen=True)
class EvalReport:
    arm: str
    matrix: ConfusionMatrix
    per_class: tuple[ClassScores, ...]
    macro_f1: float
    mcc: float
    parse_failures: int = 0
    backend_failures: int = 0

    @property
    def scored(self) -> int:
        return self.matrix.total

    @property
    def excluded(self) -> int:
        return self.parse_failures + self.backend_failures

    @property
    def dataset_size(self) -> int:
        return self.scored + self.excluded


def evaluate(
    predictions: Iterable[Prediction],
    gold: Mapping[str, RephraseCategory],
    arm: ExperimentArm | str = "",
) -> EvalReport:
    """Score OK predictions against ``gold``; failed verdicts are counted, not scored."""
    predictions = list(predictions)
    unknown = [p.pair_id for p in predictions if p.pair_id not in gold]
    if unknown:
        raise UnknownId(unknown)
    scored = [p for p in predictions if p.status is VerdictStatus.OK]
    parse_failures = sum(p.status is VerdictStatus.PARSE_FAILURE for p in predictions)
    backend_failures = sum(p.status is VerdictStatus.BACKEND_FAILURE for p in predictions)
    cm = build_confusion([gold[p.pair_id] for p in scored], [p.category for p in scored])
    if cm.total == 0:
        raise EmptyMatrix("no successfully classified pairs to evaluate")
    arm_name = arm.value if isinstance(arm, ExperimentArm) else str(arm)
    return EvalReport(
        arm=arm_name,
        matrix=cm,
        per_class=tuple(per_class_scores(cm)),
        macro_f1=macro_f1(cm),
        mcc=mcc_multiclass(cm),
        parse_failures=parse_failures,
        backend_failures=backend_failures,
    )


@dataclass(frozen=True)
class MacroCheck:
    """Printed macro F1 versus the mean of the printed per-class values."""

    label: str
    recomputed: float
    reported: float | None
    tolerance: float

    @property
    def consistent(self) -> bool:
        return self.reported is None or abs(self.recomputed - self.reported) <= self.tolerance + 1e-12

    @property
    def note(self) -> str:
        if self.reported is None:
            return ""
        if self.consistent:
            return f"{self.label}: recomputed macro F1 {self.recomputed:.3f} matches reported {self.reported:.2f}"
        return (
            f"{self.label}: recomputed macro F1 {self.recomputed:.3f} differs from reported "
            f"{self.reported:.2f} by {self.recomputed - self.reported:+.3f}"
        )


def check_macro(
    label: str, per_class_f1: Sequence[float], reported: float | None = None, tolerance: float = 0.01
) -> MacroCheck:
    return MacroCheck(label, macro_from_per_class(per_class_f1), reported, tolerance)


def arm_deltas(reports: Mapping[str, EvalReport], baseline: str) -> dict[str, tuple[float, float]]:
    """(macro F1, MCC) differences of every arm against ``baseline``."""
    base = reports[baseline]
    return {
        name: (r.macro_f1 - base.macro_f1, r.mcc - base.mcc)
        for name, r in reports.items()
        if name != baseline
    }

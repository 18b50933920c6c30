"""Text, CSV and SVG renderings of evaluation reports."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from html import escape
from pathlib import Path

from .metrics import EvalReport, check_macro
from .types import canonical_order

CSV_HEADER = ["category", "precision", "recall", "f1", "support"]
FORMATS = ("text", "csv", "svg")


def render_text(report: EvalReport) -> str:
    width = max(len(c.display_name) for c in canonical_order()) + 2
    lines = [
        f"Arm: {report.arm or '-'}",
        f"{'Category':<{width}}{'Precision':>10}{'Recall':>10}{'F1':>8}{'Support':>9}",
    ]
    for s in report.per_class:
        lines.append(
            f"{s.category.display_name:<{width}}{s.precision:>10.2f}{s.recall:>10.2f}{s.f1:>8.2f}{s.support:>9d}"
        )
    lines.append(f"{'Macro F1':<{width}}{report.macro_f1:>37.2f}")
    lines.append(f"{'MCC':<{width}}{report.mcc:>37.2f}")
    lines.append(
        f"Scored {report.scored}, excluded {report.excluded} "
        f"(parse_failure {report.parse_failures}, backend_failure {report.backend_failures})"
    )
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in report.per_class:
        writer.writerow([s.category.value, f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}", s.support])
    writer.writerow(["macro_f1", f"{report.macro_f1:.6f}"])
    writer.writerow(["mcc", f"{report.mcc:.6f}"])
    return buf.getvalue()


def _blend(value: float) -> str:
    # white -> dark blue
    lo, hi = (255, 255, 255), (8, 48, 107)
    r, g, b = (round(a + (z - a) * value) for a, z in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(report: EvalReport, cell: int = 64) -> str:
    labels = [c.display_name for c in report.matrix.labels]
    counts = report.matrix.counts
    n = len(labels)
    left, top = 150, 60
    width, height = left + n * cell + 20, top + n * cell + 130
    vmax = max(int(counts.max()), 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<text x="{left + n * cell / 2}" y="24" text-anchor="middle" font-size="15">'
        f"Confusion matrix: {escape(report.arm or 'predictions')}</text>",
    ]
    for i in range(n):
        for j in range(n):
            v = int(counts[i, j])
            x, y = left + j * cell, top + i * cell
            shade = v / vmax
            ink = "#ffffff" if shade > 0.5 else "#000000"
            out.append(
                f'<rect class="cell" data-gold="{report.matrix.labels[i].value}" '
                f'data-pred="{report.matrix.labels[j].value}" x="{x}" y="{y}" width="{cell}" '
                f'height="{cell}" fill="{_blend(shade)}" stroke="#999999"/>'
            )
            out.append(
                f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" fill="{ink}">{v}</text>'
            )
    for i, name in enumerate(labels):
        out.append(
            f'<text x="{left - 8}" y="{top + i * cell + cell / 2 + 4}" text-anchor="end">{escape(name)}</text>'
        )
        x = left + i * cell + cell / 2
        y = top + n * cell + 10
        out.append(
            f'<text x="{x}" y="{y}" text-anchor="end" transform="rotate(-45 {x} {y})">{escape(name)}</text>'
        )
    out.append(f'<text x="{left + n * cell / 2}" y="{height - 8}" text-anchor="middle">Predicted</text>')
    out.append(
        f'<text x="16" y="{top + n * cell / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + n * cell / 2})">Gold</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


_RENDERERS = {"text": (render_text, "txt"), "csv": (render_csv, "csv"), "svg": (render_svg, "svg")}


def render_report(
    report: EvalReport, formats: Iterable[str], out_dir: str | Path, stem: str | None = None
) -> list[Path]:
    """Write the requested formats to ``out_dir`` and return the file paths."""
    formats = list(dict.fromkeys(formats))
    unknown = [f for f in formats if f not in _RENDERERS]
    if unknown:
        raise ValueError(f"unknown report format(s): {', '.join(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or report.arm or "report"
    paths = []
    for fmt in formats:
        render, suffix = _RENDERERS[fmt]
        path = out_dir / f"{stem}.{suffix}"
        path.write_text(render(report), encoding="utf-8")
        paths.append(path)
    return paths


@dataclass(frozen=True)
class F1Column:
    """One arm's per-class F1 values in canonical order, plus optional published figures."""

    label: str
    per_class_f1: Sequence[float]
    reported_macro: float | None = None
    mcc: float | None = None

    @classmethod
    def from_report(cls, report: EvalReport) -> F1Column:
        return cls(report.arm, [s.f1 for s in report.per_class], None, report.mcc)


def render_f1_table(columns: Sequence[F1Column], tolerance: float = 0.01) -> tuple[str, list[str]]:
    """Side-by-side F1 table; macro F1 is always recomputed from the per-class rows.

    Returns the table and a list of discrepancy notes for columns whose
    reported macro differs from the recomputed one by more than ``tolerance``.
    """
    cats = canonical_order()
    for col in columns:
        if len(col.per_class_f1) != len(cats):
            raise ValueError(f"column {col.label!r} needs {len(cats)} per-class values")
    checks = [check_macro(c.label, c.per_class_f1, c.reported_macro, tolerance) for c in columns]
    width = max(len(c.display_name) for c in cats) + 2
    colw = max(10, *(len(c.label) + 2 for c in columns))

    def row(name: str, values: Iterable[str]) -> str:
        return f"{name:<{width + 12}}" + "".join(f"{v:>{colw}}" for v in values)

    lines = [row("Category", (c.label for c in columns))]
    for i, cat in enumerate(cats):
        lines.append(row(cat.display_name, (f"{c.per_class_f1[i]:.2f}" for c in columns)))
    lines.append(row("Macro F1", (f"{k.recomputed:.3f}" for k in checks)))
    if any(c.reported_macro is not None for c in columns):
        lines.append(
            row("Macro F1 (reported)", ("-" if c.reported_macro is None else f"{c.reported_macro:.2f}" for c in columns))
        )
    if any(c.mcc is not None for c in columns):
        lines.append(row("MCC", ("-" if c.mcc is None else f"{c.mcc:.2f}" for c in columns)))
    notes = [f"NOTE {k.note}" for k in checks if not k.consistent]
    return "\n".join(lines + notes) + "\n", notes

import csv
import io
import re

import pytest

from rephrase_agents.metrics import Prediction, check_macro, evaluate
from rephrase_agents.reporting import CSV_HEADER, render_csv, render_f1_table, render_report, render_svg, render_text
from rephrase_agents.types import RephraseCategory as C, VerdictStatus, canonical_order

from reference_scores import PER_CLASS_F1, REPORTED_MACRO, columns


@pytest.fixture
def perfect():
    gold = {f"p{i}": canonical_order()[i % 6] for i in range(12)}
    return evaluate([Prediction(k, v) for k, v in gold.items()], gold, "mas_rag")


@pytest.fixture
def mixed():
    gold = {"a": C.OTHER, "b": C.SPECIFICATION, "c": C.SPECIFICATION, "d": C.NO_REPHRASE}
    preds = [
        Prediction("a", C.OTHER),
        Prediction("b", C.GENERALISATION),
        Prediction("c", C.SPECIFICATION),
        Prediction("d", None, VerdictStatus.PARSE_FAILURE),
    ]
    return evaluate(preds, gold, "single_zero")


def test_text_perfect_run(perfect):
    text = render_text(perfect)
    for cat in canonical_order():
        line = next(l for l in text.splitlines() if l.startswith(cat.display_name))
        assert line.split()[3] == "1.00"
    assert "Macro F1" in text and "Scored 12, excluded 0" in text


def test_text_row_order(mixed):
    text = render_text(mixed)
    positions = [text.index(c.display_name) for c in canonical_order()]
    assert positions == sorted(positions)
    assert "excluded 1 (parse_failure 1, backend_failure 0)" in text


def test_csv_schema(mixed):
    body = render_csv(mixed)
    assert body.splitlines()[0] == "category,precision,recall,f1,support"
    rows = list(csv.reader(io.StringIO(body)))
    assert rows[0] == CSV_HEADER
    assert len(rows) - 1 == 8
    assert [r[0] for r in rows[1:7]] == [c.value for c in canonical_order()]
    assert rows[7][0] == "macro_f1" and float(rows[7][1]) == pytest.approx(mixed.macro_f1, abs=1e-6)
    assert rows[8][0] == "mcc" and float(rows[8][1]) == pytest.approx(mixed.mcc, abs=1e-6)
    spec_row = rows[1 + canonical_order().index(C.SPECIFICATION)]
    assert spec_row[1:] == ["1.000000", "0.500000", "0.666667", "2"]


def test_svg_heatmap(mixed):
    svg = render_svg(mixed)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count('<rect class="cell"') == 36
    for cat in canonical_order():
        assert cat.display_name in svg
    assert re.search(r'data-gold="specification" data-pred="generalisation"', svg)


def test_render_report_writes_files(tmp_path, mixed):
    paths = render_report(mixed, ["text", "csv", "svg"], tmp_path / "r")
    assert sorted(p.name for p in paths) == ["single_zero.csv", "single_zero.svg", "single_zero.txt"]
    with pytest.raises(ValueError):
        render_report(mixed, ["pdf"], tmp_path)


@pytest.mark.parametrize("arm", ["single_zero", "single_rag", "mas_rag"])
def test_published_columns_consistent(arm):
    check = check_macro(arm, PER_CLASS_F1[arm], REPORTED_MACRO[arm], 0.01)
    assert check.consistent
    assert abs(check.recomputed - REPORTED_MACRO[arm]) <= 0.01


def test_published_column_means():
    # hand-summed column means
    assert sum(PER_CLASS_F1["single_zero"]) / 6 == pytest.approx(1.62 / 6)
    assert sum(PER_CLASS_F1["single_rag"]) / 6 == pytest.approx(0.545)
    assert sum(PER_CLASS_F1["mas_zero"]) / 6 == pytest.approx(0.345)
    assert sum(PER_CLASS_F1["mas_rag"]) / 6 == pytest.approx(4.03 / 6)


def test_f1_table_flags_mas_zero_discrepancy():
    table, notes = render_f1_table(columns())
    assert len(notes) == 1
    assert "mas_zero" in notes[0] and "0.345" in notes[0] and "0.38" in notes[0]
    assert notes[0] in table
    macro_line = next(l for l in table.splitlines() if l.startswith("Macro F1 "))
    assert macro_line.split()[2:] == ["0.270", "0.545", "0.345", "0.672"]


def test_f1_table_rejects_short_column():
    from rephrase_agents.reporting import F1Column

    with pytest.raises(ValueError):
        render_f1_table([F1Column("x", [0.1] * 5)])

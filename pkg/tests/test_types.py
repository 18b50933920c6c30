import pytest
from hypothesis import given, strategies as st

from rephrase_agents.errors import UnknownLabel
from rephrase_agents.types import (
    ExperimentArm,
    RephraseCategory,
    Transcript,
    Turn,
    Verdict,
    VerdictStatus,
    AgentRole,
    canonical_order,
    parse_category,
)

SERIALIZED = ["deintensification", "intensification", "specification", "generalisation", "other", "no_rephrase"]


def test_canonical_order():
    order = canonical_order()
    assert order == [
        RephraseCategory.DEINTENSIFICATION,
        RephraseCategory.INTENSIFICATION,
        RephraseCategory.SPECIFICATION,
        RephraseCategory.GENERALISATION,
        RephraseCategory.OTHER,
        RephraseCategory.NO_REPHRASE,
    ]
    assert len(order) == 6
    assert order[5] is RephraseCategory.NO_REPHRASE
    assert canonical_order() == order


def test_serialized_names_are_fixed():
    assert [c.value for c in canonical_order()] == SERIALIZED


@pytest.mark.parametrize(
    "label, expected",
    [
        ("Intensifying", RephraseCategory.INTENSIFICATION),
        ("no_rephrase", RephraseCategory.NO_REPHRASE),
        ("No_rephrase", RephraseCategory.NO_REPHRASE),
        ("Not a Rephrase", RephraseCategory.NO_REPHRASE),
        ("Deintensifying", RephraseCategory.DEINTENSIFICATION),
        ("De-intensification", RephraseCategory.DEINTENSIFICATION),
        ("Generalising", RephraseCategory.GENERALISATION),
        ("  SPECIFICATION ", RephraseCategory.SPECIFICATION),
        ("NoRephrase", RephraseCategory.NO_REPHRASE),
        ("other", RephraseCategory.OTHER),
    ],
)
def test_parse_category_aliases(label, expected):
    assert parse_category(label) is expected


@pytest.mark.parametrize("label", ["Sarcasm", "", "Specific", "generalization", "intensify"])
def test_parse_category_rejects_unknown(label):
    with pytest.raises(UnknownLabel) as err:
        parse_category(label)
    assert err.value.label == label


@pytest.mark.parametrize("cat", list(RephraseCategory))
def test_round_trip(cat):
    assert parse_category(cat.value) is cat
    assert parse_category(cat.display_name) is cat


@given(st.text(max_size=20))
def test_parse_category_total_or_rejecting(text):
    try:
        cat = parse_category(text)
    except UnknownLabel:
        return
    assert cat in canonical_order()


def test_arm_dimensions():
    assert len(ExperimentArm) == 4
    assert {(a.multi_agent, a.informed) for a in ExperimentArm} == {
        (False, False), (False, True), (True, False), (True, True)
    }


def test_transcript_round_trip():
    t = Transcript(
        "p1",
        ExperimentArm.MAS_RAG,
        (Turn(AgentRole.ASSERTING, 1, "x", ("a#0000",), 3, 4),),
        Verdict(RephraseCategory.OTHER, "because"),
    )
    assert Transcript.from_dict(t.to_dict()) == t
    failed = Verdict(None, "boom", VerdictStatus.BACKEND_FAILURE)
    assert Verdict.from_dict(failed.to_dict()) == failed
    with pytest.raises(UnknownLabel):
        Verdict.from_dict({"category": None, "justification": "", "status": "ok"})

import pytest

from helpers import doc_from
from povshift.context import (
    PAD,
    SEP,
    SPECIAL_TOKENS,
    UNK,
    ContextBuilder,
    RankingExample,
    capitalize_first,
    innermost,
    normalize_string,
    tokenize_string,
)
from povshift.conversion import plan_conversion
from povshift.core import CaseClass, Mention
from povshift.ranker import HashEmbeddingProvider, ModelConfig, TrainedRanker


@pytest.fixture(scope="module")
def excerpt_window(excerpt, nick):
    """The slot of "I" in the excerpt with N=5 and K=2, nothing selected yet."""
    doc = excerpt.document
    plan = plan_conversion(doc, nick)
    builder = ContextBuilder(doc, plan.scheduled, 5, 2, {v.token_index: v.new_form for v in plan.verb_edits})
    focus = doc.chain(plan.focus).mentions[0]
    return builder.example(focus, ["Nick", "he"], {})


def test_worked_window(excerpt_window):
    ex = excerpt_window
    assert ex.left_tokens == (",", "to", "his", "job", ".")
    # the planned verb edit is already visible on the right
    assert ex.right_tokens == ("drives", "to", "the", "city", "every")
    assert [m.tokens for m in ex.left_mentions] == [("Phil",), ("his",)]
    assert [m.tokens for m in ex.right_mentions] == [("Emily",)]
    assert [m.distance for m in ex.left_mentions] == [9, 3]
    assert ex.sentence_initial and ex.slot is CaseClass.NOMINATIVE


def test_worked_window_encoding(excerpt_window):
    model = TrainedRanker(ModelConfig(n_tokens=5, k_mentions=2), HashEmbeddingProvider(dim=8))
    enc = model.encode(excerpt_window)
    words = {i + len(SPECIAL_TOKENS): t for t, i in model.vocab.items()} | dict(enumerate(SPECIAL_TOKENS))
    back = lambda ids: [words[int(i)] for i in ids]  # noqa: E731
    assert back(enc.tok_left) == [",", "to", "his", "job", "."]
    # the right LSTM reads from the far end toward the slot
    assert back(enc.tok_right) == ["every", "city", "the", "to", "drives"]
    # the candidate tokens are appended to the left sequences inside the network
    assert back(enc.men_left) == ["Phil", SEP, "his", SEP]
    assert back(enc.men_right) == [PAD, SEP, "Emily"]
    assert [back(c) for c in enc.candidates] == [["Nick"], ["He"]]
    assert enc.gold == -1
    # padding carries no binary features
    assert not enc.men_right_phi[0].any() and enc.men_right_phi[2].any()


def test_short_windows_are_padded(excerpt_window):
    model = TrainedRanker(ModelConfig(n_tokens=40, k_mentions=3), HashEmbeddingProvider(dim=8))
    enc = model.encode(excerpt_window)
    assert len(enc.tok_left) == 40 and list(enc.tok_left[:31]) == [0] * 31
    assert len(enc.men_left) == 2 * 3 and int(enc.men_left[0]) == 0


def _two_mentions():
    doc = doc_from([["I", "saw", "Bo", "."], ["Then", "I", "left", "."]], {"f": [(0, 0), (5, 5)], "b": [(2, 2)]})
    return doc, doc.chain("f").mentions


def test_future_slots_are_unknown_until_resolved():
    doc, (first, second) = _two_mentions()
    builder = ContextBuilder(doc, [first, second], 10, 4)
    ex = builder.example(first, ["Ann", "she"], {})
    assert ex.right_tokens == ("saw", "Bo", ".", "Then", UNK, "left", ".")
    assert [m.tokens for m in ex.right_mentions] == [("Bo",), (UNK,)]
    later = builder.example(second, ["Ann", "she"], {first.id: "Ann"})
    assert later.left_tokens == ("Ann", "saw", "Bo", ".", "Then")
    assert later.prior_strings == ("Ann",)
    assert [m.tokens for m in later.left_mentions] == [("Ann",), ("Bo",)]
    filled = builder.example(first, ["Ann"], {second.id: "she"}, future_resolved=True)
    assert filled.right_tokens[3:5] == ("Then", "she")


def test_selection_at_sentence_start_is_capitalized():
    doc, (first, second) = _two_mentions()
    builder = ContextBuilder(doc, [first, second], 10, 4)
    ex = builder.example(second, ["she"], {first.id: "she"})
    assert ex.left_tokens[0] == "She"


def test_overlapping_scheduled_mentions_are_rejected():
    doc = doc_from([["my", "dad", "left", "."]], {"f": [(0, 0)], "d": [(0, 1)]})
    with pytest.raises(ValueError, match="overlaps"):
        ContextBuilder(doc, [doc.chain("f").mentions[0], doc.chain("d").mentions[0]])


def test_innermost_keeps_inner_mentions():
    outer = Mention("d", (0, 1), "my dad")
    inner = Mention("f", (0, 0), "my")
    other = Mention("b", (3, 3), "Bo")
    assert innermost([outer, other, inner]) == [inner, other]


@pytest.mark.parametrize("text, expected", [
    ("Nick 's", "Nick's"),
    ("  He ", "he"),
    ("the  old   man", "the old man"),
    ("Pine Street", "Pine Street"),
])
def test_normalize_string(text, expected):
    assert normalize_string(text) == expected


def test_tokenize_and_capitalize():
    assert tokenize_string("Nick Flynn's") == ["Nick", "Flynn", "'s"]
    assert tokenize_string("he himself") == ["he", "himself"]
    assert capitalize_first("his son") == "His son"
    assert capitalize_first("") == ""


def test_example_dict_round_trip(excerpt_window):
    ex = excerpt_window
    assert RankingExample.from_dict(ex.to_dict()) == ex

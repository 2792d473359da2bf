import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from lemminflect import getInflection

from helpers import doc_from
from povshift.morph import (
    Tense,
    VerbEdit,
    apply_verb_edits,
    conjugate,
    find_agreement_verbs,
    load_verb_dictionary,
    plan_verb_edits,
    suffix_third_singular,
    tense_from_pos,
)

DICTIONARY = load_verb_dictionary()


def test_dictionary_agrees_with_oracle():
    """Every shipped row matches lemminflect's third singular and past."""
    wrong = [(e.lemma, e.third_singular, e.past) for e in DICTIONARY.values()
             if e.third_singular not in getInflection(e.lemma, "VBZ") or e.past not in getInflection(e.lemma, "VBD")]
    assert wrong == []
    assert len(DICTIONARY) >= 200


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(DICTIONARY)))
def test_dictionary_present_forms(lemma):
    entry = DICTIONARY[lemma]
    assert conjugate(entry.base, lemma) == (entry.third_singular, "dictionary")
    # already-agreeing and past forms stay
    assert conjugate(entry.third_singular, lemma) == (entry.third_singular, "unchanged")
    assert conjugate(entry.past, lemma, Tense.PAST)[1] == "unchanged"


@settings(max_examples=200, deadline=None)
@given(st.from_regex(r"[b-df-hj-np-tv-z][aeiou][b-df-hj-np-tv-z]{0,2}(s|sh|ch|x|z|y|e|k|t)", fullmatch=True))
def test_suffix_rule_matches_oracle_spelling(base):
    """The regular spelling rules agree with the oracle's rules on novel
    words.  Final "o" is lexical in English and is checked on real words."""
    if base in DICTIONARY:
        return
    expected = getInflection(base, "VBZ", inflect_oov=True)
    assert suffix_third_singular(base) == expected[0]


@pytest.mark.parametrize("word", ["veto", "echo", "embargo", "woo", "boo", "tattoo", "radio", "zoo", "lasso"])
def test_final_o_words(word):
    assert suffix_third_singular(word) == getInflection(word, "VBZ")[0]


def test_final_o_exceptions_come_from_the_dictionary():
    assert conjugate("solo") == ("solos", "dictionary")
    assert conjugate("tango") == ("tangos", "dictionary")


@pytest.mark.parametrize("form, lemma, tense, expected, rule", [
    ("am", "be", "present", "is", "irregular"),
    ("Am", "be", "present", "Is", "irregular"),
    ("were", "be", "past", "was", "irregular"),
    ("are", "be", "present", "is", "irregular"),
    ("have", "have", "present", "has", "irregular"),
    ("'ve", "have", "present", "'s", "irregular"),
    ("’m", "be", "present", "’s", "irregular"),
    ("can", "can", "present", "can", "unchanged"),
    ("did", "do", "past", "did", "unchanged"),
    ("need", "need", "present", "needs", "dictionary"),
    ("zorp", "zorp", "present", "zorps", "suffix_rule"),
    ("zorped", "zorp", "past", "zorped", "unchanged"),
    ("zorps", "zorp", "present", "zorps", "unchanged"),
    ("DRIVE", "drive", "present", "DRIVES", "dictionary"),
])
def test_conjugate_cases(form, lemma, tense, expected, rule):
    assert conjugate(form, lemma, tense) == (expected, rule)


def test_conjugate_rejects_empty():
    with pytest.raises(ValueError):
        conjugate("")


def test_tense_from_pos():
    assert tense_from_pos("VBD") is Tense.PAST
    assert tense_from_pos("VBP") is Tense.PRESENT


def test_verb_edit_invariants():
    VerbEdit(0, "go", "go", "unchanged")
    with pytest.raises(ValueError):
        VerbEdit(0, "go", "go", "dictionary")
    with pytest.raises(ValueError):
        VerbEdit(0, "go", "", "dictionary")
    with pytest.raises(ValueError):
        VerbEdit(0, "go", "goes", "guess")


def _agreement_doc():
    # I have been waiting and smile .  He says " I know " .
    sentences = [["I", "have", "been", "waiting", "and", "smile", "."],
                 ["He", "says", '"', "I", "know", '"', "."]]
    pos = ["PRP", "VBP", "VBN", "VBG", "CC", "VBP", ".", "PRP", "VBZ", "``", "PRP", "VBP", "''", "."]
    arcs = [(3, 0, "nsubj"), (3, 1, "aux"), (3, 2, "aux"), (3, 5, "conj"), (8, 7, "nsubj"), (11, 10, "nsubj"),
            (8, 11, "ccomp")]
    lemmas = ["i", "have", "be", "wait", "and", "smile", ".", "he", "say", '"', "i", "know", '"', "."]
    doc = doc_from(sentences, {"f": [(0, 0), (10, 10)]}, pos=pos, lemmas=lemmas, arcs=arcs)
    from povshift.preprocess import mark_quotes

    return mark_quotes(doc)


def test_agreement_verbs_finite_aux_conjunct_and_quotes():
    doc = _agreement_doc()
    # "have" (finite auxiliary) and "smile" (shared subject); quoted "know" is skipped
    assert find_agreement_verbs(doc, "f") == [1, 5]


def test_plan_and_apply_edits():
    doc = _agreement_doc()
    edits = plan_verb_edits(doc, "f")
    assert [(e.original_form, e.new_form, e.rule_used) for e in edits] == \
        [("have", "has", "irregular"), ("smile", "smiles", "dictionary")]
    tokens = apply_verb_edits([t.surface for t in doc.tokens], edits)
    assert tokens[:6] == ["I", "has", "been", "waiting", "and", "smiles"]


def test_running_example_verbs(running_example):
    doc = running_example.document
    edits = plan_verb_edits(doc, "2")
    changed = [(e.original_form, e.new_form) for e in edits if e.rule_used != "unchanged"]
    assert changed == [("drive", "drives")]
    assert {e.original_form for e in edits} >= {"grew", "was", "drive"}

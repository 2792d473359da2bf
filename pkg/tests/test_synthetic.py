import numpy as np
import pytest

from povshift.core import CaseClass, Gender, validate_document
from povshift.synthetic import (
    MARKERS,
    generate_corpus,
    generate_document,
    gold_strings,
    load_corpus,
    save_corpus,
    synthetic_examples,
    synthetic_plan,
)

PRONOUNS = {
    Gender.MASCULINE: {CaseClass.NOMINATIVE: "he", CaseClass.ACCUSATIVE: "him",
                       CaseClass.POSSESSIVE: "his", CaseClass.REFLEXIVE: "himself"},
    Gender.FEMININE: {CaseClass.NOMINATIVE: "she", CaseClass.ACCUSATIVE: "her",
                      CaseClass.POSSESSIVE: "her", CaseClass.REFLEXIVE: "herself"},
}
SLOT = {"subject": CaseClass.NOMINATIVE, "object": CaseClass.ACCUSATIVE}


def slot_of(m):
    low = m.string.lower()
    if low.endswith("self"):
        return CaseClass.REFLEXIVE
    if low.endswith("'s") or m.case_class is CaseClass.POSSESSIVE:
        return CaseClass.POSSESSIVE
    return SLOT[m.grammatical_role.value]


def expected_strings(sd):
    """Re-derive every gold string from the generation rules."""
    doc = sd.document
    mentions = sorted(doc.all_mentions(), key=lambda m: m.start)
    seen, last, out = set(), None, {}
    for m in mentions:
        full = sd.names[m.chain_id]
        slot = slot_of(m)
        after_marker = m.start >= 2 and doc.tokens[m.start - 2].surface in MARKERS \
            and doc.tokens[m.start - 1].surface == ","
        if slot is CaseClass.REFLEXIVE:
            text = PRONOUNS[sd.gender][slot]
        elif m.chain_id not in seen or (after_marker and slot is CaseClass.NOMINATIVE):
            text = full
        elif last != m.chain_id:
            text = full.split()[0]
        else:
            text = PRONOUNS[sd.gender][slot]
        if slot is CaseClass.POSSESSIVE and not text.islower():
            text += "'s"
        out[m.id] = text
        seen.add(m.chain_id)
        last = m.chain_id
    return out


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gold_strings_follow_the_rules(seed):
    for sd in generate_corpus(5, seed=seed):
        assert validate_document(sd.document) == []
        assert gold_strings(sd) == expected_strings(sd)


def test_generation_is_seeded():
    a = generate_corpus(3, seed=5)
    b = generate_corpus(3, seed=5)
    assert [sd.to_dict() for sd in a] == [sd.to_dict() for sd in b]
    assert generate_corpus(3, seed=6)[0].to_dict() != a[0].to_dict()


def test_documents_have_two_or_three_characters_of_one_gender():
    for sd in generate_corpus(10, seed=3):
        assert 2 <= len(sd.document.chains) <= 3
        assert {c.gender for c in sd.document.chains} == {sd.gender}
    rng = np.random.Generator(np.random.PCG64(0))
    assert generate_document("x", rng, Gender.FEMININE).gender is Gender.FEMININE


def test_corpus_file_round_trip(tmp_path):
    docs = generate_corpus(2, seed=9)
    path = tmp_path / "c.jsonl"
    save_corpus(docs, path)
    assert load_corpus(path) == docs


def test_examples_have_gold_in_candidate_set(synthetic_train):
    exs = synthetic_examples(synthetic_train[:3])
    assert len(exs) == sum(len(c.mentions) for sd in synthetic_train[:3] for c in sd.document.chains)
    assert all(ex.gold_string in ex.candidate_set for ex in exs)
    # the relative-noun distractors sit in every candidate set
    sd = synthetic_train[0]
    for ex in exs:
        if ex.doc_id == sd.document.doc_id:
            assert set(sd.distractors[ex.chain_id]) <= set(ex.candidate_set)


def test_plan_rewrites_every_character(synthetic_train):
    sd = synthetic_train[0]
    plan = synthetic_plan(sd)
    assert set(plan.chain_ids()) == set(sd.names)
    assert len(plan.scheduled) == len(sd.document.all_mentions())

import pytest

from helpers import doc_from
from povshift.core import EntitySpec, Gender, Pov, Role, document_to_dict
from povshift.preprocess import (
    AnnotationAdapters,
    AnnotationError,
    FocusIdentificationError,
    Provider,
    annotate,
    detect_narrator_mentions,
    detect_quoted_spans,
    gold_adapters,
    identify_confounders,
    identify_focus_chain,
    is_person_chain,
    load_lexicon,
    mark_narrators,
    mark_quotes,
)

LEXICON = load_lexicon()


def test_shipped_lexicon():
    assert "promise" in LEXICON and "guess" in LEXICON
    assert "tell" not in LEXICON  # "I tell him to wait" is narration, not performative


def test_balanced_quotes():
    doc = doc_from([['"', "I", "am", "here", '"', ",", "I", "said", "."],
                    ["``", "Go", "''", "she", "said", "."]])
    assert detect_quoted_spans(doc) == [(1, 3), (10, 10)]


def test_unbalanced_quote_closes_at_sentence_end(caplog):
    doc = doc_from([["He", "said", "“", "wait", "for", "me", "."], ["I", "left", "."]])
    assert detect_quoted_spans(doc) == [(3, 6)]
    assert "unbalanced quote" in caplog.text


def test_mark_quotes_sets_flags_and_pov():
    doc = doc_from([['"', "I", "am", "here", '"', ",", "Ann", "said", "."]], {"a": [(1, 1), (6, 6)]},
                   pos=["``", "PRP", "VBP", "RB", "''", ",", "NNP", "VBD", "."])
    assert doc.chain("a").pov is Pov.FIRST
    marked = mark_quotes(doc)
    assert [m.in_quote for m in marked.chain("a").mentions] == [True, False]
    assert marked.chain("a").pov is Pov.THIRD


POS = ["PRP", "VBP", "PRP", ",", "PRP", "VBD", "."]


@pytest.mark.parametrize("verb, tag, flagged", [
    ("promise", "VBP", True),
    ("guess", "VBP", True),
    ("promised", "VBD", False),
    ("tell", "VBP", False),
    ("walk", "VBP", False),
])
def test_narrator_detection(verb, tag, flagged):
    pos = list(POS)
    pos[1] = tag
    lemma = {"promised": "promise"}.get(verb, verb)
    doc = doc_from([["I", verb, "you", ",", "I", "left", "."]], {"n": [(0, 0), (4, 4)]}, pos=pos,
                   lemmas=["i", lemma, "you", ",", "i", "leave", "."], arcs=[(1, 0, "nsubj"), (5, 4, "nsubj")])
    ids = detect_narrator_mentions(doc, LEXICON)
    assert ids == ({"n:0"} if flagged else set())
    if flagged:
        marked = mark_narrators(doc)
        assert [m.narrator_flag for m in marked.chain("n").mentions] == [True, False]
        assert marked.chain("n").pov is Pov.FIRST  # the other "I" still narrates


def test_narrator_detection_without_parse_uses_adjacent_verb():
    doc = doc_from([["I", "swear", "it", "."]], {"n": [(0, 0)]}, lemmas=["i", "swear", "it", "."])
    assert detect_narrator_mentions(doc, LEXICON) == {"n:0"}
    with pytest.raises(ValueError):
        detect_narrator_mentions(doc, [])


def _bundle():
    doc = doc_from([["I", "met", "Ann", "."], ["She", "waved", "at", "the", "bus", "."]],
                   {"1": [(0, 0)], "2": [(2, 2), (4, 4)], "3": [(7, 8)]}, kinds={"3": "other"},
                   pos=["PRP", "VBD", "NNP", ".", "PRP", "VBD", "IN", "DT", "NN", "."])
    data = document_to_dict(doc)
    for c in data["chains"]:
        c.pop("entity_kind")
    data.pop("dependencies")
    return data


def _adapters(bundle, ner=None, dep=None):
    return AnnotationAdapters(
        Provider("coref", "1", lambda text: bundle),
        Provider("ner", "1", ner or (lambda doc: [(2, 2, "PERSON")])),
        Provider("dep", "1", dep or (lambda doc: [(1, 0, "nsubj"), (1, 2, "obj"), (5, 4, "nsubj")])),
    )


def test_annotate_keeps_person_chains_and_roles():
    bundle = _bundle()
    doc = annotate(bundle["text"], _adapters(bundle))
    assert [c.chain_id for c in doc.chains] == ["1", "2"]
    roles = [m.grammatical_role for c in doc.chains for m in c.mentions]
    assert roles == [Role.SUBJECT, Role.OBJECT, Role.SUBJECT]
    assert doc.chain("1").pov is Pov.FIRST


@pytest.mark.parametrize("which, fn, message", [
    ("ner", lambda doc: [(0, 99, "PERSON")], "out of range"),
    ("dep", lambda doc: [(1, 1, "nsubj")], "self-loop"),
    ("dep", lambda doc: [(1, 77, "nsubj")], "missing token"),
    ("ner", lambda doc: 1 / 0, "division by zero"),
])
def test_annotation_errors_name_the_provider(which, fn, message):
    bundle = _bundle()
    adapters = _adapters(bundle, **{which: fn})
    with pytest.raises(AnnotationError) as err:
        annotate(bundle["text"], adapters)
    assert err.value.provider == which and err.value.version == "1"
    assert message in str(err.value)


def test_coref_span_outside_tokens_is_rejected():
    bundle = _bundle()
    bundle["chains"][0]["mentions"][0]["span"] = [40, 41]
    with pytest.raises(AnnotationError, match="outside"):
        annotate(bundle["text"], _adapters(bundle))


def test_gold_adapters_replay(running_example):
    data = document_to_dict(running_example.document)
    adapters = gold_adapters(data)
    doc = annotate(data["text"], adapters)
    assert [c.chain_id for c in doc.chains] == [c.chain_id for c in running_example.document.chains]
    with pytest.raises(AnnotationError, match="differs"):
        annotate("other text", adapters)
    assert adapters.versions() == {"gold-coref": "gold-v1", "gold-ner": "gold-v1", "gold-dep": "gold-v1"}


def test_person_chain_detection():
    doc = doc_from([["Ann", "saw", "it", "."]], {"a": [(0, 0)], "b": [(2, 2)]})
    assert is_person_chain(doc.chain("a"), [(0, 0, "PERSON")])
    assert not is_person_chain(doc.chain("a"), [])
    assert not is_person_chain(doc.chain("b"), [(0, 0, "PERSON")])


def test_focus_identification(running_example, nick):
    doc = running_example.document
    assert identify_focus_chain(doc, nick, "first") == "2"
    with pytest.raises(FocusIdentificationError):
        identify_focus_chain(doc, nick, "second")
    with pytest.raises(ValueError):
        identify_focus_chain(doc, nick, "third")


def test_focus_identification_by_name():
    doc = doc_from([["I", "am", "Ann", "."], ["I", "am", "Bo", "."]], {"a": [(0, 0), (2, 2)], "b": [(4, 4)]},
                   pos=["PRP", "VBP", "NNP", ".", "PRP", "VBP", "NNP", "."])
    ann = EntitySpec.from_name("Ann", Gender.FEMININE)
    assert identify_focus_chain(doc, ann) == "a"
    with pytest.raises(FocusIdentificationError) as err:
        identify_focus_chain(doc, EntitySpec.from_name(None, Gender.FEMININE))
    assert err.value.candidates == ["a", "b"]


def test_confounders(running_example):
    doc = running_example.document
    confs = identify_confounders(doc, "2", Gender.MASCULINE)
    assert confs.singular == ("1",) and confs.plural == ()
    # feminine focus: Emily would be the confounder if she had a pronoun
    assert identify_confounders(doc, "2", Gender.FEMININE).singular == ()


def test_plural_deictic_confounder():
    doc = doc_from([["I", "and", "Ann", "left", ";", "we", "ran", "."], ["He", "sat", "."]],
                   {"f": [(0, 0)], "w": [(5, 5)], "h": [(8, 8)]},
                   pos=["PRP", "CC", "NNP", "VBD", ":", "PRP", "VBD", ".", "PRP", "VBD", "."])
    confs = identify_confounders(doc, "f", "masculine")
    assert confs == type(confs)(("h",), ("w",))
    assert confs.all() == ("h", "w")

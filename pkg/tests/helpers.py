"""Small document builders shared by the unit tests."""

from __future__ import annotations

from dataclasses import replace

from povshift.core import DependencyArc, Mention, build_document, case_class_of, make_chain


def doc_from(sentences, chains=None, pos=None, lemmas=None, arcs=(), kinds=None, doc_id="t", entities=()):
    """``sentences`` are token lists; ``chains`` maps chain id to token spans.

    The text joins tokens with single spaces, so ``span_text`` is simply the
    tokens of the span joined by spaces.
    """
    text = " ".join(" ".join(s) for s in sentences)
    flat = [t for s in sentences for t in s]
    doc = build_document(doc_id, text, sentences, pos_tags=pos, lemmas=lemmas,
                         dependencies=tuple(DependencyArc(*a) for a in arcs), entities=tuple(entities))
    built = []
    for cid, spans in (chains or {}).items():
        ms = []
        for s, e in spans:
            string = doc.span_text(s, e)
            tag = pos[s] if pos and s == e else None
            ms.append(Mention(cid, (s, e), string, case_class_of(string, pos=tag)))
        built.append(make_chain(cid, ms, (kinds or {}).get(cid, "person")))
    assert len(flat) == len(doc.tokens)
    return replace(doc, chains=tuple(built))

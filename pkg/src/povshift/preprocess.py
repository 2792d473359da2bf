"""Step 1 of the pipeline: annotation through pluggable adapters, quote and
narrator masking, and focus/confounder chain identification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .core import (
    HUMAN_PRONOUNS,
    PRONOUNS,
    CorefChain,
    DependencyArc,
    Document,
    EntitySpec,
    Gender,
    Mention,
    Number,
    Pov,
    Role,
    case_class_of,
    document_from_dict,
    infer_pov,
)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

OPEN_QUOTES = {"“", "``", "«"}
CLOSE_QUOTES = {"”", "''", "»"}
TOGGLE_QUOTES = {'"'}


class AnnotationError(RuntimeError):
    def __init__(self, provider: str, version: str, message: str):
        super().__init__(f"{provider} (version {version}): {message}")
        self.provider = provider
        self.version = version


class FocusIdentificationError(ValueError):
    def __init__(self, message: str, candidates: Sequence[str] = ()):
        super().__init__(f"{message}; candidates: {list(candidates)}")
        self.candidates = list(candidates)


# ---------------------------------------------------------------------------
# Adapters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Provider:
    """A named, versioned annotation function."""

    name: str
    version: str
    fn: Callable[..., Any]

    def __call__(self, *args, **kwargs):
        try:
            return self.fn(*args, **kwargs)
        except AnnotationError:
            raise
        except Exception as exc:  # provider boundary: wrap third-party failures
            raise AnnotationError(self.name, self.version, str(exc)) from exc


@dataclass(frozen=True)
class AnnotationAdapters:
    """Coreference, NER and dependency providers.

    ``coref_provider(raw_text)`` returns a bundle in the core JSON layout
    (``tokens``, ``sentences``, ``chains``); ``ner_provider(doc)`` returns
    ``(start, end, label)`` token spans; ``dep_provider(doc)`` returns
    :class:`DependencyArc` objects or ``(head, dependent, label)`` triples.
    """

    coref_provider: Provider
    ner_provider: Provider
    dep_provider: Provider

    def versions(self) -> dict[str, str]:
        return {p.name: p.version for p in (self.coref_provider, self.ner_provider, self.dep_provider)}


def gold_adapters(bundle: dict[str, Any], version: str = "gold-v1") -> AnnotationAdapters:
    """Adapters that replay the annotations stored in a benchmark JSON document."""
    core_keys = ("doc_id", "text", "tokens", "sentences", "chains", "quoted_spans", "genre")

    def coref(raw_text: str) -> dict:
        if raw_text != bundle["text"]:
            raise ValueError("raw text differs from the gold annotation text")
        return {k: bundle[k] for k in core_keys if k in bundle}

    return AnnotationAdapters(
        coref_provider=Provider("gold-coref", version, coref),
        ner_provider=Provider("gold-ner", version, lambda doc: [tuple(e) for e in bundle.get("entities", [])]),
        dep_provider=Provider("gold-dep", version, lambda doc: [tuple(a) for a in bundle.get("dependencies", [])]),
    )


# ---------------------------------------------------------------------------
# Person-hood
# ---------------------------------------------------------------------------


def is_person_chain(chain: CorefChain, entities: Iterable[tuple[int, int, str]]) -> bool:
    """A chain is a person if a mention overlaps a PERSON span or is a human pronoun."""
    person_spans = [(s, e) for s, e, label in entities if label.upper() in ("PERSON", "PER")]
    for m in chain.mentions:
        if m.string.lower() in HUMAN_PRONOUNS:
            return True
        if any(s <= m.end and m.start <= e for s, e in person_spans):
            return True
    return False


# ---------------------------------------------------------------------------
# Quotes
# ---------------------------------------------------------------------------


def detect_quoted_spans(doc: Document) -> list[tuple[int, int]]:
    """Maximal token ranges strictly inside balanced double quotes.

    Straight quotes toggle; curly and PTB-style quotes open and close
    explicitly.  A quote still open when no closing quote follows is closed
    at the end of its sentence, with a warning.
    """
    toks = doc.tokens
    spans: list[tuple[int, int]] = []
    i = 0
    while i < len(toks):
        surface = toks[i].surface
        if surface in OPEN_QUOTES or surface in TOGGLE_QUOTES:
            closers = CLOSE_QUOTES if surface in OPEN_QUOTES else TOGGLE_QUOTES
            j = i + 1
            while j < len(toks) and toks[j].surface not in closers:
                j += 1
            if j < len(toks):
                if j > i + 1:
                    spans.append((i + 1, j - 1))
                i = j + 1
                continue
            sent_end = _sentence_end(doc, i)
            log.warning("%s: unbalanced quote at token %d closed at sentence end %d", doc.doc_id, i, sent_end)
            if sent_end > i:
                spans.append((i + 1, sent_end))
            i = sent_end + 1
            continue
        i += 1
    return spans


def _sentence_end(doc: Document, token_index: int) -> int:
    si = doc.tokens[token_index].sentence_index
    if doc.sentences:
        return doc.sentences[si][1]
    last = token_index
    while last + 1 < len(doc.tokens) and doc.tokens[last + 1].sentence_index == si:
        last += 1
    return last


def _rebuild_chains(doc: Document, update: Callable[[Mention], Mention]) -> tuple[CorefChain, ...]:
    chains = []
    for c in doc.chains:
        ms = tuple(update(m) for m in c.mentions)
        chains.append(replace(c, mentions=ms, pov=infer_pov(ms)))
    return tuple(chains)


def mark_quotes(doc: Document, spans: Sequence[tuple[int, int]] | None = None) -> Document:
    """Attach quoted spans and set ``in_quote`` on every mention inside one."""
    spans = detect_quoted_spans(doc) if spans is None else list(spans)

    def inside(m: Mention) -> bool:
        return any(s <= m.start and m.end <= e for s, e in spans)

    chains = _rebuild_chains(doc, lambda m: replace(m, in_quote=m.in_quote or inside(m)))
    return replace(doc, quoted_spans=tuple(tuple(s) for s in spans), chains=chains)


# ---------------------------------------------------------------------------
# Narrator mentions
# ---------------------------------------------------------------------------


def load_lexicon(path: str | Path | None = None, name: str = "performatives.txt") -> list[str]:
    """One lemma per line, ``#`` starts a comment."""
    path = Path(path) if path else DATA_DIR / name
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.append(line.lower())
    return words


_PRESENT_TAGS = {"VBP", "VB"}


def _is_present(tok) -> bool:
    if tok.pos_tag:
        return tok.pos_tag in _PRESENT_TAGS
    return tok.surface.lower() == tok.lemma.lower()


def detect_narrator_mentions(doc: Document, performative_lexicon: Sequence[str]) -> set[str]:
    """Ids of first-person subject mentions governed by a present-tense
    performative verb ("I promise you", "I guess")."""
    if not performative_lexicon:
        raise ValueError("performative lexicon must be non-empty")
    lexicon = {w.lower() for w in performative_lexicon}
    subj_heads: dict[int, int] = {}
    for a in doc.dependencies:
        if a.label.split(":")[0] == "nsubj":
            subj_heads[a.dependent_index] = a.head_index
    flagged = set()
    for m in doc.all_mentions():
        if m.start != m.end or m.in_quote:
            continue
        if m.string.lower() not in ("i", "we"):
            continue
        head = subj_heads.get(m.start)
        if head is None and not doc.dependencies and m.end + 1 < len(doc.tokens):
            head = m.end + 1  # no parse available: adjacent verb
        if head is None:
            continue
        verb = doc.tokens[head]
        if verb.lemma.lower() in lexicon and _is_present(verb):
            flagged.add(m.id)
    return flagged


def mark_narrators(doc: Document, performative_lexicon: Sequence[str] | None = None) -> Document:
    lexicon = performative_lexicon or load_lexicon()
    ids = detect_narrator_mentions(doc, lexicon)
    if not ids:
        return doc
    chains = _rebuild_chains(doc, lambda m: replace(m, narrator_flag=True) if m.id in ids else m)
    return replace(doc, chains=chains)


# ---------------------------------------------------------------------------
# Annotation
# ---------------------------------------------------------------------------


def annotate(raw_text: str, adapters: AnnotationAdapters, doc_id: str = "doc",
             performative_lexicon: Sequence[str] | None = None) -> Document:
    """Run the providers over ``raw_text`` and assemble a masked Document
    holding person chains only."""
    if not raw_text:
        raise ValueError("raw_text must be non-empty")
    cp = adapters.coref_provider
    bundle = dict(cp(raw_text))
    bundle.setdefault("doc_id", doc_id)
    bundle.setdefault("text", raw_text)
    bundle.setdefault("quoted_spans", [])
    n_tokens = len(bundle.get("tokens", []))
    given_kinds = {}
    for c in bundle.get("chains", []):
        for m in c["mentions"]:
            s, e = m["span"]
            if not (0 <= s <= e < n_tokens):
                raise AnnotationError(cp.name, cp.version,
                                      f"chain {c['id']} has mention {m['span']} outside the {n_tokens} tokens")
        if "entity_kind" in c:
            given_kinds[str(c["id"])] = c["entity_kind"]
    bundle.pop("dependencies", None)
    doc = document_from_dict(bundle)

    np_ = adapters.ner_provider
    entities = tuple(tuple(e) for e in np_(doc))
    for s, e, _ in entities:
        if not (0 <= s <= e < n_tokens):
            raise AnnotationError(np_.name, np_.version, f"entity span {(s, e)} out of range")

    dp = adapters.dep_provider
    arcs = []
    for a in dp(doc):
        arc = a if isinstance(a, DependencyArc) else DependencyArc(int(a[0]), int(a[1]), str(a[2]))
        if not (0 <= arc.head_index < n_tokens and 0 <= arc.dependent_index < n_tokens):
            raise AnnotationError(dp.name, dp.version, f"arc {arc} references a missing token")
        if arc.head_index == arc.dependent_index:
            raise AnnotationError(dp.name, dp.version, f"arc {arc} is a self-loop")
        arcs.append(arc)
    doc = replace(doc, entities=entities, dependencies=tuple(arcs))
    doc = assign_roles(doc)

    people = []
    for c in doc.chains:
        kind = given_kinds.get(c.chain_id)
        if kind is None:
            kind = "person" if is_person_chain(c, entities) else "other"
        if kind == "person":
            people.append(replace(c, entity_kind="person"))
    doc = replace(doc, chains=tuple(people))
    doc = mark_quotes(doc, bundle["quoted_spans"] or None)
    return mark_narrators(doc, performative_lexicon)


def assign_roles(doc: Document) -> Document:
    """Recompute mention roles (and ambiguous pronoun cases) from the arcs."""
    from .core import _role_from_arcs

    if not doc.dependencies:
        return doc

    def update(m: Mention) -> Mention:
        role = _role_from_arcs(m.token_span, doc.dependencies)
        if role is Role.OTHER:
            role = m.grammatical_role
        pos = doc.tokens[m.start].pos_tag if m.start == m.end else None
        return replace(m, grammatical_role=role, case_class=case_class_of(m.string, role, pos))

    return replace(doc, chains=_rebuild_chains(doc, update))


# ---------------------------------------------------------------------------
# Focus and confounders
# ---------------------------------------------------------------------------


def _active(m: Mention) -> bool:
    return not m.in_quote and not m.narrator_flag


def identify_focus_chain(doc: Document, spec: EntitySpec, from_pov: Pov | str = Pov.FIRST) -> str:
    """Chain id of the focus entity: the unique chain with the original
    deictic PoV, disambiguated by the entity's names when several qualify."""
    from_pov = Pov(from_pov)
    if from_pov is Pov.THIRD:
        raise ValueError("the focus entity must originally be first or second person")
    matches = [c for c in doc.chains if c.pov is from_pov]
    if len(matches) == 1:
        return matches[0].chain_id
    if not matches:
        raise FocusIdentificationError(f"no chain with {from_pov.value}-person PoV", [])
    names = {n.lower() for n in spec.names()}
    if names:
        named = [c for c in matches if any(m.string.lower() in names for m in c.mentions)]
        if named:
            named.sort(key=lambda c: (-len(c.mentions), c.chain_id))
            return named[0].chain_id
    raise FocusIdentificationError(
        f"{len(matches)} chains have {from_pov.value}-person PoV", [c.chain_id for c in matches])


@dataclass(frozen=True)
class Confounders:
    singular: tuple[str, ...] = ()
    plural: tuple[str, ...] = ()

    def all(self) -> tuple[str, ...]:
        return self.singular + self.plural


_GENDERED = {
    Gender.MASCULINE: {"he", "him", "his", "himself"},
    Gender.FEMININE: {"she", "her", "hers", "herself"},
}


def identify_confounders(doc: Document, focus: str, focus_gender: Gender | str,
                         from_pov: Pov | str = Pov.FIRST) -> Confounders:
    """Singular chains with gender-matching 3rd-person pronouns, and plural
    chains carrying the focus's original deictic person ("we" for first)."""
    focus_gender = Gender(focus_gender)
    from_pov = Pov(from_pov)
    matching = _GENDERED.get(focus_gender, set())
    singular, plural = [], []
    for c in doc.chains:
        if c.chain_id == focus:
            continue
        active = [m.string.lower() for m in c.mentions if _active(m)]
        if any(_is_plural_deictic(s, from_pov) for s in active):
            plural.append(c.chain_id)
        elif any(s in matching for s in active):
            singular.append(c.chain_id)
    return Confounders(tuple(singular), tuple(plural))


def _is_plural_deictic(s: str, pov: Pov) -> bool:
    entry = PRONOUNS.get(s)
    if entry is None or entry[0] is not pov:
        return False
    if pov is Pov.SECOND:
        # a second 2nd-person chain next to the focus can only be plural "you"
        return entry[1] is not Number.SINGULAR
    return entry[1] is Number.PLURAL

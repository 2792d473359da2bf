"""Step 3 of the pipeline: candidate strings S(E) for the focus and the
confounding entities, and the case narrowing used when a slot is filled."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    DETERMINER_POSSESSIVES,
    INDEPENDENT_POSSESSIVES,
    PRONOUNS,
    CaseClass,
    Document,
    EntitySpec,
    Gender,
    Mention,
    Number,
    Pov,
    Role,
    is_deictic,
    slot_case,
)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

NOM, ACC, POSS, REFL = CaseClass.NOMINATIVE, CaseClass.ACCUSATIVE, CaseClass.POSSESSIVE, CaseClass.REFLEXIVE

KINDS = ("pronoun", "proper_np", "common_np")
SOURCES = ("name", "pronoun_inventory", "predicate_nominal", "appositive",
           "relational_converse", "chain_string", "coordinated_rewrite")

EMPHATIC = {"he himself": (NOM,), "she herself": (NOM,)}

GENDERED_PRONOUNS = {
    Gender.MASCULINE: ("he", "him", "his", "himself", "he himself"),
    Gender.FEMININE: ("she", "her", "herself", "she herself"),
}
PLURAL_PRONOUNS = ("they", "them", "their", "theirs", "themselves")

_POSSESSOR = {Gender.MASCULINE: "his", Gender.FEMININE: "her"}
_SUBJECT = {Gender.MASCULINE: "he", Gender.FEMININE: "she"}
_OBJECT = {Gender.MASCULINE: "him", Gender.FEMININE: "her"}


def in_pronoun_inventory(text: str) -> bool:
    return text.lower() in PRONOUNS or text.lower() in EMPHATIC


def pronoun_cases(text: str) -> tuple[CaseClass, ...]:
    low = text.lower()
    return EMPHATIC[low] if low in EMPHATIC else PRONOUNS[low][3]


@dataclass(frozen=True)
class Candidate:
    string: str
    kind: str
    case_compat: frozenset
    source: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown candidate source {self.source!r}")
        if not self.case_compat:
            raise ValueError(f"candidate {self.string!r} has no compatible case")
        if (self.kind == "pronoun") != in_pronoun_inventory(self.string):
            raise ValueError(f"kind {self.kind!r} inconsistent with {self.string!r}")


def is_possessive_form(text: str) -> bool:
    return bool(re.search(r"(['’]s|s['’])$", text))


def possessive_of(name: str) -> str:
    return name + "'s"


def pronoun_candidate(text: str, source: str = "pronoun_inventory") -> Candidate:
    return Candidate(text, "pronoun", frozenset(pronoun_cases(text)), source)


def np_candidate(text: str, source: str, kind: str | None = None) -> Candidate:
    if in_pronoun_inventory(text):
        return pronoun_candidate(text.lower(), source)
    if kind is None:
        kind = "proper_np" if looks_proper(text) else "common_np"
    compat = frozenset({POSS}) if is_possessive_form(text) else frozenset({NOM, ACC})
    return Candidate(text, kind, compat, source)


def looks_proper(text: str) -> bool:
    words = re.sub(r"(['’]s|['’])$", "", text).split()
    return bool(words) and all(w[:1].isupper() for w in words if w.lower() not in ("and", "of", "de", "van", "von"))


def canonical_order(cands: Iterable[Candidate]) -> list[Candidate]:
    """Deduplicate by string (first occurrence wins) and sort names, then
    pronouns, then other noun phrases, each lexicographically."""
    seen: dict[str, Candidate] = {}
    for c in cands:
        seen.setdefault(c.string, c)
    rank = {"proper_np": 0, "pronoun": 1, "common_np": 2}
    return sorted(seen.values(), key=lambda c: (rank[c.kind], c.string))


# ---------------------------------------------------------------------------
# Relational lexicon
# ---------------------------------------------------------------------------

# kin words that carry their own gender but never show up as a converse
_MASC_HINTS = {"dad", "daddy", "papa", "pa", "boy", "bro", "grandpa", "grandad", "granddad", "stepdad",
               "king", "butler", "landlord", "host", "widower", "heir", "fiance"}
_FEM_HINTS = {"mom", "mum", "mommy", "mummy", "mama", "ma", "girl", "sis", "grandma", "granny", "gran", "nana",
              "auntie", "stepmom", "queen", "maid", "landlady", "hostess", "widow", "heiress", "fiancee"}


@dataclass(frozen=True)
class RelationalLexicon:
    """Relational noun -> converse noun by the focus's gender."""

    entries: dict  # noun -> {Gender.MASCULINE: str, Gender.FEMININE: str}

    def __post_init__(self):
        for noun, conv in self.entries.items():
            if not any(conv.get(g) for g in (Gender.MASCULINE, Gender.FEMININE)):
                raise ValueError(f"relational noun {noun!r} has no gendered converse")

    def __contains__(self, noun: str) -> bool:
        return noun.lower() in self.entries

    def converse(self, noun: str, gender: Gender) -> str | None:
        conv = self.entries.get(noun.lower(), {})
        return conv.get(gender) or conv.get(Gender.MASCULINE if gender is Gender.FEMININE else Gender.FEMININE)

    def gender_of(self, noun: str) -> Gender:
        """Gender a relational noun implies for its referent."""
        noun = noun.lower()
        masc = any(c.get(Gender.MASCULINE) == noun for c in self.entries.values())
        fem = any(c.get(Gender.FEMININE) == noun for c in self.entries.values())
        if noun in _MASC_HINTS or (masc and not fem):
            return Gender.MASCULINE
        if noun in _FEM_HINTS or (fem and not masc):
            return Gender.FEMININE
        return Gender.UNKNOWN

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RelationalLexicon":
        """Read ``noun<TAB>masculine_converse<TAB>feminine_converse`` rows."""
        path = Path(path) if path else DATA_DIR / "relational_nouns.tsv"
        entries = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh, delimiter="\t"):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 3:
                    raise ValueError(f"{path}: expected 3 columns, got {row!r}")
                noun, m, f = (c.strip() for c in row)
                entries[noun.lower()] = {Gender.MASCULINE: m, Gender.FEMININE: f}
        return cls(entries)


# ---------------------------------------------------------------------------
# Focus candidates
# ---------------------------------------------------------------------------


def _np_span_text(doc: Document, head: int) -> str:
    """Head noun plus its contiguous left modifiers (det, amod, compound...)."""
    start = head
    left = {a.dependent_index for a in doc.dependencies
            if a.head_index == head and a.label.split(":")[0] in ("det", "amod", "compound", "nummod", "nmod")}
    while start - 1 in left:
        start -= 1
    return doc.span_text(start, head)


def _definite(np: str) -> str:
    words = np.split()
    if words and words[0].lower() in ("a", "an", "the", "one"):
        words = words[1:]
    return " ".join(["the"] + words) if words else np


def predicate_nominals(doc: Document, focus: str) -> list[tuple[str, str]]:
    """``(np, source)`` pairs: predicate nominals ("I was a doctor") and
    appositives of out-of-quote focus mentions, made definite."""
    chain = doc.chain(focus)
    spans = [(m.start, m.end) for m in chain.mentions if not m.in_quote]
    inside = lambda i: any(s <= i <= e for s, e in spans)  # noqa: E731
    copular = {a.head_index for a in doc.dependencies if a.label == "cop"}
    found = []
    for a in doc.dependencies:
        label = a.label.split(":")[0]
        head_tok = doc.tokens[a.head_index]
        if label == "nsubj" and inside(a.dependent_index) and a.head_index in copular:
            if head_tok.pos_tag.startswith("NN") and not head_tok.pos_tag.startswith("NNP"):
                found.append((_definite(_np_span_text(doc, a.head_index)), "predicate_nominal"))
        elif label == "appos" and inside(a.head_index):
            dep = doc.tokens[a.dependent_index]
            if dep.pos_tag.startswith("NN") and not dep.pos_tag.startswith("NNP"):
                found.append((_definite(_np_span_text(doc, a.dependent_index)), "appositive"))
    return found


def relational_mentions(doc: Document, focus: str, lexicon: RelationalLexicon) -> list[tuple[int, str]]:
    """``(noun_index, noun)`` for every focus-possessed relational noun
    ("my father", "my older sister")."""
    chain = doc.chain(focus)
    out = []
    for m in chain.mentions:
        if m.in_quote or m.start != m.end or m.string.lower() not in ("my", "your"):
            continue
        j = m.end + 1
        if j < len(doc.tokens) and doc.tokens[j].pos_tag.startswith("JJ") and j + 1 < len(doc.tokens):
            if doc.tokens[j].surface.lower() not in lexicon:
                j += 1
        if j < len(doc.tokens) and doc.tokens[j].surface.lower() in lexicon:
            out.append((j, doc.tokens[j].surface.lower()))
    return out


def _relative_chain(doc: Document, possessor: int, noun: int):
    for c in doc.chains:
        for m in c.mentions:
            if m.start == possessor and m.end >= noun:
                return c
    return None


def relational_converses(doc: Document, focus: str, gender: Gender,
                         lexicon: RelationalLexicon) -> list[str]:
    phrases = []
    for noun_index, noun in relational_mentions(doc, focus, lexicon):
        converse = lexicon.converse(noun, gender)
        if not converse:
            continue
        possessor_index = noun_index - 1 if doc.tokens[noun_index - 1].surface.lower() in ("my", "your") \
            else noun_index - 2
        rel = _relative_chain(doc, possessor_index, noun_index)
        rel_gender = rel.gender if rel is not None and rel.gender is not Gender.UNKNOWN else lexicon.gender_of(noun)
        genders = [rel_gender] if rel_gender in _POSSESSOR else [Gender.MASCULINE, Gender.FEMININE]
        phrases.extend(f"{_POSSESSOR[g]} {converse}" for g in genders)
        if rel is not None:
            for m in rel.mentions:
                if not m.in_quote and not in_pronoun_inventory(m.string) and looks_proper(m.string) \
                        and not is_possessive_form(m.string):
                    phrases.append(f"{possessive_of(m.string)} {converse}")
    return phrases


def build_focus_candidates(doc: Document, focus: str, spec: EntitySpec,
                           lexicon: RelationalLexicon | None = None) -> list[Candidate]:
    """S(E) for the focus entity: names and their possessives, the gendered
    pronoun inventory, predicate nominals/appositives, and converse
    relational phrases."""
    gender = Gender(spec.gender) if spec.gender is not None else None
    if gender not in GENDERED_PRONOUNS:
        raise ValueError("the focus entity needs a masculine or feminine gender")
    lexicon = lexicon or RelationalLexicon.load()
    cands = []
    for name in spec.names():
        cands.append(np_candidate(name, "name", "proper_np"))
        cands.append(np_candidate(possessive_of(name), "name", "proper_np"))
    cands.extend(pronoun_candidate(p) for p in GENDERED_PRONOUNS[gender])
    for np, source in predicate_nominals(doc, focus):
        cands.append(np_candidate(np, source, "common_np"))
    for phrase in relational_converses(doc, focus, gender, lexicon):
        cands.append(np_candidate(phrase, "relational_converse"))
    return canonical_order(cands)


# ---------------------------------------------------------------------------
# Confounder candidates
# ---------------------------------------------------------------------------


def coordinated_rewrite(text: str, focus_gender: Gender, pov: Pov = Pov.FIRST) -> str | None:
    """"Mandy and me" -> "Mandy and him": swap the deictic conjunct of a
    coordinated phrase that contains a name."""
    words = text.split()
    if "and" not in [w.lower() for w in words] or not any(w[:1].isupper() and not is_deictic(w) for w in words):
        return None
    swap = {"i": _SUBJECT, "me": _OBJECT, "myself": None} if pov is Pov.FIRST else {"you": _OBJECT}
    out, changed = [], False
    for w in words:
        table = swap.get(w.lower())
        if table:
            out.append(table[focus_gender])
            changed = True
        else:
            out.append(w)
    return " ".join(out) if changed else None


def build_confounder_candidates(doc: Document, chain: str, focus_gender: Gender | str,
                                plural: bool | None = None, from_pov: Pov | str = Pov.FIRST) -> list[Candidate]:
    """S(E) for a confounding entity.

    Singular confounders keep the unique strings of their chain (pronouns
    lower-cased; strings with an original-PoV deictic dropped).  Plural
    deictic confounders get the third-person plural pronouns plus rewrites
    of coordinated name phrases.
    """
    focus_gender = Gender(focus_gender)
    from_pov = Pov(from_pov)
    c = doc.chain(chain)
    if plural is None:
        plural = c.number is Number.PLURAL and c.pov is not Pov.THIRD
    cands = []
    if plural:
        cands.extend(pronoun_candidate(p) for p in PLURAL_PRONOUNS)
        for m in c.mentions:
            new = coordinated_rewrite(m.string, focus_gender, from_pov)
            if new:
                cands.append(Candidate(new, "proper_np", frozenset({NOM, ACC}), "coordinated_rewrite"))
        return canonical_order(cands)
    for m in c.mentions:
        text = m.string
        if in_pronoun_inventory(text):
            if is_deictic(text):
                continue
            cands.append(pronoun_candidate(text.lower(), "chain_string"))
        elif any(is_deictic(w) for w in text.split()):
            continue
        else:
            cands.append(np_candidate(text, "chain_string"))
    return canonical_order(cands)


# ---------------------------------------------------------------------------
# Narrowing
# ---------------------------------------------------------------------------


def candidate_from_string(text: str, source: str = "chain_string") -> Candidate:
    """Candidate metadata recovered from a bare string."""
    return np_candidate(text, source)


def narrow_by_slot(candidates: Sequence[Candidate], slot: CaseClass, original: str = "") -> list[Candidate]:
    """Keep the candidates that can fill a ``slot`` case position.

    ``original`` refines possessive slots: a determiner ("my") keeps
    determiner pronouns, an independent form ("mine") keeps independent ones.
    """
    if not candidates:
        raise ValueError("candidate set is empty")
    slot = CaseClass(slot)
    if slot is REFL:
        kept = [c for c in candidates if REFL in c.case_compat]
    elif slot is POSS:
        kept = [c for c in candidates if POSS in c.case_compat]
        low = original.lower()
        allowed = None
        if low in INDEPENDENT_POSSESSIVES and low not in DETERMINER_POSSESSIVES:
            allowed = INDEPENDENT_POSSESSIVES
        elif low in DETERMINER_POSSESSIVES and low not in INDEPENDENT_POSSESSIVES:
            allowed = DETERMINER_POSSESSIVES
        if allowed is not None:
            kept = [c for c in kept if c.kind != "pronoun" or c.string in allowed] or kept
    else:
        kept = [c for c in candidates if slot in c.case_compat]
    if not kept:
        log.warning("no candidate fits the %s slot of %r; keeping the full set", slot.value, original)
        return list(candidates)
    return kept


def narrow_by_case(candidates: Sequence[Candidate], original: Mention) -> list[Candidate]:
    """Keep the candidates whose case fits the slot left by ``original``."""
    slot = slot_case(original.string, CaseClass(original.case_class), Role(original.grammatical_role))
    return narrow_by_slot(candidates, slot, original.string)


def narrow_strings(strings: Sequence[str], slot: CaseClass, original: str = "") -> list[int]:
    """Indices of ``strings`` surviving :func:`narrow_by_slot`."""
    cands = [candidate_from_string(s) for s in strings]
    kept = {id(c) for c in narrow_by_slot(cands, slot, original)}
    return [i for i, c in enumerate(cands) if id(c) in kept]

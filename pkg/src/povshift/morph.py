"""Step 2 of the pipeline: subject-verb agreement for the converted focus."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .core import Document

DATA_DIR = Path(__file__).parent / "data"


class Tense(str, Enum):
    PRESENT = "present"
    PAST = "past"


def tense_from_pos(pos_tag: str) -> Tense:
    return Tense.PAST if pos_tag == "VBD" else Tense.PRESENT


@dataclass(frozen=True)
class VerbEdit:
    token_index: int
    original_form: str
    new_form: str
    rule_used: str  # dictionary | irregular | suffix_rule | unchanged

    def __post_init__(self):
        if not self.new_form:
            raise ValueError("new_form must be non-empty")
        if self.rule_used not in ("dictionary", "irregular", "suffix_rule", "unchanged"):
            raise ValueError(f"unknown rule {self.rule_used!r}")
        if self.new_form == self.original_form and self.rule_used != "unchanged":
            raise ValueError("an edit that changes nothing must use rule 'unchanged'")


@dataclass(frozen=True)
class VerbEntry:
    lemma: str
    base: str
    third_singular: str
    past: str


@dataclass(frozen=True)
class VerbRules:
    subject_labels: frozenset
    aux_labels: frozenset
    conj_labels: frozenset
    finite_tags: frozenset
    irregular: dict  # lower-cased form -> 3sg form, or None for "treat as regular"


def load_verb_dictionary(path: str | Path | None = None) -> dict[str, VerbEntry]:
    """Read ``lemma<TAB>base<TAB>third_singular<TAB>past`` rows, keyed by lemma."""
    path = Path(path) if path else DATA_DIR / "verbs.tsv"
    table = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: expected 4 columns, got {row!r}")
            entry = VerbEntry(*(c.strip().lower() for c in row))
            table[entry.lemma] = entry
    return table


def load_verb_rules(path: str | Path | None = None) -> VerbRules:
    path = Path(path) if path else DATA_DIR / "verb_rules.json"
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return VerbRules(
        subject_labels=frozenset(raw["subject_labels"]),
        aux_labels=frozenset(raw["aux_labels"]),
        conj_labels=frozenset(raw["conj_labels"]),
        finite_tags=frozenset(raw["finite_tags"]),
        irregular=dict(raw["irregular"]),
    )


@lru_cache(maxsize=4)
def _default_dictionary() -> dict[str, VerbEntry]:
    return load_verb_dictionary()


@lru_cache(maxsize=4)
def _default_rules() -> VerbRules:
    return load_verb_rules()


_THIRD_INDEX: dict[int, tuple[dict, dict]] = {}


def _by_third(dictionary: dict[str, VerbEntry]) -> dict[str, VerbEntry]:
    cached = _THIRD_INDEX.get(id(dictionary))
    if cached is None or cached[0] is not dictionary:
        cached = (dictionary, {e.third_singular: e for e in dictionary.values()})
        _THIRD_INDEX[id(dictionary)] = cached
    return cached[1]


def suffix_third_singular(base: str) -> str:
    """The regular 3sg spelling rules.  A final "o" takes -es only after a
    consonant ("veto" -> "vetoes", but "woo" -> "woos")."""
    if re.search(r"(s|sh|ch|x|z|[^aeiou]o)$", base):
        return base + "es"
    if re.search(r"[^aeiou]y$", base):
        return base[:-1] + "ies"
    return base + "s"


def _match_case(template: str, form: str) -> str:
    if len(template) > 1 and template.isupper():
        return form.upper()
    if template[:1].isupper():
        return form[:1].upper() + form[1:]
    return form


def conjugate(form: str, lemma: str = "", tense: Tense | str = Tense.PRESENT,
              dictionary: dict[str, VerbEntry] | None = None,
              rules: VerbRules | None = None) -> tuple[str, str]:
    """Return ``(third_singular_form, rule_used)`` for a 1st/2nd person form."""
    if not form:
        raise ValueError("form must be non-empty")
    dictionary = _default_dictionary() if dictionary is None else dictionary
    rules = _default_rules() if rules is None else rules
    tense = Tense(tense)
    low = form.lower()
    lemma = (lemma or low).lower()

    def result(new: str, rule: str) -> tuple[str, str]:
        new = _match_case(form, new)
        return (form, "unchanged") if new == form else (new, rule)

    entry = dictionary.get(lemma) or dictionary.get(low) or _by_third(dictionary).get(low)
    if entry is not None and low in (entry.base, entry.third_singular, entry.past):
        if low == entry.base and tense is Tense.PRESENT:
            return result(entry.third_singular, "dictionary")
        return form, "unchanged"
    if low in rules.irregular and rules.irregular[low] is not None:
        return result(rules.irregular[low], "irregular")
    if tense is Tense.PAST:
        return form, "unchanged"
    if low != lemma and suffix_third_singular(lemma) == low:
        return form, "unchanged"  # already third singular
    return result(suffix_third_singular(low), "suffix_rule")


def conjugate_third_singular(form: str, lemma: str = "", tense: Tense | str = Tense.PRESENT,
                             dictionary: dict[str, VerbEntry] | None = None) -> str:
    return conjugate(form, lemma, tense, dictionary)[0]


def find_agreement_verbs(doc: Document, focus: str, rules: VerbRules | None = None) -> list[int]:
    """Token indices of the finite verbs whose subject is an out-of-quote
    focus mention.

    For an auxiliary chain ("I have been going") only the finite auxiliary
    is returned.  Conjoined verbs without a subject of their own share the
    focus subject ("I stood and left").
    """
    rules = rules or _default_rules()
    chain = doc.chain(focus)
    active = [m for m in chain.mentions if not m.in_quote and not m.narrator_flag]
    children: dict[int, list] = {}
    has_subject: set[int] = set()
    for a in doc.dependencies:
        children.setdefault(a.head_index, []).append(a)
        if a.label in rules.subject_labels:
            has_subject.add(a.head_index)

    def finite_of(head: int) -> int | None:
        options = [a.dependent_index for a in children.get(head, ()) if a.label in rules.aux_labels]
        options.append(head)
        finite = [i for i in options if doc.tokens[i].pos_tag in rules.finite_tags]
        if finite:
            return min(finite)
        if all(not doc.tokens[i].pos_tag for i in options):
            return min(options)  # untagged input: the leftmost verb form
        return None

    found: set[int] = set()
    for a in doc.dependencies:
        if a.label not in rules.subject_labels:
            continue
        if not any(m.start <= a.dependent_index <= m.end for m in active):
            continue
        heads = [a.head_index]
        heads += [c.dependent_index for c in children.get(a.head_index, ())
                  if c.label in rules.conj_labels and c.dependent_index not in has_subject]
        for h in heads:
            v = finite_of(h)
            if v is not None and not doc.in_quote(v):
                found.add(v)
    return sorted(found)


def plan_verb_edits(doc: Document, focus: str, dictionary: dict[str, VerbEntry] | None = None,
                    rules: VerbRules | None = None) -> list[VerbEdit]:
    edits = []
    for i in find_agreement_verbs(doc, focus, rules):
        tok = doc.tokens[i]
        new, rule = conjugate(tok.surface, tok.lemma, tense_from_pos(tok.pos_tag), dictionary, rules)
        edits.append(VerbEdit(i, tok.surface, new, rule))
    return edits


def apply_verb_edits(tokens: Sequence[str], edits: Sequence[VerbEdit]) -> list[str]:
    out = list(tokens)
    for e in edits:
        out[e.token_index] = e.new_form
    return out

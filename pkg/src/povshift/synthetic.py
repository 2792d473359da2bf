"""Synthetic third-person narratives with known referring-expression rules.

Every document holds two or three characters of one gender, so each is a
confounder of the others.  Gold mention strings follow fixed rules, in
priority order:

1. the first mention of a character uses the full name;
2. a subject right after a scene marker ("Meanwhile ,", "Later ,") uses the
   full name;
3. a mention whose preceding mention (of anyone) belongs to another
   character uses the given name;
4. otherwise a pronoun in the slot's case.

Rule 3 needs to know which entity the previous mention belongs to, which
only the mention-level encoder sees directly; rule 2 is lexical, which
the tree baselines cannot see.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .candidates import (
    Candidate,
    build_focus_candidates,
    canonical_order,
    np_candidate,
)
from .context import ContextBuilder, RankingExample, innermost, normalize_string
from .conversion import ConversionPlan
from .core import (
    CaseClass,
    Document,
    EntitySpec,
    Gender,
    Mention,
    Role,
    build_document,
    document_from_dict,
    document_to_dict,
    make_chain,
)
from .preprocess import Confounders

DATA_DIR = Path(__file__).parent / "data"

MARKERS = ("Meanwhile", "Later")
_INTRANSITIVE = ["smiled", "waited", "laughed", "paused", "nodded", "sighed", "left", "returned",
                 "slept", "hesitated", "listened", "shrugged", "frowned", "stayed"]
_ADVERBIAL = [["for", "a", "while"], ["near", "the", "window"], ["in", "silence"], ["at", "the", "station"],
              ["after", "dinner"], ["by", "the", "river"], ["without", "a", "word"], ["again"]]
_TRANSITIVE = ["called", "visited", "thanked", "watched", "followed", "helped", "greeted", "found",
               "warned", "trusted"]
_POSSESSED = [["closed", "notebook"], ["lost", "keys"], ["finished", "coffee"], ["packed", "bag"],
              ["checked", "watch"], ["opened", "letter"], ["fixed", "bicycle"], ["sold", "car"]]
_REFLEXIVE = [["blamed"], ["reminded", None, "to", "breathe"], ["poured", None, "a", "drink"],
              ["told", None, "to", "wait"]]
_THINGS = [["the", "letter"], ["a", "taxi"], ["the", "old", "map"], ["the", "door"], ["the", "radio"]]
_FILLER = [
    ["The", "rain", "kept", "falling", "over", "the", "harbor"],
    ["Nobody", "spoke", "for", "a", "long", "time"],
    ["The", "streets", "were", "empty", "and", "cold"],
    ["A", "bus", "passed", "slowly", "through", "the", "square"],
    ["The", "kitchen", "smelled", "of", "bread", "and", "smoke"],
    ["Somewhere", "a", "dog", "barked", "twice"],
]
_EXTENSIONS = [["and", "the", "lights", "went", "out", "one", "by", "one"],
               ["while", "the", "wind", "moved", "the", "curtains"],
               ["as", "the", "clock", "on", "the", "wall", "ticked", "on"],
               ["until", "the", "morning", "came", "gray", "and", "quiet"]]
_RELATIVES = ["brother", "son", "father", "cousin", "friend", "grandson", "neighbor"]

_PRONOUN = {
    Gender.MASCULINE: {CaseClass.NOMINATIVE: "he", CaseClass.ACCUSATIVE: "him",
                       CaseClass.POSSESSIVE: "his", CaseClass.REFLEXIVE: "himself"},
    Gender.FEMININE: {CaseClass.NOMINATIVE: "she", CaseClass.ACCUSATIVE: "her",
                      CaseClass.POSSESSIVE: "her", CaseClass.REFLEXIVE: "herself"},
}
_ROLE = {CaseClass.NOMINATIVE: Role.SUBJECT, CaseClass.ACCUSATIVE: Role.OBJECT,
         CaseClass.POSSESSIVE: Role.OTHER, CaseClass.REFLEXIVE: Role.OBJECT}


def load_names(kind: str) -> list[str]:
    lines = (DATA_DIR / f"names_{kind}.txt").read_text(encoding="utf-8").splitlines()
    return [x.strip() for x in lines if x.strip() and not x.startswith("#")]


@dataclass(frozen=True)
class SyntheticDoc:
    document: Document
    names: dict  # chain id -> full name
    gender: Gender
    distractors: dict  # chain id -> extra noun phrases in S(E)

    def spec(self, chain_id: str) -> EntitySpec:
        return EntitySpec.from_name(self.names[chain_id], self.gender)

    def to_dict(self) -> dict:
        d = document_to_dict(self.document)
        d["synthetic"] = {"names": self.names, "gender": self.gender.value, "distractors": self.distractors}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticDoc":
        meta = d["synthetic"]
        return cls(document_from_dict(d), dict(meta["names"]), Gender(meta["gender"]),
                   {k: list(v) for k, v in meta.get("distractors", {}).items()})


class _Writer:
    """Accumulates tokens, POS tags and mention spans sentence by sentence."""

    def __init__(self):
        self.sentences: list[list[str]] = []
        self.tags: list[str] = []
        self.mentions: list[tuple[str, int, int, CaseClass]] = []
        self.n = 0
        self.current: list[str] = []

    def word(self, w: str, tag: str = "NN") -> None:
        self.current.append(w)
        self.tags.append(tag)
        self.n += 1

    def words(self, ws: Sequence[str], tag: str = "NN") -> None:
        for w in ws:
            self.word(w, tag)

    def mention(self, chain: str, text: str, case: CaseClass) -> None:
        start = self.n
        words = text.split()
        for i, w in enumerate(words):
            if w.endswith("'s"):
                self.word(w[:-2], "NNP")
                self.word("'s", "POS")
            elif w.lower() in ("he", "him", "she", "himself", "herself") or (w.lower() == "her" and case is not CaseClass.POSSESSIVE):
                self.word(w, "PRP")
            elif w.lower() in ("his", "her"):
                self.word(w, "PRP$")
            else:
                self.word(w, "NNP")
        self.mentions.append((chain, start, self.n - 1, case))

    def end_sentence(self) -> None:
        self.word(".", ".")
        self.sentences.append(self.current)
        self.current = []


def _text(sentences: Sequence[Sequence[str]]) -> str:
    out = []
    for sent in sentences:
        s = ""
        for w in sent:
            if s and w not in (".", ",", "'s"):
                s += " "
            s += w
        out.append(s)
    return " ".join(out)


def generate_document(doc_id: str, rng: np.random.Generator, gender: Gender | None = None,
                      n_events: tuple[int, int] = (12, 18)) -> SyntheticDoc:
    """One synthetic document; all randomness comes from ``rng``."""
    if gender is None:
        gender = Gender.MASCULINE if rng.random() < 0.5 else Gender.FEMININE
    given_pool = load_names("masculine" if gender is Gender.MASCULINE else "feminine")
    family_pool = load_names("family")
    k = int(rng.integers(2, 4))
    given = [given_pool[i] for i in rng.choice(len(given_pool), size=k, replace=False)]
    family = [family_pool[i] for i in rng.choice(len(family_pool), size=k, replace=False)]
    chains = [str(i) for i in range(k)]
    names = {c: f"{g} {f}" for c, g, f in zip(chains, given, family)}

    seen: set[str] = set()
    last_owner: list[str | None] = [None]
    w = _Writer()

    def refer(chain: str, case: CaseClass, after_marker: bool = False) -> None:
        full = names[chain]
        if case is CaseClass.REFLEXIVE:
            text = _PRONOUN[gender][case]
        elif chain not in seen or after_marker:
            text = full
        elif last_owner[0] != chain:
            text = full.split()[0]
        else:
            text = _PRONOUN[gender][case]
        if case is CaseClass.POSSESSIVE and text in (full, full.split()[0]):
            text = text + "'s"
        if not w.current:
            text = text[:1].upper() + text[1:]
        w.mention(chain, text, case)
        seen.add(chain)
        last_owner[0] = chain

    subject = chains[0]
    for ev in range(int(rng.integers(*n_events))):
        for _ in range(int(rng.choice([0, 0, 1, 1, 2, 3]))):
            w.words(_FILLER[int(rng.integers(len(_FILLER)))])
            if rng.random() < 0.5:
                w.word(",", ",")
                w.words(_EXTENSIONS[int(rng.integers(len(_EXTENSIONS)))])
            w.end_sentence()
        if ev and rng.random() < 0.5:
            subject = chains[int(rng.integers(k))]
        marker = ev > 0 and rng.random() < 0.2
        if marker:
            w.word(MARKERS[int(rng.integers(len(MARKERS)))], "RB")
            w.word(",", ",")
        refer(subject, CaseClass.NOMINATIVE, after_marker=marker)
        others = [c for c in chains if c != subject]
        kind = rng.random()
        if kind < 0.25:
            w.word(_INTRANSITIVE[int(rng.integers(len(_INTRANSITIVE)))], "VBD")
            w.words(_ADVERBIAL[int(rng.integers(len(_ADVERBIAL)))])
        elif kind < 0.55:
            w.word(_TRANSITIVE[int(rng.integers(len(_TRANSITIVE)))], "VBD")
            if rng.random() < 0.8:
                refer(others[int(rng.integers(len(others)))], CaseClass.ACCUSATIVE)
            else:
                w.words(_THINGS[int(rng.integers(len(_THINGS)))])
        elif kind < 0.85:
            verb, noun = _POSSESSED[int(rng.integers(len(_POSSESSED)))]
            w.word(verb, "VBD")
            owner = subject if rng.random() < 0.6 else others[int(rng.integers(len(others)))]
            refer(owner, CaseClass.POSSESSIVE)
            w.word(noun)
        else:
            frame = _REFLEXIVE[int(rng.integers(len(_REFLEXIVE)))]
            w.word(frame[0], "VBD")
            refer(subject, CaseClass.REFLEXIVE)
            w.words([x for x in frame[2:] if x])
        w.end_sentence()

    text = _text(w.sentences)
    by_chain: dict[str, list[Mention]] = {c: [] for c in chains}
    doc0 = build_document(doc_id, text, w.sentences, pos_tags=w.tags, genre="synthetic")
    for chain, s, e, case in w.mentions:
        string = doc0.span_text(s, e)
        case_class = case if string.lower() in _PRONOUN[gender].values() else CaseClass.NON_PRONOMINAL
        by_chain[chain].append(Mention(chain, (s, e), string, case_class, _ROLE[case]))
    built = tuple(make_chain(c, by_chain[c], entity_kind="person", gender=gender) for c in chains if by_chain[c])
    poss = "his" if gender is Gender.MASCULINE else "her"
    distractors = {}
    for c in chains:
        picks = rng.choice(len(_RELATIVES), size=2, replace=False)
        distractors[c] = sorted(f"{poss} {_RELATIVES[i]}" for i in picks)
    return SyntheticDoc(replace(doc0, chains=built), names, gender, distractors)


def generate_corpus(n_docs: int, seed: int = 0, prefix: str = "syn") -> list[SyntheticDoc]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [generate_document(f"{prefix}-{seed}-{i:03d}", rng) for i in range(n_docs)]


def candidate_set(sd: SyntheticDoc, chain_id: str) -> list[Candidate]:
    """S(E) as the conversion pipeline builds it, plus distractor phrases."""
    base = build_focus_candidates(sd.document, chain_id, sd.spec(chain_id))
    extra = [np_candidate(x, "relational_converse", "common_np") for x in sd.distractors.get(chain_id, [])]
    return canonical_order(list(base) + extra)


def gold_strings(sd: SyntheticDoc) -> dict[str, str]:
    return {m.id: normalize_string(m.string) for c in sd.document.chains for m in c.mentions}


def synthetic_plan(sd: SyntheticDoc) -> ConversionPlan:
    """Plan that rewrites every character of ``sd`` (each confounds the others)."""
    doc = sd.document
    ids = [c.chain_id for c in doc.chains]
    sets = {cid: candidate_set(sd, cid) for cid in ids}
    scheduled = innermost(m for c in doc.chains for m in c.mentions)
    return ConversionPlan(doc, ids[0], Confounders(tuple(ids[1:]), ()), sets, [], scheduled, sd.gender)


def synthetic_examples(docs: Sequence[SyntheticDoc], n_tokens: int = 50, k_mentions: int = 10) -> list[RankingExample]:
    """Teacher-forced examples for every mention of every character."""
    out = []
    for sd in docs:
        doc = sd.document
        gold = gold_strings(sd)
        scheduled = innermost(m for c in doc.chains for m in c.mentions)
        builder = ContextBuilder(doc, scheduled, n_tokens, k_mentions)
        for c in doc.chains:
            cands = tuple(x.string for x in candidate_set(sd, c.chain_id))
            for m in c.mentions:
                out.append(builder.example(m, cands, gold, gold=gold[m.id]))
    return out


def save_corpus(docs: Sequence[SyntheticDoc], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sd in docs:
            fh.write(json.dumps(sd.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_corpus(path: str | Path) -> list[SyntheticDoc]:
    with open(path, encoding="utf-8") as fh:
        return [SyntheticDoc.from_dict(json.loads(line)) for line in fh if line.strip()]


def selection_accuracy_by_doc(docs: Sequence[SyntheticDoc], make_chooser, n_tokens: int = 50,
                              k_mentions: int = 10) -> dict[str, float]:
    """Autoregressive mention-selection accuracy per document.

    ``make_chooser(sd)`` returns the chooser used for document ``sd``.
    """
    from .conversion import ChainState, run_selection

    out = {}
    for sd in docs:
        state = ChainState()
        run_selection(synthetic_plan(sd), make_chooser(sd), n_tokens, k_mentions, state)
        gold = gold_strings(sd)
        out[sd.document.doc_id] = sum(state.selections[k] == g for k, g in gold.items()
                                      if k in state.selections) / len(gold)
    return out


def ranker_evaluator(docs: Sequence[SyntheticDoc]):
    """``model -> {doc_id: accuracy}`` over held-out synthetic documents."""
    from .ranker import ranker_chooser

    def evaluate(model) -> dict[str, float]:
        chooser = ranker_chooser(model)
        return selection_accuracy_by_doc(docs, lambda sd: chooser, model.config.n_tokens, model.config.k_mentions)

    return evaluate

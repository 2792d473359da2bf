"""Conversion plans and results, and the left-to-right selection driver.

A :class:`ConversionPlan` bundles the output of pipeline steps 1-3 (focus
and confounder chains, verb edits, candidate sets).  :func:`run_selection`
performs step 4 with any *chooser* (the neural ranker or a baseline) and
returns a :class:`ConversionResult`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .candidates import (
    Candidate,
    RelationalLexicon,
    build_confounder_candidates,
    build_focus_candidates,
    canonical_order,
    candidate_from_string,
    narrow_by_case,
)
from .context import ContextBuilder, RankingExample, capitalize_first, innermost
from .core import Document, EntitySpec, Gender, Mention, Pov
from .morph import VerbEdit, VerbEntry, plan_verb_edits
from .preprocess import Confounders, identify_confounders, identify_focus_chain

log = logging.getLogger(__name__)

Chooser = Callable[[RankingExample, Sequence[Candidate], Mention], str]


@dataclass(frozen=True)
class MentionEdit:
    chain_id: str
    mention_id: str
    token_span: tuple[int, int]
    char_start: int
    char_end: int
    old: str
    new: str


@dataclass(frozen=True)
class ConversionResult:
    doc_id: str
    mention_edits: tuple[MentionEdit, ...]
    verb_edits: tuple[VerbEdit, ...]
    text: str
    verb_char_spans: tuple[tuple[int, int], ...] = ()

    def replacements(self) -> dict[tuple[int, int], str]:
        return {e.token_span: e.new for e in self.mention_edits}

    def replacement_olds(self) -> dict[tuple[int, int], str]:
        return {e.token_span: e.old for e in self.mention_edits}

    def verb_changes(self) -> dict[int, str]:
        return {v.token_index: v.new_form for v in self.verb_edits if v.new_form != v.original_form}

    def to_dict(self) -> dict:
        spans = self.verb_char_spans or ((0, 0),) * len(self.verb_edits)
        return {
            "doc_id": self.doc_id,
            "mention_edits": [
                {"char_start": e.char_start, "char_end": e.char_end, "old": e.old, "new": e.new,
                 "chain_id": e.chain_id, "mention_id": e.mention_id, "token_span": list(e.token_span)}
                for e in self.mention_edits
            ],
            "verb_edits": [
                {"token": v.token_index, "char_start": s, "char_end": t, "old": v.original_form,
                 "new": v.new_form, "rule": v.rule_used}
                for v, (s, t) in zip(self.verb_edits, spans)
            ],
            "text": self.text,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ConversionResult":
        edits = tuple(
            MentionEdit(e["chain_id"], e.get("mention_id", ""), tuple(e["token_span"]), e["char_start"],
                        e["char_end"], e["old"], e["new"])
            for e in d["mention_edits"]
        )
        verbs = tuple(VerbEdit(v["token"], v["old"], v["new"], v.get("rule") or
                               ("unchanged" if v["old"] == v["new"] else "dictionary"))
                      for v in d["verb_edits"])
        spans = tuple((v.get("char_start", 0), v.get("char_end", 0)) for v in d["verb_edits"])
        return cls(d["doc_id"], edits, verbs, d.get("text", ""), spans)


@dataclass
class ChainState:
    """Selections made so far, updated strictly left to right."""

    selections: dict = field(default_factory=dict)  # mention id -> string
    last_owner: str | None = None
    last_position: int = -1

    def update(self, mention: Mention, text: str) -> None:
        if mention.start < self.last_position:
            raise ValueError("mentions must be resolved left to right")
        self.selections[mention.id] = text
        self.last_owner = mention.chain_id
        self.last_position = mention.start


@dataclass
class ConversionPlan:
    doc: Document
    focus: str
    confounders: Confounders
    candidate_sets: dict  # chain id -> list[Candidate]
    verb_edits: list
    scheduled: list  # mentions in document order
    gender: Gender

    def chain_ids(self) -> tuple[str, ...]:
        return (self.focus, *self.confounders.all())


def schedule_mentions(doc: Document, chain_ids: Sequence[str]) -> list[Mention]:
    """Out-of-quote, non-narrator mentions of the given chains; when two
    nest, only the inner one is rewritten."""
    wanted = set(chain_ids)
    ms = [m for c in doc.chains if c.chain_id in wanted for m in c.mentions
          if not m.in_quote and not m.narrator_flag]
    return innermost(ms)


def plan_conversion(doc: Document, spec: EntitySpec, from_pov: Pov | str = Pov.FIRST,
                    lexicon: RelationalLexicon | None = None,
                    verb_dictionary: dict[str, VerbEntry] | None = None,
                    candidate_overrides: Mapping[str, Sequence[str]] | None = None,
                    focus_chain: str | None = None) -> ConversionPlan:
    """Steps 1-3: identify chains, plan verb edits and build S(E)."""
    from_pov = Pov(from_pov)
    focus = focus_chain or identify_focus_chain(doc, spec, from_pov)
    gender = Gender(spec.gender)
    confs = identify_confounders(doc, focus, gender, from_pov)
    sets = {focus: build_focus_candidates(doc, focus, spec, lexicon)}
    for cid in confs.singular:
        sets[cid] = build_confounder_candidates(doc, cid, gender, plural=False, from_pov=from_pov)
    for cid in confs.plural:
        sets[cid] = build_confounder_candidates(doc, cid, gender, plural=True, from_pov=from_pov)
    for cid, strings in (candidate_overrides or {}).items():
        if cid in sets:
            sets[cid] = canonical_order(candidate_from_string(s) for s in strings)
    verbs = plan_verb_edits(doc, focus, verb_dictionary)
    scheduled = schedule_mentions(doc, [focus, *confs.all()])
    return ConversionPlan(doc, focus, confs, sets, verbs, scheduled, gender)


def render_text(doc: Document, selections: Mapping[str, str], mentions: Sequence[Mention],
                verb_edits: Sequence[VerbEdit], capitalize: bool = True,
                ) -> tuple[str, list[MentionEdit], list[tuple[int, int]]]:
    """Splice selections and verb forms into the source text.

    Returns the new text, the mention edits (changed slots only) and the
    character spans of the verb edits, all in original-text offsets.
    """
    sentence_starts = {s for s, _ in doc.sentences} if doc.sentences else {0}
    pieces = []  # (char_start, char_end, replacement)
    edits = []
    for m in mentions:
        new = selections.get(m.id)
        if new is None:
            continue
        if capitalize and m.start in sentence_starts:
            new = capitalize_first(new)
        cs, ce = doc.tokens[m.start].char_span[0], doc.tokens[m.end].char_span[1]
        old = doc.source_text[cs:ce]
        if new != old:
            pieces.append((cs, ce, new))
            edits.append(MentionEdit(m.chain_id, m.id, m.token_span, cs, ce, old, new))
    verb_spans = []
    for v in verb_edits:
        cs, ce = doc.tokens[v.token_index].char_span
        verb_spans.append((cs, ce))
        if v.new_form != v.original_form:
            pieces.append((cs, ce, v.new_form))
    pieces.sort()
    out, cursor = [], 0
    for cs, ce, new in pieces:
        out.append(doc.source_text[cursor:cs])
        out.append(new)
        cursor = ce
    out.append(doc.source_text[cursor:])
    return "".join(out), edits, verb_spans


def run_selection(plan: ConversionPlan, chooser: Chooser, n_tokens: int = 50, k_mentions: int = 10,
                  state: ChainState | None = None) -> ConversionResult:
    """Step 4: choose a string for every scheduled mention, left to right.

    Each mention's candidate set is narrowed by case first; a singleton is
    taken without consulting the chooser.
    """
    doc = plan.doc
    overrides = {v.token_index: v.new_form for v in plan.verb_edits}
    builder = ContextBuilder(doc, plan.scheduled, n_tokens, k_mentions, overrides)
    state = state or ChainState()
    for m in plan.scheduled:
        narrowed = narrow_by_case(plan.candidate_sets[m.chain_id], m)
        if len(narrowed) == 1:
            choice = narrowed[0].string
        else:
            ex = builder.example(m, [c.string for c in narrowed], state.selections)
            choice = chooser(ex, narrowed, m)
        state.update(m, choice)
    text, edits, spans = render_text(doc, state.selections, plan.scheduled, plan.verb_edits)
    changed = [v for v in plan.verb_edits if v.new_form != v.original_form]
    changed_spans = [s for v, s in zip(plan.verb_edits, spans) if v.new_form != v.original_form]
    return ConversionResult(doc.doc_id, tuple(edits), tuple(changed), text, tuple(changed_spans))


def gold_result(doc: Document, replacements: Mapping[tuple[int, int], str],
                verb_changes: Mapping[int, str]) -> ConversionResult:
    """The gold conversion of a benchmark document as a ConversionResult."""
    owner = {(m.start, m.end): m for c in doc.chains for m in c.mentions}
    selections, mentions = {}, []
    for span, text in sorted(replacements.items()):
        m = owner.get(tuple(span))
        if m is None:
            m = Mention("?", tuple(span), doc.span_text(*span), position_in_chain=len(mentions))
        selections[m.id] = text
        mentions.append(m)
    verbs = []
    for i, new in sorted(verb_changes.items()):
        old = doc.tokens[i].surface
        verbs.append(VerbEdit(i, old, new, "unchanged" if new == old else "dictionary"))
    # gold strings are taken literally: no automatic capitalization
    text, edits, spans = render_text(doc, selections, mentions, verbs, capitalize=False)
    changed = [v for v in verbs if v.new_form != v.original_form]
    cspans = [s for v, s in zip(verbs, spans) if v.new_form != v.original_form]
    return ConversionResult(doc.doc_id, tuple(edits), tuple(changed), text, tuple(cspans))

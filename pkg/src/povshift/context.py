"""Ranking examples: the token and mention windows around one mention slot.

The same builder serves training-data extraction (teacher forcing: every
earlier slot shows its observed string) and autoregressive conversion
(earlier slots show the strings already selected).  Mentions scheduled for
rewriting that lie to the right of the slot are shown as a single ``<unk>``
in both settings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import PRONOUNS, CaseClass, Document, Mention, Role, slot_case

PAD, SEP, UNK = "<pad>", "<sep>", "<unk>"
SPECIAL_TOKENS = (PAD, SEP, UNK)

_TOKEN_RE = re.compile(r"['’]s\b|[\w\-]+|[^\s\w]")


def tokenize_string(text: str) -> list[str]:
    """Split a candidate string the way the corpora tokenize: "Nick's" -> Nick, 's."""
    return _TOKEN_RE.findall(text)


def normalize_string(text: str) -> str:
    """Canonical form of a mention string: pronouns lower-cased, clitics
    re-attached ("Nick 's" -> "Nick's"), whitespace collapsed."""
    text = re.sub(r"\s+", " ", text.strip())
    text = re.sub(r" (['’]s|['’])(?=\s|$)", r"\1", text)
    if text.lower() in PRONOUNS:
        return text.lower()
    return text


def capitalize_first(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


@dataclass(frozen=True)
class ContextMention:
    tokens: tuple[str, ...]
    same_entity: bool
    distance: int
    chain_id: str
    same_sentence: bool = False


@dataclass(frozen=True)
class RankingExample:
    doc_id: str
    chain_id: str
    mention_index: int
    gold_string: str | None
    candidate_set: tuple[str, ...]
    left_tokens: tuple[str, ...]
    right_tokens: tuple[str, ...]  # document order, nearest token first
    left_mentions: tuple[ContextMention, ...]
    right_mentions: tuple[ContextMention, ...]  # document order, nearest first
    prior_strings: tuple[str, ...] = ()
    role: Role = Role.OTHER
    slot: CaseClass = CaseClass.NOMINATIVE
    original: str = ""
    sentence_initial: bool = False
    pos: str = ""
    prior_mentions: tuple[ContextMention, ...] = ()  # same-entity mentions before the slot, nearest last

    @property
    def loss_free(self) -> bool:
        return len(self.candidate_set) < 2

    def to_dict(self) -> dict:
        def cm(m: ContextMention) -> dict:
            return {"tokens": list(m.tokens), "same_entity": m.same_entity,
                    "distance": m.distance, "chain": m.chain_id, "same_sentence": m.same_sentence}

        return {
            "doc_id": self.doc_id, "chain_id": self.chain_id, "mention_index": self.mention_index,
            "gold": self.gold_string, "candidates": list(self.candidate_set),
            "left_tokens": list(self.left_tokens), "right_tokens": list(self.right_tokens),
            "left_mentions": [cm(m) for m in self.left_mentions],
            "right_mentions": [cm(m) for m in self.right_mentions],
            "prior_strings": list(self.prior_strings), "role": self.role.value, "slot": self.slot.value,
            "original": self.original, "sentence_initial": self.sentence_initial, "pos": self.pos,
            "prior_mentions": [cm(m) for m in self.prior_mentions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankingExample":
        def cm(x: dict) -> ContextMention:
            return ContextMention(tuple(x["tokens"]), bool(x["same_entity"]), int(x["distance"]), str(x["chain"]),
                                  bool(x.get("same_sentence", False)))

        return cls(
            doc_id=d["doc_id"], chain_id=d["chain_id"], mention_index=int(d["mention_index"]),
            gold_string=d["gold"], candidate_set=tuple(d["candidates"]),
            left_tokens=tuple(d["left_tokens"]), right_tokens=tuple(d["right_tokens"]),
            left_mentions=tuple(cm(x) for x in d["left_mentions"]),
            right_mentions=tuple(cm(x) for x in d["right_mentions"]),
            prior_strings=tuple(d.get("prior_strings", ())), role=Role(d.get("role", "other")),
            slot=CaseClass(d.get("slot", "nominative")), original=d.get("original", ""),
            sentence_initial=bool(d.get("sentence_initial", False)), pos=d.get("pos", ""),
            prior_mentions=tuple(cm(x) for x in d.get("prior_mentions", ())),
        )


def innermost(mentions: Iterable[Mention]) -> list[Mention]:
    """Drop every mention that encloses another one (the inner one is rewritten)."""
    ms = sorted(mentions, key=lambda m: (m.start, -m.end))
    keep = []
    for m in ms:
        if any(o is not m and m.start <= o.start and o.end <= m.end and (o.start, o.end) != (m.start, m.end)
               for o in ms):
            continue
        if keep and keep[-1].start <= m.start <= keep[-1].end:
            continue  # identical or crossing span: first one wins
        keep.append(m)
    return keep


class ContextBuilder:
    """Window extraction over one document.

    ``scheduled`` are the mentions whose strings get selected; they must not
    overlap (see :func:`innermost`).  ``token_overrides`` replaces token
    surfaces (verb edits), so agreement changes are visible in context.
    """

    def __init__(self, doc: Document, scheduled: Sequence[Mention], n_tokens: int = 50,
                 k_mentions: int = 10, token_overrides: Mapping[int, str] | None = None,
                 context_mentions: Sequence[Mention] | None = None):
        self.doc = doc
        self.n = n_tokens
        self.k = k_mentions
        self.overrides = dict(token_overrides or {})
        self.units: dict[int, Mention] = {}
        for m in scheduled:
            if any(self.units.get(i) is not None for i in range(m.start, m.end + 1)):
                raise ValueError(f"scheduled mention {m.id} overlaps another scheduled mention")
            self.units[m.start] = m
        self._unit_end = {m.start: m.end for m in scheduled}
        self._covered = {i: m.start for m in scheduled for i in range(m.start, m.end + 1)}
        ms = list(context_mentions) if context_mentions is not None else doc.all_mentions()
        self.mentions = sorted(ms, key=lambda m: (m.start, -m.end, m.chain_id))
        self.sentence_starts = {s for s, _ in doc.sentences} if doc.sentences else {0}

    # -- rendering ---------------------------------------------------------

    def _surface(self, i: int) -> str:
        return self.overrides.get(i, self.doc.tokens[i].surface)

    def _unit_tokens(self, m: Mention, selections: Mapping[str, str], as_unk: bool) -> list[str]:
        if as_unk:
            return [UNK]
        text = selections.get(m.id)
        if text is None:
            return [self._surface(i) for i in range(m.start, m.end + 1)]
        if m.start in self.sentence_starts:
            text = capitalize_first(text)
        return tokenize_string(text)

    def render(self, start: int, end: int, selections: Mapping[str, str], unk_unresolved: bool) -> list[str]:
        """Tokens of ``[start, end]`` with scheduled mentions rendered as their
        selections, or ``<unk>`` when unresolved and ``unk_unresolved``."""
        out: list[str] = []
        i = start
        while i <= end:
            m = self.units.get(i)
            if m is not None and m.end <= end:
                out.extend(self._unit_tokens(m, selections, unk_unresolved and m.id not in selections))
                i = m.end + 1
            else:
                out.append(self._surface(i))
                i += 1
        return out

    def _left_tokens(self, pos: int, selections: Mapping[str, str]) -> list[str]:
        out: list[str] = []
        i = pos - 1
        while i >= 0 and len(out) < self.n:
            ustart = self._covered.get(i)
            if ustart is not None and self._unit_end[ustart] < pos:
                toks = self._unit_tokens(self.units[ustart], selections, False)
                out = toks + out
                i = ustart - 1
            else:
                out.insert(0, self._surface(i))
                i -= 1
        return out[-self.n:]

    def _right_tokens(self, pos: int, selections: Mapping[str, str], future_resolved: bool) -> list[str]:
        out: list[str] = []
        i = pos + 1
        limit = len(self.doc.tokens)
        while i < limit and len(out) < self.n:
            m = self.units.get(i)
            if m is not None:
                resolved = future_resolved and m.id in selections
                out.extend(self._unit_tokens(m, selections, not resolved))
                i = m.end + 1
            else:
                out.append(self._surface(i))
                i += 1
        return out[:self.n]

    # -- examples ----------------------------------------------------------

    def example(self, mention: Mention, candidates: Sequence[str], selections: Mapping[str, str],
                gold: str | None = None, future_resolved: bool = False) -> RankingExample:
        """Example for ``mention``; ``selections`` maps mention ids to the
        strings shown for already-resolved slots."""
        right_sel = selections if future_resolved else {}
        left_ms = [m for m in self.mentions if m.end < mention.start][-self.k:]
        right_ms = [m for m in self.mentions if m.start > mention.end][:self.k]
        sent = self.doc.tokens[mention.start].sentence_index

        def ctx(m: Mention, sel: Mapping[str, str], unk: bool, distance: int) -> ContextMention:
            return ContextMention(tuple(self.render(m.start, m.end, sel, unk)), m.chain_id == mention.chain_id,
                                  distance, m.chain_id, self.doc.tokens[m.start].sentence_index == sent)

        left = tuple(ctx(m, selections, False, mention.start - m.end) for m in left_ms)
        right = tuple(ctx(m, right_sel, True, m.start - mention.end) for m in right_ms)
        chain = self.doc.chain(mention.chain_id)
        earlier = [m for m in chain.mentions if m.end < mention.start]
        prior = tuple(selections.get(m.id, normalize_string(m.string)) for m in earlier)
        prior_ms = tuple(ctx(m, selections, False, mention.start - m.end) for m in earlier[-self.k:])
        role = Role(mention.grammatical_role)
        return RankingExample(
            doc_id=self.doc.doc_id,
            chain_id=mention.chain_id,
            mention_index=mention.position_in_chain,
            gold_string=gold,
            candidate_set=tuple(candidates),
            left_tokens=tuple(self._left_tokens(mention.start, selections)),
            right_tokens=tuple(self._right_tokens(mention.end, selections, future_resolved)),
            left_mentions=left,
            right_mentions=right,
            prior_strings=prior,
            role=role,
            slot=slot_case(mention.string, CaseClass(mention.case_class), role),
            original=mention.string,
            sentence_initial=mention.start in self.sentence_starts,
            pos=self.doc.tokens[mention.end].pos_tag,
            prior_mentions=prior_ms,
        )

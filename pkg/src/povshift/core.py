"""Domain types shared across the package, plus document validation and the
canonical JSON codec.

All types are frozen dataclasses. Sequences are stored as tuples so that a
``Document`` can be shared between threads without copying; build modified
documents with :func:`dataclasses.replace`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

SCHEMA_VERSION = 1


class CaseClass(str, Enum):
    NOMINATIVE = "nominative"
    ACCUSATIVE = "accusative"
    POSSESSIVE = "possessive"
    REFLEXIVE = "reflexive"
    NON_PRONOMINAL = "non_pronominal"


class Role(str, Enum):
    SUBJECT = "subject"
    OBJECT = "object"
    OTHER = "other"


class Pov(str, Enum):
    FIRST = "first"
    SECOND = "second"
    THIRD = "third"


class Gender(str, Enum):
    FEMININE = "feminine"
    MASCULINE = "masculine"
    UNKNOWN = "unknown"


class Number(str, Enum):
    SINGULAR = "singular"
    PLURAL = "plural"


# ---------------------------------------------------------------------------
# Pronoun inventory
#
# (person, number, gender, cases).  "you" and "her" are case-ambiguous; the
# role or POS tag of the mention decides (see ``case_class_of``).
# ---------------------------------------------------------------------------

_C = CaseClass
PRONOUNS: dict[str, tuple[Pov, Number | None, Gender | None, tuple[CaseClass, ...]]] = {
    "i": (Pov.FIRST, Number.SINGULAR, None, (_C.NOMINATIVE,)),
    "me": (Pov.FIRST, Number.SINGULAR, None, (_C.ACCUSATIVE,)),
    "my": (Pov.FIRST, Number.SINGULAR, None, (_C.POSSESSIVE,)),
    "mine": (Pov.FIRST, Number.SINGULAR, None, (_C.POSSESSIVE,)),
    "myself": (Pov.FIRST, Number.SINGULAR, None, (_C.REFLEXIVE,)),
    "we": (Pov.FIRST, Number.PLURAL, None, (_C.NOMINATIVE,)),
    "us": (Pov.FIRST, Number.PLURAL, None, (_C.ACCUSATIVE,)),
    "our": (Pov.FIRST, Number.PLURAL, None, (_C.POSSESSIVE,)),
    "ours": (Pov.FIRST, Number.PLURAL, None, (_C.POSSESSIVE,)),
    "ourselves": (Pov.FIRST, Number.PLURAL, None, (_C.REFLEXIVE,)),
    "you": (Pov.SECOND, None, None, (_C.NOMINATIVE, _C.ACCUSATIVE)),
    "your": (Pov.SECOND, None, None, (_C.POSSESSIVE,)),
    "yours": (Pov.SECOND, None, None, (_C.POSSESSIVE,)),
    "yourself": (Pov.SECOND, Number.SINGULAR, None, (_C.REFLEXIVE,)),
    "yourselves": (Pov.SECOND, Number.PLURAL, None, (_C.REFLEXIVE,)),
    "he": (Pov.THIRD, Number.SINGULAR, Gender.MASCULINE, (_C.NOMINATIVE,)),
    "him": (Pov.THIRD, Number.SINGULAR, Gender.MASCULINE, (_C.ACCUSATIVE,)),
    "his": (Pov.THIRD, Number.SINGULAR, Gender.MASCULINE, (_C.POSSESSIVE,)),
    "himself": (Pov.THIRD, Number.SINGULAR, Gender.MASCULINE, (_C.REFLEXIVE,)),
    "she": (Pov.THIRD, Number.SINGULAR, Gender.FEMININE, (_C.NOMINATIVE,)),
    "her": (Pov.THIRD, Number.SINGULAR, Gender.FEMININE, (_C.ACCUSATIVE, _C.POSSESSIVE)),
    "hers": (Pov.THIRD, Number.SINGULAR, Gender.FEMININE, (_C.POSSESSIVE,)),
    "herself": (Pov.THIRD, Number.SINGULAR, Gender.FEMININE, (_C.REFLEXIVE,)),
    "it": (Pov.THIRD, Number.SINGULAR, None, (_C.NOMINATIVE, _C.ACCUSATIVE)),
    "its": (Pov.THIRD, Number.SINGULAR, None, (_C.POSSESSIVE,)),
    "itself": (Pov.THIRD, Number.SINGULAR, None, (_C.REFLEXIVE,)),
    "they": (Pov.THIRD, Number.PLURAL, None, (_C.NOMINATIVE,)),
    "them": (Pov.THIRD, Number.PLURAL, None, (_C.ACCUSATIVE,)),
    "their": (Pov.THIRD, Number.PLURAL, None, (_C.POSSESSIVE,)),
    "theirs": (Pov.THIRD, Number.PLURAL, None, (_C.POSSESSIVE,)),
    "themselves": (Pov.THIRD, Number.PLURAL, None, (_C.REFLEXIVE,)),
}

# pronouns that can only refer to people
HUMAN_PRONOUNS = frozenset(
    p for p, (pov, _, gender, _) in PRONOUNS.items()
    if pov is not Pov.THIRD or gender is not None
)

# independent possessives; "her" is never one of them
INDEPENDENT_POSSESSIVES = frozenset({"mine", "ours", "yours", "his", "hers", "theirs", "its"})
DETERMINER_POSSESSIVES = frozenset({"my", "our", "your", "his", "her", "their", "its"})


def is_pronoun(text: str) -> bool:
    return text.lower() in PRONOUNS


def pronoun_pov(text: str) -> Pov | None:
    entry = PRONOUNS.get(text.lower())
    return entry[0] if entry else None


def is_deictic(text: str, pov: Pov | None = None) -> bool:
    """True for first/second person pronouns (of ``pov`` if given)."""
    p = pronoun_pov(text)
    if p is None or p is Pov.THIRD:
        return False
    return pov is None or p is pov


def case_class_of(text: str, role: Role | str = Role.OTHER, pos: str | None = None) -> CaseClass:
    """Case class of a mention string.

    Every non-pronominal string is ``NON_PRONOMINAL`` (see :func:`slot_case`
    for the case such a mention fills).  Ambiguous pronouns
    are resolved with the POS tag (``PRP$`` marks a determiner) and then the
    grammatical role.
    """
    entry = PRONOUNS.get(text.lower())
    if entry is None:
        return CaseClass.NON_PRONOMINAL
    cases = entry[3]
    if len(cases) == 1:
        return cases[0]
    if CaseClass.POSSESSIVE in cases:
        if pos == "PRP$":
            return CaseClass.POSSESSIVE
        if pos == "PRP":
            return CaseClass.ACCUSATIVE
        return CaseClass.ACCUSATIVE if Role(role) is Role.OBJECT else CaseClass.POSSESSIVE
    return CaseClass.NOMINATIVE if Role(role) is Role.SUBJECT else CaseClass.ACCUSATIVE


def slot_case(text: str, case_class: CaseClass, role: Role) -> CaseClass:
    """Case a replacement string must fill, for pronominal and nominal mentions."""
    if case_class is not CaseClass.NON_PRONOMINAL:
        return case_class
    if text.endswith("'s") or text.endswith("’s") or text.endswith("s'"):
        return CaseClass.POSSESSIVE
    return CaseClass.NOMINATIVE if role is Role.SUBJECT else CaseClass.ACCUSATIVE


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    surface: str
    index: int
    sentence_index: int
    char_span: tuple[int, int]
    pos_tag: str = ""
    lemma: str = ""


@dataclass(frozen=True)
class DependencyArc:
    head_index: int
    dependent_index: int
    label: str


@dataclass(frozen=True)
class Mention:
    chain_id: str
    token_span: tuple[int, int]  # inclusive
    string: str
    case_class: CaseClass = CaseClass.NON_PRONOMINAL
    grammatical_role: Role = Role.OTHER
    in_quote: bool = False
    narrator_flag: bool = False
    position_in_chain: int = 0

    @property
    def id(self) -> str:
        return f"{self.chain_id}:{self.position_in_chain}"

    @property
    def start(self) -> int:
        return self.token_span[0]

    @property
    def end(self) -> int:
        return self.token_span[1]

    def __len__(self) -> int:
        return self.token_span[1] - self.token_span[0] + 1


@dataclass(frozen=True)
class CorefChain:
    chain_id: str
    mentions: tuple[Mention, ...]
    entity_kind: str = "other"  # person | other
    pov: Pov = Pov.THIRD
    number: Number = Number.SINGULAR
    gender: Gender = Gender.UNKNOWN

    def strings(self) -> list[str]:
        return [m.string for m in self.mentions]


@dataclass(frozen=True)
class EntitySpec:
    role: str  # focus | confounder
    gender: Gender | None
    full_name: str | None = None
    given_name: str | None = None
    family_name: str | None = None

    def __post_init__(self):
        if self.role == "focus" and self.gender is None:
            raise ValueError("the focus entity requires a gender")
        for name in ("full_name", "given_name", "family_name"):
            value = getattr(self, name)
            if value is not None and not value.strip():
                raise ValueError(f"{name} must be non-empty when present")

    @classmethod
    def from_name(cls, name: str | None, gender: Gender | str, role: str = "focus") -> "EntitySpec":
        """Split ``"Nick Flynn"`` into given/family names."""
        gender = Gender(gender)
        if not name:
            return cls(role=role, gender=gender)
        parts = name.split()
        if len(parts) == 1:
            return cls(role=role, gender=gender, given_name=parts[0])
        return cls(role=role, gender=gender, full_name=name,
                   given_name=parts[0], family_name=parts[-1])

    def names(self) -> list[str]:
        return [n for n in (self.full_name, self.given_name, self.family_name) if n]


@dataclass(frozen=True)
class Document:
    doc_id: str
    source_text: str
    tokens: tuple[Token, ...]
    chains: tuple[CorefChain, ...] = ()
    quoted_spans: tuple[tuple[int, int], ...] = ()  # inclusive token ranges
    genre: str = ""
    sentences: tuple[tuple[int, int], ...] = ()  # inclusive token ranges
    dependencies: tuple[DependencyArc, ...] = ()
    entities: tuple[tuple[int, int, str], ...] = ()  # NER spans, inclusive

    def chain(self, chain_id: str) -> CorefChain:
        for c in self.chains:
            if c.chain_id == chain_id:
                return c
        raise KeyError(chain_id)

    def span_text(self, start: int, end: int) -> str:
        return self.source_text[self.tokens[start].char_span[0]:self.tokens[end].char_span[1]]

    def all_mentions(self) -> list[Mention]:
        """Every mention in document order (outer mentions before nested ones)."""
        ms = [m for c in self.chains for m in c.mentions]
        ms.sort(key=lambda m: (m.start, -m.end, m.chain_id))
        return ms

    def sentence_of(self, token_index: int) -> int:
        return self.tokens[token_index].sentence_index

    def in_quote(self, token_index: int) -> bool:
        return any(s <= token_index <= e for s, e in self.quoted_spans)

    @property
    def num_words(self) -> int:
        return len(self.tokens)


# ---------------------------------------------------------------------------
# Chain attribute inference
# ---------------------------------------------------------------------------


def infer_pov(mentions: Iterable[Mention]) -> Pov:
    """First/second if any out-of-quote, non-narrator mention is a deictic pronoun."""
    povs = {pronoun_pov(m.string) for m in mentions if not m.in_quote and not m.narrator_flag}
    if Pov.FIRST in povs:
        return Pov.FIRST
    if Pov.SECOND in povs:
        return Pov.SECOND
    return Pov.THIRD


def infer_number_gender(strings: Iterable[str]) -> tuple[Number, Gender, bool]:
    """Number and gender from the pronouns of a chain.

    Returns ``(number, gender, conflicting)`` where ``conflicting`` flags
    chains whose pronouns disagree (e.g. both "he" and "she").
    """
    numbers: set[Number] = set()
    genders: set[Gender] = set()
    for s in strings:
        entry = PRONOUNS.get(s.lower())
        if entry is None:
            continue
        _, num, gen, _ = entry
        if num is not None:
            numbers.add(num)
        if gen is not None:
            genders.add(gen)
    conflict = len(numbers) > 1 or len(genders) > 1
    number = Number.PLURAL if numbers == {Number.PLURAL} else Number.SINGULAR
    gender = genders.pop() if len(genders) == 1 else Gender.UNKNOWN
    return number, gender, conflict


def renumber(chain_id: str, mentions: Sequence[Mention]) -> tuple[Mention, ...]:
    """Sort mentions by position and assign dense ``position_in_chain``."""
    ordered = sorted(mentions, key=lambda m: (m.start, -m.end))
    return tuple(replace(m, chain_id=chain_id, position_in_chain=i) for i, m in enumerate(ordered))


def make_chain(chain_id: str, mentions: Sequence[Mention], entity_kind: str = "other",
               gender: Gender | None = None, number: Number | None = None,
               pov: Pov | None = None) -> CorefChain:
    ms = renumber(chain_id, mentions)
    inf_number, inf_gender, _ = infer_number_gender(m.string for m in ms)
    return CorefChain(
        chain_id=chain_id,
        mentions=ms,
        entity_kind=entity_kind,
        pov=pov or infer_pov(ms),
        number=number or inf_number,
        gender=gender or inf_gender,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_document(doc: Any) -> list[str]:
    """Check every type invariant; returns human-readable violations.

    Never raises: malformed structures are reported as violations.
    """
    violations: list[str] = []
    try:
        tokens = list(doc.tokens)
    except (AttributeError, TypeError):
        return ["tokens: missing or not a sequence"]

    prev_end = -1
    for pos, tok in enumerate(tokens):
        try:
            if tok.index != pos:
                violations.append(f"tokens[{pos}].index: expected {pos}, got {tok.index}")
            start, end = tok.char_span
            if not (0 <= start <= end):
                violations.append(f"tokens[{pos}].char_span: invalid {tok.char_span}")
            elif start < prev_end:
                violations.append(f"tokens[{pos}].char_span: overlaps previous token")
            prev_end = max(prev_end, end)
            if not isinstance(tok.sentence_index, int) or tok.sentence_index < 0:
                violations.append(f"tokens[{pos}].sentence_index: invalid {tok.sentence_index!r}")
        except (AttributeError, TypeError, ValueError):
            violations.append(f"tokens[{pos}]: malformed token")

    n = len(tokens)
    try:
        sentences = list(doc.sentences)
    except (AttributeError, TypeError):
        sentences = []
        violations.append("sentences: missing or not a sequence")
    covered = [0] * n
    for si, sent in enumerate(sentences):
        try:
            s, e = sent
            if not (0 <= s <= e < n):
                violations.append(f"sentences[{si}]: range {sent} out of bounds")
                continue
            for t in range(s, e + 1):
                covered[t] += 1
                if tokens[t].sentence_index != si:
                    violations.append(f"tokens[{t}].sentence_index: expected {si}")
        except (TypeError, ValueError, AttributeError):
            violations.append(f"sentences[{si}]: malformed range")
    if sentences:
        for t, c in enumerate(covered):
            if c != 1:
                violations.append(f"tokens[{t}]: belongs to {c} sentences")

    def sent_of(t: int) -> int | None:
        try:
            return tokens[t].sentence_index
        except (IndexError, AttributeError, TypeError):
            return None

    try:
        chains = list(doc.chains)
    except (AttributeError, TypeError):
        chains = []
        violations.append("chains: missing or not a sequence")
    seen: set = set()
    for ci, chain in enumerate(chains):
        try:
            cid = chain.chain_id
            if cid in seen:
                violations.append(f"chains[{ci}].chain_id: duplicate id {cid!r}")
            seen.add(cid)
            mentions = list(chain.mentions)
            if not mentions:
                violations.append(f"chains[{ci}]: chain {cid!r} has no mentions")
            last_start = -1
            for mi, m in enumerate(mentions):
                where = f"chains[{ci}].mentions[{mi}]"
                s, e = m.token_span
                if not (0 <= s <= e < n):
                    violations.append(f"{where}.token_span: {m.token_span} does not resolve to tokens")
                    continue
                if sent_of(s) != sent_of(e):
                    violations.append(f"{where}.token_span: {m.token_span} crosses a sentence boundary")
                if m.position_in_chain != mi:
                    violations.append(f"{where}.position_in_chain: expected {mi}, got {m.position_in_chain}")
                if s < last_start:
                    violations.append(f"{where}: mentions not sorted by position")
                last_start = s
                pronominal = is_pronoun(m.string)
                if pronominal == (CaseClass(m.case_class) is CaseClass.NON_PRONOMINAL):
                    violations.append(f"{where}.case_class: {m.case_class} inconsistent with {m.string!r}")
                if m.chain_id != cid:
                    violations.append(f"{where}.chain_id: {m.chain_id!r} != {cid!r}")
            expected_pov = infer_pov(mentions)
            if mentions and Pov(chain.pov) is not expected_pov:
                violations.append(f"chains[{ci}].pov: {chain.pov} but mentions imply {expected_pov.value}")
        except (AttributeError, TypeError, ValueError):
            violations.append(f"chains[{ci}]: malformed chain")

    try:
        spans = sorted(tuple(q) for q in doc.quoted_spans)
        prev = -1
        for qi, (s, e) in enumerate(spans):
            if not (0 <= s <= e < n):
                violations.append(f"quoted_spans[{qi}]: {(s, e)} out of bounds")
            if s <= prev:
                violations.append(f"quoted_spans[{qi}]: {(s, e)} overlaps another span")
            prev = max(prev, e)
    except (AttributeError, TypeError, ValueError):
        violations.append("quoted_spans: malformed")
    return violations


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------


def document_to_dict(doc: Document) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "doc_id": doc.doc_id,
        "genre": doc.genre,
        "text": doc.source_text,
        "tokens": [
            {"surface": t.surface, "pos": t.pos_tag, "lemma": t.lemma,
             "char_start": t.char_span[0], "char_end": t.char_span[1]}
            for t in doc.tokens
        ],
        "sentences": [list(s) for s in doc.sentences],
        "chains": [
            {
                "id": c.chain_id,
                "entity_kind": c.entity_kind,
                "pov": Pov(c.pov).value,
                "number": Number(c.number).value,
                "gender": Gender(c.gender).value,
                "mentions": [
                    {"span": list(m.token_span), "case": CaseClass(m.case_class).value,
                     "role": Role(m.grammatical_role).value, "in_quote": m.in_quote,
                     "narrator": m.narrator_flag}
                    for m in c.mentions
                ],
            }
            for c in doc.chains
        ],
        "quoted_spans": [list(q) for q in doc.quoted_spans],
        "dependencies": [[a.head_index, a.dependent_index, a.label] for a in doc.dependencies],
        "entities": [list(e) for e in doc.entities],
    }


def _role_from_arcs(span: tuple[int, int], arcs: Sequence[DependencyArc]) -> Role:
    s, e = span
    for a in arcs:
        if s <= a.dependent_index <= e and not (s <= a.head_index <= e):
            label = a.label.split(":")[0]
            if label in ("nsubj", "csubj", "expl"):
                return Role.SUBJECT
            if label in ("obj", "dobj", "iobj", "pobj", "dative"):
                return Role.OBJECT
    return Role.OTHER


def tokens_from_dicts(text: str, items: Sequence[dict], sentences: Sequence[Sequence[int]]) -> tuple[Token, ...]:
    sent_index = {}
    for si, (s, e) in enumerate(sentences):
        for t in range(s, e + 1):
            sent_index[t] = si
    return tuple(
        Token(surface=d["surface"], index=i, sentence_index=sent_index.get(i, 0),
              char_span=(d["char_start"], d["char_end"]), pos_tag=d.get("pos", ""),
              lemma=d.get("lemma", d["surface"].lower()))
        for i, d in enumerate(items)
    )


def document_from_dict(data: dict[str, Any]) -> Document:
    """Build a ``Document`` from the canonical JSON structure.

    Optional mention attributes (case, role) are derived from the tokens and
    dependency arcs when absent; chain pov/number/gender are inferred from the
    mention strings unless given.
    """
    text = data["text"]
    sentences = [tuple(s) for s in data.get("sentences") or []]
    if not sentences and data["tokens"]:
        sentences = [(0, len(data["tokens"]) - 1)]
    tokens = tokens_from_dicts(text, data["tokens"], sentences)
    arcs = tuple(DependencyArc(int(h), int(d), str(lab)) for h, d, lab in data.get("dependencies") or [])
    quoted = tuple(tuple(q) for q in data.get("quoted_spans") or [])
    partial = Document(doc_id=str(data["doc_id"]), source_text=text, tokens=tokens)

    chains = []
    for c in data.get("chains") or []:
        cid = str(c["id"])
        mentions = []
        for md in c["mentions"]:
            s, e = md["span"]
            string = partial.span_text(s, e)
            role = Role(md["role"]) if md.get("role") else _role_from_arcs((s, e), arcs)
            case = (CaseClass(md["case"]) if md.get("case")
                    else case_class_of(string, role, tokens[s].pos_tag if s == e else None))
            mentions.append(Mention(chain_id=cid, token_span=(s, e), string=string, case_class=case,
                                    grammatical_role=role, in_quote=bool(md.get("in_quote", False)),
                                    narrator_flag=bool(md.get("narrator", False))))
        chains.append(make_chain(
            cid, mentions, entity_kind=c.get("entity_kind", "other"),
            gender=Gender(c["gender"]) if c.get("gender") else None,
            number=Number(c["number"]) if c.get("number") else None,
            pov=Pov(c["pov"]) if c.get("pov") else None,
        ))
    return Document(
        doc_id=str(data["doc_id"]),
        source_text=text,
        tokens=tokens,
        chains=tuple(chains),
        quoted_spans=quoted,
        genre=data.get("genre", ""),
        sentences=tuple(sentences),
        dependencies=arcs,
        entities=tuple(tuple(e) for e in data.get("entities") or []),
    )


def dumps_document(doc: Document) -> str:
    return json.dumps(document_to_dict(doc), indent=1, ensure_ascii=False, sort_keys=True)


def loads_document(text: str) -> Document:
    return document_from_dict(json.loads(text))


def load_document(path: str | Path) -> Document:
    return loads_document(Path(path).read_text(encoding="utf-8"))


def schema_path() -> Path:
    return Path(__file__).parent / "data" / "document.schema.v1.json"


def build_document(doc_id: str, text: str, sentences: Sequence[Sequence[str]],
                   pos_tags: Sequence[str] | None = None, lemmas: Sequence[str] | None = None,
                   **kwargs) -> Document:
    """Assemble a document from raw text and its pre-tokenized sentences.

    Token character offsets are found by scanning ``text`` left to right, so
    every token surface must occur in order in the text.
    """
    toks: list[Token] = []
    sent_ranges = []
    cursor = 0
    for si, sent in enumerate(sentences):
        first = len(toks)
        for surface in sent:
            start = text.find(surface, cursor)
            if start < 0:
                raise ValueError(f"token {surface!r} not found after offset {cursor}")
            cursor = start + len(surface)
            i = len(toks)
            toks.append(Token(surface=surface, index=i, sentence_index=si, char_span=(start, cursor),
                              pos_tag=pos_tags[i] if pos_tags else "",
                              lemma=lemmas[i] if lemmas else surface.lower()))
        sent_ranges.append((first, len(toks) - 1))
    return Document(doc_id=doc_id, source_text=text, tokens=tuple(toks),
                    sentences=tuple(sent_ranges), **kwargs)

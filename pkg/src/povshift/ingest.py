"""Corpus readers and the reduction of coreference chains to ranking examples.

Reads the CoNLL-2012 ``*_conll`` column format and benchmark JSON documents
(the core schema plus gold edits), filters deictic documents, and turns each
third-person person chain into one ranking example per mention.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import jsonschema

from .context import ContextBuilder, RankingExample, innermost, normalize_string
from .core import (
    CorefChain,
    Document,
    Gender,
    Mention,
    Number,
    Pov,
    Role,
    Token,
    case_class_of,
    document_from_dict,
    infer_number_gender,
    is_deictic,
    make_chain,
    schema_path,
    validate_document,
)
from .preprocess import is_person_chain, mark_quotes

log = logging.getLogger(__name__)

STATS_HEADER = ["dataset", "entities", "mentions", "men_per_ent", "docs", "words"]


class ConllParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, chain_id: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.chain_id = chain_id


class PovLoadError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# CoNLL-2012
# ---------------------------------------------------------------------------

_BEGIN_RE = re.compile(r"#begin document \((.*)\);\s*part (\d+)")
_COREF_RE = re.compile(r"\(([^()|]+)\)|\(([^()|]+)|([^()|]+)\)")
_S_LABELS = {"S", "SINV", "SQ", "SBAR", "SBARQ"}
_SUBJECT_PARENTS = {"S", "SINV", "SQ"}


@dataclass
class _Part:
    name: str
    part: str
    sentences: list = field(default_factory=list)  # list of list[(line_no, columns)]


def _iter_parts(stream: IO[str]) -> Iterator[_Part]:
    current: _Part | None = None
    sentence: list = []
    width = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if line.startswith("#begin document"):
            m = _BEGIN_RE.match(line)
            if not m:
                raise ConllParseError("malformed #begin document line", line_no)
            if current is not None:
                raise ConllParseError("#begin document inside an open document", line_no)
            current, sentence, width = _Part(m.group(1), m.group(2)), [], None
            continue
        if line.startswith("#end document"):
            if current is None:
                raise ConllParseError("#end document without #begin", line_no)
            if sentence:
                current.sentences.append(sentence)
            yield current
            current, sentence = None, []
            continue
        if current is None:
            if line.strip():
                raise ConllParseError("content outside a document block", line_no)
            continue
        if not line.strip():
            if sentence:
                current.sentences.append(sentence)
                sentence = []
            continue
        cols = line.split()
        if len(cols) < 12:
            raise ConllParseError(f"expected at least 12 columns, found {len(cols)}", line_no)
        if width is None:
            width = len(cols)
        elif len(cols) != width:
            raise ConllParseError(f"column count {len(cols)} differs from {width} earlier in the document", line_no)
        sentence.append((line_no, cols))
    if current is not None:
        raise ConllParseError(f"document {current.name!r} part {current.part} not closed by #end document")


def _parse_tree_roles(bits: Sequence[str], offset: int) -> dict[tuple[int, int], set]:
    """(start, end) -> set of (label, parent_label) for every constituent."""
    nodes: dict[tuple[int, int], set] = {}
    stack: list[tuple[str, int, str | None]] = []
    for i, bit in enumerate(bits):
        for label in re.findall(r"\(([^(*)]+)", bit):
            parent = stack[-1][0] if stack else None
            stack.append((label.split("-")[0].split("=")[0], offset + i, parent))
        for _ in range(bit.count(")")):
            if not stack:
                break
            label, start, parent = stack.pop()
            nodes.setdefault((start, offset + i), set()).add((label, parent))
    return nodes


def _role_from_tree(span: tuple[int, int], nodes: dict) -> Role:
    found = nodes.get(span, set())
    parents = {p for label, p in found if label == "NP"}
    if parents & _SUBJECT_PARENTS:
        return Role.SUBJECT
    if "VP" in parents:
        return Role.OBJECT
    return Role.OTHER


def _genre(name: str) -> str:
    return name.split("/")[0] if "/" in name else ""


def _build_conll_document(name: str, parts: Sequence[_Part]) -> Document:
    tokens: list[Token] = []
    sentences = []
    text_parts: list[str] = []
    cursor = 0
    open_spans: dict[str, list[int]] = {}
    spans: dict[str, list[tuple[int, int]]] = {}
    order: list[str] = []
    entities = []
    roles: dict[tuple[int, int], Role] = {}
    multi = len(parts) > 1
    for part in parts:
        for sent in part.sentences:
            first = len(tokens)
            words = []
            ne_open: tuple[str, int] | None = None
            for line_no, cols in sent:
                i = len(tokens)
                word = cols[3]
                if words:
                    text_parts.append(" ")
                    cursor += 1
                elif text_parts:
                    text_parts.append("\n")
                    cursor += 1
                tokens.append(Token(surface=word, index=i, sentence_index=len(sentences),
                                    char_span=(cursor, cursor + len(word)), pos_tag=cols[4],
                                    lemma=cols[6].lower() if cols[6] != "-" else word.lower()))
                text_parts.append(word)
                cursor += len(word)
                words.append(word)

                ne = cols[10]
                m = re.match(r"\(([^*()]+)", ne)
                if m:
                    ne_open = (m.group(1), i)
                if ne.endswith(")") and ne_open is not None:
                    entities.append((ne_open[1], i, ne_open[0]))
                    ne_open = None

                coref = cols[-1]
                if coref != "-":
                    for piece in coref.split("|"):
                        mm = _COREF_RE.fullmatch(piece)
                        if not mm:
                            raise ConllParseError(f"malformed coreference field {coref!r}", line_no)
                        single, opening, closing = mm.groups()
                        raw = single or opening or closing
                        cid = raw if (part.part == "000" or not multi) else f"{part.part}:{raw}"
                        if cid not in spans:
                            spans[cid] = []
                            order.append(cid)
                        if single:
                            spans[cid].append((i, i))
                        elif opening:
                            open_spans.setdefault(cid, []).append(i)
                        else:
                            stack = open_spans.get(cid)
                            if not stack:
                                raise ConllParseError(f"closing bracket for chain {cid} without an opening one",
                                                      line_no, cid)
                            spans[cid].append((stack.pop(), i))
            roles_nodes = _parse_tree_roles([cols[5] for _, cols in sent], first)
            for span_key in list(roles_nodes):
                roles[span_key] = _role_from_tree(span_key, roles_nodes)
            sentences.append((first, len(tokens) - 1))
    for cid, stack in open_spans.items():
        if stack:
            raise ConllParseError(f"unbalanced coreference bracket for chain {cid}", chain_id=cid)

    text = "".join(text_parts)
    partial = Document(doc_id=name, source_text=text, tokens=tuple(tokens))
    chains = []
    for cid in order:
        mentions = []
        for s, e in spans[cid]:
            if tokens[s].sentence_index != tokens[e].sentence_index:
                log.warning("%s: chain %s mention %s crosses a sentence boundary; dropped", name, cid, (s, e))
                continue
            string = partial.span_text(s, e)
            role = roles.get((s, e), Role.OTHER)
            pos = tokens[s].pos_tag if s == e else None
            mentions.append(Mention(cid, (s, e), string, case_class_of(string, role, pos), role))
        if mentions:
            chains.append(make_chain(cid, mentions))
    doc = Document(doc_id=name, source_text=text, tokens=tuple(tokens), chains=tuple(chains),
                   genre=_genre(name), sentences=tuple(sentences), entities=tuple(entities))
    doc = mark_quotes(doc)
    kinds = tuple(replace(c, entity_kind="person" if is_person_chain(c, doc.entities) else "other")
                  for c in doc.chains)
    return replace(doc, chains=kinds)


def read_conll(stream: IO[str]) -> list[Document]:
    """All documents of a ``*_conll`` stream; parts of one document are merged."""
    grouped: dict[str, list[_Part]] = {}
    for part in _iter_parts(stream):
        grouped.setdefault(part.name, []).append(part)
    return [_build_conll_document(name, sorted(parts, key=lambda p: p.part)) for name, parts in grouped.items()]


def load_conll_document(stream: IO[str] | str) -> Document:
    """Parse exactly one CoNLL-2012 document (all of its parts)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    docs = read_conll(stream)
    if len(docs) != 1:
        raise ConllParseError(f"expected one document, found {len(docs)}")
    return docs[0]


def load_conll_dir(path: str | Path, pattern: str = "*_conll") -> list[Document]:
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.rglob(pattern))
    docs = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            try:
                docs.extend(read_conll(fh))
            except ConllParseError as exc:
                raise ConllParseError(f"{f}: {exc}", exc.line, exc.chain_id) from exc
    return docs


def write_conll(doc: Document, stream: IO[str], part: str = "000") -> None:
    """Emit ``doc`` in 12-column CoNLL format (parse/predicate columns blank)."""
    fields: dict[int, list[str]] = {}
    for c in doc.chains:
        for m in c.mentions:
            if m.start == m.end:
                fields.setdefault(m.start, []).append(f"({c.chain_id})")
            else:
                fields.setdefault(m.start, []).append(f"({c.chain_id}")
                fields.setdefault(m.end, []).append(f"{c.chain_id})")
    ne_start = {s: (e, label) for s, e, label in doc.entities}
    ne_end = {e for _, e, _ in doc.entities}
    stream.write(f"#begin document ({doc.doc_id}); part {part}\n")
    for si, (s, e) in enumerate(doc.sentences or [(0, len(doc.tokens) - 1)]):
        for i in range(s, e + 1):
            t = doc.tokens[i]
            ne = "*"
            if i in ne_start:
                ne = f"({ne_start[i][1]}*" + (")" if ne_start[i][0] == i else "")
            elif i in ne_end:
                ne = "*)"
            coref = "|".join(fields.get(i, [])) or "-"
            cols = [doc.doc_id, str(int(part)), str(i - s), t.surface, t.pos_tag or "-", "*",
                    t.lemma or "-", "-", "-", "-", ne, coref]
            stream.write("\t".join(cols) + "\n")
        stream.write("\n")
    stream.write("#end document\n")


# ---------------------------------------------------------------------------
# Filtering and example extraction
# ---------------------------------------------------------------------------


def has_deictic_pov(doc: Document) -> bool:
    for t in doc.tokens:
        if t.surface == "US":  # the country, not the pronoun
            continue
        if is_deictic(t.surface) and not doc.in_quote(t.index):
            return True
    return False


def filter_deictic_documents(corpus: Iterable[Document]) -> list[Document]:
    """Keep documents with no 1st/2nd person pronoun outside quotes."""
    return [d for d in corpus if not has_deictic_pov(d)]


def select_person_chains(doc: Document) -> list[CorefChain]:
    return [c for c in doc.chains if c.entity_kind == "person" and c.pov is Pov.THIRD]


def chain_number_gender(chain: CorefChain) -> tuple[Number, Gender, bool]:
    return infer_number_gender(m.string for m in chain.mentions)


def confounders_for(doc: Document, focus_chain: CorefChain) -> list[CorefChain]:
    """Other person chains agreeing with the focus in number and gender.

    Gender and number are inferred from pronouns; a chain with conflicting
    pronouns is logged and never treated as agreeing.
    """
    number, gender, conflict = chain_number_gender(focus_chain)
    if conflict:
        log.warning("%s: chain %s has conflicting number/gender evidence", doc.doc_id, focus_chain.chain_id)
    out = []
    for c in select_person_chains(doc):
        if c.chain_id == focus_chain.chain_id:
            continue
        n, g, bad = chain_number_gender(c)
        if bad:
            log.warning("%s: chain %s has conflicting number/gender evidence", doc.doc_id, c.chain_id)
            continue
        if n is number and g is gender:
            out.append(c)
    return out


def unique_strings(chain: CorefChain) -> list[str]:
    """Unique normalized mention strings in order of first appearance."""
    seen: dict[str, None] = {}
    for m in chain.mentions:
        seen.setdefault(normalize_string(m.string), None)
    return list(seen)


def extract_ranking_examples(doc: Document, focus_chain: CorefChain | str, n_tokens: int = 50,
                             k_mentions: int = 10) -> list[RankingExample]:
    """One teacher-forced example per mention of ``focus_chain``.

    The candidate set is the chain's unique strings; mentions of the focus
    and its confounders to the right of each slot are hidden as ``<unk>``.
    """
    if isinstance(focus_chain, str):
        focus_chain = doc.chain(focus_chain)
    confs = confounders_for(doc, focus_chain)
    scheduled_all = [m for c in [focus_chain, *confs] for m in c.mentions]
    people = [m for c in select_person_chains(doc) for m in c.mentions]
    if focus_chain.chain_id not in {c.chain_id for c in select_person_chains(doc)}:
        people += list(focus_chain.mentions)
    builder = ContextBuilder(doc, innermost(scheduled_all), n_tokens, k_mentions,
                             context_mentions=people)
    selections = {m.id: normalize_string(m.string) for m in scheduled_all}
    cands = tuple(unique_strings(focus_chain))
    return [builder.example(m, cands, selections, gold=normalize_string(m.string))
            for m in focus_chain.mentions]


def extract_corpus_examples(corpus: Iterable[Document], n_tokens: int = 50, k_mentions: int = 10,
                            filter_deictic: bool = True) -> list[RankingExample]:
    docs = filter_deictic_documents(corpus) if filter_deictic else list(corpus)
    out = []
    for d in docs:
        for c in select_person_chains(d):
            out.extend(extract_ranking_examples(d, c, n_tokens, k_mentions))
    return out


def write_examples(examples: Sequence[RankingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_examples(path: str | Path) -> list[RankingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(RankingExample.from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# Benchmark documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FocusInfo:
    from_pov: Pov
    gender: Gender
    name: str | None = None
    chain: str | None = None


@dataclass(frozen=True)
class PovDocument:
    document: Document
    focus: FocusInfo | None
    gold_replacements: dict  # (start, end) -> string
    gold_verb_changes: dict  # token index -> string
    candidate_sets: dict  # chain id -> list of strings

    @property
    def has_gold(self) -> bool:
        return bool(self.gold_replacements or self.gold_verb_changes)


def _json_path(error: jsonschema.ValidationError) -> str:
    path = "$"
    for p in error.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


def _schema() -> dict:
    return json.loads(schema_path().read_text(encoding="utf-8"))


def close_candidate_sets(candidate_sets: dict, gold: dict, doc: Document) -> dict:
    """Append gold replacement strings missing from their entity's set."""
    out = {k: list(v) for k, v in candidate_sets.items()}
    owner = {(m.start, m.end): c.chain_id for c in doc.chains for m in c.mentions}
    for span, text in sorted(gold.items()):
        cid = owner.get(span)
        if cid is None or cid not in out:
            continue
        if text not in out[cid]:
            log.warning("%s: gold string %r missing from the candidate set of chain %s; appended",
                        doc.doc_id, text, cid)
            out[cid].append(text)
    return out


def parse_pov_document(data: dict) -> PovDocument:
    """Validate a benchmark JSON object and build a :class:`PovDocument`."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise PovLoadError(errors[0].message, _json_path(errors[0]))
    try:
        doc = document_from_dict(data)
    except (KeyError, IndexError, ValueError) as exc:
        raise PovLoadError(f"cannot build document: {exc}") from exc
    problems = validate_document(doc)
    if problems:
        raise PovLoadError(problems[0])
    n = len(doc.tokens)
    gold = {}
    for i, g in enumerate(data.get("gold_replacements", [])):
        s, e = g["span"]
        if not (0 <= s <= e < n):
            raise PovLoadError("span out of range", f"$.gold_replacements[{i}].span")
        gold[(s, e)] = g["text"]
    verbs = {}
    for i, g in enumerate(data.get("gold_verb_changes", [])):
        if not 0 <= g["token"] < n:
            raise PovLoadError("token out of range", f"$.gold_verb_changes[{i}].token")
        verbs[g["token"]] = g["text"]
    focus = None
    if "focus" in data:
        f = data["focus"]
        focus = FocusInfo(Pov(f["from_pov"]), Gender(f["gender"]), f.get("name"), f.get("chain"))
    sets = close_candidate_sets(data.get("candidate_sets", {}), gold, doc)
    return PovDocument(doc, focus, gold, verbs, sets)


def load_pov_document(stream: IO[str] | str | Path) -> PovDocument:
    if isinstance(stream, Path):
        text = stream.read_text(encoding="utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
    if not text.strip():
        raise PovLoadError("empty document")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PovLoadError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise PovLoadError("top-level value must be an object")
    return parse_pov_document(data)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    num_entities: int = 0
    num_mentions: int = 0
    num_docs: int = 0
    num_words: int = 0

    @property
    def mentions_per_entity(self) -> float:
        return self.num_mentions / self.num_entities if self.num_entities else 0.0

    def row(self, dataset: str) -> list:
        return [dataset, self.num_entities, self.num_mentions, f"{self.mentions_per_entity:.2f}",
                self.num_docs, self.num_words]


def corpus_stats(corpus: Iterable[Document], person_chains=select_person_chains) -> CorpusStats:
    """Person entities, their mentions, documents and words."""
    ents = ments = docs = words = 0
    for d in corpus:
        chains = person_chains(d)
        ents += len(chains)
        ments += sum(len(c.mentions) for c in chains)
        docs += 1
        words += d.num_words
    return CorpusStats(ents, ments, docs, words)


def write_stats_csv(rows: Sequence[tuple[str, CorpusStats]], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for name, st in rows:
        w.writerow(st.row(name))

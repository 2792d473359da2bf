"""Automatic metrics, per-component scores, human-rating aggregation,
significance testing and the ablation harness."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .candidates import narrow_strings
from .context import RankingExample, tokenize_string
from .conversion import ConversionPlan, ConversionResult
from .core import CaseClass, Document
from .morph import VerbEntry, conjugate, tense_from_pos

log = logging.getLogger(__name__)

P_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Precision / recall / F1 over changed words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    n_changed: int
    n_correct: int
    n_gold: int
    per_document: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "n_changed": self.n_changed, "n_correct": self.n_correct, "n_gold": self.n_gold,
                "per_document": {k: v.to_dict() for k, v in sorted(self.per_document.items())}}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf(n_changed: int, n_correct: int, n_gold: int) -> ScoreReport:
    """Report from raw counts; P (R) is 0 when nothing was changed (expected)."""
    if n_correct > min(n_changed, n_gold):
        raise ValueError("correct count exceeds the changed or gold count")
    p = n_correct / n_changed if n_changed else 0.0
    r = n_correct / n_gold if n_gold else 0.0
    return ScoreReport(p, r, f1_score(p, r), n_changed, n_correct, n_gold)


def _changed_words(result: ConversionResult) -> dict:
    """Slot key -> Counter of new words.  Mention slots are keyed by token
    span, verb slots by token index."""
    out: dict = {}
    for e in result.mention_edits:
        out[("m", tuple(e.token_span))] = Counter(tokenize_string(e.new))
    for v in result.verb_edits:
        if v.new_form != v.original_form:
            out[("v", v.token_index)] = Counter([v.new_form])
    return out


def score_conversion(predicted: ConversionResult, gold: ConversionResult) -> ScoreReport:
    """Word-level P/R/F1: a predicted word is correct when the gold edit of
    the same slot contains it (multiset intersection per slot)."""
    if predicted.doc_id != gold.doc_id:
        raise ValueError(f"document mismatch: {predicted.doc_id!r} vs {gold.doc_id!r}")
    pw, gw = _changed_words(predicted), _changed_words(gold)
    n = sum(sum(c.values()) for c in pw.values())
    n2 = sum(sum(c.values()) for c in gw.values())
    n1 = sum(sum((c & gw[k]).values()) for k, c in pw.items() if k in gw)
    report = prf(n, n1, n2)
    return ScoreReport(report.precision, report.recall, report.f1, n, n1, n2,
                       {predicted.doc_id: report})


def score_corpus(pairs: Iterable[tuple[ConversionResult, ConversionResult]]) -> ScoreReport:
    """Micro-averaged report over documents, with the per-document breakdown."""
    per, n, n1, n2 = {}, 0, 0, 0
    for pred, gold in pairs:
        r = score_conversion(pred, gold)
        per[pred.doc_id] = r.per_document[pred.doc_id]
        n, n1, n2 = n + r.n_changed, n1 + r.n_correct, n2 + r.n_gold
    total = prf(n, n1, n2)
    return ScoreReport(total.precision, total.recall, total.f1, n, n1, n2, per)


def mention_selection_accuracy(predicted: Mapping, gold: Mapping) -> float:
    """Exact-match fraction over the gold slots (keys of ``gold``)."""
    if not gold:
        return 0.0
    return sum(predicted.get(k) == v for k, v in gold.items()) / len(gold)


def selections_by_span(result: ConversionResult, doc: Document) -> dict:
    """Every mention slot's final string: edited slots take the new string,
    all other slots keep their text."""
    out = {(m.start, m.end): doc.span_text(m.start, m.end) for m in doc.all_mentions()}
    out.update(result.replacements())
    return out


def teacher_forced_accuracy(choose: Callable[[RankingExample], str], examples: Sequence[RankingExample]) -> float:
    scored = [ex for ex in examples if ex.gold_string is not None]
    if not scored:
        return 0.0
    return sum(choose(ex) == ex.gold_string for ex in scored) / len(scored)


# ---------------------------------------------------------------------------
# Per-component scores
# ---------------------------------------------------------------------------

def _set_report(predicted: set, gold: set) -> ScoreReport:
    return prf(len(predicted), len(predicted & gold), len(gold))


def component_scores(plan: ConversionPlan | None, gold, verb_dictionary: dict[str, VerbEntry] | None = None,
                     ) -> dict[str, ScoreReport]:
    """Per-stage scores, each stage assuming gold input from the stages
    before it.  ``gold`` is a :class:`povshift.ingest.PovDocument`; stages
    whose gold annotation is missing are skipped with a notice."""
    doc = gold.document
    out: dict[str, ScoreReport] = {}
    if plan is not None and gold.gold_replacements:
        scheduled = {(m.start, m.end) for m in plan.scheduled}
        out["coreference"] = _set_report(scheduled, {tuple(k) for k in gold.gold_replacements})
    else:
        log.warning("coreference stage skipped: no gold replacements or no plan")
    if gold.gold_verb_changes:
        if plan is not None:
            ident = {v.token_index for v in plan.verb_edits if v.new_form != v.original_form}
            out["verb_identification"] = _set_report(ident, set(gold.gold_verb_changes))
        right = 0
        for i, form in gold.gold_verb_changes.items():
            tok = doc.tokens[i]
            new, _ = conjugate(tok.surface, tok.lemma, tense_from_pos(tok.pos_tag), verb_dictionary)
            right += int(new == form)
        n = len(gold.gold_verb_changes)
        out["verb_conjugation"] = prf(n, right, n)
    else:
        log.warning("verb stages skipped: no gold verb changes")
    if plan is not None and gold.candidate_sets:
        pred, ref = set(), set()
        for cid, strings in gold.candidate_sets.items():
            ref |= {(cid, s) for s in strings}
            pred |= {(cid, c.string) for c in plan.candidate_sets.get(cid, ())}
        out["candidate_generation"] = _set_report(pred, ref)
    else:
        log.warning("candidate generation stage skipped: no gold candidate sets")
    return out


# ---------------------------------------------------------------------------
# Human ratings
# ---------------------------------------------------------------------------

IMPOSSIBLE = "impossible"
RATINGS_HEADER = ("worker", "sentence", "mention", "amb", "correct", "nat")


@dataclass(frozen=True)
class HumanRating:
    worker_id: str
    sentence_id: str
    mention_id: str
    amb: int | None  # None means the worker marked the mapping impossible
    correct: bool | None
    nat: int

    def __post_init__(self):
        if self.amb is None and self.correct is not None:
            raise ValueError("an impossible rating carries no correctness flag")
        if self.amb is not None and self.amb not in (0, 1, 2):
            raise ValueError(f"ambiguity rating must be 0, 1 or 2, got {self.amb!r}")
        if self.amb is not None and self.correct is None:
            raise ValueError("a possible rating needs a correctness flag")
        if self.nat not in (0, 1, 2):
            raise ValueError(f"naturalness rating must be 0, 1 or 2, got {self.nat!r}")

    @property
    def impossible(self) -> bool:
        return self.amb is None


def referential_score(ratings: Sequence[HumanRating], mentions: Sequence[str] | None = None) -> float:
    """Mean of amb * C over the mentions of one sentence rated by one
    worker; impossible mappings contribute -2.  ``mentions`` lists the
    sentence's mention ids when completeness should be checked."""
    if not ratings:
        raise ValueError("no ratings")
    if mentions is not None:
        missing = sorted(set(mentions) - {r.mention_id for r in ratings})
        if missing:
            raise ValueError(f"unrated mentions: {missing}")
    terms = [-2.0 if r.impossible else r.amb * (1.0 if r.correct else -1.0) for r in ratings]
    return sum(terms) / len(terms)


def aggregate_scores(ref_scores: Sequence[float], nat_scores: Sequence[float] | None = None) -> tuple[float, float | None]:
    """Means over workers of the referential and naturalness scores."""
    if not ref_scores:
        raise ValueError("at least one worker is required")
    ref = float(np.mean(ref_scores))
    nat = float(np.mean(nat_scores)) if nat_scores else None
    return ref, nat


def scale_to_percent(score: float, low: float = -2.0, high: float = 2.0) -> float:
    """Map ``[low, high]`` onto ``[0, 100]``."""
    return (score - low) / (high - low) * 100.0


def read_ratings(stream) -> list[HumanRating]:
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != RATINGS_HEADER:
        raise ValueError(f"ratings header must be {','.join(RATINGS_HEADER)}, got {reader.fieldnames}")
    out = []
    for n, row in enumerate(reader, start=2):
        try:
            amb_raw = row["amb"].strip().lower()
            amb = None if amb_raw == IMPOSSIBLE else int(amb_raw)
            corr_raw = row["correct"].strip().lower()
            correct = None if corr_raw in ("", "na", "none") else corr_raw in ("1", "true", "yes")
            out.append(HumanRating(row["worker"], row["sentence"], row["mention"], amb, correct, int(row["nat"])))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"ratings line {n}: {exc}") from exc
    return out


@dataclass(frozen=True)
class SentenceScore:
    sentence_id: str
    ref: float
    nat: float
    n_workers: int


def score_ratings(ratings: Sequence[HumanRating]) -> list[SentenceScore]:
    """ref(S) and nat(S) of every sentence, sorted by sentence id."""
    by_sentence: dict[str, dict[str, list[HumanRating]]] = {}
    for r in ratings:
        by_sentence.setdefault(r.sentence_id, {}).setdefault(r.worker_id, []).append(r)
    out = []
    for sid in sorted(by_sentence):
        workers = by_sentence[sid]
        mentions = sorted({r.mention_id for rs in workers.values() for r in rs})
        refs, nats = [], []
        for wid in sorted(workers):
            rs = workers[wid]
            refs.append(referential_score(rs, mentions))
            wn = {r.nat for r in rs}
            if len(wn) > 1:
                raise ValueError(f"worker {wid} gave sentence {sid} more than one naturalness rating")
            nats.append(float(wn.pop()))
        ref, nat = aggregate_scores(refs, nats)
        out.append(SentenceScore(sid, ref, nat, len(workers)))
    return out


def ratings_summary(scores: Sequence[SentenceScore]) -> dict:
    if not scores:
        raise ValueError("no sentences to summarize")
    ref = float(np.mean([s.ref for s in scores]))
    nat = float(np.mean([s.nat for s in scores]))
    return {"sentences": len(scores), "ref": ref, "nat": nat,
            "ref_percent": scale_to_percent(ref), "nat_percent": scale_to_percent(nat)}


def sentence_scores_csv(scores: Sequence[SentenceScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sentence", "ref", "nat", "workers"])
    for s in scores:
        w.writerow([s.sentence_id, f"{s.ref:.6f}", f"{s.nat:.6f}", s.n_workers])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Significance
# ---------------------------------------------------------------------------

def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """One-tailed paired t-test p-value for mean(a - b) > 0.

    Zero-variance differences: all zero gives 1.0, a constant positive
    difference gives 0.0 (the limit; reports print it as below ``P_FLOOR``)
    and a constant negative one gives 1.0.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be one-dimensional and of equal length")
    if len(a) < 2:
        raise ValueError("a paired t-test needs at least two pairs")
    d = a - b
    if np.allclose(d, d[0], rtol=0, atol=1e-12):
        return 0.0 if d[0] > 1e-12 else 1.0
    p = float(stats.ttest_rel(a, b, alternative="greater").pvalue)
    return p if not math.isnan(p) else 1.0


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

TOGGLES = ("token_lstm", "mention_lstm", "phi_t_b", "phi_b")
_TOGGLE_FIELD = {"token_lstm": "use_token_lstm", "mention_lstm": "use_mention_lstm",
                 "phi_t_b": "use_phi_t", "phi_b": "use_phi_b"}


def config_for(toggles: Mapping[str, bool], base=None):
    """A ranker configuration with the named components switched on or off."""
    from dataclasses import replace

    from .ranker import ModelConfig

    unknown = set(toggles) - set(TOGGLES)
    if unknown:
        raise ValueError(f"unknown toggles {sorted(unknown)}; expected {TOGGLES}")
    if not toggles.get("token_lstm", True) and not toggles.get("mention_lstm", True):
        raise ValueError("at least one of token_lstm and mention_lstm must stay enabled")
    base = base or ModelConfig()
    return replace(base, **{_TOGGLE_FIELD[k]: bool(v) for k, v in toggles.items()})


def toggle_label(toggles: Mapping[str, bool]) -> str:
    off = [k for k in TOGGLES if not toggles.get(k, True)]
    if not off:
        return "full"
    if off == ["mention_lstm"]:
        return "token_only"
    if off == ["token_lstm"]:
        return "mention_only"
    return "without_" + "+".join(off)


@dataclass
class AblationRow:
    label: str
    toggles: dict
    scores: dict  # seed -> {doc_id: accuracy}

    def seed_means(self) -> list[float]:
        return [float(np.mean(list(v.values()))) for _, v in sorted(self.scores.items())]

    def mean(self) -> float:
        return float(np.mean(self.seed_means()))

    def std(self) -> float:
        return float(np.std(self.seed_means()))


@dataclass
class AblationReport:
    rows: list
    tests: list  # (label_a, label_b, p_value, unit)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["system", *TOGGLES, "seeds", "accuracy", "std"])
        for r in self.rows:
            w.writerow([r.label, *(int(r.toggles.get(k, True)) for k in TOGGLES), len(r.scores),
                        f"{100 * r.mean():.2f}", f"{100 * r.std():.2f}"])
        return buf.getvalue()

    def tests_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["system_a", "system_b", "unit", "p_value"])
        for a, b, p, unit in self.tests:
            w.writerow([a, b, unit, f"<{P_FLOOR:g}" if p < P_FLOOR else f"{p:.6g}"])
        return buf.getvalue()

    def row(self, label: str) -> AblationRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def paired_units(a: AblationRow, b: AblationRow) -> tuple[list[float], list[float], str]:
    """Seed-level means when several seeds were run, per-document scores otherwise."""
    seeds = sorted(set(a.scores) & set(b.scores))
    if len(seeds) >= 2:
        return ([float(np.mean(list(a.scores[s].values()))) for s in seeds],
                [float(np.mean(list(b.scores[s].values()))) for s in seeds], "seed")
    s = seeds[0]
    docs = sorted(set(a.scores[s]) & set(b.scores[s]))
    return [a.scores[s][d] for d in docs], [b.scores[s][d] for d in docs], "document"


def ablation_run(toggle_sets: Sequence[Mapping[str, bool]], train_examples: Sequence[RankingExample],
                 evaluate: Callable[[object], Mapping[str, float]], seeds: Sequence[int] = (0,),
                 base_config=None, provider=None, dev_examples: Sequence[RankingExample] | None = None,
                 ) -> AblationReport:
    """Train one model per toggle set and seed, score each with ``evaluate``
    (model -> {doc_id: score}), and t-test the first row against the rest."""
    from dataclasses import replace

    from .ranker import train
    from .ranker.provider import get_provider

    if not toggle_sets:
        raise ValueError("no toggle sets given")
    provider = provider or get_provider("hash")
    rows = []
    for toggles in toggle_sets:
        cfg = config_for(toggles, base_config)
        row = AblationRow(toggle_label(toggles), dict(toggles), {})
        for seed in seeds:
            model = train(train_examples, replace(cfg, seed=int(seed)), provider, dev_examples)
            row.scores[int(seed)] = dict(evaluate(model))
            log.info("%s seed %d: %.4f", row.label, seed, float(np.mean(list(row.scores[int(seed)].values()))))
        rows.append(row)
    tests = []
    for other in rows[1:]:
        xa, xb, unit = paired_units(rows[0], other)
        if len(xa) >= 2:
            tests.append((rows[0].label, other.label, paired_t_test(xa, xb), unit))
    return AblationReport(rows, tests)


def narrowed_expectation(examples: Sequence[RankingExample]) -> tuple[float, float]:
    """Expected accuracy and its standard deviation for a uniform random
    choice among the case-compatible candidates of each example."""
    ps = []
    for ex in examples:
        idx = narrow_strings(ex.candidate_set, CaseClass(ex.slot), ex.original)
        allowed = [ex.candidate_set[i] for i in idx]
        ps.append(allowed.count(ex.gold_string) / len(allowed))
    ps = np.asarray(ps)
    n = len(ps)
    return float(ps.mean()), float(math.sqrt(float((ps * (1 - ps)).sum())) / n)

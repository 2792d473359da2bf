"""Comparison systems: random, only-pronouns, most-common-string and
tree-based rankers over a fixed hand-crafted feature inventory.

Every selector can be turned into a chooser for
:func:`povshift.conversion.run_selection`, which applies case narrowing
before the chooser is consulted, exactly as for the neural ranker.
"""

from __future__ import annotations

import logging
import pickle
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .candidates import Candidate, candidate_from_string, canonical_order, looks_proper, narrow_by_case
from .context import PAD, SEP, UNK, ContextMention, RankingExample, normalize_string, tokenize_string
from .conversion import Chooser
from .core import PRONOUNS, CaseClass, Gender, Mention, Number, Role, infer_number_gender, slot_case
from .ranker.features import N_CANDIDATE_FEATURES, candidate_binary_features, distance_bucket, length_bucket
from .ranker.model import ModelError
from .ranker.provider import EmbeddingProvider, get_provider
from .ranker.serialize import pack, unpack
from .ranker.train import allowed_indices, pick

log = logging.getLogger(__name__)

BASELINES = ("random", "pronouns", "most-common", "tree", "forest", "gbt")
TREE_VARIANTS = {"tree": "single_tree", "forest": "random_forest", "gbt": "gradient_boosted"}


# ---------------------------------------------------------------------------
# Random
# ---------------------------------------------------------------------------

def random_select(candidates: Sequence[str], rng: np.random.Generator) -> str:
    """Uniform draw from ``candidates``."""
    if not candidates:
        raise ValueError("cannot select from an empty candidate set")
    return candidates[int(rng.integers(len(candidates)))]


def random_chooser(seed: int = 0) -> Chooser:
    rng = np.random.Generator(np.random.PCG64(seed))

    def choose(ex: RankingExample, candidates: Sequence[Candidate], mention: Mention) -> str:
        return random_select([c.string for c in candidates], rng)

    return choose


# ---------------------------------------------------------------------------
# Only pronouns
# ---------------------------------------------------------------------------

_THIRD = {
    (Gender.MASCULINE, CaseClass.NOMINATIVE): "he", (Gender.MASCULINE, CaseClass.ACCUSATIVE): "him",
    (Gender.MASCULINE, CaseClass.POSSESSIVE): "his", (Gender.MASCULINE, CaseClass.REFLEXIVE): "himself",
    (Gender.FEMININE, CaseClass.NOMINATIVE): "she", (Gender.FEMININE, CaseClass.ACCUSATIVE): "her",
    (Gender.FEMININE, CaseClass.POSSESSIVE): "her", (Gender.FEMININE, CaseClass.REFLEXIVE): "herself",
}
_THIRD_PLURAL = {CaseClass.NOMINATIVE: "they", CaseClass.ACCUSATIVE: "them",
                 CaseClass.POSSESSIVE: "their", CaseClass.REFLEXIVE: "themselves"}
_INDEPENDENT = {Gender.MASCULINE: "his", Gender.FEMININE: "hers", None: "theirs"}


def agreeing_pronoun(slot: CaseClass, gender: Gender | str, number: Number | str = Number.SINGULAR,
                     original: str = "") -> str | None:
    """The third-person pronoun for a slot, or None for unknown gender."""
    slot, number = CaseClass(slot), Number(number)
    independent = original.lower() in ("mine", "yours", "ours")
    if number is Number.PLURAL:
        return _INDEPENDENT[None] if independent else _THIRD_PLURAL[slot]
    gender = Gender(gender)
    if gender not in (Gender.MASCULINE, Gender.FEMININE):
        return None
    if independent:
        return _INDEPENDENT[gender]
    return _THIRD[(gender, slot)]


def only_pronouns_choice(candidates: Sequence[Candidate], original: Mention, gender: Gender | str,
                         number: Number | str = Number.SINGULAR) -> tuple[str, bool]:
    """``(string, fell_back)``: the agreeing pronoun when it is a candidate,
    otherwise the first case-compatible candidate with ``fell_back`` set."""
    if not candidates:
        raise ValueError("cannot select from an empty candidate set")
    slot = slot_case(original.string, CaseClass(original.case_class), Role(original.grammatical_role))
    target = agreeing_pronoun(slot, gender, number, original.string)
    strings = {c.string for c in candidates}
    if target is not None and target in strings:
        return target, False
    fallback = narrow_by_case(candidates, original)[0].string
    log.info("no agreeing pronoun for %s; falling back to %r", original.id, fallback)
    return fallback, True


def only_pronouns_select(candidates: Sequence[Candidate], original: Mention, gender: Gender | str,
                         number: Number | str = Number.SINGULAR) -> str:
    return only_pronouns_choice(candidates, original, gender, number)[0]


def pronoun_chooser(genders: dict, numbers: dict | None = None) -> Chooser:
    """``genders``/``numbers`` map chain ids to the entity's gender/number."""
    numbers = numbers or {}

    def choose(ex: RankingExample, candidates: Sequence[Candidate], mention: Mention) -> str:
        return only_pronouns_select(candidates, mention, genders[mention.chain_id],
                                    numbers.get(mention.chain_id, Number.SINGULAR))

    return choose


# ---------------------------------------------------------------------------
# Most common string (oracle)
# ---------------------------------------------------------------------------

def most_common_select(candidates: Sequence[str] | None, gold_chain_strings: Sequence[str]) -> str:
    """Modal gold string of the entity; ties go to the canonically first.

    ``candidates`` is accepted for interface symmetry; the answer depends
    on the gold strings only, so it is constant across an entity's slots.
    """
    if not gold_chain_strings:
        if candidates:
            return canonical_order(candidate_from_string(s) for s in candidates)[0].string
        raise ValueError("no gold strings and no candidates")
    counts = Counter(gold_chain_strings)
    top = max(counts.values())
    tied = [s for s, n in counts.items() if n == top]
    return canonical_order(candidate_from_string(s) for s in tied)[0].string


def most_common_chooser(gold_by_chain: dict) -> Chooser:
    """``gold_by_chain`` maps chain ids to the gold strings of all mentions."""
    cache: dict[str, str] = {}

    def choose(ex: RankingExample, candidates: Sequence[Candidate], mention: Mention) -> str:
        if mention.chain_id not in cache:
            cache[mention.chain_id] = most_common_select([c.string for c in candidates],
                                                         gold_by_chain.get(mention.chain_id, ()))
        return cache[mention.chain_id]

    return choose


# ---------------------------------------------------------------------------
# Tree features
# ---------------------------------------------------------------------------

TREE_SCHEMA_VERSION = 1
N_SLOTS = 10
_KINDS = ("pronoun", "proper_np", "common_np")
_POS = ("PRP", "PRP$", "NNP", "NN")
MENTION_DIMS = 6 + 3 + 4 + 6 + 1  # distance, kind, four flags, length, pad
CANDIDATE_DIMS = 1 + 2 * (len(_POS) + 1) + 6 + 1 + N_CANDIDATE_FEATURES
TREE_FEATURE_DIM = 3 * N_SLOTS * MENTION_DIMS + CANDIDATE_DIMS


def mention_kind(text: str) -> str | None:
    if not text or text == UNK:
        return None
    if text.lower() in PRONOUNS:
        return "pronoun"
    return "proper_np" if looks_proper(text) else "common_np"


def _agrees(a: str, b: str, same_entity: bool) -> bool:
    """Number and gender agreement of two mention strings; strings without
    pronoun evidence agree with anything of known singular number."""
    if same_entity:
        return True
    na, ga, _ = infer_number_gender([a])
    nb, gb, _ = infer_number_gender([b])
    if na is not nb:
        return False
    return ga is Gender.UNKNOWN or gb is Gender.UNKNOWN or ga is gb


def _mention_block(m: ContextMention | None, candidate: str) -> np.ndarray:
    v = np.zeros(MENTION_DIMS, dtype=np.float32)
    if m is None:
        v[-1] = 1.0
        return v
    text = normalize_string(" ".join(m.tokens))
    v[distance_bucket(m.distance)] = 1.0
    kind = mention_kind(text)
    if kind is not None:
        v[6 + _KINDS.index(kind)] = 1.0
    v[9] = float(m.same_entity)
    v[10] = float(m.same_sentence)
    v[11] = float(_agrees(text, candidate, m.same_entity))
    v[12] = float(text == candidate)
    v[13 + length_bucket(len(m.tokens))] = 1.0
    return v


def _padded(ms: Sequence[ContextMention], nearest_first: bool) -> list[ContextMention | None]:
    seq = list(ms)[::-1] if not nearest_first else list(ms)
    seq = seq[:N_SLOTS]
    return seq + [None] * (N_SLOTS - len(seq))


def tree_features(example: RankingExample, candidate: str,
                  provider: EmbeddingProvider | None = None) -> np.ndarray:
    """Fixed-length feature vector of ``candidate`` in ``example``.

    Layout: 10 left neighbours (nearest first), 10 right neighbours
    (nearest first), 10 prior same-entity mentions (nearest first), each a
    20-dim block; then context fit, the POS of the original mention and of
    the candidate as it would sit in the slot, candidate length in words, a
    subject/object flag, and the candidate binary features the ranker uses.
    """
    provider = provider or get_provider("hash")
    cand = normalize_string(candidate)
    blocks = []
    for ms, nearest_first in ((example.left_mentions, False), (example.right_mentions, True),
                              (example.prior_mentions, False)):
        for m in _padded(ms, nearest_first):
            blocks.append(_mention_block(m, cand))
    tail = np.zeros(CANDIDATE_DIMS, dtype=np.float32)
    left = [t for t in example.left_tokens if t not in (PAD, SEP)]
    right = [t for t in example.right_tokens if t not in (PAD, SEP)]
    tail[0] = provider.context_fit(tokenize_string(candidate), left, right)
    width = len(_POS) + 1
    tail[1 + _pos_index(example.pos)] = 1.0
    tail[1 + width + _pos_index(candidate_pos(cand))] = 1.0
    at = 1 + 2 * width
    tail[at + length_bucket(len(candidate.split()))] = 1.0
    tail[at + 6] = float(Role(example.role) in (Role.SUBJECT, Role.OBJECT))
    tail[at + 7:] = candidate_binary_features(cand, example.mention_index, example.prior_strings, example.role)
    return np.concatenate(blocks + [tail])


def _pos_index(tag: str) -> int:
    return _POS.index(tag) if tag in _POS else len(_POS)


def candidate_pos(text: str) -> str:
    """Tag of the candidate's last token once it fills the slot."""
    low = text.lower()
    if low in PRONOUNS or low in ("he himself", "she herself"):
        return "PRP$" if low in ("his", "their", "its") else "PRP"
    return "NNP" if looks_proper(text) else "NN"


# ---------------------------------------------------------------------------
# Tree rankers
# ---------------------------------------------------------------------------

def _make_classifier(variant: str, seed: int):
    if variant == "single_tree":
        from sklearn.tree import DecisionTreeClassifier
        return DecisionTreeClassifier(max_depth=12, min_samples_leaf=2, random_state=seed)
    if variant == "random_forest":
        from sklearn.ensemble import RandomForestClassifier
        return RandomForestClassifier(n_estimators=100, min_samples_leaf=2, random_state=seed, n_jobs=1)
    if variant == "gradient_boosted":
        from sklearn.ensemble import GradientBoostingClassifier
        return GradientBoostingClassifier(n_estimators=100, max_depth=3, random_state=seed)
    raise ValueError(f"unknown tree variant {variant!r}; expected one of {sorted(TREE_VARIANTS.values())}")


@dataclass
class TreeRanker:
    variant: str
    classifier: object
    provider: EmbeddingProvider
    seed: int = 0
    schema_version: int = TREE_SCHEMA_VERSION

    def probabilities(self, example: RankingExample) -> np.ndarray:
        if not example.candidate_set:
            raise ValueError("example has no candidates")
        X = np.stack([tree_features(example, c, self.provider) for c in example.candidate_set])
        proba = self.classifier.predict_proba(X)
        col = list(self.classifier.classes_).index(1)
        return proba[:, col]


def tree_training_matrix(examples: Sequence[RankingExample], provider: EmbeddingProvider,
                         narrow: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """One row per (example, candidate); label 1 for the gold string."""
    rows, labels = [], []
    for ex in examples:
        if ex.gold_string is None or ex.gold_string not in ex.candidate_set:
            continue
        for i in allowed_indices(ex, narrow):
            c = ex.candidate_set[i]
            rows.append(tree_features(ex, c, provider))
            labels.append(int(c == ex.gold_string))
    if not rows:
        return np.zeros((0, TREE_FEATURE_DIM), dtype=np.float32), np.zeros(0, dtype=np.int64)
    return np.stack(rows), np.asarray(labels, dtype=np.int64)


def train_tree_ranker(examples: Sequence[RankingExample], variant: str = "random_forest", seed: int = 0,
                      provider: EmbeddingProvider | None = None) -> TreeRanker:
    """Fit a binary gold-vs-other classifier over candidate instances."""
    variant = TREE_VARIANTS.get(variant, variant)
    provider = provider or get_provider("hash")
    X, y = tree_training_matrix(examples, provider)
    if len(set(y.tolist())) < 2:
        raise ValueError("tree training needs at least one positive and one negative instance")
    clf = _make_classifier(variant, seed)
    clf.fit(X, y)
    return TreeRanker(variant, clf, provider, seed)


def tree_select(model: TreeRanker, example: RankingExample, narrow: bool = True) -> str:
    """Candidate with the highest positive probability among the
    case-compatible ones; ties go to the canonically first."""
    allowed = allowed_indices(example, narrow)
    return example.candidate_set[pick(model.probabilities(example), allowed)]


def tree_chooser(model: TreeRanker) -> Chooser:
    def choose(ex: RankingExample, candidates: Sequence[Candidate], mention: Mention) -> str:
        return tree_select(model, ex)

    return choose


def tree_accuracy(model: TreeRanker, examples: Sequence[RankingExample]) -> float:
    scored = [ex for ex in examples if ex.gold_string is not None]
    if not scored:
        return 0.0
    return sum(tree_select(model, ex) == ex.gold_string for ex in scored) / len(scored)


def save_tree_ranker(model: TreeRanker, path: str | Path) -> None:
    header = {"variant": model.variant, "seed": model.seed, "schema_version": model.schema_version,
              "provider": {"name": model.provider.name, "version": model.provider.version,
                           "dim": model.provider.dim}}
    # A freshly fitted estimator shares some objects that an unpickled one
    # holds separately, so pickle once through a load to get the same bytes
    # for a model and its reloaded copy.
    blob = pickle.dumps(pickle.loads(pickle.dumps(model.classifier, protocol=4)), protocol=4)
    Path(path).write_bytes(pack("tree", header, {}, {"classifier": blob}))


def load_tree_ranker(path: str | Path, provider: EmbeddingProvider | None = None,
                     force: bool = False) -> TreeRanker:
    header, _, blobs = unpack(Path(path).read_bytes())
    if header.get("kind") != "tree":
        raise ModelError(f"model file holds a {header.get('kind')!r}, not a tree ranker")
    if header["schema_version"] != TREE_SCHEMA_VERSION:
        raise ModelError(f"tree feature schema {header['schema_version']} is not supported")
    info = header["provider"]
    if provider is None:
        provider = get_provider(f"{info['name']}:{info['dim']}" if info["name"] == "hash" else info["name"])
    if provider.version != info["version"] and not force:
        raise ModelError(f"model was trained with provider {info['version']!r}, got {provider.version!r}")
    clf = pickle.loads(blobs["classifier"])
    return TreeRanker(header["variant"], clf, provider, header["seed"])

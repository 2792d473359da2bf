from dataclasses import replace

import numpy as np
import pytest

from povshift.context import ContextMention, RankingExample, normalize_string
from povshift.conversion import ChainState, run_selection
from povshift.core import CaseClass, Role
from povshift.ranker import (
    HashEmbeddingProvider,
    ModelConfig,
    ModelError,
    TrainedRanker,
    candidate_binary_features,
    distance_bucket,
    get_provider,
    load_model,
    mention_binary_features,
    ranker_chooser,
    save_model,
    select_mentions,
    train,
    training_accuracy,
)
from povshift.ranker.serialize import model_bytes, pack
from povshift.ranker.train import pick
from povshift.synthetic import synthetic_examples, synthetic_plan

SMALL = ModelConfig(n_tokens=8, k_mentions=3, lstm_hidden=8, mlp_hidden=16, max_epochs=40, patience=40)


@pytest.mark.parametrize("d, bucket", [(0, 0), (5, 0), (6, 1), (10, 1), (11, 2), (25, 4), (26, 5), (400, 5)])
def test_distance_buckets(d, bucket):
    assert distance_bucket(d) == bucket


def test_mention_features():
    assert mention_binary_features(True, 12).tolist() == [1, 0, 0, 1, 0, 0, 0]
    assert mention_binary_features(False, 30).tolist() == [0, 0, 0, 0, 0, 0, 1]


def test_candidate_features():
    v = candidate_binary_features("his son", 4, ("Nick", "his son"), Role.SUBJECT)
    assert v.tolist() == [0, 0, 1, 0, 0, 0, 0, 1, 1, 1]
    v = candidate_binary_features("Nick", 0, (), "other")
    assert v.tolist() == [1, 1, 0, 0, 0, 0, 0, 0, 0, 0]
    long = candidate_binary_features("a b c d e f g", 1, ("x", "a b c d e f g", "y"), Role.OBJECT)
    assert long[6] == 1 and long[7] == 1 and long[8] == 0


def test_hash_provider_is_deterministic():
    a, b = HashEmbeddingProvider(16), HashEmbeddingProvider(16)
    assert np.array_equal(a.embed(["Nick", "he"]), b.embed(["Nick", "he"]))
    assert not np.array_equal(a.vector("Nick"), HashEmbeddingProvider(16, salt="v2").vector("Nick"))
    assert a.embed([]).shape == (0, 16)
    assert a.context_fit(["he"], [], []) == 0.0
    assert a.context_fit(["he"], ["he"], []) == pytest.approx(0.0, abs=1e-6)
    assert get_provider("hash:12").dim == 12 and get_provider().version == "hash-v1-d32"


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(n_tokens=0)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ValueError):
        ModelConfig(use_token_lstm=False, use_mention_lstm=False)
    assert ModelConfig.from_dict({"seed": 3, "unknown": 1}).seed == 3
    assert ModelConfig(use_phi_t=False).label() == "token+mention+phi_b"


def _example(gold="he", cands=("Nick", "he"), role=Role.SUBJECT):
    return RankingExample(
        doc_id="d", chain_id="f", mention_index=2, gold_string=gold, candidate_set=cands,
        left_tokens=("Nick", "smiled", "."), right_tokens=("waited", "."),
        left_mentions=(ContextMention(("Nick",), True, 3, "f", False),), right_mentions=(),
        prior_strings=("Nick",), role=role, slot=CaseClass.NOMINATIVE, original="I",
        sentence_initial=True, pos="PRP",
    )


def test_overfits_a_single_example():
    ex = _example()
    model = train([ex], SMALL, HashEmbeddingProvider(8))
    assert training_accuracy(model, [ex]) == 1.0
    scores = model.score_example(ex)
    assert scores[1] > scores[0]
    assert model.score("he", ex) == pytest.approx(scores[1], abs=1e-6)
    assert model.metadata["early_stop_metric"] == "train_accuracy"


def test_training_rejects_useless_input():
    with pytest.raises(ValueError):
        train([], SMALL, HashEmbeddingProvider(8))
    with pytest.raises(ValueError):
        train([_example(cands=("he",))], SMALL, HashEmbeddingProvider(8))


def test_scoring_needs_candidates():
    model = TrainedRanker(SMALL, HashEmbeddingProvider(8))
    with pytest.raises(ModelError):
        model.score_example(_example(cands=()))


def test_pick_breaks_ties_by_order():
    assert pick(np.array([1.0, 3.0, 3.0]), [0, 1, 2]) == 1
    assert pick(np.array([1.0, 3.0, 3.0]), [2, 0]) == 2


@pytest.fixture(scope="module")
def small_model(synthetic_train):
    exs = synthetic_examples(synthetic_train[:3], SMALL.n_tokens, SMALL.k_mentions)
    return train(exs, replace(SMALL, max_epochs=3), HashEmbeddingProvider(8)), exs


def test_training_is_deterministic(small_model, synthetic_train):
    model, exs = small_model
    again = train(exs, replace(SMALL, max_epochs=3), HashEmbeddingProvider(8))
    assert model_bytes(again) == model_bytes(model)
    assert model.metadata["epochs"] == 3


def test_serialization_round_trip(small_model, tmp_path):
    model, exs = small_model
    path = tmp_path / "m.povm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config and loaded.metadata == model.metadata
    for ex in exs[:10]:
        assert np.array_equal(loaded.score_example(ex), model.score_example(ex))
    save_model(loaded, tmp_path / "again.povm")
    assert (tmp_path / "again.povm").read_bytes() == path.read_bytes()


def test_provider_mismatch_is_refused(small_model, tmp_path):
    model, exs = small_model
    path = tmp_path / "m.povm"
    save_model(model, path)
    other = HashEmbeddingProvider(8, salt="v2")
    with pytest.raises(ModelError, match="trained with provider"):
        load_model(path, other)
    assert load_model(path, other, force=True).provider is other
    with pytest.raises(ModelError, match="dimension"):
        load_model(path, HashEmbeddingProvider(4), force=True)


def test_bad_model_files(tmp_path):
    path = tmp_path / "x.povm"
    path.write_bytes(b"not a model")
    with pytest.raises(ModelError, match="not a povshift"):
        load_model(path)
    path.write_bytes(pack("tree", {}, {}))
    with pytest.raises(ModelError, match="not a ranker"):
        load_model(path)


def test_autoregressive_selection_feeds_earlier_choices(small_model, synthetic_test):
    model, _ = small_model
    sd = synthetic_test[0]
    plan = synthetic_plan(sd)
    base = ranker_chooser(model)
    state = ChainState()
    calls = []

    def recording(ex, cands, mention):
        calls.append((mention, ex, dict(state.selections)))
        return base(ex, cands, mention)

    result = run_selection(plan, recording, SMALL.n_tokens, SMALL.k_mentions, state)
    assert result == select_mentions(sd.document, plan, model)
    assert list(state.selections) == [m.id for m in plan.scheduled]
    assert len(calls) >= 5
    for mention, ex, before in calls:
        # every example shows exactly the selections made before it
        earlier = [m for m in sd.document.chain(mention.chain_id).mentions if m.end < mention.start]
        assert ex.prior_strings == tuple(before.get(m.id, normalize_string(m.string)) for m in earlier)
        assert all(m.start < mention.start for m in plan.scheduled if m.id in before)
